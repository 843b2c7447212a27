import json

import jsonschema
import pytest

from smvscan.cli import report_schema
from smvscan.scanner import (
    build_report,
    dump_matches,
    dump_regions,
    dump_signatures,
    load_contract_bytes,
    render_text,
    scan_bytes,
    scan_many,
    scan_path,
)

from conftest import CORPUS, artifact, artifact_path


def test_load_contract_bytes_formats(tmp_path):
    art = artifact("tokenhub")
    from_json = load_contract_bytes(artifact_path("tokenhub"))

    hexfile = tmp_path / "t.hex"
    hexfile.write_text(art["runtime"])
    binfile = tmp_path / "t.bin"
    binfile.write_bytes(from_json)
    assert load_contract_bytes(hexfile) == from_json
    assert load_contract_bytes(binfile) == from_json


def test_artifact_without_runtime_field(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"contract": "X"}))
    with pytest.raises(ValueError):
        load_contract_bytes(bad)


def test_scan_bytes_stages_timed(db, kb):
    raw = load_contract_bytes(artifact_path("tokenhub"))
    res = scan_bytes(raw, db, kb)
    assert set(res.timings) == {
        "decode", "cfg", "regions", "signatures", "match", "detect",
    }
    assert all(dt >= 0 for dt in res.timings.values())


def test_scan_bytes_rejects_bad_boundary(db):
    raw = load_contract_bytes(artifact_path("tokenhub"))
    with pytest.raises(ValueError):
        scan_bytes(raw, db, boundary="psychic")
    with pytest.raises(ValueError):
        scan_bytes(raw, db, boundary="model")  # weights missing


def test_scan_path_captures_analysis_errors(tmp_path, db):
    broken = tmp_path / "broken.hex"
    broken.write_text("zz-not-hex")
    res = scan_path(broken, db)
    assert res.error is not None
    assert res.traces == ()


def test_scan_many_parallel_matches_serial(db, kb):
    paths = [artifact_path(n) for n in CORPUS[:6]]
    serial = scan_many(paths, db, kb, jobs=1)
    parallel = scan_many(paths, db, kb, jobs=4)
    assert [r.path for r in serial] == [r.path for r in parallel]
    for a, b in zip(serial, parallel):
        assert [t.to_dict() for t in a.traces] == [t.to_dict() for t in b.traces]


def test_report_validates_against_schema(db, kb):
    paths = [artifact_path(n) for n in ("dual_pool", "swap_unpatched", "tokenhub")]
    results = scan_many(paths, db, kb)
    report = build_report(results)
    jsonschema.validate(report, report_schema())
    assert report["trace_count"] == 2


def test_report_carries_errors(tmp_path, db):
    broken = tmp_path / "broken.hex"
    broken.write_text("zz")
    report = build_report([scan_path(broken, db)])
    jsonschema.validate(report, report_schema())
    assert report["contracts"][0]["error"]
    assert report["trace_count"] == 0


def test_render_text_mentions_findings(db, kb):
    res = scan_path(artifact_path("swap_unpatched"), db, kb)
    text = render_text(build_report([res]))
    assert "lack-of-security-check" in text
    assert "Address.CallWithValue@1" in text
    assert "total: 1 trace(s)" in text


def test_dumps_are_line_oriented(db, kb):
    res = scan_path(artifact_path("tokenhub"), db, kb)
    regions = dump_regions(res).splitlines()
    assert len(regions) == len(res.regions)
    for line in regions:
        start, end, kind, source = line.split()
        assert int(start) < int(end)
        assert kind in ("public", "internal", "inherited-recovered")
        assert source in ("heuristic", "model")
    sigs = dump_signatures(res).splitlines()
    assert len(sigs) == len(res.signatures)
    matches = dump_matches(res).splitlines()
    assert matches[0].startswith("region\t")
