import json

import pytest

from smvscan.cli import main

from conftest import COMPILED, DB_DIR, artifact_path

DB = str(DB_DIR / "subcontracts.tsv")
KB = str(DB_DIR / "knowledge.tsv")


def scan_args(*paths, **extra):
    args = ["scan", *[str(p) for p in paths], "--db", DB, "--knowledge", KB]
    for flag, value in extra.items():
        args.append(f"--{flag.replace('_', '-')}")
        if value is not True:
            args.append(str(value))
    return args


def test_exit_zero_on_clean(capsys):
    assert main(scan_args(artifact_path("tokenhub"))) == 0
    out = capsys.readouterr().out
    assert "0 findings" in out


def test_exit_two_on_findings(capsys):
    assert main(scan_args(artifact_path("swap_unpatched"))) == 2
    assert "lack-of-security-check" in capsys.readouterr().out


def test_exit_one_on_missing_contract(capsys):
    assert main(scan_args(COMPILED / "nope.json")) == 1
    assert "error:" in capsys.readouterr().err


def test_exit_one_on_bad_theta(capsys):
    assert main(scan_args(artifact_path("tokenhub"), theta1="1.5")) == 1
    assert "theta1" in capsys.readouterr().err


def test_exit_one_when_model_mode_lacks_model(capsys):
    assert main(scan_args(artifact_path("tokenhub"), boundary="model")) == 1
    assert "--model" in capsys.readouterr().err


def test_json_format_is_parseable(capsys):
    code = main(scan_args(artifact_path("dual_pool"), format="json"))
    assert code == 2
    report = json.loads(capsys.readouterr().out)
    assert report["trace_count"] == 1
    assert report["contracts"][0]["traces"][0]["smv_type"] == "variable-conflict"


def test_env_supplies_defaults(monkeypatch, capsys):
    monkeypatch.setenv("SMVSCAN_DB", DB)
    monkeypatch.setenv("SMVSCAN_KNOWLEDGE", KB)
    assert main(["scan", str(artifact_path("tokenhub"))]) == 0


def test_flag_beats_env(monkeypatch, capsys):
    monkeypatch.setenv("SMVSCAN_THETA1", "1.7")  # invalid, must be ignored
    assert main(scan_args(artifact_path("tokenhub"), theta1="0.9")) == 0


def test_bad_env_value_is_reported(monkeypatch, capsys):
    monkeypatch.setenv("SMVSCAN_THETA1", "not-a-number")
    assert main(scan_args(artifact_path("tokenhub"))) == 1
    assert "SMVSCAN_THETA1" in capsys.readouterr().err


def test_timing_goes_to_stderr(capsys):
    assert main(scan_args(artifact_path("tokenhub"), timing=True)) == 0
    captured = capsys.readouterr()
    assert "timing" in captured.err
    assert "timing" not in captured.out


def test_dump_regions_in_json_mode_keeps_stdout_clean(capsys):
    code = main(
        scan_args(artifact_path("tokenhub"), format="json", dump_regions=True)
    )
    assert code == 0
    captured = capsys.readouterr()
    json.loads(captured.out)  # stdout is pure JSON
    assert "# regions" in captured.err


def test_db_build_round_trip(tmp_path, capsys):
    out1 = tmp_path / "a.tsv"
    out2 = tmp_path / "b.tsv"
    base = ["db", "build", "--in", str(COMPILED),
            "--manifest", str(DB_DIR / "manifest.tsv")]
    assert main(base + ["--out", str(out1)]) == 0
    assert main(base + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_bytes() == (DB_DIR / "subcontracts.tsv").read_bytes()


def test_report_round_trip(tmp_path, capsys):
    assert main(scan_args(artifact_path("dual_pool"), format="json")) == 2
    report_file = tmp_path / "r.json"
    report_file.write_text(capsys.readouterr().out)
    assert main(["report", str(report_file)]) == 0
    assert "variable-conflict" in capsys.readouterr().out


def test_report_rejects_invalid(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"contracts": [{"path": 5}]}))
    assert main(["report", str(bad)]) == 1
    assert "invalid report" in capsys.readouterr().err


def test_jobs_flag(capsys):
    paths = [artifact_path(n) for n in ("tokenhub", "vault_chain", "dual_pool")]
    assert main(scan_args(*paths, jobs="3")) == 2
    out = capsys.readouterr().out
    assert out.index("tokenhub") < out.index("vault_chain") < out.index("dual_pool")
