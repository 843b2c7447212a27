"""Command line front end.

One binary, three commands:

    smvscan scan CONTRACT... --db subcontracts.tsv [--knowledge kb.tsv]
    smvscan db build --in DIR --manifest manifest.tsv --out subcontracts.tsv
    smvscan report report.json [--format text]

Settings resolve flags first, then SMVSCAN_* environment variables, then
built-in defaults.  Exit codes: 0 clean, 2 findings present, 1 error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from . import scanner
from .db import build_db, check_closure, load_db, load_knowledge, save_db
from .matcher import THETA_LEN, THETA_TYPE
from .weights import load_weights

log = logging.getLogger(__name__)

ENV_PREFIX = "SMVSCAN_"
_TRUTHY = {"1", "true", "yes", "on"}

DEFAULTS = {
    "theta1": THETA_TYPE,
    "theta2": THETA_LEN,
    "boundary": "heuristic",
    "fmt": "text",
    "max_depth": 5,
    "jobs": 1,
}


class CliError(Exception):
    """Bad configuration or input; maps to exit code 1."""


def _resolve(args, attr, env_name, convert=None):
    """Flag beats environment beats default."""
    value = getattr(args, attr, None)
    if value is not None:
        return value
    raw = os.environ.get(ENV_PREFIX + env_name)
    if raw is not None:
        if convert is None:
            return raw
        try:
            return convert(raw)
        except ValueError as exc:
            raise CliError(f"bad {ENV_PREFIX}{env_name}={raw!r}: {exc}") from exc
    return DEFAULTS.get(attr)


def _truthy(raw: str) -> bool:
    return raw.strip().lower() in _TRUTHY


def report_schema() -> dict:
    """The JSON schema shipped with the package."""
    text = (
        resources.files("smvscan") / "schemas" / "report.schema.json"
    ).read_text()
    return json.loads(text)


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="smvscan",
        description="Detect subcontract misuse in EVM runtime bytecode.",
    )
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="cmd", required=True)

    sc = sub.add_parser("scan", help="scan contracts for misuse traces")
    sc.add_argument("paths", nargs="+", metavar="CONTRACT",
                    help="runtime bytecode (.bin, hex text, or artifact .json)")
    sc.add_argument("--db", help="subcontract signature database (TSV)")
    sc.add_argument("--knowledge", help="misuse knowledge base (TSV)")
    sc.add_argument("--theta1", type=float,
                    help="opcode type similarity threshold, in (0, 1]")
    sc.add_argument("--theta2", type=float,
                    help="opcode length similarity threshold, in (0, 1]")
    sc.add_argument("--pn-verbatim", action="store_true", default=None,
                    help="length ratio as db/contract instead of min/max")
    sc.add_argument("--boundary", choices=scanner.BOUNDARY_MODES,
                    help="method boundary recovery mode (default heuristic)")
    sc.add_argument("--model", help="boundary model weights (.smvw)")
    sc.add_argument("--format", dest="fmt", choices=("text", "json"),
                    help="report format (default text)")
    sc.add_argument("--max-depth", type=int,
                    help="call chain depth for chain signatures (default 5)")
    sc.add_argument("--jobs", type=int,
                    help="contracts scanned concurrently (default 1)")
    sc.add_argument("--timing", action="store_true",
                    help="per-stage timings on stderr")
    sc.add_argument("--dump-cfg", action="store_true",
                    help="print control flow edges")
    sc.add_argument("--dump-regions", action="store_true",
                    help="print recovered regions: start end kind source")
    sc.add_argument("--dump-signatures", action="store_true",
                    help="print per-region symbol signatures")
    sc.add_argument("--dump-matches", action="store_true",
                    help="print database matches as TSV")

    dbp = sub.add_parser("db", help="signature database maintenance")
    dbsub = dbp.add_subparsers(dest="db_cmd", required=True)
    bld = dbsub.add_parser("build", help="build a database from binaries")
    bld.add_argument("--in", dest="in_dir", required=True,
                     help="directory holding the listed binaries")
    bld.add_argument("--manifest", required=True,
                     help="TSV listing file, subcontract, version, method, locator, visibility")
    bld.add_argument("--out", required=True, help="output database path")

    rp = sub.add_parser("report", help="validate and re-render a saved report")
    rp.add_argument("file", help="report JSON produced by scan --format json")
    rp.add_argument("--format", dest="fmt", choices=("text", "json"),
                    default="text")
    return p


def _scan_settings(args) -> dict:
    theta1 = _resolve(args, "theta1", "THETA1", float)
    theta2 = _resolve(args, "theta2", "THETA2", float)
    for name, value in (("theta1", theta1), ("theta2", theta2)):
        if not 0.0 < value <= 1.0:
            raise CliError(f"{name} must be in (0, 1], got {value}")
    boundary = _resolve(args, "boundary", "BOUNDARY")
    if boundary not in scanner.BOUNDARY_MODES:
        raise CliError(f"unknown boundary mode {boundary!r}")
    model = _resolve(args, "model", "MODEL")
    if boundary != "heuristic" and not model:
        raise CliError(f"--boundary {boundary} needs --model")
    if boundary == "heuristic" and model:
        log.warning("--model ignored in heuristic boundary mode")
    return {
        "db": _resolve(args, "db", "DB"),
        "knowledge": _resolve(args, "knowledge", "KNOWLEDGE"),
        "theta1": theta1,
        "theta2": theta2,
        "pn_verbatim": _resolve(args, "pn_verbatim", "PN_VERBATIM", _truthy)
        or False,
        "boundary": boundary,
        "model": model,
        "fmt": _resolve(args, "fmt", "FORMAT"),
        "max_depth": _resolve(args, "max_depth", "MAX_DEPTH", int),
        "jobs": _resolve(args, "jobs", "JOBS", int),
        "timing": args.timing,
    }


def run_scan(args) -> int:
    cfg = _scan_settings(args)
    if not cfg["db"]:
        raise CliError("no signature database; pass --db or set SMVSCAN_DB")
    if cfg["fmt"] not in ("text", "json"):
        raise CliError(f"unknown format {cfg['fmt']!r}")
    if cfg["max_depth"] < 1:
        raise CliError("max-depth must be at least 1")
    if cfg["jobs"] < 1:
        raise CliError("jobs must be at least 1")
    for path in args.paths:
        if not Path(path).exists():
            raise CliError(f"no such contract: {path}")

    try:
        db = load_db(cfg["db"])
    except Exception as exc:
        raise CliError(f"loading database {cfg['db']}: {exc}") from exc
    kb = None
    db_warnings: list[str] = []
    if cfg["knowledge"]:
        try:
            kb = load_knowledge(cfg["knowledge"])
        except Exception as exc:
            raise CliError(
                f"loading knowledge base {cfg['knowledge']}: {exc}"
            ) from exc
        db_warnings = check_closure(db, kb)
    weights = None
    if cfg["boundary"] != "heuristic":
        try:
            weights = load_weights(cfg["model"])
        except Exception as exc:
            raise CliError(f"loading model {cfg['model']}: {exc}") from exc

    results = scanner.scan_many(
        args.paths,
        db,
        kb,
        jobs=cfg["jobs"],
        theta_type=cfg["theta1"],
        theta_len=cfg["theta2"],
        pn_verbatim=cfg["pn_verbatim"],
        boundary=cfg["boundary"],
        weights=weights,
        max_depth=cfg["max_depth"],
    )

    # debug dumps; stderr when the report itself occupies stdout as JSON
    dump_to = sys.stderr if cfg["fmt"] == "json" else sys.stdout
    for res in results:
        if res.error is not None:
            continue
        if args.dump_cfg:
            print(f"# cfg {res.path}", file=dump_to)
            for line in res.cfg.dump_edges():
                print(line, file=dump_to)
        if args.dump_regions:
            print(f"# regions {res.path}", file=dump_to)
            print(scanner.dump_regions(res), file=dump_to)
        if args.dump_signatures:
            print(f"# signatures {res.path}", file=dump_to)
            print(scanner.dump_signatures(res), file=dump_to)
        if args.dump_matches:
            print(f"# matches {res.path}", file=dump_to)
            print(scanner.dump_matches(res), file=dump_to)
    if cfg["timing"]:
        for res in results:
            stages = " ".join(
                f"{name}={dt * 1000:.1f}ms" for name, dt in res.timings.items()
            )
            print(f"timing {res.path}: {stages}", file=sys.stderr)

    report = scanner.build_report(results, db_warnings)
    if cfg["fmt"] == "json":
        print(json.dumps(report, indent=2))
    else:
        print(scanner.render_text(report))

    if any(res.error is not None for res in results):
        return 1
    return 2 if report["trace_count"] else 0


def run_db_build(args) -> int:
    errors: list[tuple[str, str]] = []
    try:
        db = build_db(args.in_dir, args.manifest, errors=errors)
    except Exception as exc:
        raise CliError(f"building database: {exc}") from exc
    for where, message in errors:
        print(f"warning: {where}: {message}", file=sys.stderr)
    if errors and not len(db):
        raise CliError("no records built; every input failed")
    save_db(db, args.out)
    print(f"wrote {len(db)} record(s) to {args.out}", file=sys.stderr)
    return 0


def run_report(args) -> int:
    try:
        report = json.loads(Path(args.file).read_text())
    except (OSError, ValueError) as exc:
        raise CliError(f"reading report {args.file}: {exc}") from exc
    import jsonschema

    try:
        jsonschema.validate(report, report_schema())
    except jsonschema.ValidationError as exc:
        raise CliError(f"invalid report: {exc.message}") from exc
    if args.fmt == "json":
        print(json.dumps(report, indent=2))
    else:
        print(scanner.render_text(report))
    return 0


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.cmd == "scan":
            return run_scan(args)
        if args.cmd == "db":
            return run_db_build(args)
        return run_report(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
