"""Command line front end: ``dht {ingest,geodesic,quantize,dynamics,verify,report}``.

Every config key can come from ``--config file`` (flat ``key=value``) and be
overridden by a flag of the same name, e.g. ``--bins 128``.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

from .errors import ConfigError, DHTError, IngestionError
from .pipeline import (
    PipelineConfig,
    dump_json,
    geodesic_source,
    load_events,
    make_config,
    read_config_file,
    run_dynamics,
    run_pipeline,
    write_events_csv,
    write_outputs,
)
from .verification import FAULTS, run_verification

EXIT_OK = 0
EXIT_VERIFY = 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    for f in fields(PipelineConfig):
        flags = [f"--{f.name}"]
        if "_" in f.name:
            flags.append(f"--{f.name.replace('_', '-')}")
        p.add_argument(*flags, dest=f.name, default=None, metavar="VALUE")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dht", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "ingest": "validate an events CSV and write a normalized copy",
        "geodesic": "integrate a geodesic and write trajectory.csv and events.csv",
        "quantize": "run the full pipeline and write report, tables and plots",
        "dynamics": "grow a dendrogram sequence, optionally by least action",
        "verify": "run the built-in verification checks",
        "report": "validate an existing report.json and print a summary",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_config_flags(p)
        if name == "verify":
            p.add_argument("--inject-fault", action="append", default=[], choices=FAULTS)
        if name == "report":
            p.add_argument("--report", help="path to report.json (default: <output_dir>/report.json)")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    values = read_config_file(args.config) if args.config else {}
    for f in fields(PipelineConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return make_config(values)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def _summary(report: dict) -> dict:
    keep = ("schema", "dataset", "pdf", "views", "energies", "action", "expansion_constants", "residuals")
    return {k: report[k] for k in keep if k in report}


def cmd_ingest(cfg: PipelineConfig) -> int:
    if cfg.source != "csv":
        raise ConfigError("ingest needs source=csv and input=<path>")
    events, _ = load_events(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_events_csv(events, out / "events.csv")
    _print({"n_events": len(events), "dim": len(events[0].coords), "events": str(out / "events.csv")})
    return EXIT_OK


def cmd_geodesic(cfg: PipelineConfig) -> int:
    events, traj = geodesic_source(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    traj.write_csv(out / "trajectory.csv")
    write_events_csv(events, out / "events.csv")
    _print({"samples": len(traj), "n_events": len(events), "spacetime": cfg.spacetime})
    return EXIT_OK


def cmd_quantize(cfg: PipelineConfig) -> int:
    result = run_pipeline(cfg)
    write_outputs(result, cfg.output_dir, cfg.plots)
    _print(_summary(result.report))
    return EXIT_OK


def cmd_dynamics(cfg: PipelineConfig) -> int:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    record = run_dynamics(cfg)
    dump_json(record, out / "dynamics.json")
    _print({"steps": len(record["steps"]), "output": str(out / "dynamics.json")})
    return EXIT_OK


def cmd_verify(cfg: PipelineConfig, faults) -> int:
    report = run_verification(cfg.seed, tuple(faults))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(report, out / "verify.json")
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}")
    if not report["passed"]:
        print(json.dumps({"error": "verification", "failed": report["failed"]}), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_report(cfg: PipelineConfig, path) -> int:
    from .schema import validate_report

    path = Path(path) if path else Path(cfg.output_dir) / "report.json"
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot read report {path}: {exc}") from exc
    validate_report(report)
    _print(_summary(report))
    return EXIT_OK


def _fail(exc: DHTError, out_dir: str | None) -> int:
    record = {"error": exc.kind, "message": str(exc), "exit_code": exc.exit_code}
    step = getattr(exc, "step", None)
    if step is not None:
        record["step"] = step
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    if out_dir:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            dump_json(record, Path(out_dir) / "error.json")
        except OSError:
            pass
    return exc.exit_code


def main(argv=None) -> int:
    out_dir = None
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        out_dir = cfg.output_dir
        if args.command == "verify":
            return cmd_verify(cfg, args.inject_fault)
        if args.command == "report":
            return cmd_report(cfg, args.report)
        return {
            "ingest": cmd_ingest,
            "geodesic": cmd_geodesic,
            "quantize": cmd_quantize,
            "dynamics": cmd_dynamics,
        }[args.command](cfg)
    except DHTError as exc:
        return _fail(exc, out_dir)


if __name__ == "__main__":
    sys.exit(main())
