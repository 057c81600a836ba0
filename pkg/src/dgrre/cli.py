"""Command line entry point: ``run``, ``converge`` and ``selftest``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import io
from .driver import RunConfig, converge, run_case
from .model import ConfigurationError

log = logging.getLogger("dgrre")

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _value(text: str):
    """Flag values are parsed as JSON when possible, else kept as strings."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of integers, got {text!r}")


def _add_overrides(parser: argparse.ArgumentParser, skip: tuple[str, ...] = ()):
    g = parser.add_argument_group("config overrides")
    for f in dataclasses.fields(RunConfig):
        if f.name in skip:
            continue
        g.add_argument(f"--{f.name.replace('_', '-')}", dest=f"set_{f.name}", type=_value, metavar="VALUE")


def _load_config(args) -> RunConfig:
    data = {}
    if args.config:
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a JSON object")
    for k, v in vars(args).items():
        if k.startswith("set_") and v is not None:
            data[k[4:]] = v
    try:
        return RunConfig.from_dict(data)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def _emit_error(kind: str, message: str, out_dir: Path | None = None, **extra) -> None:
    err = {"error": kind, "message": message, **extra}
    print(json.dumps(err), file=sys.stderr)
    if out_dir is not None:
        io.write_json(out_dir / "error.json", err)


def _run_name(cfg: RunConfig) -> str:
    return f"{cfg.test}_N{cfg.N}_p{cfg.p}"


def cmd_run(args) -> int:
    cfg = _load_config(args)
    out = io.output_root(cfg.output_dir) / _run_name(cfg)
    result = run_case(cfg)
    out.mkdir(parents=True, exist_ok=True)
    io.write_report(out / "report.csv", result.report)
    io.write_energy(out / "energy.csv", result.trajectory)
    for i, st in enumerate(result.trajectory.states):
        io.write_checkpoint(out / "checkpoints", i, st, result.disc)
    summary = result.report.summary()
    summary["E0_terms"] = result.initial_estimator
    io.write_json(out / "summary.json", summary)
    io.write_json(out / "manifest.json", io.manifest(cfg.to_dict(), result))
    if result.trajectory.failure:
        _emit_error("solver_failure", result.trajectory.failure, out)
        return EXIT_FAILED
    print(f"wrote {out}")
    return EXIT_OK


def cmd_converge(args) -> int:
    cfg = _load_config(args)
    out = io.output_root(cfg.output_dir) / f"{cfg.test}_convergence"
    tables, results = converge(cfg, args.N, args.p)
    for p, table in tables.items():
        io.write_convergence(out / f"convergence_p{p}.csv", table)
        print(f"p = {p}")
        print("  ".join(table.header()))
        for r in table.formatted_rows():
            print("  ".join(r))
    failures = {f"N{N}_p{p}": r for (p, N), r in results.items() if isinstance(r, str)}
    for (p, N), r in results.items():
        if isinstance(r, dict):
            io.write_json(out / f"summary_N{N}_p{p}.json", r)
    io.write_json(out / "manifest.json", io.manifest(cfg.to_dict(), extra={
        "N": args.N, "p": args.p, "failures": failures}))
    if failures:
        _emit_error("run_failure", "some runs of the sweep failed", out, failures=failures)
        return EXIT_FAILED
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .checks import run_all

    results = run_all(seed=args.seed, sigma=args.sigma)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(json.dumps({"passed": len(results) - len(failed), "failed": failed}))
    return EXIT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dgrre", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="solve one configuration and write its artifacts")
    run.add_argument("--config", help="JSON file with RunConfig keys")
    _add_overrides(run)
    run.set_defaults(func=cmd_run)

    conv = sub.add_parser("converge", help="convergence sweep over N and p")
    conv.add_argument("--config", help="JSON file with RunConfig keys")
    conv.add_argument("--N", type=_int_list, required=True, help="e.g. 16,32,64")
    conv.add_argument("--p", type=_int_list, default=[1], help="e.g. 1,2,3")
    _add_overrides(conv, skip=("N", "p"))
    conv.set_defaults(func=cmd_converge)

    st = sub.add_parser("selftest", help="operator and invariant checks")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--sigma", type=float, default=None, help="penalty override (guard-rail test)")
    st.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigurationError as exc:
        _emit_error("configuration", str(exc))
        return EXIT_USAGE
    except Exception as exc:  # machine-readable report for anything unexpected
        _emit_error(type(exc).__name__, str(exc))
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
