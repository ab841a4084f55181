"""Command-line interface.

    zerofid run CONFIG [--workers N] [--output-dir PATH]
    zerofid fit POINTS_CSV [--n-qubits N] [--output-dir PATH]
    zerofid report RESULT_DIR [RESULT_DIR ...]

Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from zerofid.errors import FitDegenerateError, ZeroFidError
from zerofid.harness.config import ConfigError, load_config
from zerofid.harness.runner import read_points_csv, run_experiment, write_result
from zerofid.parallel import default_workers
from zerofid.rbfold.fit import fit_decay

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3
SPAM_TOLERANCE = 0.005


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="zerofid", description="SPAM-robust zero-fidelity experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", type=Path)
    run.add_argument("--workers", type=int, default=None,
                     help="parallel tasks (default: available CPUs); outputs do not depend on it")
    run.add_argument("--output-dir", type=Path, default=None,
                     help="overrides output_dir from the config")

    fit = sub.add_parser("fit", help="fit A0 p^m + B0 to a points CSV")
    fit.add_argument("csv", type=Path)
    fit.add_argument("--n-qubits", type=int, default=None,
                     help="qubit count for F_avg and EPC (default: from a sibling result.json)")
    fit.add_argument("--output-dir", type=Path, default=None,
                     help="where fit.json goes (default: next to the CSV)")

    report = sub.add_parser("report", help="compare fitted decay rates across result directories")
    report.add_argument("dirs", nargs="+", type=Path)
    return parser


def _err(message: str) -> None:
    print(f"zerofid: {message}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _err(f"config error: {exc}")
        return EXIT_USAGE
    out = args.output_dir or cfg.output_dir
    if out is None:
        _err("no output directory: set output_dir in the config or pass --output-dir")
        return EXIT_USAGE
    workers = args.workers if args.workers is not None else default_workers()
    if workers < 1:
        _err("--workers must be >= 1")
        return EXIT_USAGE
    start = time.perf_counter()
    try:
        result = run_experiment(cfg, workers=workers)
        files = write_result(result, Path(out))
    except (ZeroFidError, ValueError, OSError) as exc:
        _err(f"runtime error: {exc}")
        return EXIT_RUNTIME
    elapsed = time.perf_counter() - start
    summary = f"{cfg.kind}: {len(result.points)} point(s)"
    if result.fit is not None:
        summary += f", p = {result.fit.p:.6f}, F_avg = {result.fit.f_avg:.6f}"
    elif result.points:
        summary += f", mean = {result.points[0].mean:.6f}"
    print(summary)
    for f in files:
        print(f"wrote {f}")
    print(f"wall clock: {elapsed:.2f} s", file=sys.stderr)
    return EXIT_OK


def _n_from_sibling(csv_path: Path) -> int | None:
    sibling = csv_path.parent / "result.json"
    try:
        return int(json.loads(sibling.read_text())["config"]["n_qubits"])
    except (OSError, KeyError, ValueError, TypeError):
        return None


def cmd_fit(args) -> int:
    try:
        rows = read_points_csv(args.csv)
    except OSError as exc:
        _err(f"cannot read {args.csv}: {exc}")
        return EXIT_USAGE
    except ValueError as exc:
        _err(f"malformed CSV {args.csv}: {exc}")
        return EXIT_USAGE
    n = args.n_qubits if args.n_qubits is not None else _n_from_sibling(args.csv)
    if n is None:
        n = 1
        _err("no --n-qubits and no sibling result.json; F_avg and EPC assume 1 qubit")
    if n < 1:
        _err("--n-qubits must be >= 1")
        return EXIT_USAGE
    try:
        fit = fit_decay(rows, n)
    except FitDegenerateError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    for key, value in fit.to_dict().items():
        print(f"{key:>13} = {value:.12g}" if isinstance(value, float) else f"{key:>13} = {value}")
    out_dir = args.output_dir or args.csv.parent
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "fit.json").write_text(json.dumps(fit.to_dict(), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        _err(f"cannot write fit.json: {exc}")
        return EXIT_RUNTIME
    return EXIT_OK


def _report_row(d: Path) -> dict:
    data = json.loads((d / "result.json").read_text())
    cfg = data.get("config", {})
    fit = data.get("fit")
    row = {"dir": str(d), "kind": cfg.get("kind", "?"), "n": cfg.get("n_qubits", "?"),
           "spam": cfg.get("noise", {}).get("spam", "?"), "p": None, "f_avg": None, "epc": None,
           "f0": data["points"][0]["mean"] if data.get("points") else None,
           "gate_f": data.get("interleaved_gate_fidelity")}
    if fit:
        row.update(p=fit["p"], f_avg=fit["f_avg"], epc=fit["epc"])
    return row


def _fmt(v, spec=".6f") -> str:
    return "-" if v is None else format(v, spec)


def cmd_report(args) -> int:
    rows = []
    for d in args.dirs:
        if not (d / "result.json").is_file():
            _err(f"missing result.json in {d}")
            return EXIT_USAGE
        try:
            rows.append(_report_row(d))
        except (ValueError, KeyError, TypeError) as exc:
            _err(f"unreadable result.json in {d}: {exc}")
            return EXIT_USAGE
    header = ["dir", "kind", "n", "spam", "p", "F_avg", "EPC", "F0(first m)", "gate F"]
    table = [[r["dir"], r["kind"], str(r["n"]), r["spam"], _fmt(r["p"]), _fmt(r["f_avg"]),
              _fmt(r["epc"], ".3e"), _fmt(r["f0"]), _fmt(r["gate_f"])] for r in rows]
    widths = [max(len(h), *(len(t[i]) for t in table)) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for t in table:
        print("  ".join(c.ljust(w) for c, w in zip(t, widths)))
    ps = [r["p"] for r in rows if r["p"] is not None]
    if len(ps) >= 2:
        spread = max(ps) - min(ps)
        verdict = "yes" if spread <= SPAM_TOLERANCE else "no"
        print(f"max |delta p| = {spread:.6f} (tolerance {SPAM_TOLERANCE}); SPAM-invariant: {verdict}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return {"run": cmd_run, "fit": cmd_fit, "report": cmd_report}[args.command](args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
