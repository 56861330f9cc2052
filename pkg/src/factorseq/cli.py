"""Command-line interface: ``factorseq <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .errors import DataError, NumericalError
from .harness import (
    ExperimentConfig,
    diagnose_panel,
    run_amse_experiment,
    run_forecast_experiment,
)
from .panel import apply_tcodes, load_panel_csv, write_panel_csv
from .statespace import (
    StateSpaceModel,
    gen_example_one_weak,
    gen_example_shift,
    gen_random_walk_idio,
    make_paper_dgp,
    simulate_ss,
)
from .structure import three_way_decompose

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _globals(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default if suppress else 0,
                        help="base random seed (default 0)")
    parser.add_argument("--threads", type=int, default=default if suppress else 1,
                        help="worker threads (default 1)")
    parser.add_argument("--config", type=Path, default=default, help="flat key = value config file")
    parser.add_argument("--out", type=Path, default=default if suppress else Path("out"),
                        help="output directory (default ./out)")


def _lags(text: str):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid lag list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="factorseq", description="Static and dynamic low-rank factor analysis.")
    _globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("simulate", help="simulate a panel and write its components as CSVs")
    _globals(sp, suppress=True)
    sp.add_argument("--model", default="two-state", choices=["two-state", "shift", "one-weak", "random-walk"])
    sp.add_argument("--model-file", type=Path, help="state-space model text file (overrides --model)")
    sp.add_argument("--n", type=int, default=120)
    sp.add_argument("--T", type=int, default=240)
    sp.add_argument("--burn-in", type=int, default=500)
    sp.add_argument("--layout", default="text", choices=["text", "tables"])
    sp.add_argument("--weight-rule", default="divide", choices=["divide", "multiply"])
    sp.add_argument("--noise-sd", type=float, default=0.0, help="noise for the example generators")
    sp.add_argument("--replication", type=int, default=0)

    dp = sub.add_parser("decompose", help="three-way decomposition of a panel CSV")
    _globals(dp, suppress=True)
    dp.add_argument("panel", type=Path)
    dp.add_argument("--r", type=int, required=True)
    dp.add_argument("--q", type=int, required=True)
    dp.add_argument("--M", type=int, default=None, help="bandwidth (default floor(0.75 sqrt(T)))")
    dp.add_argument("--tcode-row", action="store_true", help="panel has a transform-code row")
    dp.add_argument("--no-standardize", action="store_true")

    for name, text in (("mc-amse", "Monte-Carlo AMSE experiment"),
                       ("mc-forecast", "Monte-Carlo forecasting experiment")):
        mp = sub.add_parser(name, help=text)
        _globals(mp, suppress=True)
        mp.add_argument("--replications", type=int, default=None, help="override the config")

    gp = sub.add_parser("diagnose", help="factor / lagged-idiosyncratic correlation diagnostics")
    _globals(gp, suppress=True)
    gp.add_argument("panel", type=Path)
    gp.add_argument("--r", type=int, default=8)
    gp.add_argument("--lags", type=_lags, default=(1, 2, 3))
    gp.add_argument("--tcode-row", action="store_true",
                    help="input has a transform-code row; transforms are applied first")

    ip = sub.add_parser("ingest", help="apply transform codes and write an analysis panel")
    _globals(ip, suppress=True)
    ip.add_argument("raw", type=Path)
    return parser


def _cmd_simulate(args) -> int:
    if args.model_file is not None:
        model = StateSpaceModel.load(args.model_file)
        sim = simulate_ss(model, args.T, args.burn_in, args.seed, replication=args.replication)
    elif args.model == "two-state":
        model, idio = make_paper_dgp(args.n, layout=args.layout, weight_rule=args.weight_rule)
        sim = simulate_ss(model, args.T, args.burn_in, args.seed, idio, args.replication)
    elif args.model == "shift":
        sim = gen_example_shift(args.n, args.T, args.seed, args.noise_sd, args.replication)
    elif args.model == "one-weak":
        sim = gen_example_one_weak(args.n, args.T, args.seed, args.noise_sd, args.replication)
    else:
        sim = gen_random_walk_idio(args.n, args.T, args.seed, replication=args.replication)
    out = sim.export_csv_dir(args.out)
    print(f"wrote simulated panel (n={sim.n}, T={sim.T}) to {out}")
    return EXIT_OK


def _cmd_decompose(args) -> int:
    p = load_panel_csv(args.panel, has_tcode_row=args.tcode_row)
    dec = three_way_decompose(p, args.r, args.q, args.M, standardize=not args.no_standardize,
                              workers=args.threads)
    out = dec.export_csv_dir(args.out)
    print(f"wrote C, e_chi, xi, chi for window {dec.window} and {len(dec.weak_pivots)} weak pivots to {out}")
    return EXIT_OK


def _cmd_mc(args, kind: str) -> int:
    overrides = {"kind": kind, "replications": args.replications,
                 "base_seed": args.seed if "seed" in args._given else None}
    if args.config is not None:
        cfg = ExperimentConfig.from_file(args.config, **overrides)
    else:
        cfg = ExperimentConfig.from_text("", **overrides)
    run = run_amse_experiment if kind == "amse" else run_forecast_experiment
    report = run(cfg, threads=max(1, args.threads))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / "report.csv")
    report.write_log_csv(out / "replications.csv")
    report.write_markdown(out / "report.md")
    (out / "config.txt").write_text(cfg.to_text())
    print(report.to_markdown())
    print(f"{len(report.cells)} cells written to {out / 'report.csv'}")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    p = load_panel_csv(args.panel, has_tcode_row=args.tcode_row)
    if args.tcode_row:
        p = apply_tcodes(p)
    diag = diagnose_panel(p, r=args.r, lags=args.lags)
    paths = diag.write(args.out)
    print(f"median |corr| = {diag.median_abs_corr:.4f} (critical value {diag.correlations.critical:.4f})")
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def _cmd_ingest(args) -> int:
    raw = load_panel_csv(args.raw, has_tcode_row=True)
    p = apply_tcodes(raw)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    target = out / "panel.csv"
    write_panel_csv(p, target, include_tcodes=False)
    print(f"wrote transformed panel (n={p.n}, T={p.T}) to {target}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    args._given = {a.lstrip("-").split("=")[0] for a in argv if a.startswith("--")}
    handlers = {
        "simulate": _cmd_simulate,
        "decompose": _cmd_decompose,
        "mc-amse": lambda a: _cmd_mc(a, "amse"),
        "mc-forecast": lambda a: _cmd_mc(a, "forecast"),
        "diagnose": _cmd_diagnose,
        "ingest": _cmd_ingest,
    }
    try:
        return handlers[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
