"""Command line entry point: ``afu {train,toyq,gradcheck,sfm-suite}``.

Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import gradcheck
from .maxq import TOY_METHODS, run_toy_benchmark
from .trainer import (AfuConfig, ConfigError, NumericalAbort, DESK_PRESETS, SFM_DESK_DEFAULTS, config_json,
                      records_to_csv, sfm_suite, suite_table, train)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _hidden(text: str) -> tuple:
    try:
        sizes = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated ints, got {text!r}") from None
    return sizes


def _write(path, text: str) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def _add_train(sub):
    p = sub.add_parser("train", help="run AFU-alpha or AFU-beta and write a learning curve")
    p.add_argument("--config", type=Path, help="flat JSON file with config fields")
    p.add_argument("--preset", choices=("desk", "paper"), default="desk",
                   help="starting values: desk-scale networks or the full-size hyperparameters")
    types = {"hidden": _hidden, "target_entropy": float}
    for f in dataclasses.fields(AfuConfig):
        flag = "--" + f.name.replace("_", "-")
        typ = types.get(f.name) or type(f.default)
        p.add_argument(flag, dest=f.name, type=typ, default=None)
    p.add_argument("--steps", dest="total_steps", type=int, default=None)
    p.add_argument("--out", type=Path, default=None, help="learning-curve CSV (default stdout)")
    p.add_argument("--config-out", type=Path, default=None, help="config echo JSON")


def _cmd_train(args) -> int:
    env = args.env or "sfm"
    values = dict(DESK_PRESETS.get(env, {})) if args.preset == "desk" else {}
    if args.config is not None:
        values.update(json.loads(args.config.read_text()))
    for f in dataclasses.fields(AfuConfig):
        v = getattr(args, f.name)
        if v is not None:
            values[f.name] = v
    try:
        cfg = AfuConfig.from_dict(values).validate()
    except (ConfigError, TypeError) as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.config_out is not None:
        _write(args.config_out, config_json(cfg))
    try:
        run = train(cfg)
    except NumericalAbort as e:
        _write(args.out, records_to_csv(e.records))
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    _write(args.out, run.to_csv())
    return EXIT_OK


def _add_toyq(sub):
    p = sub.add_parser("toyq", help="max-Q toy benchmark on sin(4s) + 0.7cos(4a)")
    p.add_argument("--method", choices=TOY_METHODS, default="afu")
    p.add_argument("--rho", "--hyper", "--tau-e", dest="hyper", type=float, default=0.3)
    p.add_argument("--steps", type=int, default=3000)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=_hidden, default=(256, 256))
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--out", type=Path, default=None, help="residual CSV (default stdout)")
    p.add_argument("--summary", type=Path, default=None, help="summary JSON (default stdout)")


def _cmd_toyq(args) -> int:
    try:
        res = run_toy_benchmark(args.method, args.hyper, steps=args.steps, batch=args.batch,
                                seed=args.seed, hidden=args.hidden, lr=args.lr)
    except ValueError as e:
        print(f"invalid arguments: {e}", file=sys.stderr)
        return EXIT_USAGE
    _write(args.out, res.to_csv())
    _write(args.summary, res.summary_json() + "\n")
    return EXIT_OK


def _add_gradcheck(sub):
    p = sub.add_parser("gradcheck", help="finite-difference checks of every loss gradient")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=gradcheck.TOL)


def _cmd_gradcheck(args) -> int:
    results = gradcheck.run_all(args.instances, args.seed)
    ok = True
    for name, err in results.items():
        passed = err <= args.tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name:<22} max rel err {err:.3e}")
    return EXIT_OK if ok else EXIT_NUMERIC


def _add_sfm(sub):
    p = sub.add_parser("sfm-suite", help="alpha vs beta on the one-step trap environment")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--steps", type=int, default=SFM_DESK_DEFAULTS["total_steps"])
    p.add_argument("--variants", nargs="+", choices=("alpha", "beta"), default=["alpha", "beta"])
    p.add_argument("--out", type=Path, default=None, help="comparison table CSV (default stdout)")
    p.add_argument("--curves-dir", type=Path, default=None, help="write one learning curve per run")


def _cmd_sfm(args) -> int:
    try:
        rows = sfm_suite(range(args.seeds), args.variants, total_steps=args.steps)
    except NumericalAbort as e:
        print(f"numerical abort: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    if args.curves_dir is not None:
        for r in rows:
            _write(args.curves_dir / f"sfm_{r['variant']}_seed{r['seed']}.csv", r["csv"])
    _write(args.out, suite_table(rows))
    return EXIT_OK


COMMANDS = {"train": _cmd_train, "toyq": _cmd_toyq, "gradcheck": _cmd_gradcheck, "sfm-suite": _cmd_sfm}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="afu", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for add in (_add_train, _add_toyq, _add_gradcheck, _add_sfm):
        add(sub)
    return parser


def run_cli(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


def main() -> None:
    sys.exit(run_cli())
