"""Command-line entry point ``ntk-lab``.

    ntk-lab <scenario> --config PATH [--out DIR] [--seed U64] [--threads K]
    ntk-lab kernel --x X --y Y [--d D]
    ntk-lab roots --alpha A --jmax J

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, NtkLabError, NumericalError
from .experiments import SCENARIOS, load_config, run, write_csv, write_summary
from .experiments.records import format_float
from .kernels import ntk_eval
from .spectral import mercer_spectrum

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
THREADS_ENV = "NTK_LAB_THREADS"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ntk-lab", description="NTK regression and lazy-training experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", required=True, type=Path, help="flat key = value config file")
        p.add_argument("--out", type=Path, help="output directory (default: output_dir from the config)")
        p.add_argument("--seed", type=_u64, help="override the config seed")
        p.add_argument("--threads", type=_positive_int, help=f"worker threads (fallback: ${THREADS_ENV}, then 1)")
        p.add_argument("--no-summary", action="store_true", help="skip the JSON summary")

    k = sub.add_parser("kernel", help="evaluate K_d(x, y)")
    k.add_argument("--x", required=True, type=_vector, help="point, e.g. 0.5 or 0.1,0.2")
    k.add_argument("--y", required=True, type=_vector)
    k.add_argument("--d", type=_positive_int, help="dimension; a scalar point is repeated d times")

    r = sub.add_parser("roots", help="print omega_j and lambda_j as CSV")
    r.add_argument("--alpha", required=True, type=float)
    r.add_argument("--jmax", required=True, type=_positive_int)
    return parser


def _threads(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if env is None or env.strip() == "":
        return 1
    try:
        value = int(env)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
    if value < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
    return value


def _cmd_scenario(args) -> int:
    cfg = load_config(args.config, name=args.command)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    threads = _threads(args.threads)
    out = args.out if args.out is not None else Path(cfg.output_dir)
    result = run(cfg, threads=threads)
    csv_path = write_csv(result.records, out / f"{cfg.name}.csv")
    print(f"wrote {len(result.records)} records to {csv_path}")
    if not args.no_summary:
        json_path = write_summary(result.summary, out / f"{cfg.name}_summary.json")
        print(f"wrote summary to {json_path}")
    if "pass" in result.summary:
        print(f"{cfg.name}: {'PASS' if result.summary['pass'] else 'FAIL'}")
    return EXIT_OK


def _cmd_kernel(args) -> int:
    x, y = args.x, args.y
    d = args.d
    if d is not None:
        x = np.full(d, x[0]) if x.size == 1 else x
        y = np.full(d, y[0]) if y.size == 1 else y
    else:
        d = x.size
    print(format_float(ntk_eval(d, x, y)))
    return EXIT_OK


def _cmd_roots(args) -> int:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sp = mercer_spectrum(args.alpha, args.jmax)
    if not sp.bracket_guaranteed:
        print(f"warning: root brackets are not guaranteed for alpha={args.alpha}", file=sys.stderr)
    print("j,omega,lambda")
    for j, w, v in zip(sp.j, sp.roots, sp.eigenvalues):
        print(f"{j},{format_float(w)},{format_float(v)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "kernel":
            return _cmd_kernel(args)
        if args.command == "roots":
            return _cmd_roots(args)
        return _cmd_scenario(args)
    except NumericalError as exc:
        print(f"ntk-lab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, NtkLabError, OSError) as exc:
        print(f"ntk-lab: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
