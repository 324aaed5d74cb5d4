#!/usr/bin/env python3
"""Run every scenario from configs/ and print one PASS/FAIL line each.

    python scripts/run_all.py [--configs DIR] [--out DIR] [--threads K] [--skip NAME ...]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from ntk_lab.experiments import SCENARIOS, load_config, run, write_csv, write_summary

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", type=Path, default=ROOT / "configs")
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--skip", nargs="*", default=[], choices=SCENARIOS)
    args = ap.parse_args(argv)

    failed = 0
    for name in SCENARIOS:
        if name in args.skip:
            continue
        cfg = load_config(args.configs / f"{name}.cfg", name=name)
        t0 = time.perf_counter()
        result = run(cfg, threads=args.threads)
        write_csv(result.records, args.out / f"{name}.csv")
        write_summary(result.summary, args.out / f"{name}_summary.json")
        ok = bool(result.summary.get("pass", True))
        failed += not ok
        print(f"{name:17s} {'PASS' if ok else 'FAIL'}  {time.perf_counter() - t0:8.1f}s", flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
