#!/usr/bin/env python3
"""Print the transcendental spectrum next to the empirical Mercer spectrum of K_1.

    python scripts/spectrum_table.py [--jmax 20] [--grid 2000]
"""

from __future__ import annotations

import argparse

from ntk_lab.kernels import KernelSpec
from ntk_lab.spectral import empirical_mercer, mercer_spectrum


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--jmax", type=int, default=20)
    ap.add_argument("--grid", type=int, default=2000)
    args = ap.parse_args(argv)

    g1 = mercer_spectrum(1.0, args.jmax).eigenvalues
    g97 = mercer_spectrum(9.0 / 7.0, args.jmax).eigenvalues
    hat = empirical_mercer(KernelSpec.ntk1(), args.grid, args.jmax)
    print("j,lambda_G1,lambda_hat_K1,7*lambda_G9/7,hat/G1")
    for j in range(args.jmax):
        print(f"{j + 1},{g1[j]:.10g},{hat[j]:.10g},{7 * g97[j]:.10g},{hat[j] / g1[j]:.4f}")


if __name__ == "__main__":
    main()
