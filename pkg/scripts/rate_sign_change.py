"""Canonical rates of the TCL4 generator and of the exact generator for a resonant qubit-mode model.

Writes one CSV with both rate trajectories and prints the times at which a
rate eigenvalue turns from positive to negative in each construction.
"""
import argparse
import csv

import numpy as np

from tclgen.bath import single_mode_thermal
from tclgen.dynamics import exact_map_single_mode, exact_tcl_from_map
from tclgen.generator import build_generator, canonical_decompose, rate_sign_changes
from tclgen.model import qubit_model
from tclgen.quadrature import QuadratureSpec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--lam", type=float, default=0.2)
    p.add_argument("--t-max", type=float, default=4.0)
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--refine", type=int, default=20, help="finite-difference substeps per grid step")
    p.add_argument("--nodes", type=int, default=24)
    p.add_argument("--fock-cutoff", type=int, default=12)
    p.add_argument("--out", default="rates_sign_change.csv")
    args = p.parse_args()

    m = qubit_model(1.0, "x", args.lam)
    b = single_mode_thermal(1.0, 1.0, 0.0)
    grid = np.linspace(0, args.t_max, args.steps + 1)
    q = QuadratureSpec(args.nodes)
    tcl4 = np.array([canonical_decompose(build_generator(m, b, 4, t, q, "gaussian_mean_zero")).canonical_rates
                     for t in grid])
    fine = np.linspace(0, args.t_max, args.steps * args.refine + 1)
    exact = exact_tcl_from_map(exact_map_single_mode(m, b, args.fock_cutoff, fine, picture="interaction"))
    ref = np.array([canonical_decompose(L).canonical_rates for L in exact.generators[::args.refine]])

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"tcl4_{i}" for i in range(3)] + [f"exact_{i}" for i in range(3)])
        for t, a, c in zip(grid, tcl4, ref):
            w.writerow([repr(float(t))] + [repr(float(x)) for x in (*a, *c)])
    print(f"TCL4 sign changes (t, slot): {rate_sign_changes(grid, tcl4)}")
    print(f"exact sign changes (t, slot): {rate_sign_changes(grid, ref)}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
