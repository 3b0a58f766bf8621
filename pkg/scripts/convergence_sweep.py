"""Residual of the truncated generator against the exact single-mode one over a coupling sweep.

Prints ``lambda residual`` per order and the fitted log-log slope.  Gaussian
baths skip odd orders, so the slope for order N should sit near N + 2.
"""
import argparse

import numpy as np

from tclgen.bath import single_mode_thermal
from tclgen.dynamics import convergence_study
from tclgen.model import qubit_model
from tclgen.quadrature import QuadratureSpec


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--coupling", choices=["x", "z"], default="x")
    p.add_argument("--omega", type=float, default=1.0, help="qubit splitting and mode frequency")
    p.add_argument("--nbar", type=float, default=0.0)
    p.add_argument("--t-star", type=float, default=1.5)
    p.add_argument("--lambdas", type=float, nargs="+", default=list(np.geomspace(0.02, 0.2, 6)))
    p.add_argument("--orders", type=int, nargs="+", default=[2, 4])
    p.add_argument("--nodes", type=int, default=24)
    p.add_argument("--fock-cutoff", type=int, default=12)
    p.add_argument("--threads", type=int, default=1)
    args = p.parse_args()

    m = qubit_model(args.omega, args.coupling, 1.0)
    b = single_mode_thermal(1.0, args.omega, args.nbar)
    for order in args.orders:
        study = convergence_study(m, b, order, args.t_star, args.lambdas, QuadratureSpec(args.nodes),
                                  args.fock_cutoff, threads=args.threads)
        print(f"# order {order}, t* = {args.t_star}")
        for lam, r in zip(study.lambdas, study.residuals):
            print(f"{lam:.6g} {r:.6e}")
        print(f"# slope {study.slope:.4f}")


if __name__ == "__main__":
    main()
