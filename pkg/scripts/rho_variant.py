"""Run the l0 solver with an inflated rho' and report where F increases.

The descent certificate only covers rho' up to the default value; larger
values are accepted with a warning and each violating iteration is flagged.

    python3 scripts/rho_variant.py --factors 1 10 1000
"""

import argparse
import warnings

import numpy as np

from sparsefix import ErrorSequence, IdentityOp, L0Config, MatrixOp, SquaredLoss, solve_l0
from sparsefix.pipelines import sparse_recovery_instance
from sparsefix.solver_l0 import default_rho_prime


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--factors", type=float, nargs="+", default=[1.0, 10.0, 1000.0])
    ap.add_argument("--lam", type=float, default=1e-2)
    ap.add_argument("--alpha", type=float, default=0.99)
    ap.add_argument("--M", type=float, default=1.0)
    args = ap.parse_args()

    inst = sparse_recovery_instance()
    B, f = MatrixOp(inst.B), SquaredLoss(inst.y)
    gamma = args.lam / 2
    base = default_rho_prime(args.lam, gamma, args.alpha)
    for factor in args.factors:
        cfg = L0Config(lam=args.lam, gamma=gamma, alpha=args.alpha, rho_prime=factor * base,
                       error_seq=ErrorSequence(M=args.M), outer_tol=1e-10)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = solve_l0(B, IdentityOp(B.in_dim), f, cfg)
        flagged = [rec.k for rec in res.trace if rec.descent_violated]
        print(f"rho' x {factor:g}: {res.iterations} iterations, F={res.objective[-1]:.6e}, "
              f"nnz={np.count_nonzero(res.state.u)}, increases at {flagged[:10] or 'none'}")


if __name__ == "__main__":
    main()
