"""Compare l0 and l1 sparsity on the planted-support recovery instance.

For each l0 regularization weight, the l1 weight is bisected (on a log scale)
until the training MSE matches the l0 solution within 10%, then the nonzero
counts are printed side by side.

    python3 scripts/sparse_recovery.py --lambdas 1e-3 1e-2 --seed 0
"""

import argparse
import logging

import numpy as np

from sparsefix import ErrorSequence, IdentityOp, L0Config, L1Config, MatrixOp, SquaredLoss, solve_l0, solve_l1_identity
from sparsefix.pipelines import sparse_recovery_instance

log = logging.getLogger("sparse_recovery")


def mse(B, x, y):
    return float(np.mean((B @ x - y) ** 2))


def matched_l1(B, y, target, rel=0.1):
    f, Bo = SquaredLoss(y), MatrixOp(B)
    lo, hi = -8.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        v = solve_l1_identity(Bo, f, L1Config(lam=10**mid, tol=1e-10, max_outer=200_000)).state.v
        err = mse(B, v, y)
        if abs(err - target) <= rel * target:
            return 10**mid, v
        lo, hi = (lo, mid) if err > target else (mid, hi)
    return None, None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[1e-3, 1e-2])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alpha", type=float, default=0.99)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    inst = sparse_recovery_instance(seed=args.seed)
    B, f = MatrixOp(inst.B), SquaredLoss(inst.y)
    print(f"planted support: {inst.support.tolist()}")
    print(f"{'lambda':>8} {'nnz_l0':>7} {'mse_l0':>10} {'iters':>6} {'lambda_l1':>10} {'nnz_l1':>7} {'mse_l1':>10}")
    for lam in args.lambdas:
        cfg = L0Config(lam=lam, gamma=lam / 2, alpha=args.alpha, error_seq=ErrorSequence(M=1.0), outer_tol=1e-10)
        res = solve_l0(B, IdentityOp(B.in_dim), f, cfg)
        u = res.state.u
        err0 = mse(inst.B, u, inst.y)
        lam1, v = matched_l1(inst.B, inst.y, err0)
        if v is None:
            log.warning("no l1 weight matched lambda=%g", lam)
            continue
        print(f"{lam:8.0e} {np.count_nonzero(u):7d} {err0:10.3e} {res.iterations:6d} "
              f"{lam1:10.3e} {np.count_nonzero(v):7d} {mse(inst.B, v, inst.y):10.3e}")
        log.info("l0 support at lambda=%g: %s (monotone=%s)", lam, np.flatnonzero(u).tolist(), res.monotone)


if __name__ == "__main__":
    main()
