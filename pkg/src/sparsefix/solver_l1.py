"""Fixed-point proximity schemes for the convex model

    minimize  psi(B v) + lam ||D v||_1

`solve_l1_identity` handles D = I with one primal-dual loop.
`solve_l1_general` handles any D: an outer dual step on the l1 term wraps an
inexact inner primal-dual loop on psi(B .) that stops once
``||grad T|| <= e^{k+1}``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .linops import estimate_spectral_norm
from .prox import soft_threshold
from .solver_l0 import ErrorSequence
from .trace import IterationRecord, SolveResult, stop_test

logger = logging.getLogger(__name__)

__all__ = [
    "L1Config",
    "L1State",
    "objective_l1",
    "grad_T",
    "subgradient_residual",
    "solve_l1_identity",
    "solve_l1_general",
]


@dataclass
class L1Config:
    """Parameters for both l1 schemes.

    `p`, `q` are the step parameters of the psi(B .) primal-dual pair (p2, q2
    in the general scheme); `p1`, `q1` belong to the outer D-splitting and
    default to ``p1 = p``, ``q1 = (1 + 1e-6) ||D||^2 / p1``.
    """

    lam: float
    p: float = 1.0
    q: float | None = None
    p1: float | None = None
    q1: float | None = None
    error_seq: ErrorSequence = field(default_factory=ErrorSequence)
    tol: float = 1e-6
    max_outer: int = 100_000
    max_inner: int = 100_000
    b_norm: float | None = None
    d_norm: float | None = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        for name in ("p", "q", "p1", "q1"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class L1State:
    v: np.ndarray
    w: np.ndarray
    z: np.ndarray | None = None
    k: int = 1


def objective_l1(v, B, D, f, lam):
    Dv = v if D is None else D.apply(v)
    return f.value(B.apply(v)) + lam * float(np.sum(np.abs(Dv)))


def grad_T(v, v_outer, w_outer, p1, B, D, f):
    """Gradient of ``p1/2 ||v - (v_outer - D^T w_outer / p1)||^2 + psi(B v)``."""
    center = v_outer - D.adjoint(w_outer) / p1
    return p1 * (v - center) + B.adjoint(f.gradient(B.apply(v)))


def subgradient_residual(v, g, lam):
    """Distance from 0 to ``g + lam * d||v||_1``, componentwise."""
    return np.where(v != 0, g + lam * np.sign(v), np.maximum(np.abs(g) - lam, 0.0))


def _pair_q(p, q, op_norm, op, label):
    if op_norm is None:
        op_norm = estimate_spectral_norm(op)
    if q is None:
        return (1.0 + 1e-6) * op_norm**2 / p
    if not p * q > op_norm**2:
        raise ValueError(f"need {label} > ||.||^2 ({p * q:.6g} vs {op_norm**2:.6g})")
    return q


def solve_l1_identity(B, f, cfg, init=None):
    """Primal-dual fixed-point scheme for ``psi(B v) + lam ||v||_1``.

    Stops when ``||v_{l+1} - v_l|| / ||v_{l+1}|| < cfg.tol`` or after
    `cfg.max_outer` steps. Each trace record carries the norm of the minimal
    subgradient of the objective at the current v as `grad_norm`.
    """
    if f.dim != B.out_dim:
        raise ValueError("fidelity dimension does not match B")
    p = cfg.p
    q = _pair_q(p, cfg.q, cfg.b_norm, B, "p*q")
    lam = cfg.lam
    if init is None:
        init = L1State(v=np.zeros(B.in_dim), w=np.zeros(B.out_dim))
    v = np.array(init.v, dtype=float)
    w = np.array(init.w, dtype=float)
    k = int(init.k)
    Bv = B.apply(v)

    def record(k, v, Bv, dv, inner):
        g = B.adjoint(f.gradient(Bv))
        return IterationRecord(
            k=k,
            F=f.value(Bv) + lam * float(np.sum(np.abs(v))),
            du_norm=dv,
            grad_norm=float(np.linalg.norm(subgradient_residual(v, g, lam))),
            nnz=int(np.count_nonzero(v)),
            inner_iters=inner,
        )

    trace = [record(k, v, Bv, 0.0, 0)]
    converged = False
    for _ in range(cfg.max_outer):
        v_new = soft_threshold(v - B.adjoint(w) / p, lam / p)
        Bv_new = B.apply(v_new)
        t = q * w + 2.0 * Bv_new - Bv
        w_new = (t - f.resolvent(t, q)) / q
        stationary = np.array_equal(v_new, v) and np.array_equal(w_new, w)
        done = stop_test(v_new, v, w_new, w, stationary, cfg.tol)
        dv = float(np.linalg.norm(v_new - v))
        v, w, Bv = v_new, w_new, Bv_new
        k += 1
        trace.append(record(k, v, Bv, dv, 1))
        if done:
            converged = True
            break
    return SolveResult(state=L1State(v=v, w=w, k=k), trace=trace, converged=converged)


def solve_l1_general(B, D, f, cfg, init=None, callback=None):
    """Inexact fixed-point proximity scheme for ``psi(B v) + lam ||D v||_1``.

    The inner loop is entered at least once per outer step and runs until
    ``||grad T|| <= e^{k+1}`` or `cfg.max_inner`. Stops on the relative
    change of v.
    """
    if f.dim != B.out_dim or D.in_dim != B.in_dim:
        raise ValueError("dimensions of B, D and the fidelity do not match")
    lam = cfg.lam
    p2 = cfg.p
    q2 = _pair_q(p2, cfg.q, cfg.b_norm, B, "p2*q2")
    p1 = cfg.p1 if cfg.p1 is not None else cfg.p
    q1 = _pair_q(p1, cfg.q1, cfg.d_norm, D, "p1*q1")
    if init is None:
        init = L1State(v=np.zeros(B.in_dim), w=np.zeros(D.out_dim), z=np.zeros(B.out_dim))
    v = np.array(init.v, dtype=float)
    w = np.array(init.w, dtype=float)
    z = np.zeros(B.out_dim) if init.z is None else np.array(init.z, dtype=float)
    k = int(init.k)
    Bv = B.apply(v)
    Dv = D.apply(v)
    a1, a2 = p1 / (p1 + p2), p2 / (p1 + p2)

    F = f.value(Bv) + lam * float(np.sum(np.abs(Dv)))
    trace = [
        IterationRecord(
            k=k, F=F, du_norm=0.0,
            grad_norm=float(np.linalg.norm(D.adjoint(w) + B.adjoint(f.gradient(Bv)))),
            nnz=int(np.count_nonzero(Dv)),
        )
    ]
    converged = False
    for _ in range(cfg.max_outer):
        e = cfg.error_seq(k)
        center = v - D.adjoint(w) / p1
        v_l, z_l, Bv_l = v, z, Bv
        inner = 0
        capped = False
        while True:
            v_next = a1 * center + a2 * (v_l - B.adjoint(z_l) / p2)
            Bv_next = B.apply(v_next)
            t = q2 * z_l + 2.0 * Bv_next - Bv_l
            z_l = (t - f.resolvent(t, q2)) / q2
            v_l, Bv_l = v_next, Bv_next
            inner += 1
            gT = p1 * (v_l - center) + B.adjoint(f.gradient(Bv_l))
            gnorm = float(np.linalg.norm(gT))
            if gnorm <= e:
                break
            if inner >= cfg.max_inner:
                capped = True
                logger.warning("inner loop hit max_inner=%d at k=%d", cfg.max_inner, k)
                break
        t = q1 * w + D.apply(2.0 * v_l - v)
        w_new = (t - soft_threshold(t, q1 * lam)) / q1
        stationary = np.array_equal(v_l, v) and np.array_equal(w_new, w) and np.array_equal(z_l, z)
        done = stop_test(v_l, v, w_new, w, stationary, cfg.tol)
        dv = float(np.linalg.norm(v_l - v))
        v, z, w, Bv = v_l, z_l, w_new, Bv_l
        Dv = D.apply(v)
        k += 1
        F = f.value(Bv) + lam * float(np.sum(np.abs(Dv)))
        rec = IterationRecord(
            k=k, F=F, du_norm=dv, grad_norm=gnorm, nnz=int(np.count_nonzero(Dv)),
            inner_iters=inner, inner_capped=capped, error_bound=e,
        )
        trace.append(rec)
        state = L1State(v=v, w=w, z=z, k=k)
        if callback is not None:
            callback(state, rec)
        if done:
            converged = True
            break
    return SolveResult(state=L1State(v=v, w=w, z=z, k=k), trace=trace, converged=converged)
