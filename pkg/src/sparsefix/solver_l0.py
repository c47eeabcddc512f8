"""Inexact fixed-point proximity algorithm for the two-variable l0 model

    minimize  F(u, v) = psi(B v) + lam/(2 gamma) ||u - D v||^2 + lam ||u||_0

The outer loop alternates a hard-thresholding step in u with an approximate
minimization in v. The v-subproblem

    H(v; u) = lam/(2 gamma) ||v - D^T u||^2 + psi(B v)

is solved by a primal-dual fixed-point iteration (FPPA) that stops as soon as
the objective has not grown by more than ``rho'/2 ||u_new - u_old||^2`` and
``||grad H|| <= e^{k+1}``. D must satisfy ``D^T D = I``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .linops import estimate_spectral_norm
from .prox import hard_threshold, support
from .trace import IterationRecord, SolveResult, stop_test

logger = logging.getLogger(__name__)

_ROUNDING = 8 * np.finfo(float).eps

__all__ = [
    "ErrorSequence",
    "L0Config",
    "L0State",
    "objective_F",
    "subproblem_H",
    "grad_H",
    "outer_u_step",
    "inner_fppa_step",
    "inner_stop_check",
    "default_rho_prime",
    "default_q",
    "fixed_point_residuals",
    "solve_l0",
]


@dataclass(frozen=True)
class ErrorSequence:
    """Summable inner-loop tolerances e^{k+1} = M / k^power.

    ``kind="inverse_square"`` uses power 2, ``kind="inverse_power"`` uses
    power 1.01.
    """

    kind: str = "inverse_square"
    M: float = 1e16

    def __post_init__(self):
        if self.kind not in ("inverse_square", "inverse_power"):
            raise ValueError(f"unknown error sequence kind {self.kind!r}")
        if not self.M > 0:
            raise ValueError("M must be positive")

    @property
    def power(self):
        return 2.0 if self.kind == "inverse_square" else 1.01

    def __call__(self, k):
        if k < 1:
            raise ValueError("outer index k starts at 1")
        return self.M / float(k) ** self.power


@dataclass
class L0Config:
    lam: float
    gamma: float
    alpha: float = 0.99
    rho_prime: float | None = None  # None: 0.99 (lam/gamma)(1/alpha - 1), or 0 for alpha >= 1
    p: float = 1.0
    q: float | None = None  # None: (1 + 1e-6) ||B||^2 / p
    error_seq: ErrorSequence = field(default_factory=ErrorSequence)
    outer_tol: float = 1e-6
    max_outer: int = 100_000
    max_inner: int = 100_000
    stop_on: str = "u"  # which iterate the relative-change stop rule watches
    b_norm: float | None = None  # known upper bound on ||B||_2; skips power iteration
    record_support: bool = True
    descent_slack: float = 1e-10

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.alpha <= 2:
            raise ValueError("alpha must lie in (0, 2]")
        if not self.p > 0:
            raise ValueError("p must be positive")
        if self.q is not None and not self.q > 0:
            raise ValueError("q must be positive")
        if self.rho_prime is not None and self.rho_prime < 0:
            raise ValueError("rho_prime must be nonnegative")
        if self.stop_on not in ("u", "v"):
            raise ValueError("stop_on must be 'u' or 'v'")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")

    @property
    def rho(self):
        if self.rho_prime is not None:
            return self.rho_prime
        return default_rho_prime(self.lam, self.gamma, self.alpha)


@dataclass
class L0State:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    k: int = 1


def default_rho_prime(lam, gamma, alpha):
    if alpha >= 1:
        return 0.0
    return 0.99 * (lam / gamma) * (1.0 / alpha - 1.0)


def default_q(B, p, b_norm=None):
    if b_norm is None:
        b_norm = estimate_spectral_norm(B)
    return (1.0 + 1e-6) * b_norm**2 / p


def objective_F(u, v, B, D, f, lam, gamma):
    r = u - D.apply(v)
    return f.value(B.apply(v)) + lam / (2.0 * gamma) * float(r @ r) + lam * int(np.count_nonzero(u))


def subproblem_H(v, u, B, D, f, lam, gamma):
    r = v - D.adjoint(u)
    return lam / (2.0 * gamma) * float(r @ r) + f.value(B.apply(v))


def grad_H(v, u, B, D, f, lam, gamma):
    return _grad_H(v, D.adjoint(u), B.apply(v), B, f, lam / gamma)


def _grad_H(v, Dtu, Bv, B, f, c):
    return c * (v - Dtu) + B.adjoint(f.gradient(Bv))


def outer_u_step(state, cfg, D):
    z = (1.0 - cfg.alpha) * state.u + cfg.alpha * D.apply(state.v)
    return hard_threshold(z, cfg.alpha * cfg.gamma)


def inner_fppa_step(v_l, w_l, u_next, cfg, B, D, f, q=None):
    """One FPPA step for minimizing H(.; u_next); returns ``(v, w)``."""
    if q is None:
        q = _resolve_q(cfg, B)
    v_next, w_next, _ = _fppa(v_l, w_l, B.apply(v_l), D.adjoint(u_next), cfg.lam, cfg.gamma, cfg.p, q, B, f)
    return v_next, w_next


def _fppa(v, w, Bv, Dtu, lam, gamma, p, q, B, f):
    pg = p * gamma
    v_next = (lam / (pg + lam)) * Dtu + (pg / (pg + lam)) * (v - B.adjoint(w) / p)
    Bv_next = B.apply(v_next)
    t = q * w + 2.0 * Bv_next - Bv
    w_next = (t - f.resolvent(t, q)) / q
    return v_next, w_next, Bv_next


def inner_stop_check(v_candidate, v_prev_outer, u_next, u_prev, k, cfg, B, D, f):
    """True when the inner loop may stop at `v_candidate`."""
    du = u_next - u_prev
    dF = objective_F(u_next, v_candidate, B, D, f, cfg.lam, cfg.gamma) - objective_F(
        u_next, v_prev_outer, B, D, f, cfg.lam, cfg.gamma
    )
    g = grad_H(v_candidate, u_next, B, D, f, cfg.lam, cfg.gamma)
    return dF <= 0.5 * cfg.rho * float(du @ du) and float(np.linalg.norm(g)) <= cfg.error_seq(k)


def fixed_point_residuals(u, v, B, D, f, cfg):
    """``(||u - prox(u)||, ||grad H(v; u)||)`` at a candidate limit point."""
    u_fix = hard_threshold((1.0 - cfg.alpha) * u + cfg.alpha * D.apply(v), cfg.alpha * cfg.gamma)
    g = grad_H(v, u, B, D, f, cfg.lam, cfg.gamma)
    return float(np.linalg.norm(u - u_fix)), float(np.linalg.norm(g))


def _check_tight_frame(D, seed=0):
    x = np.random.default_rng(seed).standard_normal(D.in_dim)
    err = np.linalg.norm(D.adjoint(D.apply(x)) - x)
    if err > 1e-8 * np.linalg.norm(x):
        raise ValueError("the l0 solver requires D^T D = I")


def _resolve_q(cfg, B):
    if cfg.q is None:
        return default_q(B, cfg.p, cfg.b_norm)
    b_norm = cfg.b_norm if cfg.b_norm is not None else estimate_spectral_norm(B)
    if not cfg.p * cfg.q > b_norm**2:
        raise ValueError(f"need p*q > ||B||^2 (p*q = {cfg.p * cfg.q:.6g}, ||B||^2 ~ {b_norm**2:.6g})")
    return cfg.q


def solve_l0(B, D, f, cfg, init=None, callback=None):
    """Run the inexact fixed-point proximity algorithm.

    Parameters
    ----------
    B, D : LinearOp
        Data operator (p x m) and tight-frame transform (n x m).
    f : Fidelity
        Smooth convex data term on R^p.
    cfg : L0Config
    init : L0State, optional
        Starting point; defaults to ``v = 0, u = D v, w = 0``.
    callback : callable, optional
        Called as ``callback(state, record)`` after every outer step.

    Returns
    -------
    SolveResult
        ``trace[0]`` describes the initial point (k = 1); each later record
        describes the iterate produced by one outer step. ``converged`` is
        False when `max_outer` was reached.
    """
    if f.dim != B.out_dim or D.in_dim != B.in_dim:
        raise ValueError("dimensions of B, D and the fidelity do not match")
    _check_tight_frame(D)
    q = _resolve_q(cfg, B)
    rho = cfg.rho
    if cfg.alpha < 1 and rho >= (cfg.lam / cfg.gamma) * (1.0 - cfg.alpha) / cfg.alpha:
        warnings.warn("rho_prime outside the range that guarantees descent", RuntimeWarning, stacklevel=2)

    if init is None:
        v = np.zeros(B.in_dim)
        init = L0State(u=D.apply(v), v=v, w=np.zeros(B.out_dim))
    u = np.array(init.u, dtype=float)
    v = np.array(init.v, dtype=float)
    w = np.array(init.w, dtype=float)
    k = int(init.k)
    lam, gamma, alpha, p = cfg.lam, cfg.gamma, cfg.alpha, cfg.p
    c = lam / gamma

    Bv = B.apply(v)
    Dv = D.apply(v)
    F = _objective(u, Dv, Bv, f, lam, gamma)
    g0 = _grad_H(v, D.adjoint(u), Bv, B, f, c)
    trace = [
        IterationRecord(
            k=k, F=F, du_norm=0.0, grad_norm=float(np.linalg.norm(g0)), nnz=int(np.count_nonzero(u)),
            support=support(u) if cfg.record_support else None,
        )
    ]
    state = L0State(u, v, w, k)
    converged = False

    for _ in range(cfg.max_outer):
        e = cfg.error_seq(k)
        u_new = hard_threshold((1.0 - alpha) * u + alpha * Dv, alpha * gamma)
        du = u_new - u
        du2 = float(du @ du)
        Dtu = D.adjoint(u_new)
        g = _grad_H(v, Dtu, Bv, B, f, c)
        inner = 0
        capped = False
        if du2 + float(g @ g) > 0:
            H_ref = _H(v, Dtu, Bv, f, c)
            # a few ulps of slack: near the v-minimizer rounding alone can make H tick upwards
            allowance = 0.5 * rho * du2 + _ROUNDING * (abs(H_ref) + 1.0)
            v_l, w_l, Bv_l = v, w, Bv
            while True:
                v_l, w_l, Bv_l = _fppa(v_l, w_l, Bv_l, Dtu, lam, gamma, p, q, B, f)
                inner += 1
                g = _grad_H(v_l, Dtu, Bv_l, B, f, c)
                # with D^T D = I, F(u, .) and H(.; u) differ by a constant
                if _H(v_l, Dtu, Bv_l, f, c) - H_ref <= allowance and float(np.linalg.norm(g)) <= e:
                    break
                if inner >= cfg.max_inner:
                    capped = True
                    logger.warning("inner loop hit max_inner=%d at k=%d", cfg.max_inner, k)
                    if _H(v_l, Dtu, Bv_l, f, c) - H_ref > allowance:
                        # the previous v still satisfies the descent part of the exit test
                        v_l, w_l, Bv_l = v, w, Bv
                        g = _grad_H(v_l, Dtu, Bv_l, B, f, c)
                    break
            v_new, w_new, Bv_new = v_l, w_l, Bv_l
        else:
            v_new, w_new, Bv_new = v, w, Bv

        stationary = inner == 0 and du2 == 0.0
        if cfg.stop_on == "u":
            done = stop_test(u_new, u, v_new, v, stationary, cfg.outer_tol)
        else:
            done = stop_test(v_new, v, u_new, u, stationary, cfg.outer_tol)
        changed = bool(np.any((u_new != 0) != (u != 0)))
        u, v, w, Bv = u_new, v_new, w_new, Bv_new
        Dv = D.apply(v)
        k += 1
        F_new = _objective(u, Dv, Bv, f, lam, gamma)
        record = IterationRecord(
            k=k,
            F=F_new,
            du_norm=math.sqrt(du2),
            grad_norm=float(np.linalg.norm(g)),
            nnz=int(np.count_nonzero(u)),
            inner_iters=inner,
            support=support(u) if cfg.record_support else None,
            support_changed=changed,
            inner_capped=capped,
            descent_violated=F_new > F + cfg.descent_slack,
            error_bound=e,
        )
        if record.descent_violated:
            logger.info("objective increased at k=%d: %.12g -> %.12g", k, F, F_new)
        trace.append(record)
        F = F_new
        state = L0State(u, v, w, k)
        if callback is not None:
            callback(state, record)
        if done:
            converged = True
            break

    return SolveResult(state=state, trace=trace, converged=converged)


def _objective(u, Dv, Bv, f, lam, gamma):
    r = u - Dv
    return f.value(Bv) + lam / (2.0 * gamma) * float(r @ r) + lam * int(np.count_nonzero(u))


def _H(v, Dtu, Bv, f, c):
    r = v - Dtu
    return 0.5 * c * float(r @ r) + f.value(Bv)
