"""Per-iteration diagnostics shared by the solvers, and the CSV trace format."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .prox import SupportSet

TRACE_HEADER = ("k", "F", "du_norm", "gradH_norm", "nnz", "inner_iters")


@dataclass
class IterationRecord:
    """Diagnostics for the iterate with outer index `k`.

    `du_norm` is the step of the tracked sparse variable (u for the l0
    solver, v for the l1 solvers); `grad_norm` is the inner-loop gradient
    norm at exit (grad H or grad T).
    """

    k: int
    F: float
    du_norm: float
    grad_norm: float
    nnz: int
    inner_iters: int = 0
    support: SupportSet | None = None
    support_changed: bool = False
    inner_capped: bool = False
    descent_violated: bool = False
    error_bound: float = math.inf


@dataclass
class SolveResult:
    """Final iterate plus the full trace of a solver run."""

    state: object
    trace: list = field(default_factory=list)
    converged: bool = False

    @property
    def objective(self):
        return np.array([r.F for r in self.trace])

    @property
    def iterations(self):
        return self.trace[-1].k - self.trace[0].k if self.trace else 0

    @property
    def monotone(self):
        return not any(r.descent_violated for r in self.trace)

    @property
    def inner_capped(self):
        return any(r.inner_capped for r in self.trace)


def relative_change(new, old):
    """``||new - old|| / ||new||``; NaN when both norms vanish, inf for 0 / >0."""
    diff = float(np.linalg.norm(new - old))
    denom = float(np.linalg.norm(new))
    if denom == 0.0:
        return math.nan if diff == 0.0 else math.inf
    return diff / denom


def stop_test(new, old, companion_new, companion_old, stationary, tol):
    """Relative-change stopping rule on the watched iterate.

    When the watched iterate did not move at all (a ratio of 0 or 0/0) the
    rule falls back to the companion iterate, so a frozen sparse variable
    neither stops a run whose other variables still move nor blocks the stop
    once they settle.
    """
    rel = relative_change(new, old)
    if rel == 0.0 or math.isnan(rel):
        if stationary:
            return True
        rel = relative_change(companion_new, companion_old)
        if rel == 0.0 or math.isnan(rel):
            return False
    return rel < tol


def _fmt(x):
    return repr(float(x))


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in trace:
            writer.writerow([r.k, _fmt(r.F), _fmt(r.du_norm), _fmt(r.grad_norm), r.nnz, r.inner_iters])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        return [
            {
                "k": int(row["k"]),
                "F": float(row["F"]),
                "du_norm": float(row["du_norm"]),
                "gradH_norm": float(row["gradH_norm"]),
                "nnz": int(row["nnz"]),
                "inner_iters": int(row["inner_iters"]),
            }
            for row in reader
        ]
