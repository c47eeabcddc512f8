"""Thresholding operators and support-set helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SupportSet",
    "hard_threshold",
    "soft_threshold",
    "support",
    "project_support",
]


@dataclass(frozen=True)
class SupportSet:
    """Sorted, duplicate-free 1-based indices of nonzero entries."""

    indices: tuple = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 1 for i in idx):
            raise ValueError("support indices are 1-based")
        if list(idx) != sorted(set(idx)):
            raise ValueError("support indices must be sorted and unique")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_mask(cls, mask):
        return cls(tuple((np.flatnonzero(mask) + 1).tolist()))

    def mask(self, n):
        if self.indices and self.indices[-1] > n:
            raise ValueError(f"support index {self.indices[-1]} exceeds length {n}")
        m = np.zeros(n, dtype=bool)
        m[np.asarray(self.indices, dtype=int) - 1] = True
        return m

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in self.indices


def hard_threshold(u, t):
    """Proximity operator of ``t * ||.||_0``.

    Entries with ``|u_i| > sqrt(2 t)`` are kept, all others are set to 0.
    At ``|u_i| == sqrt(2 t)`` both 0 and ``u_i`` are minimizers; 0 is
    returned.
    """
    if not t > 0:
        raise ValueError("threshold parameter t must be positive")
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) > math.sqrt(2.0 * t), u, 0.0)


def soft_threshold(y, s):
    """Proximity operator of ``s * ||.||_1``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - s, 0.0)


def support(x):
    return SupportSet.from_mask(np.asarray(x) != 0)


def project_support(x, C):
    """Keep entries of `x` indexed by `C` (1-based) and zero the rest."""
    x = np.asarray(x, dtype=float)
    if not isinstance(C, SupportSet):
        C = SupportSet(tuple(sorted(set(C))))
    return np.where(C.mask(x.size), x, 0.0)
