"""Smooth convex data-fit terms psi with closed-form resolvents.

Each fidelity exposes ``value(z)``, ``gradient(z)`` and
``resolvent(z, q) = (I + q grad psi)^{-1}(z)``, all componentwise except for
the final sum in ``value``.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DomainError",
    "Fidelity",
    "SquaredLoss",
    "SquaredHinge",
    "PoissonKL",
    "make_fidelity",
    "psi_value",
    "psi_gradient",
    "psi_resolvent",
]

#: floor applied to Poisson resolvent outputs at zero-count pixels
POISSON_FLOOR = 1e-12


class DomainError(ValueError):
    """Argument outside the domain of the fidelity function."""


class Fidelity:
    kind = None

    def __init__(self, anchor):
        anchor = np.array(anchor, dtype=float).ravel()
        if not np.all(np.isfinite(anchor)):
            raise ValueError("anchor has non-finite entries")
        anchor.setflags(write=False)
        self.anchor = anchor

    @property
    def dim(self):
        return self.anchor.size

    def _check(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != self.anchor.shape:
            raise ValueError(f"expected vector of length {self.dim}, got shape {z.shape}")
        return z

    def value(self, z):
        raise NotImplementedError

    def gradient(self, z):
        raise NotImplementedError

    def resolvent(self, z, q):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class SquaredLoss(Fidelity):
    """``psi(z) = 0.5 * ||z - anchor||^2``."""

    kind = "squared_loss"

    def value(self, z):
        r = self._check(z) - self.anchor
        return 0.5 * float(r @ r)

    def gradient(self, z):
        return self._check(z) - self.anchor

    def resolvent(self, z, q):
        _check_q(q)
        return (self._check(z) + q * self.anchor) / (1.0 + q)


class SquaredHinge(Fidelity):
    """``psi(z) = 0.5 * sum(max(1 - z_j, 0)^2)``.

    Labels enter through the data operator (B = diag(y) K), so the anchor
    only fixes the dimension.
    """

    kind = "squared_hinge"

    def value(self, z):
        r = np.maximum(1.0 - self._check(z), 0.0)
        return 0.5 * float(r @ r)

    def gradient(self, z):
        return -np.maximum(1.0 - self._check(z), 0.0)

    def resolvent(self, z, q):
        _check_q(q)
        z = self._check(z)
        return np.where(z >= 1.0, z, (z + q) / (1.0 + q))


class PoissonKL(Fidelity):
    """``psi(z) = <z, 1> - <ln z, anchor>`` for nonnegative counts `anchor`.

    The domain is the open positive orthant. Entries with a zero count
    contribute the linear term ``z_i`` only; their resolvent is floored at
    `POISSON_FLOOR` so that it stays inside the domain.
    """

    kind = "poisson_kl"

    def __init__(self, anchor):
        super().__init__(anchor)
        if np.any(self.anchor < 0):
            raise ValueError("Poisson counts must be nonnegative")
        self._pos = self.anchor > 0

    def _check_domain(self, z):
        z = self._check(z)
        bad = ~(z > 0)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DomainError(f"Poisson fidelity needs z > 0 (index {i}, z={z[i]!r})")
        return z

    def value(self, z):
        z = self._check_domain(z)
        logs = np.zeros_like(z)
        np.log(z, out=logs, where=self._pos)
        return float(np.sum(z) - logs @ self.anchor)

    def gradient(self, z):
        z = self._check_domain(z)
        g = np.ones_like(z)
        np.subtract(1.0, self.anchor / np.where(self._pos, z, 1.0), out=g, where=self._pos)
        return g

    def resolvent(self, z, q):
        _check_q(q)
        z = self._check(z)
        b = z - q
        disc = np.sqrt(b * b + 4.0 * q * self.anchor)
        # positive root of w^2 + (q - z) w - q*anchor = 0, written to avoid cancellation
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(b >= 0, 0.5 * (b + disc), 2.0 * q * self.anchor / (disc - b))
        w = np.where(self._pos, w, np.maximum(b, POISSON_FLOOR))
        return w


def _check_q(q):
    if not q > 0 or not math.isfinite(q):
        raise ValueError("resolvent parameter q must be positive")


_KINDS = {cls.kind: cls for cls in (SquaredLoss, SquaredHinge, PoissonKL)}


def make_fidelity(kind, anchor):
    try:
        return _KINDS[kind](anchor)
    except KeyError:
        raise ValueError(f"unknown fidelity kind {kind!r}; choose from {sorted(_KINDS)}") from None


def psi_value(f, z):
    return f.value(z)


def psi_gradient(f, z):
    return f.gradient(z)


def psi_resolvent(f, z, q):
    return f.resolvent(z, q)
