"""Linear operators used as the data matrix B and the sparsifying transform D.

Every operator acts on flat 1-D float arrays. Image operators flatten a
``(height, width)`` array in row-major order.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import signal

__all__ = [
    "ConvergenceWarning",
    "LinearOp",
    "MatrixOp",
    "IdentityOp",
    "MotionBlurOp",
    "DCTFrameletOp",
    "FirstDifferenceOp",
    "gaussian_kernel_matrix",
    "motion_blur_kernel",
    "motion_blur_operator",
    "dct_framelet_operator",
    "first_difference_operator",
    "estimate_spectral_norm",
]


class ConvergenceWarning(UserWarning):
    """An iterative routine stopped on its iteration cap."""


class LinearOp:
    """Linear map from R^in_dim to R^out_dim given by `apply` and `adjoint`.

    Subclasses override `_apply` and `_adjoint`; the public methods check
    shapes. Instances are treated as immutable once built.
    """

    def __init__(self, in_dim, out_dim):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.in_dim,):
            raise ValueError(f"expected input of shape ({self.in_dim},), got {x.shape}")
        return self._apply(x)

    def adjoint(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.out_dim,):
            raise ValueError(f"expected input of shape ({self.out_dim},), got {y.shape}")
        return self._adjoint(y)

    def __call__(self, x):
        return self.apply(x)

    @property
    def T(self):
        return _AdjointOp(self)

    def to_dense(self):
        """Materialize the operator column by column (small operators only)."""
        cols = np.empty((self.out_dim, self.in_dim))
        e = np.zeros(self.in_dim)
        for j in range(self.in_dim):
            e[j] = 1.0
            cols[:, j] = self._apply(e)
            e[j] = 0.0
        return cols

    def __repr__(self):
        return f"{type(self).__name__}({self.out_dim}x{self.in_dim})"


class _AdjointOp(LinearOp):
    def __init__(self, op):
        super().__init__(op.out_dim, op.in_dim)
        self.op = op

    def _apply(self, x):
        return self.op._adjoint(x)

    def _adjoint(self, y):
        return self.op._apply(y)

    @property
    def T(self):
        return self.op


class MatrixOp(LinearOp):
    """Dense matrix operator."""

    def __init__(self, matrix):
        matrix = np.array(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("matrix must be 2-D")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("matrix has non-finite entries")
        super().__init__(matrix.shape[1], matrix.shape[0])
        self.matrix = matrix
        self.matrix.setflags(write=False)

    def _apply(self, x):
        return self.matrix @ x

    def _adjoint(self, y):
        return self.matrix.T @ y

    def to_dense(self):
        return np.array(self.matrix)


class IdentityOp(LinearOp):
    def __init__(self, n):
        super().__init__(n, n)

    def _apply(self, x):
        return x.copy()

    def _adjoint(self, y):
        return y.copy()


def gaussian_kernel_matrix(points, sigma, centers=None):
    """Gaussian kernel matrix ``exp(-|x_j - x_k|^2 / (2 sigma^2))``.

    With `centers` given, rows index `centers` and columns index `points`;
    otherwise the square matrix over `points` is returned. Returns a
    `MatrixOp`.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    X = _as_point_array(points)
    C = X if centers is None else _as_point_array(centers)
    if C.shape[1] != X.shape[1]:
        raise ValueError("points and centers have different dimensions")
    sq = (
        np.sum(C**2, axis=1)[:, None]
        + np.sum(X**2, axis=1)[None, :]
        - 2.0 * (C @ X.T)
    )
    np.maximum(sq, 0.0, out=sq)
    K = np.exp(-sq / (2.0 * sigma**2))
    if centers is None:
        # exact symmetry and unit diagonal regardless of rounding above
        K = np.triu(K, 1)
        K = K + K.T
        np.fill_diagonal(K, 1.0)
    return MatrixOp(K)


def _as_point_array(points):
    try:
        X = np.array(points, dtype=float)
    except ValueError as exc:
        raise ValueError("points do not share one dimension") from exc
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("points do not share one dimension")
    return X


# --------------------------------------------------------------------------
# motion blur


def motion_blur_kernel(length, angle):
    """Normalized line-segment kernel of the given length (pixels) and angle.

    The segment passes through the kernel center; each cell is weighted by
    ``max(0, 1 - dist)`` where dist is the distance from the cell center to
    the segment. Angle is in degrees, counter-clockwise from the +x axis with
    rows growing downwards.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if not 0 <= angle < 360:
        raise ValueError("angle must lie in [0, 360)")
    half = (length - 1) / 2.0
    theta = math.radians(angle)
    c, s = math.cos(theta), math.sin(theta)
    rx = int(math.ceil(abs(half * c) - 1e-9))
    ry = int(math.ceil(abs(half * s) - 1e-9))
    r = max(rx, ry)
    offs = np.arange(-r, r + 1, dtype=float)
    dx = offs[None, :]
    dy = -offs[:, None]
    t = dx * c + dy * s
    perp = np.abs(-dx * s + dy * c)
    over = np.maximum(np.abs(t) - half, 0.0)
    dist = np.hypot(perp, over)
    k = np.maximum(0.0, 1.0 - dist)
    k = 0.5 * (k + k[::-1, ::-1])
    k /= k.sum()
    # drop all-zero border rings so the support is tight
    while k.shape[0] > 1 and not k[0].any() and not k[-1].any() and not k[:, 0].any() and not k[:, -1].any():
        k = k[1:-1, 1:-1]
    return k


class MotionBlurOp(LinearOp):
    """2-D correlation with a blur kernel under symmetric boundary padding."""

    def __init__(self, kernel, img_w, img_h):
        kernel = np.asarray(kernel, dtype=float)
        if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] % 2 == 0:
            raise ValueError("kernel must be square with odd size")
        r = kernel.shape[0] // 2
        if r > min(img_w, img_h):
            raise ValueError("kernel larger than the image")
        super().__init__(img_w * img_h, img_w * img_h)
        self.kernel = kernel
        self.img_w, self.img_h, self.radius = img_w, img_h, r
        # numpy 'symmetric' mode mirrors with the edge sample repeated
        self._pad_rows = _selection_matrix(np.pad(np.arange(img_h), r, mode="symmetric"), img_h)
        self._pad_cols = _selection_matrix(np.pad(np.arange(img_w), r, mode="symmetric"), img_w)

    def _apply(self, x):
        img = x.reshape(self.img_h, self.img_w)
        padded = self._pad_rows @ img @ self._pad_cols.T
        out = signal.correlate2d(padded, self.kernel, mode="valid")
        return out.ravel()

    def _adjoint(self, y):
        img = y.reshape(self.img_h, self.img_w)
        spread = signal.convolve2d(img, self.kernel, mode="full")
        # fold contributions that landed in the padding back onto their source pixels
        return (self._pad_rows.T @ spread @ self._pad_cols).ravel()


def _selection_matrix(index, n):
    sel = np.zeros((len(index), n))
    sel[np.arange(len(index)), index] = 1.0
    return sel


def motion_blur_operator(length, angle, img_w, img_h):
    if length > min(img_w, img_h):
        raise ValueError("blur length exceeds the image size")
    return MotionBlurOp(motion_blur_kernel(length, angle), img_w, img_h)


# --------------------------------------------------------------------------
# tight frame


def _dct_basis(n):
    """Orthonormal DCT-II matrix; row i holds the i-th basis filter."""
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    C = np.cos(np.pi * (2 * j + 1) * k / (2 * n)) * math.sqrt(2.0 / n)
    C[0] /= math.sqrt(2.0)
    return C


def _circulant_bank(filters, n):
    """Stack of periodic correlation matrices, one n x n block per filter."""
    nf, width = filters.shape
    center = width // 2
    bank = np.zeros((nf, n, n))
    rows = np.arange(n)
    for tap in range(width):
        cols = (rows + tap - center) % n
        for f in range(nf):
            np.add.at(bank[f], (rows, cols), filters[f, tap])
    return bank.reshape(nf * n, n)


class DCTFrameletOp(LinearOp):
    """Undecimated DCT filter bank with periodic extension; D^T D = I.

    The output is laid out as ``(row_filter, col_filter, row, col)``
    flattened, so subband ``(0, 0)`` is the lowpass channel.
    """

    def __init__(self, img_w, img_h, block=7):
        if block % 2 == 0 or block < 3:
            raise ValueError("block must be odd and >= 3")
        if min(img_w, img_h) < block:
            raise ValueError("image smaller than the filter block")
        super().__init__(img_w * img_h, block * block * img_w * img_h)
        self.img_w, self.img_h, self.block = img_w, img_h, block
        filters = _dct_basis(block) / math.sqrt(block)
        self._Ah = _circulant_bank(filters, img_h)
        self._Aw = _circulant_bank(filters, img_w)

    def _apply(self, x):
        img = x.reshape(self.img_h, self.img_w)
        coef = self._Ah @ img @ self._Aw.T
        b, h, w = self.block, self.img_h, self.img_w
        return coef.reshape(b, h, b, w).transpose(0, 2, 1, 3).ravel()

    def _adjoint(self, y):
        b, h, w = self.block, self.img_h, self.img_w
        coef = y.reshape(b, b, h, w).transpose(0, 2, 1, 3).reshape(b * h, b * w)
        return (self._Ah.T @ coef @ self._Aw).ravel()

    def subbands(self, coefs):
        """View coefficients as ``(block, block, img_h, img_w)``."""
        return np.asarray(coefs).reshape(self.block, self.block, self.img_h, self.img_w)


def dct_framelet_operator(img_w, img_h, block=7):
    return DCTFrameletOp(img_w, img_h, block)


class FirstDifferenceOp(LinearOp):
    """Horizontal and vertical forward differences with periodic wrap."""

    def __init__(self, img_w, img_h):
        if img_w < 2 or img_h < 2:
            raise ValueError("image dimensions must be >= 2")
        super().__init__(img_w * img_h, 2 * img_w * img_h)
        self.img_w, self.img_h = img_w, img_h

    def _apply(self, x):
        img = x.reshape(self.img_h, self.img_w)
        dh = np.roll(img, -1, axis=1) - img
        dv = np.roll(img, -1, axis=0) - img
        return np.concatenate([dh.ravel(), dv.ravel()])

    def _adjoint(self, y):
        n = self.img_w * self.img_h
        dh = y[:n].reshape(self.img_h, self.img_w)
        dv = y[n:].reshape(self.img_h, self.img_w)
        out = (np.roll(dh, 1, axis=1) - dh) + (np.roll(dv, 1, axis=0) - dv)
        return out.ravel()


def first_difference_operator(img_w, img_h):
    return FirstDifferenceOp(img_w, img_h)


def estimate_spectral_norm(op, tol=1e-10, max_iter=10000, seed=0):
    """Largest singular value of `op` by power iteration on op^T op.

    The start vector is drawn from a fixed seed so repeated calls agree.
    Emits `ConvergenceWarning` and returns the last estimate when `max_iter`
    is reached before the relative change drops below `tol`.
    """
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.in_dim)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        y = op.adjoint(op.apply(x))
        lam_new = float(x @ y)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if lam_new > 0 and abs(lam_new - lam) <= tol * lam_new:
            return math.sqrt(lam_new)
        lam = lam_new
    warnings.warn(
        f"power iteration did not reach tol={tol} in {max_iter} steps",
        ConvergenceWarning,
        stacklevel=2,
    )
    return math.sqrt(max(lam, 0.0))
