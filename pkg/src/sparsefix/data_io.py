"""Dataset readers, PGM image I/O, noise synthesis and evaluation metrics."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FormatError",
    "LabeledDataset",
    "read_libsvm",
    "write_libsvm",
    "read_idx",
    "write_idx",
    "read_pgm",
    "write_pgm",
    "add_gaussian_noise",
    "sample_poisson",
    "shuffle_split",
    "mse",
    "accuracy",
    "nnz",
    "psnr",
]

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class FormatError(ValueError):
    """Malformed, truncated or unsupported file content."""


@dataclass
class LabeledDataset:
    features: np.ndarray  # (N, d)
    labels: np.ndarray  # (N,)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=float)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")

    def __len__(self):
        return len(self.labels)

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, index):
        return LabeledDataset(self.features[index], self.labels[index])


# --------------------------------------------------------------------------
# libsvm


def read_libsvm(path, dim=None):
    """Read ``label idx:val ...`` lines with 1-based indices into dense rows.

    The feature dimension is the largest index seen unless `dim` is given.
    """
    labels, rows = [], []
    max_idx = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
                entries = {}
                for tok in parts[1:]:
                    i, val = tok.split(":")
                    i = int(i)
                    if i < 1:
                        raise ValueError(f"index {i} is not 1-based")
                    entries[i] = float(val)
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: malformed libsvm line ({exc})") from None
            labels.append(label)
            rows.append(entries)
            if entries:
                max_idx = max(max_idx, max(entries))
    d = max_idx if dim is None else dim
    if max_idx > d:
        raise FormatError(f"{path}: index {max_idx} exceeds dim={d}")
    X = np.zeros((len(rows), d))
    for r, entries in enumerate(rows):
        for i, val in entries.items():
            X[r, i - 1] = val
    return LabeledDataset(X, np.array(labels))


def write_libsvm(path, data):
    with open(path, "w") as fh:
        for x, y in zip(data.features, data.labels):
            items = " ".join(f"{i + 1}:{float(x[i])!r}" for i in np.flatnonzero(x))
            label = repr(float(y))
            fh.write(f"{label} {items}\n" if items else f"{label}\n")


# --------------------------------------------------------------------------
# IDX (MNIST)


def _read_idx_file(path, magic, ndim):
    with open(path, "rb") as fh:
        raw = fh.read()
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise FormatError(f"{path}: truncated IDX header")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise FormatError(f"{path}: bad magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = math.prod(dims)
    if len(raw) - header != size:
        raise FormatError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def read_idx(images_path, labels_path):
    """MNIST-style IDX pair -> features flattened and scaled to [0, 1]."""
    images = _read_idx_file(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx_file(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(f"image count {images.shape[0]} != label count {labels.shape[0]}")
    feats = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return LabeledDataset(feats, labels.astype(float))


def write_idx(images_path, labels_path, images, labels):
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    with open(images_path, "wb") as fh:
        fh.write(struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


# --------------------------------------------------------------------------
# PGM


def _pgm_tokens(raw, count):
    """Read `count` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PGM header")
        tokens.append(raw[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pgm(path):
    """Binary P5 grayscale with maxval 255 -> float array ``(height, width)``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens, offset = _pgm_tokens(raw, 4)
    if tokens[0] != b"P5":
        raise FormatError(f"{path}: unsupported PGM variant {tokens[0]!r}; only binary P5")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: maxval {maxval} unsupported; only 255")
    if width < 1 or height < 1:
        raise FormatError(f"{path}: empty image")
    data = raw[offset:]
    if len(data) < width * height:
        raise FormatError(f"{path}: truncated raster ({len(data)} of {width * height} bytes)")
    pix = np.frombuffer(data[: width * height], dtype=np.uint8)
    return pix.reshape(height, width).astype(float)


def write_pgm(img, path):
    """Write a 2-D array as P5; values are clamped to [0, 255] and rounded half away from zero."""
    img = np.asarray(img, dtype=float)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("image must be a non-empty 2-D array")
    clamped = np.clip(img, 0.0, 255.0)
    pix = np.floor(clamped + 0.5).astype(np.uint8)
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (width, height))
        fh.write(pix.tobytes())


# --------------------------------------------------------------------------
# noise


def add_gaussian_noise(img, sigma, seed):
    """``img + N(0, sigma^2)`` per pixel, unclamped; deterministic in `seed`."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    img = np.asarray(img, dtype=float)
    if sigma == 0:
        return img.copy()
    rng = np.random.default_rng(seed)
    return img + sigma * rng.standard_normal(img.shape)


def sample_poisson(img, seed):
    """Independent Poisson draw per pixel with the pixel value as mean."""
    img = np.asarray(img, dtype=float)
    if np.any(img < 0):
        raise ValueError("Poisson means must be nonnegative")
    rng = np.random.default_rng(seed)
    return rng.poisson(img).astype(float)


def shuffle_split(n, n_train, seed):
    """Seeded permutation of range(n) split into train and test indices."""
    if not 0 < n_train <= n:
        raise ValueError("n_train must lie in (0, n]")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


# --------------------------------------------------------------------------
# metrics


def _matched(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def mse(pred, truth):
    pred, truth = _matched(pred, truth)
    return float(np.mean((pred - truth) ** 2))


def accuracy(pred_labels, truth):
    pred_labels, truth = _matched(pred_labels, truth)
    return float(np.mean(pred_labels == truth))


def nnz(x):
    return int(np.count_nonzero(x))


def psnr(clean, restored):
    """``20 log10(255 sqrt(N) / ||clean - restored||)`` in dB; inf for identical images."""
    clean, restored = _matched(clean, restored)
    err = float(np.linalg.norm((clean - restored).ravel()))
    if err == 0.0:
        return math.inf
    return 20.0 * math.log10(255.0 * math.sqrt(clean.size) / err)
