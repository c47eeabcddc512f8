"""Experiment assembly for the three applications: kernel regression, kernel
classification and image deblurring.

`run_experiment` builds B, D and psi from an `ExperimentConfig`, runs the
chosen solver and writes ``trace.csv``, ``result.json`` and (deblurring)
``restored.pgm`` into the output directory.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data_io
from .fidelity import DomainError, PoissonKL, SquaredHinge, SquaredLoss
from .linops import (
    IdentityOp,
    MatrixOp,
    dct_framelet_operator,
    first_difference_operator,
    gaussian_kernel_matrix,
    motion_blur_operator,
)
from .solver_l0 import ErrorSequence, L0Config, L0State, solve_l0
from .solver_l1 import L1Config, L1State, solve_l1_general, solve_l1_identity
from .trace import write_trace_csv

logger = logging.getLogger(__name__)

TASKS = ("regress", "classify", "deblur")
MODELS = ("l0", "l1-identity", "l1-tf", "l1-tv")

EXIT_CONVERGED = 0
EXIT_ERROR = 1
EXIT_CAPPED = 2

# per-task defaults: stopping tolerance, outer cap, kernel width
TASK_DEFAULTS = {
    "regress": dict(tol=1e-6, max_outer=100_000, kernel_sigma=math.sqrt(10.0), p=1.0),
    "classify": dict(tol=1e-4, max_outer=50_000, kernel_sigma=4.0, p=1.0),
    "deblur": dict(tol=1e-5, max_outer=2000, kernel_sigma=None, p=0.1),
}

# parameter ranges explored in the reference experiments; leaving them only warns
PARAM_RANGES = {
    ("regress", "lam"): (1e-7, 1e-2),
    ("regress", "gamma"): (1e-7, 1e-3),
    ("regress", "p"): (1e-1, 1e3),
    ("classify", "lam"): (1e-3, 5.0),
    ("classify", "gamma"): (1e-6, 1.0),
    ("classify", "p"): (1.0, 100.0),
    ("deblur", "lam"): (1e-3, 2.0),
    ("deblur", "gamma"): (1e-2, 10.0),
    ("deblur", "p"): (1e-4, 1.0),
}


class ParameterRangeWarning(UserWarning):
    pass


@dataclass
class ExperimentConfig:
    """Flat experiment description; keys mirror the solver config names.

    Unset solver fields (None) take the task defaults.
    """

    task: str
    model: str = "l0"
    lam: float = 1e-3
    gamma: float | None = None  # None: lam / 2
    alpha: float = 0.99
    rho_prime: float | None = None
    p: float | None = None
    q: float | None = None
    p1: float | None = None
    q1: float | None = None
    error_kind: str | None = None
    M: float | None = None
    tol: float | None = None
    max_outer: int | None = None
    max_inner: int = 100_000
    seed: int = 0
    out: str = "out"
    # regression / classification data
    data_path: str | None = None  # libsvm
    test_path: str | None = None
    idx_images: str | None = None
    idx_labels: str | None = None
    digits: tuple = (7, 9)  # first digit -> +1, second -> -1
    n_train: int | None = None
    n_test: int | None = None
    kernel_sigma: float | None = None
    # deblurring
    image_path: str | None = None
    image_size: int = 64
    noise: str = "gaussian"
    sigma: float = 3.0
    peak: float = 255.0
    blur_length: int = 9
    blur_angle: float = 45.0
    framelet_block: int = 7

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.task == "deblur" and self.model == "l1-identity":
            raise ValueError("deblurring uses l0, l1-tf or l1-tv")
        if self.task != "deblur" and self.model in ("l1-tf", "l1-tv"):
            raise ValueError(f"model {self.model} applies only to deblurring")
        if self.noise not in ("gaussian", "poisson"):
            raise ValueError("noise must be 'gaussian' or 'poisson'")
        for name in ("lam", "gamma", "p", "q", "p1", "q1", "M", "tol", "kernel_sigma", "peak"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.digits = tuple(self.digits)

    # -- resolved settings -------------------------------------------------

    def resolved(self, name):
        val = getattr(self, name, None)
        if val is not None:
            return val
        if name == "gamma":
            return self.lam / 2.0
        return TASK_DEFAULTS[self.task][name]

    def error_sequence(self):
        if self.task != "deblur":
            kind, M = "inverse_square", 1e16
        elif self.noise == "poisson":
            kind, M = "inverse_power", 1e8
        elif self.model == "l0":
            kind, M = "inverse_square", 1e6
        else:
            kind, M = "inverse_square", 1e8 if self.model == "l1-tf" else 1e7
        return ErrorSequence(kind=self.error_kind or kind, M=self.M if self.M is not None else M)

    def check_ranges(self):
        """Warn about parameters outside the ranges explored in the reference experiments."""
        for (task, name), (lo, hi) in PARAM_RANGES.items():
            if task != self.task or (name == "gamma" and self.model != "l0"):
                continue
            val = self.resolved(name)
            if not lo <= val <= hi:
                warnings.warn(
                    f"{name}={val:g} lies outside the usual range [{lo:g}, {hi:g}] for {task}",
                    ParameterRangeWarning,
                    stacklevel=2,
                )
        if self.model == "l0" and self.alpha >= 1:
            warnings.warn("alpha >= 1: monotone descent is not guaranteed", ParameterRangeWarning, stacklevel=2)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        return cls(**d)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["digits"] = list(self.digits)
        return d


# --------------------------------------------------------------------------
# prediction


def kernel_expansion(v, train_points, sigma, x):
    """``sum_j v_j K(x_j, x)`` for one point or a batch of points."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1 and np.asarray(train_points).ndim == 2
    Kx = gaussian_kernel_matrix(train_points, sigma, centers=np.atleast_2d(x) if single else x).to_dense()
    out = Kx @ np.asarray(v, dtype=float)
    return float(out[0]) if single else out


def predict_regression(v, train_points, sigma, x):
    return kernel_expansion(v, train_points, sigma, x)


def predict_classification(v, train_points, sigma, x):
    """Sign of the kernel expansion with sign(0) = +1."""
    s = kernel_expansion(v, train_points, sigma, x)
    labels = np.where(np.asarray(s) >= 0, 1.0, -1.0)
    return float(labels) if np.ndim(s) == 0 else labels


# --------------------------------------------------------------------------
# data


def synthetic_regression(seed, n=150, d=6, noise=0.05):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    y = np.sin(X.sum(axis=1)) + noise * rng.standard_normal(n)
    return data_io.LabeledDataset(X, y)


def synthetic_clusters(seed, n=40, d=2, sep=3.0):
    """Two Gaussian clusters at +-sep/sqrt(d) per axis, labels +1 / -1, linearly separable."""
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    center = np.full(d, sep / math.sqrt(d))
    X = y[:, None] * center + 0.3 * rng.standard_normal((n, d))
    return data_io.LabeledDataset(X, y)


def synthetic_image(size=64):
    """Piecewise-constant test image with rectangles and a disc, values in [30, 220]."""
    img = np.full((size, size), 60.0)
    s = size / 64.0
    img[int(8 * s) : int(30 * s), int(6 * s) : int(40 * s)] = 200.0
    img[int(36 * s) : int(58 * s), int(30 * s) : int(56 * s)] = 120.0
    yy, xx = np.mgrid[0:size, 0:size]
    disc = (yy - 44 * s) ** 2 + (xx - 16 * s) ** 2 <= (10 * s) ** 2
    img[disc] = 220.0
    img[int(14 * s) : int(22 * s), int(44 * s) : int(58 * s)] = 30.0
    return img


@dataclass
class SparseRecoveryInstance:
    B: np.ndarray
    x_true: np.ndarray
    y: np.ndarray

    @property
    def support(self):
        return np.flatnonzero(self.x_true)


def sparse_recovery_instance(seed=0, m=40, n=20, k=5, amplitude=0.3, noise=0.01):
    """``y = B x + noise`` with Gaussian ``B`` (n x m, entries N(0, 1/n)) and a k-sparse ``x``.

    Nonzero magnitudes are uniform in ``[amplitude, 2 amplitude]`` with random signs.
    """
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, m)) / math.sqrt(n)
    x = np.zeros(m)
    idx = np.sort(rng.choice(m, k, replace=False))
    x[idx] = rng.choice([-1.0, 1.0], k) * amplitude * rng.uniform(1.0, 2.0, k)
    y = B @ x + noise * rng.standard_normal(n)
    return SparseRecoveryInstance(B=B, x_true=x, y=y)


def _binary_digits(data, digits):
    keep = np.isin(data.labels, digits)
    labels = np.where(data.labels[keep] == digits[0], 1.0, -1.0)
    return data_io.LabeledDataset(data.features[keep], labels)


def load_supervised(cfg):
    """Return (train, test) datasets for regression or classification."""
    if cfg.idx_images:
        data = _binary_digits(data_io.read_idx(cfg.idx_images, cfg.idx_labels), cfg.digits)
    elif cfg.data_path:
        data = data_io.read_libsvm(cfg.data_path)
    elif cfg.task == "regress":
        data = synthetic_regression(cfg.seed)
    else:
        data = synthetic_clusters(cfg.seed)
    if cfg.test_path:
        test = data_io.read_libsvm(cfg.test_path, dim=data.dim)
        train = data if cfg.n_train is None else data.subset(slice(0, cfg.n_train))
        return train, test
    n_train = cfg.n_train if cfg.n_train is not None else (2 * len(data)) // 3
    tr, te = data_io.shuffle_split(len(data), min(n_train, len(data)), cfg.seed)
    if cfg.n_test is not None:
        te = te[: cfg.n_test]
    return data.subset(tr), data.subset(te)


# --------------------------------------------------------------------------
# runs


@dataclass
class RunOutcome:
    result: object
    metrics: dict
    sparse: np.ndarray
    restored: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def _l0_config(cfg, **extra):
    return L0Config(
        lam=cfg.lam,
        gamma=cfg.resolved("gamma"),
        alpha=cfg.alpha,
        rho_prime=cfg.rho_prime,
        p=cfg.resolved("p"),
        q=cfg.q,
        error_seq=cfg.error_sequence(),
        outer_tol=cfg.resolved("tol"),
        max_outer=cfg.resolved("max_outer"),
        max_inner=cfg.max_inner,
        **extra,
    )


def _l1_config(cfg, **extra):
    return L1Config(
        lam=cfg.lam,
        p=cfg.resolved("p"),
        q=cfg.q,
        p1=cfg.p1,
        q1=cfg.q1,
        error_seq=cfg.error_sequence(),
        tol=cfg.resolved("tol"),
        max_outer=cfg.resolved("max_outer"),
        max_inner=cfg.max_inner,
        **extra,
    )


def _run_kernel_task(cfg):
    train, test = load_supervised(cfg)
    sigma = cfg.resolved("kernel_sigma")
    K = gaussian_kernel_matrix(train.features, sigma).to_dense()
    m = len(train)
    if cfg.task == "regress":
        B, f = MatrixOp(K), SquaredLoss(train.labels)
    else:
        if not np.all(np.isin(train.labels, (-1.0, 1.0))):
            raise ValueError("classification labels must be -1 or +1")
        B, f = MatrixOp(train.labels[:, None] * K), SquaredHinge(np.ones(m))
    if cfg.model == "l0":
        res = solve_l0(B, IdentityOp(m), f, _l0_config(cfg))
        coef = res.state.u  # D = I: the sparse variable carries the expansion
    else:
        res = solve_l1_identity(B, f, _l1_config(cfg))
        coef = res.state.v
    if cfg.task == "regress":
        tr_pred = K @ coef
        te_pred = predict_regression(coef, train.features, sigma, test.features) if len(test) else np.zeros(0)
        metrics = {"train_mse": data_io.mse(tr_pred, train.labels)}
        if len(test):
            metrics["test_mse"] = data_io.mse(te_pred, test.labels)
    else:
        tr_pred = np.where(K @ coef >= 0, 1.0, -1.0)
        metrics = {"train_accuracy": data_io.accuracy(tr_pred, train.labels)}
        if len(test):
            te_pred = predict_classification(coef, train.features, sigma, test.features)
            metrics["test_accuracy"] = data_io.accuracy(te_pred, test.labels)
    return RunOutcome(result=res, metrics=metrics, sparse=coef)


def deblur_problem(cfg):
    """Clean image, observed image, blur operator and fidelity for a deblurring config."""
    if cfg.image_path:
        clean = data_io.read_pgm(cfg.image_path)
    else:
        clean = synthetic_image(cfg.image_size)
    h, w = clean.shape
    B = motion_blur_operator(cfg.blur_length, cfg.blur_angle, w, h)
    if cfg.noise == "gaussian":
        observed = data_io.add_gaussian_noise(B.apply(clean.ravel()), cfg.sigma, cfg.seed)
        f = SquaredLoss(observed)
    else:
        top = clean.max()
        if top > 0:
            clean = clean * (cfg.peak / top)
        observed = data_io.sample_poisson(B.apply(clean.ravel()), cfg.seed)
        f = PoissonKL(observed)
    return clean, observed.reshape(h, w), B, f


def _run_deblur(cfg):
    clean, observed, B, f = deblur_problem(cfg)
    h, w = clean.shape
    x0 = observed.ravel().copy()
    if cfg.noise == "poisson":
        # keep B v inside the domain of the Poisson term at the start
        x0 = np.maximum(x0, 1.0)
    b_norm = 2.0  # normalized blur: ||B||_2 <= 1, so (1 + 1e-6) * 4 / p is a valid q
    if cfg.model == "l0":
        D = dct_framelet_operator(w, h, cfg.framelet_block)
        init = L0State(u=D.apply(x0), v=x0, w=np.zeros(B.out_dim))
        res = solve_l0(B, D, f, _l0_config(cfg, stop_on="v", b_norm=b_norm, record_support=False), init=init)
        v, sparse = res.state.v, res.state.u
    else:
        if cfg.model == "l1-tf":
            D, d_norm = dct_framelet_operator(w, h, cfg.framelet_block), 1.0
        else:
            D, d_norm = first_difference_operator(w, h), math.sqrt(8.0)
        init = L1State(v=x0, w=np.zeros(D.out_dim), z=np.zeros(B.out_dim))
        res = solve_l1_general(B, D, f, _l1_config(cfg, b_norm=b_norm, d_norm=d_norm), init=init)
        v = res.state.v
        sparse = D.apply(v)
    restored = v.reshape(h, w)
    metrics = {
        "psnr": data_io.psnr(clean, restored),
        "psnr_observed": data_io.psnr(clean, observed),
    }
    return RunOutcome(result=res, metrics=metrics, sparse=sparse, restored=restored)


def solve_experiment(cfg):
    """Assemble and solve without touching the file system."""
    cfg.check_ranges()
    if cfg.task == "deblur":
        return _run_deblur(cfg)
    return _run_kernel_task(cfg)


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


def run_experiment(cfg):
    """Run one experiment and write its artifacts into ``cfg.out``.

    Returns the process exit code: 0 when the solver converged, 2 when it
    stopped at the iteration cap, 1 on any error.
    """
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        outcome = solve_experiment(cfg)
        wall_ms = (time.perf_counter() - t0) * 1e3
    except (OSError, ValueError) as exc:  # FormatError and DomainError are ValueErrors
        kind = "domain error" if isinstance(exc, DomainError) else "error"
        logger.error("%s: %s", kind, exc)
        return EXIT_ERROR
    res = outcome.result
    write_trace_csv(out / "trace.csv", res.trace)
    summary = {
        "task": cfg.task,
        "model": cfg.model,
        "converged": bool(res.converged),
        "iterations": int(res.iterations),
        "nnz": data_io.nnz(outcome.sparse),
        "final_F": float(res.trace[-1].F),
        "monotone": bool(res.monotone) if cfg.model == "l0" else None,
        "inner_capped": bool(res.inner_capped),
        "wall_ms": round(wall_ms, 3),
        "config": cfg.to_dict(),
    }
    summary.update({k: _json_safe(float(v)) for k, v in outcome.metrics.items()})
    with open(out / "result.json", "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if outcome.restored is not None:
        data_io.write_pgm(outcome.restored, out / "restored.pgm")
    logger.info("%s/%s: %s", cfg.task, cfg.model, {k: summary[k] for k in outcome.metrics})
    return EXIT_CONVERGED if res.converged else EXIT_CAPPED
