"""Gaussian-process regression over categorical configurations, plus expected improvement.

The kernel is ``signal_variance * exp(-hamming / lengthscale)`` on raw option indices.
Targets are standardized before fitting and predictions are mapped back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtr

from .space import Configuration

JITTER_START = 1e-10
JITTER_MAX = 1e-4


class GpError(RuntimeError):
    pass


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float = 1.0
    lengthscale: float = 1.0
    noise_variance: float = 1e-6

    def __post_init__(self) -> None:
        if self.signal_variance <= 0 or self.lengthscale <= 0:
            raise ValueError("signal_variance and lengthscale must be > 0")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")

    @classmethod
    def for_dimensions(cls, k: int) -> KernelParams:
        return cls(1.0, max(k, 1) / 4.0, 1e-6)


def _as_array(configs: Sequence[Configuration]) -> np.ndarray:
    return np.array([c.indices for c in configs], dtype=np.int64).reshape(len(configs), -1)


def hamming_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a[:, None, :] != b[None, :, :]).sum(axis=-1)


def kernel_value(a: Configuration, b: Configuration, p: KernelParams) -> float:
    if len(a) != len(b):
        raise ValueError("configurations belong to different spaces")
    d = sum(x != y for x, y in zip(a, b))
    return p.signal_variance * float(np.exp(-d / p.lengthscale))


def gram(inputs: np.ndarray, other: np.ndarray, p: KernelParams) -> np.ndarray:
    return p.signal_variance * np.exp(-hamming_matrix(inputs, other) / p.lengthscale)


@dataclass(frozen=True)
class GpModel:
    training_inputs: tuple[Configuration, ...]
    training_targets: np.ndarray  # standardized
    kernel: KernelParams
    factor: np.ndarray  # lower Cholesky factor of K + (noise + jitter) I
    alpha: np.ndarray
    target_mean: float
    target_std: float
    jitter: float
    X: np.ndarray


def fit(inputs: Sequence[Configuration], targets: Sequence[float], p: KernelParams) -> GpModel:
    if len(inputs) == 0 or len(inputs) != len(targets):
        raise ValueError("need at least one observation and one target per input")
    y = np.asarray(targets, dtype=float)
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    mean = float(y.mean())
    std = float(y.std())
    if len(y) == 1 or std == 0.0:
        mean, std = 0.0, 1.0
    z = (y - mean) / std
    X = _as_array(inputs)
    K = gram(X, X, p) + p.noise_variance * np.eye(len(y))
    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(len(y)))
            break
        except np.linalg.LinAlgError:
            jitter = JITTER_START if jitter == 0.0 else jitter * 10
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise GpError("kernel matrix is not positive definite even with maximal jitter") from None
    alpha = cho_solve((L, True), z)
    return GpModel(tuple(inputs), z, p, L, alpha, mean, std, jitter, X)


def predict(model: GpModel, configs: Sequence[Configuration]) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized posterior (mean, variance) of the latent function, in target units."""
    Xq = _as_array(configs)
    Ks = gram(model.X, Xq, model.kernel)
    mu = Ks.T @ model.alpha
    v = solve_triangular(model.factor, Ks, lower=True)
    var = model.kernel.signal_variance - np.sum(v * v, axis=0)
    var = np.maximum(var, 0.0)
    return mu * model.target_std + model.target_mean, var * model.target_std**2


def posterior(model: GpModel, c: Configuration) -> tuple[float, float]:
    mean, var = predict(model, [c])
    return float(mean[0]), float(var[0])


def expected_improvement(mean, variance, best_so_far):
    """Closed-form EI for minimization; accepts scalars or arrays."""
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    improve = best_so_far - mean
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = np.where(sigma > 0, improve / np.where(sigma > 0, sigma, 1.0), 0.0)
        pdf = np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)
    ei = np.where(sigma > 0, improve * ndtr(z) + sigma * pdf, np.maximum(improve, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei
