"""L2-regularized logistic regression fitted by full-batch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class TrainingError(ValueError):
    """Training data cannot support a model (e.g. a single class)."""


def sigmoid(eta):
    """Numerically stable logistic function; accepts scalars or arrays."""
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    e = np.exp(eta[~pos])
    out[~pos] = e / (1.0 + e)
    return out if out.ndim else float(out)


def check_features(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"feature matrix must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    return X


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"labels must have shape ({n},), got {y.shape}")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return y.astype(float)


def oversample(X: np.ndarray, y: np.ndarray, rng) -> tuple[np.ndarray, np.ndarray]:
    """Duplicate random minority rows (with replacement) until classes balance."""
    n1 = int(y.sum())
    n0 = len(y) - n1
    if n0 == 0 or n1 == 0:
        raise TrainingError("single-class training data")
    if n0 == n1:
        return X, y
    minority = 1 if n1 < n0 else 0
    idx = np.flatnonzero(y == minority)
    extra = rng.choice(idx, size=abs(n0 - n1), replace=True)
    keep = np.concatenate([np.arange(len(y)), np.sort(extra)])
    return X[keep], y[keep]


def loss_and_grad(theta: np.ndarray, Z: np.ndarray, y: np.ndarray, l2: float):
    """Mean negative log-likelihood plus ``l2/2 * |beta|^2`` and its gradient.

    ``theta = [beta0, beta...]``; ``Z`` holds the (already standardized)
    features without an intercept column. The intercept is not penalized.
    """
    eta = theta[0] + Z @ theta[1:]
    n = len(y)
    loss = float(np.mean(np.logaddexp(0.0, eta) - y * eta)) + 0.5 * l2 * float(theta[1:] @ theta[1:])
    r = sigmoid(eta) - y
    g = np.empty_like(theta)
    g[0] = r.sum() / n
    g[1:] = Z.T @ r / n + l2 * theta[1:]
    return loss, g


@dataclass
class LogisticConfig:
    l2: float = 1e-4
    tol: float = 1e-6
    max_iter: int = 5000
    seed: int = 0
    resample: bool = True


@dataclass
class LogisticModel:
    feature_names: tuple
    mean: np.ndarray
    std: np.ndarray
    beta0: float
    beta: np.ndarray
    seed: int = 0
    iterations: int = 0
    final_loss: float = float("nan")
    converged: bool = False
    calibrator: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        k = len(self.feature_names)
        if not (self.beta.shape == self.mean.shape == self.std.shape == (k,)):
            raise ValueError("parameter lengths disagree with the feature schema")
        if not (np.isfinite(self.beta0) and np.all(np.isfinite(self.beta))):
            raise ValueError("non-finite model parameters")

    def decision(self, X) -> np.ndarray:
        Z = (check_features(X) - self.mean) / self.std
        return self.beta0 + Z @ self.beta

    def predict_raw(self, X) -> np.ndarray:
        return sigmoid(self.decision(X))

    def predict_proba(self, X) -> np.ndarray:
        """Calibrated probabilities when a calibrator is attached."""
        p = self.predict_raw(X)
        if self.calibrator is not None:
            p = self.calibrator.apply(p)
        return p

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(np.int8)


def train_logistic(X, y, cfg: LogisticConfig | None = None, feature_names=None) -> LogisticModel:
    """Fit by gradient descent with step ``1/L`` (``L`` the gradient Lipschitz bound)."""
    cfg = cfg or LogisticConfig()
    X = check_features(X)
    y = check_labels(y, X.shape[0])
    if feature_names is None:
        feature_names = tuple(f"x{k}" for k in range(X.shape[1]))
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    if y.min() == y.max():
        raise TrainingError("single-class training data")
    rng = np.random.default_rng(cfg.seed)
    Xr, yr = oversample(X, y, rng) if cfg.resample else (X, y)
    Z = (Xr - mean) / std

    n = len(yr)
    Za = np.hstack([np.ones((n, 1)), Z])
    lip = np.linalg.norm(Za, 2) ** 2 / (4.0 * n) + cfg.l2
    step = 1.0 / lip
    theta = np.zeros(Z.shape[1] + 1)
    loss, g = loss_and_grad(theta, Z, yr, cfg.l2)
    it = 0
    converged = False
    while it < cfg.max_iter:
        if np.linalg.norm(g) <= cfg.tol:
            converged = True
            break
        theta = theta - step * g
        loss, g = loss_and_grad(theta, Z, yr, cfg.l2)
        it += 1
    else:
        converged = bool(np.linalg.norm(g) <= cfg.tol)
    return LogisticModel(
        feature_names=tuple(feature_names), mean=mean, std=std, beta0=float(theta[0]),
        beta=theta[1:].copy(), seed=cfg.seed, iterations=it, final_loss=loss, converged=converged,
    )
