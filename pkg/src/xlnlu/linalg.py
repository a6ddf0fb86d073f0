"""Dense linear-algebra helpers used by the alignment solver and the model.

Matrices are plain float64 numpy arrays; the helpers here add the shape and
finiteness checks the rest of the package relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError

LOG_VAR_MIN = -10.0
LOG_VAR_MAX = 10.0


def check_finite(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NumericError(f"{what} contains non-finite entries")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise NumericError(
            f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


@dataclass
class SvdResult:
    """Thin SVD: a = u @ diag(singular_values) @ v.T with orthonormal columns."""

    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray


def svd(a: np.ndarray) -> SvdResult:
    a = check_finite(a, "svd input")
    if a.ndim != 2 or min(a.shape) < 1:
        raise NumericError(f"svd expects a non-empty 2-d matrix, got {a.shape}")
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "svd did not converge within the LAPACK iteration cap") from exc
    return SvdResult(u=u, singular_values=s, v=vh.T)


def softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    """Numerically stable softmax (max-subtraction)."""
    v = check_finite(v, "softmax input")
    m = v.max(axis=axis, keepdims=True)
    e = np.exp(v - m)
    return e / e.sum(axis=axis, keepdims=True)


def gaussian_sample(mu: np.ndarray, log_var: np.ndarray,
                    rng: np.random.Generator) -> np.ndarray:
    """Reparameterized draw: mu + exp(0.5 * log_var) * eps, eps ~ N(0, I).

    log_var is clamped to [-10, 10] before exponentiation.
    """
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    if mu.shape != log_var.shape:
        raise NumericError(
            f"gaussian_sample length mismatch: {mu.shape} vs {log_var.shape}")
    lv = np.clip(log_var, LOG_VAR_MIN, LOG_VAR_MAX)
    eps = rng.standard_normal(mu.shape)
    return mu + np.exp(0.5 * lv) * eps


def orthogonality_error(w: np.ndarray) -> float:
    """Max-norm deviation of w.T @ w from the identity."""
    w = np.asarray(w, dtype=np.float64)
    k = w.shape[1]
    return float(np.abs(w.T @ w - np.eye(k)).max())


def random_orthogonal(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random orthogonal matrix via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))
