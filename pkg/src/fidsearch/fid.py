"""Gaussian summaries and the Frechet distance between feature sets.

The distance between two Gaussians (m1, C1) and (m2, C2) is

    ||m1 - m2||^2 + Tr(C1 + C2 - 2 (C1 C2)^(1/2))

The cross term is evaluated through the symmetric sandwich
``C1^(1/2) C2 C1^(1/2)``, whose eigenvalues are real and equal those of
``C1 C2``; this avoids a general matrix square root of a nonsymmetric
product. Round-off negatives are clamped to zero, and rank-deficient
covariance pairs fall back to a small diagonal regularization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

# Relative elementwise tolerance for "symmetric" checks.
SYMMETRY_RTOL = 1e-9


@dataclass(eq=False)
class GaussianStats:
    """Mean vector, covariance matrix, and sample count of a feature set.

    Construction enforces shape consistency, symmetry of ``cov`` within
    tolerance, and ``count >= 2`` (an unbiased covariance needs two rows).
    Positive semi-definiteness up to round-off is a property of every
    instance produced by :func:`summarize`; ``validate_psd`` checks it
    explicitly where the O(d^3) cost is acceptable.
    """

    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = self.mean.shape[0]
        if self.cov.shape != (d, d):
            raise ValidationError(
                f"covariance shape {self.cov.shape} does not match mean dimension {d}"
            )
        if self.count < 2:
            raise ValidationError(f"count must be >= 2, got {self.count}")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.cov))):
            raise ValidationError("non-finite value in mean or covariance")
        _check_symmetric(self.cov, what="covariance")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def validate_psd(self, rtol: float = 1e-6) -> None:
        """Raise unless min eigenvalue >= -rtol * trace/d."""
        d = self.dim
        floor = -rtol * max(np.trace(self.cov) / d, np.finfo(np.float64).tiny)
        lo = float(np.linalg.eigvalsh(self.cov)[0])
        if lo < floor:
            raise ValidationError(f"covariance is not PSD: min eigenvalue {lo:g}")


def _check_symmetric(a: np.ndarray, what: str = "matrix") -> None:
    scale = np.maximum(1.0, np.abs(a))
    gap = np.abs(a - a.T)
    if np.any(gap > SYMMETRY_RTOL * scale):
        i, j = np.unravel_index(np.argmax(gap / scale), a.shape)
        raise ValidationError(f"{what} is asymmetric at ({i},{j}): {a[i, j]!r} vs {a[j, i]!r}")


def summarize(rows: np.ndarray) -> GaussianStats:
    """Column-wise mean and unbiased (n-1) sample covariance of *rows*.

    The covariance is symmetrized as (C + C^T)/2 to remove round-off
    asymmetry from the outer-product accumulation.

    Raises:
        ValidationError: fewer than 2 rows, or non-finite input.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2:
        raise ValidationError(f"expected an n x d matrix, got shape {rows.shape}")
    n, _ = rows.shape
    if n < 2:
        raise ValidationError(f"need at least 2 rows to summarize, got {n}")
    if not np.all(np.isfinite(rows)):
        raise ValidationError("non-finite value in input rows")
    mean = rows.mean(axis=0)
    centered = rows - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, cov=cov, count=n)


def sqrt_psd(a: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues below zero (round-off) are clamped before the square root,
    so the result is always real and PSD.
    """
    w, v = np.linalg.eigh(a)
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


def trace_sqrt_product(a: np.ndarray, b: np.ndarray) -> float:
    """Tr((a b)^(1/2)) for symmetric PSD *a* and *b*.

    Computed as the sum of square roots of the eigenvalues of the
    symmetric matrix a^(1/2) b a^(1/2), which shares its spectrum with
    a b. Negative eigenvalues from round-off are clamped to zero.

    Raises:
        ValidationError: dimension mismatch or asymmetry beyond tolerance.
        numpy.linalg.LinAlgError: eigendecomposition failure.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    _check_symmetric(a, what="first matrix")
    _check_symmetric(b, what="second matrix")
    a_half = sqrt_psd(a)
    return _trace_sqrt_sandwich(a_half, b)


def _trace_sqrt_sandwich(a_half: np.ndarray, b: np.ndarray) -> float:
    m = a_half @ b @ a_half
    m = (m + m.T) / 2.0
    lam = np.linalg.eigvalsh(m)
    return float(np.sqrt(np.clip(lam, 0.0, None)).sum())


def fid(s: GaussianStats, t: GaussianStats) -> float:
    """Frechet distance between the Gaussians *s* and *t*.

    Returns ``||mu_s - mu_t||^2 + Tr(C_s) + Tr(C_t) - 2 Tr((C_s C_t)^(1/2))``,
    clamped to be non-negative. If the unregularized evaluation is
    non-finite or negative beyond round-off tolerance (rank-deficient
    covariances), both covariances are re-evaluated with ``eps * I`` added,
    where eps is 1e-6 times the mean diagonal entry of the pair.

    Raises:
        ValidationError: dimension mismatch.
    """
    if s.dim != t.dim:
        raise ValidationError(f"dimension mismatch: {s.dim} vs {t.dim}")
    trace_s = float(np.trace(s.cov))
    trace_t = float(np.trace(t.cov))
    tol = 1e-8 * max(1.0, trace_s + trace_t)
    try:
        value = _fid_value(s.mean, s.cov, t.mean, t.cov)
    except np.linalg.LinAlgError:
        value = -np.inf
    if not np.isfinite(value) or value < -tol:
        eps = 1e-6 * (trace_s + trace_t) / (2 * s.dim)
        eye = eps * np.eye(s.dim)
        value = _fid_value(s.mean, s.cov + eye, t.mean, t.cov + eye)
    return max(value, 0.0)


def _fid_value(mean_s, cov_s, mean_t, cov_t) -> float:
    diff = mean_s - mean_t
    cross = _trace_sqrt_sandwich(sqrt_psd(cov_s), cov_t)
    return float(diff @ diff + np.trace(cov_s) + np.trace(cov_t) - 2.0 * cross)
