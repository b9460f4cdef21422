"""Cosine distance and the correlation statistics used by every evaluation."""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import DegenerateInputError, ValidationError


def _vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def _paired(x, y) -> tuple[np.ndarray, np.ndarray]:
    x, y = _vector(x, "x"), _vector(y, "y")
    if x.shape != y.shape:
        raise ValidationError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValidationError("need at least 2 observations")
    return x, y


def cosine_distance(t, v) -> float:
    """``1 - t.v / (|t| |v|)``, in [0, 2]."""
    t, v = _vector(t, "t"), _vector(v, "v")
    if t.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {t.size} vs {v.size}")
    nt, nv = np.linalg.norm(t), np.linalg.norm(v)
    if nt == 0 or nv == 0:
        raise DegenerateInputError("cosine distance undefined for a zero-norm vector")
    cos = float(np.sum(t * v) / (nt * nv))
    return 1.0 - min(1.0, max(-1.0, cos))


def unit_rows(matrix: np.ndarray, what: str = "row") -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0):
        raise DegenerateInputError(f"{what} {int(np.argmin(norms))} has zero norm")
    return matrix / norms[:, None]


def cosine_distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """All-pairs cosine distances between rows of ``a`` and rows of ``b``."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValidationError(f"incompatible shapes {a.shape} and {b.shape}")
    sims = unit_rows(a, "query row") @ unit_rows(b, "candidate row").T
    return 1.0 - np.clip(sims, -1.0, 1.0)


def paired_cosine_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise cosine distance between ``a[i]`` and ``b[i]``."""
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    sims = np.sum(unit_rows(a) * unit_rows(b), axis=1)
    return 1.0 - np.clip(sims, -1.0, 1.0)


def rank(x) -> np.ndarray:
    """1-based ranks; tied values share the average of the ranks they span."""
    x = _vector(x, "x")
    if x.size < 1:
        raise ValidationError("cannot rank an empty sequence")
    return rankdata(x, method="average").astype(np.float64)


def pearson(x, y) -> float:
    x, y = _paired(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInputError("pearson correlation undefined for a constant input")
    xc = x - x.mean()
    yc = y - y.mean()
    r = np.sum(xc * yc) / np.sqrt(np.sum(xc * xc) * np.sum(yc * yc))
    return float(np.clip(r, -1.0, 1.0))


def spearman(x, y) -> float:
    """Pearson correlation of the average-tie ranks."""
    x, y = _paired(x, y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInputError("spearman correlation undefined for a constant input")
    return pearson(rank(x), rank(y))
