"""Distance covariance and distance correlation (biased V-statistic estimator).

The sample distance covariance of paired samples X, Y is the square root of
mean(A * B), where A and B are the double-centered Euclidean distance
matrices of X and Y.  Distance correlation normalizes it by the geometric
mean of the two distance variances.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import AlignmentError, DegenerateInputError, ValidationError
from .repstore import RepresentationSet

DEFAULT_MAX_N = 20_000
BLOCK_ROWS = 1024


def _samples(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValidationError(f"{name} must be a vector or an n x d matrix, got shape {X.shape}")
    if X.shape[0] < 2:
        raise ValidationError(f"{name} needs at least 2 samples")
    if not np.all(np.isfinite(X)):
        raise ValidationError(f"{name} contains non-finite values")
    return X


def distance_matrix(X) -> np.ndarray:
    """Pairwise Euclidean distances between the rows of ``X``."""
    X = _samples(X)
    n = X.shape[0]
    D = np.empty((n, n))
    for start in range(0, n, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, n)
        D[start:stop] = cdist(X[start:stop], X)
    # cdist is not guaranteed to be bit-symmetric across blocks
    D = np.triu(D, 1)
    return D + D.T


@dataclass(frozen=True, eq=False)
class CenteredDistanceMatrix:
    values: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def double_center(D) -> CenteredDistanceMatrix:
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValidationError(f"distance matrix must be square, got shape {D.shape}")
    scale = float(np.max(np.abs(D))) if D.size else 0.0
    tol = 1e-12 * max(scale, 1.0)
    if np.max(np.abs(D - D.T)) > tol:
        raise ValidationError("distance matrix is not symmetric")
    if np.max(np.abs(np.diag(D))) > tol:
        raise ValidationError("distance matrix has a nonzero diagonal")
    row = D.mean(axis=1)
    col = D.mean(axis=0)
    grand = row.mean()
    return CenteredDistanceMatrix(D - row[:, None] - col[None, :] + grand)


def centered_distances(X) -> CenteredDistanceMatrix:
    return double_center(distance_matrix(X))


def _dcov_sq(A: CenteredDistanceMatrix, B: CenteredDistanceMatrix) -> float:
    if A.n != B.n:
        raise ValidationError(f"sample count mismatch: {A.n} vs {B.n}")
    # row-block partial sums reduced in a fixed order
    partial = [np.sum(A.values[s:s + BLOCK_ROWS] * B.values[s:s + BLOCK_ROWS])
               for s in range(0, A.n, BLOCK_ROWS)]
    return max(0.0, float(np.sum(partial)) / (A.n * A.n))


def _check_rows(X, Y) -> tuple[np.ndarray, np.ndarray]:
    X, Y = _samples(X, "X"), _samples(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ValidationError(f"row-count mismatch: {X.shape[0]} vs {Y.shape[0]}")
    return X, Y


def dcov(X, Y) -> float:
    X, Y = _check_rows(X, Y)
    return float(np.sqrt(_dcov_sq(centered_distances(X), centered_distances(Y))))


def _dcorr_centered(A: CenteredDistanceMatrix, B: CenteredDistanceMatrix,
                    var_a: float, var_b: float) -> float:
    if var_a == 0 or var_b == 0:
        raise DegenerateInputError("distance correlation undefined: one input is constant")
    value = np.sqrt(_dcov_sq(A, B)) / np.sqrt(var_a * var_b)
    return float(np.clip(value, 0.0, 1.0))


def dcorr(X, Y) -> float:
    X, Y = _check_rows(X, Y)
    A, B = centered_distances(X), centered_distances(Y)
    var_a = float(np.sqrt(_dcov_sq(A, A)))
    var_b = float(np.sqrt(_dcov_sq(B, B)))
    return _dcorr_centered(A, B, var_a, var_b)


@dataclass(frozen=True, eq=False)
class DcorrMatrix:
    labels: tuple[str, ...]
    values: np.ndarray
    n: int
    subsample: dict | None = field(default=None)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "values": [[float(v) for v in row] for row in self.values],
            "n": self.n,
            "subsample": self.subsample,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_tsv(self) -> str:
        lines = ["\t".join(self.labels)]
        lines += ["\t".join(repr(float(v)) for v in row) for row in self.values]
        return "\n".join(lines) + "\n"


def subsample_index(n: int, max_n: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    return np.sort(rng.choice(n, size=max_n, replace=False))


def dcorr_matrix(sets: Sequence[RepresentationSet], labels: Sequence[str] | None = None,
                 max_n: int = DEFAULT_MAX_N, seed: int | None = None) -> DcorrMatrix:
    """Pairwise distance correlations between representation sets of the same items.

    Sets larger than ``max_n`` rows are rejected unless ``seed`` is given, in
    which case the same seeded row subsample is used for every set.
    """
    sets = list(sets)
    if not sets:
        raise ValidationError("need at least one representation set")
    labels = tuple(labels) if labels is not None else tuple(s.name for s in sets)
    if len(labels) != len(sets):
        raise ValidationError(f"{len(labels)} labels for {len(sets)} sets")
    ref = sets[0]
    for s in sets[1:]:
        if s.ids != ref.ids:
            raise AlignmentError(f"{s.name} does not share the id order of {ref.name}")
    n = ref.n
    index = None
    subsample = None
    if n > max_n:
        if seed is None:
            raise ValidationError(f"n={n} exceeds max_n={max_n}; pass a seed to subsample")
        index = subsample_index(n, max_n, seed)
        subsample = {"from_n": n, "n": int(max_n), "seed": int(seed), "generator": "numpy.random.Philox"}
        n = max_n

    centered, spreads = [], []
    for s in sets:
        X = s.vectors if index is None else s.vectors[index]
        A = centered_distances(X)
        var = float(np.sqrt(_dcov_sq(A, A)))
        if var == 0:
            raise DegenerateInputError(f"{s.name}: all vectors identical")
        centered.append(A)
        spreads.append(var)

    m = len(sets)
    values = np.eye(m)
    for i in range(m):
        for j in range(i + 1, m):
            values[i, j] = values[j, i] = _dcorr_centered(centered[i], centered[j], spreads[i], spreads[j])
    return DcorrMatrix(labels, values, n, subsample)
