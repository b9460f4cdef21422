"""Regularized canonical correlation analysis between two paired spaces.

The fit centers both sides, adds a ridge of ``epsilon * mean(diag(C))`` to
each within-set covariance ``C``, whitens with the symmetric inverse square
root and takes the SVD of the whitened cross-covariance.  Singular values are
the canonical correlations; the whitened singular vectors mapped back through
the whitening matrices are the canonical directions.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, FormatError, NumericalRankError, ValidationError
from .repstore import PairedDataset, decode_matrix, encode_matrix

DEFAULT_EPSILON = 1e-4
MODEL_MAGIC = b"CCAM"
MODEL_VERSION = 1


@dataclass(frozen=True, eq=False)
class CcaModel:
    mean_a: np.ndarray
    mean_b: np.ndarray
    dirs_a: np.ndarray
    dirs_b: np.ndarray
    correlations: np.ndarray
    epsilon: float
    n_train: int = 0

    def __post_init__(self):
        for name in ("mean_a", "mean_b", "dirs_a", "dirs_b", "correlations"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        k = self.correlations.size
        if self.dirs_a.shape != (self.mean_a.size, k) or self.dirs_b.shape != (self.mean_b.size, k):
            raise ValidationError(
                f"inconsistent model shapes: dirs_a {self.dirs_a.shape}, dirs_b {self.dirs_b.shape}, k={k}"
            )

    @property
    def k(self) -> int:
        return self.correlations.size

    @property
    def dim_left(self) -> int:
        return self.mean_a.size

    @property
    def dim_right(self) -> int:
        return self.mean_b.size

    def summary(self) -> dict:
        return {
            "dim_left": self.dim_left,
            "dim_right": self.dim_right,
            "k": self.k,
            "epsilon": self.epsilon,
            "n_train": self.n_train,
            "correlations": [float(c) for c in self.correlations],
        }

    def to_bytes(self) -> bytes:
        """JSON header followed by four blocks in the binary representation layout."""
        header = json.dumps({"format": "repground.cca", "version": MODEL_VERSION, **self.summary()},
                            sort_keys=True, separators=(",", ":")).encode("utf-8")
        blocks = [
            encode_matrix(self.mean_a[None, :]),
            encode_matrix(self.mean_b[None, :]),
            encode_matrix(self.dirs_a),
            encode_matrix(self.dirs_b),
        ]
        return MODEL_MAGIC + struct.pack("<I", len(header)) + header + b"".join(blocks)

    @classmethod
    def from_bytes(cls, data: bytes, source: str = "<bytes>") -> "CcaModel":
        if data[:4] != MODEL_MAGIC or len(data) < 8:
            raise FormatError(f"{source}: not a CCA model file")
        (hlen,) = struct.unpack_from("<I", data, 4)
        try:
            header = json.loads(data[8:8 + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{source}: bad model header ({exc})") from exc
        if header.get("version") != MODEL_VERSION:
            raise FormatError(f"{source}: unsupported model version {header.get('version')}")
        offset = 8 + hlen
        mats = []
        for _ in range(4):
            m, offset = decode_matrix(data, offset, source)
            mats.append(m)
        if offset != len(data):
            raise FormatError(f"{source}: trailing bytes after model blocks")
        return cls(mats[0][0], mats[1][0], mats[2], mats[3], header["correlations"],
                   header["epsilon"], header.get("n_train", 0))


def save_model(model: CcaModel, path) -> None:
    Path(path).write_bytes(model.to_bytes())


def load_model(path) -> CcaModel:
    path = Path(path)
    return CcaModel.from_bytes(path.read_bytes(), str(path))


def _inv_sqrt(cov: np.ndarray, epsilon: float, side: str) -> np.ndarray:
    scale = float(np.mean(np.diag(cov)))
    if scale <= 0:
        raise DegenerateInputError(f"{side} side has zero variance")
    ridge = epsilon * scale
    evals, evecs = np.linalg.eigh(cov + ridge * np.eye(cov.shape[0]))
    if epsilon == 0:
        tol = evals.max() * cov.shape[0] * np.finfo(np.float64).eps
        if evals.min() <= tol:
            rank = int(np.sum(evals > tol))
            raise NumericalRankError(
                f"{side} covariance is singular (numerical rank {rank} of {cov.shape[0]}); "
                "use epsilon > 0"
            )
    evals = np.maximum(evals, ridge)
    return (evecs / np.sqrt(evals)) @ evecs.T


def fit_arrays(X, Y, epsilon: float = DEFAULT_EPSILON, k: int | None = None) -> CcaModel:
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValidationError(f"need two matrices with equal row counts, got {X.shape} and {Y.shape}")
    n, dx = X.shape
    dy = Y.shape[1]
    if n < 2:
        raise ValidationError("CCA needs at least 2 pairs")
    if not (epsilon >= 0 and np.isfinite(epsilon)):
        raise ValidationError(f"epsilon must be a finite number >= 0, got {epsilon}")
    kmax = min(dx, dy)
    if k is None:
        k = min(kmax, n - 1)
    if not 1 <= k <= kmax:
        raise ValidationError(f"k={k} outside [1, min(d_left, d_right)={kmax}]")

    mean_a = X.mean(axis=0)
    mean_b = Y.mean(axis=0)
    Xc = X - mean_a
    Yc = Y - mean_b
    cxx = Xc.T @ Xc / (n - 1)
    cyy = Yc.T @ Yc / (n - 1)
    cxy = Xc.T @ Yc / (n - 1)

    wx = _inv_sqrt(cxx, epsilon, "left")
    wy = _inv_sqrt(cyy, epsilon, "right")
    u, s, vt = np.linalg.svd(wx @ cxy @ wy, full_matrices=False)
    dirs_a = wx @ u[:, :k]
    dirs_b = wy @ vt[:k].T

    # largest-magnitude entry of each left direction is positive
    pivot = np.argmax(np.abs(dirs_a), axis=0)
    signs = np.where(dirs_a[pivot, np.arange(k)] < 0, -1.0, 1.0)
    dirs_a = dirs_a * signs
    dirs_b = dirs_b * signs

    return CcaModel(mean_a, mean_b, dirs_a, dirs_b, np.clip(s[:k], 0.0, 1.0), float(epsilon), n)


def fit(train: PairedDataset, epsilon: float = DEFAULT_EPSILON, k: int | None = None) -> CcaModel:
    """Fit CCA on ``train`` (left = text side, right = image side)."""
    return fit_arrays(train.left.vectors, train.right.vectors, epsilon, k)


def _project(x, mean, dirs, side) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != mean.size:
        raise ValidationError(f"{side} projection expects {mean.size} columns, got shape {x.shape}")
    return (x - mean) @ dirs


def project_left(model: CcaModel, x) -> np.ndarray:
    return _project(x, model.mean_a, model.dirs_a, "left")


def project_right(model: CcaModel, y) -> np.ndarray:
    return _project(y, model.mean_b, model.dirs_b, "right")
