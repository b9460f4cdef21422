"""Seeded generators with known ground truth.

Every generator draws from ``numpy.random.Philox`` (a counter-based bit
generator) keyed by the spec's seed, so the same spec always yields
bit-identical data.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ValidationError
from .repstore import PairedDataset, RepresentationSet

GENERATOR = "numpy.random.Philox"
MAX_CONDITION = 100.0


@dataclass(frozen=True)
class SynthSpec:
    n: int
    dim_left: int = 1
    dim_right: int = 1
    seed: int = 0
    rho: tuple[float, ...] = field(default_factory=tuple)
    snr: float = math.inf
    noise: float = 0.0
    tag: str = "square"

    def __post_init__(self):
        object.__setattr__(self, "rho", tuple(float(r) for r in self.rho))
        if self.n < 2:
            raise ValidationError(f"n must be >= 2, got {self.n}")
        if self.dim_left < 1 or self.dim_right < 1:
            raise ValidationError("dimensions must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must fit in 64 unsigned bits")
        for r in self.rho:
            if not 0 <= r < 1:
                raise ValidationError(f"every rho must lie in [0, 1), got {r}")
        if any(a < b for a, b in zip(self.rho, self.rho[1:])):
            raise ValidationError("rho must be nonincreasing")
        if not self.snr >= 0:
            raise ValidationError(f"snr must be >= 0, got {self.snr}")
        if not self.noise >= 0:
            raise ValidationError(f"noise must be >= 0, got {self.noise}")

    def manifest(self) -> dict:
        out = asdict(self)
        out["rho"] = list(self.rho)
        for key in ("snr", "noise"):
            if math.isinf(out[key]):
                out[key] = "inf"
        out["generator"] = GENERATOR
        return out


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _ids(n: int) -> list[str]:
    width = max(5, len(str(n - 1)))
    return [f"s{i:0{width}d}" for i in range(n)]


def _pair(left: np.ndarray, right: np.ndarray, ids=None) -> PairedDataset:
    ids = ids or _ids(left.shape[0])
    return PairedDataset(RepresentationSet("left", ids, left), RepresentationSet("right", ids, right))


def _orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def mixing_matrix(rng: np.random.Generator, d: int) -> np.ndarray:
    """Random invertible d x d matrix with condition number at most 100."""
    while True:
        spectrum = np.exp(rng.uniform(0.0, math.log(MAX_CONDITION) / 2, size=d))
        m = _orthogonal(rng, d) @ np.diag(spectrum) @ _orthogonal(rng, d)
        if np.linalg.cond(m) <= MAX_CONDITION:
            return m


def gaussian_cca_pair(spec: SynthSpec) -> PairedDataset:
    """Jointly Gaussian pair whose population canonical correlations are ``spec.rho``."""
    r = len(spec.rho)
    if r > min(spec.dim_left, spec.dim_right):
        raise ValidationError(f"{r} correlations do not fit in dims ({spec.dim_left}, {spec.dim_right})")
    rng = _rng(spec.seed)
    n = spec.n
    rho = np.array(spec.rho)
    z = rng.standard_normal((n, r))
    e = rng.standard_normal((n, r))
    left = np.hstack([z, rng.standard_normal((n, spec.dim_left - r))])
    right = np.hstack([z * rho + e * np.sqrt(1 - rho**2), rng.standard_normal((n, spec.dim_right - r))])
    left = left @ mixing_matrix(rng, spec.dim_left)
    right = right @ mixing_matrix(rng, spec.dim_right)
    return _pair(left, right)


def independent_pair(spec: SynthSpec) -> PairedDataset:
    rng = _rng(spec.seed)
    left = rng.standard_normal((spec.n, spec.dim_left))
    right = rng.standard_normal((spec.n, spec.dim_right))
    return _pair(left, right)


def nonlinear_pair(spec: SynthSpec) -> PairedDataset:
    """Right side is the square of the left's first coordinate plus ``spec.noise`` Gaussian noise.

    ``noise = inf`` replaces the signal by pure noise.
    """
    if spec.tag != "square":
        raise ValidationError(f"unknown nonlinearity {spec.tag!r}")
    rng = _rng(spec.seed)
    left = rng.standard_normal((spec.n, spec.dim_left))
    eps = rng.standard_normal((spec.n, 1))
    if math.isinf(spec.noise):
        right = eps
    else:
        right = left[:, :1] ** 2 + spec.noise * eps
    return _pair(left, right)


def planted_retrieval(spec: SynthSpec, test_fraction: float = 0.1) -> tuple[PairedDataset, PairedDataset]:
    """Right = seeded linear map of left plus noise of standard deviation ``1 / snr``.

    The map is scaled so each right coordinate has unit signal variance.  The
    signal and the base noise draw do not depend on ``snr``, so an snr ladder
    under one seed differs only in noise amplitude.  The last
    ``test_fraction`` of rows form the test split.
    """
    if spec.snr == 0:
        raise ValidationError("snr must be > 0 (noise is scaled by 1/snr)")
    n_test = int(round(spec.n * test_fraction))
    if n_test < 2 or spec.n - n_test < 2:
        raise ValidationError(f"n={spec.n} too small for a {test_fraction:.0%} test split")
    rng = _rng(spec.seed)
    left = rng.standard_normal((spec.n, spec.dim_left))
    W = rng.standard_normal((spec.dim_left, spec.dim_right)) / math.sqrt(spec.dim_left)
    base_noise = rng.standard_normal((spec.n, spec.dim_right))
    right = left @ W
    if not math.isinf(spec.snr):
        right = right + base_noise / spec.snr
    data = _pair(left, right)
    cut = spec.n - n_test
    return data.rows(range(cut)), data.rows(range(cut, spec.n))


GENERATORS = {
    "gaussian-cca": gaussian_cca_pair,
    "independent": independent_pair,
    "nonlinear": nonlinear_pair,
    "planted-retrieval": planted_retrieval,
}
