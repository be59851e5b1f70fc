"""Normalized dynamics-parameter space and parametric source-domain distributions.

Physical parameters live in a bounded box; all inference methods operate on an
affine remap of that box to [0, 4] per dimension, so that a single conservative
Gaussian prior (mean 2, unit variance) is meaningful for every environment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

NORMALIZED_LO = 0.0
NORMALIZED_HI = 4.0


@dataclass(frozen=True)
class ParamSpace:
    """Bounded physical parameter box with an affine map to [0, 4]^n."""

    physical_bounds: np.ndarray  # (n, 2) rows [lo, hi], lo < hi

    def __post_init__(self):
        bounds = np.asarray(self.physical_bounds, dtype=float)
        if bounds.ndim != 2 or bounds.shape[1] != 2:
            raise ValueError(f"physical_bounds must be (n, 2), got {bounds.shape}")
        if not np.all(np.isfinite(bounds)):
            raise ValueError("physical_bounds must be finite")
        if not np.all(bounds[:, 0] < bounds[:, 1]):
            raise ValueError("physical_bounds require lo < hi per dimension")
        object.__setattr__(self, "physical_bounds", bounds)

    @property
    def dims(self) -> int:
        return self.physical_bounds.shape[0]

    @property
    def lo(self) -> np.ndarray:
        return self.physical_bounds[:, 0]

    @property
    def hi(self) -> np.ndarray:
        return self.physical_bounds[:, 1]

    def subspace(self, indices) -> "ParamSpace":
        """Space restricted to the given dimensions (order preserved)."""
        return ParamSpace(self.physical_bounds[np.asarray(indices, dtype=int)])


def normalize(xi: np.ndarray, space: ParamSpace) -> np.ndarray:
    """Map physical values to normalized units: lo -> 0, hi -> 4."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != space.dims:
        raise ValueError(f"expected last dim {space.dims}, got {xi.shape}")
    return (NORMALIZED_HI - NORMALIZED_LO) * (xi - space.lo) / (space.hi - space.lo)


def denormalize(z: np.ndarray, space: ParamSpace) -> np.ndarray:
    """Exact inverse of :func:`normalize`. Values outside [0, 4] extrapolate."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != space.dims:
        raise ValueError(f"expected last dim {space.dims}, got {z.shape}")
    return space.lo + z / (NORMALIZED_HI - NORMALIZED_LO) * (space.hi - space.lo)


@dataclass(frozen=True)
class DomainDistribution:
    """Diagonal-Gaussian or axis-aligned-uniform distribution in normalized units.

    Gaussian: ``mean`` and ``diag_cov`` (strictly positive variances).
    Uniform: ``lo`` and ``hi`` with lo <= hi, both inside [0, 4].
    """

    variant: str  # "gaussian" | "uniform"
    mean: np.ndarray | None = None
    diag_cov: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        if self.variant == "gaussian":
            mean = np.asarray(self.mean, dtype=float)
            cov = np.asarray(self.diag_cov, dtype=float)
            if mean.shape != cov.shape or mean.ndim != 1:
                raise ValueError("gaussian mean/diag_cov must be equal-length vectors")
            if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
                raise ValueError("gaussian parameters must be finite")
            if np.any(cov <= 0):
                raise ValueError("gaussian diag_cov must be strictly positive")
            object.__setattr__(self, "mean", mean)
            object.__setattr__(self, "diag_cov", cov)
        elif self.variant == "uniform":
            lo = np.asarray(self.lo, dtype=float)
            hi = np.asarray(self.hi, dtype=float)
            if lo.shape != hi.shape or lo.ndim != 1:
                raise ValueError("uniform lo/hi must be equal-length vectors")
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise ValueError("uniform parameters must be finite")
            if np.any(lo > hi):
                raise ValueError("uniform requires lo <= hi componentwise")
            if np.any(lo < NORMALIZED_LO) or np.any(hi > NORMALIZED_HI):
                raise ValueError("uniform support must lie within [0, 4]")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        else:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def dims(self) -> int:
        vec = self.mean if self.variant == "gaussian" else self.lo
        return vec.shape[0]

    def to_dict(self) -> dict:
        if self.variant == "gaussian":
            return {
                "variant": "gaussian",
                "mean": self.mean.tolist(),
                "diag_cov": self.diag_cov.tolist(),
            }
        return {"variant": "uniform", "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DomainDistribution":
        if d["variant"] == "gaussian":
            return cls("gaussian", mean=np.array(d["mean"]), diag_cov=np.array(d["diag_cov"]))
        return cls("uniform", lo=np.array(d["lo"]), hi=np.array(d["hi"]))


def gaussian(mean, diag_cov) -> DomainDistribution:
    return DomainDistribution("gaussian", mean=np.asarray(mean, float), diag_cov=np.asarray(diag_cov, float))


def uniform(lo, hi) -> DomainDistribution:
    return DomainDistribution("uniform", lo=np.asarray(lo, float), hi=np.asarray(hi, float))


def prior(space: ParamSpace) -> DomainDistribution:
    """Conservative starting distribution: N(2, I) in normalized units."""
    n = space.dims
    return gaussian(np.full(n, 2.0), np.ones(n))


def sample(
    dist: DomainDistribution,
    rng: np.random.Generator,
    clamp: bool = True,
    size: int | None = None,
) -> np.ndarray:
    """Draw i.i.d. normalized parameter vectors; optionally clipped to [0, 4].

    Returns shape (n,) when ``size`` is None, else (size, n).
    """
    n = dist.dims
    shape = (n,) if size is None else (size, n)
    if dist.variant == "gaussian":
        draws = dist.mean + np.sqrt(dist.diag_cov) * rng.standard_normal(shape)
    else:
        draws = rng.uniform(dist.lo, dist.hi, size=shape)
    if clamp:
        draws = np.clip(draws, NORMALIZED_LO, NORMALIZED_HI)
    return draws


def clamp_rate(draws: np.ndarray) -> float:
    """Fraction of components outside [0, 4] (pre-clamp bookkeeping)."""
    draws = np.asarray(draws)
    outside = (draws < NORMALIZED_LO) | (draws > NORMALIZED_HI)
    return float(np.mean(outside))


def kl_gaussian(p: DomainDistribution, q: DomainDistribution) -> float:
    """Closed-form KL(p || q) between diagonal Gaussians of equal dimension."""
    if p.variant != "gaussian" or q.variant != "gaussian":
        raise ValueError("kl_gaussian requires two gaussian distributions")
    if p.dims != q.dims:
        raise ValueError("dimension mismatch")
    vp, vq = p.diag_cov, q.diag_cov
    if np.any(vp <= 0) or np.any(vq <= 0):
        raise ValueError("variances must be strictly positive")
    dm = q.mean - p.mean
    return float(0.5 * np.sum(vp / vq + dm * dm / vq - 1.0 + np.log(vq / vp)))
