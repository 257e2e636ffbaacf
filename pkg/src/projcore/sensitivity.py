"""Sensitivity scores by repeated L-infinity coreset peeling, and the L2
(1+eps)-coreset sampled from them.

Peeling repeatedly extracts an L-infinity coreset from the remaining
points; every member of the i-th peel receives the score |S_i| / i.
Sampling then draws with probability proportional to the scores and
weights each draw by t / (m * s(p)), which makes weighted query costs
unbiased estimates of the full costs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .errors import ParameterError
from .geometry import PointSet
from .linf_coreset import JkConfig, coreset_jk

__all__ = [
    "SensitivityMap",
    "WeightedCoreset",
    "assign_sensitivities",
    "sample_l2_coreset",
    "sample_with_sensitivity",
    "l2_coreset",
    "sample_size_formula",
]


@dataclass(frozen=True)
class SensitivityMap:
    """Per-point positive scores with their total; ``peel_sizes`` records
    the size of each peel so the total can be recomputed independently."""

    s: np.ndarray
    t: float
    peel_sizes: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ParameterError("scores must form a nonempty vector")
        if s.min() <= 0:
            raise ParameterError("every sensitivity score must be positive")
        if abs(float(s.sum()) - self.t) > 1e-9 * max(1.0, abs(self.t)):
            raise ParameterError("t must equal the sum of the scores")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "peel_sizes", tuple(int(x) for x in self.peel_sizes))


@dataclass(frozen=True)
class WeightedCoreset:
    """Sampled indices (with multiplicity) and their positive weights."""

    indices: np.ndarray
    u: np.ndarray
    epsilon: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int)
        u = np.asarray(self.u, dtype=float)
        if idx.ndim != 1 or idx.shape != u.shape or idx.size == 0:
            raise ParameterError("indices and weights must be matching nonempty vectors")
        if u.min() <= 0:
            raise ParameterError("weights must be strictly positive")
        for name in ("epsilon", "delta"):
            val = getattr(self, name)
            if val is not None and not 0 < val < 1:
                raise ParameterError(f"{name} must lie in (0,1)")
        idx = idx.copy()
        u = u.copy()
        idx.flags.writeable = False
        u.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "u", u)

    def __len__(self) -> int:
        return int(self.indices.size)

    def merged(self) -> "WeightedCoreset":
        """Optional post-pass: sum the weights of duplicate indices."""
        uniq, inv = np.unique(self.indices, return_inverse=True)
        w = np.zeros(uniq.size)
        np.add.at(w, inv, self.u)
        return WeightedCoreset(uniq, w, self.epsilon, self.delta)


def assign_sensitivities(P: PointSet, j: int, k: int,
                         config: Optional[JkConfig] = None) -> SensitivityMap:
    """Peel L-infinity coresets until no points remain, scoring each member
    of the i-th peel with |S_i| / i."""
    config = config or JkConfig()
    n = P.n
    scores = np.zeros(n)
    remaining = np.arange(n)
    peel_sizes: List[int] = []
    i = 1
    while remaining.size:
        sub = P.subset(remaining)
        core = coreset_jk(sub, j, k, config)
        local = np.asarray(core.indices, dtype=int)
        chosen = remaining[local]
        scores[chosen] = len(chosen) / i
        peel_sizes.append(len(chosen))
        mask = np.ones(remaining.size, dtype=bool)
        mask[local] = False
        remaining = remaining[mask]
        i += 1
    return SensitivityMap(scores, float(scores.sum()), tuple(peel_sizes))


def sample_size_formula(t: float, d: int, j: int, k: int, epsilon: float,
                        delta: float, c_sample: float = 1.0) -> int:
    """m = ceil(c * t/eps^2 * (d * j * k * ln(t/delta))), with j floored at 1
    so point queries (j = 0) still yield a usable size."""
    if not 0 < epsilon < 1:
        raise ParameterError("epsilon must lie in (0,1)")
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0,1)")
    j_eff = max(int(j), 1)
    m = math.ceil(c_sample * t / epsilon**2 * (d * j_eff * max(int(k), 1) * math.log(t / delta)))
    if m <= 0:
        raise ParameterError(f"sample size formula produced m={m}")
    return int(m)


def sample_with_sensitivity(P: PointSet, smap: SensitivityMap, m: int,
                            rng_seed: int = 0) -> WeightedCoreset:
    """m independent draws with probability s(p)/t, weight t/(m*s(p)) each."""
    if m <= 0:
        raise ParameterError("m must be positive")
    if smap.s.shape[0] != P.n:
        raise ParameterError("sensitivity map does not cover the point set")
    rng = np.random.default_rng(rng_seed)
    prob = smap.s / smap.t
    idx = rng.choice(P.n, size=m, replace=True, p=prob)
    u = smap.t / (m * smap.s[idx])
    return WeightedCoreset(idx, u)


def sample_l2_coreset(P: PointSet, smap: SensitivityMap, j: int, k: int,
                      epsilon: float, delta: float, c_sample: float = 1.0,
                      rng_seed: int = 0) -> WeightedCoreset:
    """Draw the L2 coreset at the sample size given by the formula."""
    if c_sample <= 0:
        raise ParameterError("c_sample must be positive")
    m = sample_size_formula(smap.t, P.dim, j, k, epsilon, delta, c_sample)
    base = sample_with_sensitivity(P, smap, m, rng_seed)
    return WeightedCoreset(base.indices, base.u, epsilon, delta)


def l2_coreset(P: PointSet, j: int, k: int, epsilon: float, delta: float,
               config: Optional[JkConfig] = None, c_sample: float = 1.0,
               rng_seed: int = 0) -> WeightedCoreset:
    """Sensitivity assignment followed by sampling."""
    smap = assign_sensitivities(P, j, k, config)
    return sample_l2_coreset(P, smap, j, k, epsilon, delta, c_sample, rng_seed)
