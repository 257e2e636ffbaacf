"""L-infinity coresets for (j,k)-projective clustering.

The (j,1) construction projects the input onto its containing j-flat,
computes an approximate Löwner ellipsoid of the projected hull, and keeps a
Carathéodory certificate for each axis vertex of the 1/j dilation plus the
center.  The (j,k) construction recurses over k, partitioning the points
into dyadic distance bands around affine anchors and enumerating all anchor
choices across the per-band sub-coresets.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import geometry as geo
from .errors import (
    BudgetError,
    FlatRankError,
    GridRequiredError,
    LowerBoundViolation,
    NotInHullError,
    ParameterError,
)
from .geometry import AffineFlat, PointSet

__all__ = [
    "LinfCoreset",
    "LevelPartition",
    "VerifyConfig",
    "JkConfig",
    "guarantee_bound",
    "coreset_j1",
    "partition_level0",
    "partition_levelt",
    "coreset_jk",
    "verify_linf_ratio",
    "verify_cylinder_coverage",
]

_ON_FLAT_TOL = 1e-9


def guarantee_bound(j: int, z: float) -> float:
    """The multiplicative bound 2^(z+1) j^(1.5 z) of the (j,1) construction;
    for j = 0 (point queries) the coordinate-extreme coreset gives d^(z/2),
    which callers obtain via ``LinfCoreset.guarantee_factor``."""
    if j < 1:
        raise ParameterError("guarantee_bound is defined for j >= 1")
    return float(2 ** (z + 1) * j ** (1.5 * z))


@dataclass(frozen=True)
class LinfCoreset:
    """Indices of a source point set forming an L-infinity coreset."""

    indices: tuple
    j: int
    k: int
    guarantee_factor: float
    projection_residual: float = 0.0

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) == 0:
            raise ParameterError("coreset must be nonempty")
        if len(set(idx)) != len(idx):
            raise ParameterError("coreset indices must be unique")
        if min(idx) < 0:
            raise ParameterError("coreset indices must be nonnegative")
        if self.guarantee_factor < 1.0:
            raise ParameterError("guarantee factor must be at least 1")
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class LevelPartition:
    """Distance-band cells of one recursion level.

    Cell 0 holds the points on the anchor flat; cell i > 0 holds the points
    whose distance falls in [thresholds[i-1], thresholds[i]).
    """

    cells: tuple
    thresholds: tuple
    anchor_flat: AffineFlat

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(tuple(int(i) for i in c) for c in self.cells))
        object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))

    def member_indices(self) -> tuple:
        return tuple(i for cell in self.cells for i in cell)


@dataclass(frozen=True)
class VerifyConfig:
    """Parameters of the randomized verification suite; ``xi`` is the
    cylinder expansion factor tested by the coverage check."""

    xi: float = 32.0
    num_queries: int = 1000
    rng_seed: int = 0

    def __post_init__(self):
        if self.xi < 1.0:
            raise ParameterError("xi must be at least 1")
        if self.num_queries < 1:
            raise ParameterError("num_queries must be at least 1")


@dataclass(frozen=True)
class JkConfig:
    """Construction knobs for the recursive (j,k) coreset.

    ``c_exp`` is the exponent of the dyadic band floor (d*Delta)^(-c_exp*j);
    ``node_budget`` caps the number of recursion nodes (exceeding it is an
    error, never silent truncation); ``enumerate_anchors=False`` degrades to
    a deterministic single branch taking the first candidate in input order.
    """

    c_exp: float = 2.0
    node_budget: int = 200_000
    enumerate_anchors: bool = True
    lowner_tol: float = 1e-7
    alpha_pad: float = 1e-6

    def __post_init__(self):
        if self.c_exp <= 0:
            raise ParameterError("c_exp must be positive")
        if self.node_budget < 1:
            raise ParameterError("node_budget must be positive")


# ---------------------------------------------------------------------------
# (j,1) construction
# ---------------------------------------------------------------------------


def _caratheodory_indices(Q: np.ndarray, targets: Iterable[np.ndarray]) -> set:
    """Union of certificate supports for each target point of conv(Q)."""
    picked: set = set()
    for s in targets:
        try:
            cert = geo.caratheodory_reduce(Q, s)
        except NotInHullError:
            # the target sits on the boundary within roundoff; nudge inward
            centroid = Q.mean(axis=0)
            cert = geo.caratheodory_reduce(Q, s + 1e-6 * (centroid - s))
        picked.update(cert.support)
    return picked


def _extreme_point_indices(pts: np.ndarray) -> List[int]:
    """Coordinate-wise argmin/argmax; an L-infinity coreset for point
    queries (j = 0) with factor sqrt(d)."""
    idx = set()
    for axis in range(pts.shape[1]):
        idx.add(int(np.argmin(pts[:, axis])))
        idx.add(int(np.argmax(pts[:, axis])))
    return sorted(idx)


def _j1_on_projected(Q: np.ndarray, alpha: Optional[float], config: JkConfig) -> set:
    """Core of the (j,1) algorithm on intrinsic full-rank coordinates Q."""
    j_eff = Q.shape[1]
    use_alpha = float(alpha) if alpha is not None else float(j_eff)
    ell = geo.lowner_rounding(Q, alpha=use_alpha, tol=config.lowner_tol)
    scale = 1.0 / (use_alpha * (1.0 + config.alpha_pad))
    vertices = geo.ellipsoid_axis_vertices(ell, scale=scale)
    targets = list(vertices) + [ell.center]
    return _caratheodory_indices(Q, targets)


def _project_to_best_flat(pts: np.ndarray, j: int):
    """Intrinsic coordinates on the best-fit j-flat plus the worst residual."""
    centroid = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * max(s[0] if s.size else 0.0, 1.0)))
    j_eff = min(j, rank)
    basis = vt[:j_eff].T
    Q = (pts - centroid) @ basis
    residual = 0.0
    if rank > j_eff:
        flat = AffineFlat(basis, centroid) if j_eff > 0 else AffineFlat(np.zeros((pts.shape[1], 0)), centroid)
        residual = float(geo.dists_to_flat(pts, flat).max())
    return Q, j_eff, residual


def _j1_general(pts: np.ndarray, j: int, alpha: Optional[float], config: JkConfig,
                require_on_flat: bool) -> tuple:
    """(j,1) coreset indices; general inputs are projected onto their
    best-fit j-flat first (a heuristic recorded via the returned residual)."""
    n, d = pts.shape
    size_cap = 2 * (j + 1) ** 2 if j >= 1 else 2 * d
    if n <= size_cap:
        return tuple(range(n)), 0.0

    if j == 0:
        return tuple(_extreme_point_indices(pts)), 0.0

    if require_on_flat:
        geo.flat_through_points(pts, j)  # raises FlatRankError when violated

    Q, j_eff, residual = _project_to_best_flat(pts, j)
    if j_eff == 0:
        return (0,), residual
    picked = _j1_on_projected(Q, alpha if alpha is not None else j_eff, config)
    return tuple(sorted(picked)), residual


def coreset_j1(P: PointSet, j: int, alpha: Optional[float] = None,
               z: float = 1.0, config: Optional[JkConfig] = None) -> LinfCoreset:
    """Coreset for (j,1)-projective clustering of points lying on a j-flat.

    The output has at most 2(j+1)^2 points and satisfies, for every query
    flat H of dimension j and every exponent z >= 1,
    max over P of dist(p,H)^z <= 2^(z+1) j^(1.5 z) * max over the coreset.
    """
    if not 1 <= j <= P.dim - 1:
        raise ParameterError(f"j must lie in [1, {P.dim - 1}], got {j}")
    config = config or JkConfig()
    indices, residual = _j1_general(P.points, j, alpha, config, require_on_flat=True)
    return LinfCoreset(indices, j, 1, guarantee_bound(j, z), residual)


# ---------------------------------------------------------------------------
# dyadic distance partitions
# ---------------------------------------------------------------------------


def _require_grid(P: PointSet) -> int:
    if P.grid_delta is None:
        raise GridRequiredError("operation requires integer-grid input with grid_delta")
    return P.grid_delta


def partition_level0(P: PointSet, v0, indices: Optional[Sequence[int]] = None) -> LevelPartition:
    """Partition around an anchor point: cell 0 holds coinciding points and
    cell i the points at distance in [2^(i-1), 2^i).

    Exact on the integer grid: band membership is decided on squared
    integer distances, so boundary ties go to the upper band by integer
    comparison.
    """
    delta = _require_grid(P)
    v0 = np.asarray(v0, dtype=float).ravel()
    idx = np.arange(P.n) if indices is None else np.asarray(indices, dtype=int)
    pts = P.points[idx]
    diff = (pts - v0).astype(np.int64)
    if not np.array_equal(pts - v0, diff):
        raise GridRequiredError("anchor point must be a grid point")
    sq = np.einsum("ij,ij->i", diff, diff)

    max_sq = int(sq.max()) if sq.size else 0
    n_bands = 0
    while 4**n_bands <= max_sq:
        n_bands += 1
    # band i (1-based) holds squared distances in [4^(i-1), 4^i)
    cells: List[List[int]] = [[] for _ in range(n_bands + 1)]
    for local, dsq in enumerate(sq):
        if dsq == 0:
            cells[0].append(int(idx[local]))
        else:
            band = (int(dsq).bit_length() - 1) // 2 + 1
            cells[band].append(int(idx[local]))
    thresholds = [float(2**i) for i in range(n_bands + 1)]
    anchor = AffineFlat(np.zeros((P.dim, 0)), v0)
    return LevelPartition(tuple(map(tuple, cells)), tuple(thresholds), anchor)


def partition_levelt(
    P: PointSet,
    indices: Sequence[int],
    anchor: AffineFlat,
    c_exp: float = 2.0,
) -> LevelPartition:
    """Partition a subset by distance to an anchor flat into dyadic bands.

    Cell 0 holds the on-flat points (distance <= 1e-9).  The band floor is
    (d*Delta)^(-c_exp*dim(anchor)); a nonzero distance below it raises
    ``LowerBoundViolation`` (the separation exponent c_exp is too small).
    Boundary ties go to the upper band.
    """
    delta = _require_grid(P)
    idx = np.asarray(indices, dtype=int)
    d = P.dim
    j_flat = max(anchor.dim, 1)
    floor = float((d * delta) ** (-c_exp * j_flat))
    dists = geo.dists_to_flat(P.points[idx], anchor)

    off = dists > _ON_FLAT_TOL
    bad = off & (dists < floor * (1.0 - 1e-9))
    if bad.any():
        worst = float(dists[bad].min())
        raise LowerBoundViolation(worst, floor)

    max_dist = float(dists.max()) if dists.size else 0.0
    n_bands = 0
    while floor * 2.0**n_bands <= max_dist:
        n_bands += 1
    thresholds = floor * 2.0 ** np.arange(n_bands + 1)
    cells: List[List[int]] = [[] for _ in range(n_bands + 1)]
    # searchsorted(side='right') puts an exact boundary in the upper band
    bands = np.searchsorted(thresholds, dists, side="right")
    bands[~off] = 0
    for local, band in enumerate(bands):
        cells[int(band)].append(int(idx[local]))
    return LevelPartition(tuple(map(tuple, cells)), tuple(float(t) for t in thresholds), anchor)


# ---------------------------------------------------------------------------
# recursive (j,k) construction
# ---------------------------------------------------------------------------


class _Budget:
    def __init__(self, cap: int):
        self.cap = cap
        self.used = 0

    def tick(self):
        self.used += 1
        if self.used > self.cap:
            raise BudgetError(f"recursion node budget {self.cap} exceeded")


def _jk_recurse(P: PointSet, idx: np.ndarray, j: int, k: int,
                config: JkConfig, budget: _Budget, out: set,
                residuals: List[float]) -> List[int]:
    """Adds the (j,k) coreset of P[idx] to ``out`` and returns it."""
    budget.tick()
    if k == 1:
        local, residual = _j1_general(P.points[idx], j, None, config, require_on_flat=False)
        residuals.append(residual)
        got = [int(idx[i]) for i in local]
        out.update(got)
        return got

    d_prev = _jk_recurse(P, idx, j, k - 1, config, budget, out, residuals)
    anchors0 = d_prev if config.enumerate_anchors else d_prev[:1]
    for v0 in anchors0:
        _jk_levels(P, idx, [v0], j, k, config, budget, out, residuals)
    return sorted(out)


def _jk_levels(P: PointSet, sub_idx: np.ndarray, anchors: List[int], j: int, k: int,
               config: JkConfig, budget: _Budget, out: set,
               residuals: List[float]) -> None:
    """One level of the anchor chain: partition, recurse with k-1 on every
    cell, then branch over the next anchor choice; stops past level j."""
    budget.tick()
    t = len(anchors) - 1
    if t > j:
        return
    anchor_pts = P.points[anchors]
    if t == 0:
        part = partition_level0(P, anchor_pts[0], sub_idx)
    else:
        flat = geo.affine_span(anchor_pts)
        part = partition_levelt(P, sub_idx, flat, config.c_exp)

    cell_cores: List[List[int]] = []
    for cell in part.cells:
        if not cell:
            cell_cores.append([])
            continue
        cell_cores.append(
            _jk_recurse(P, np.asarray(cell, dtype=int), j, k - 1, config, budget, out, residuals)
        )

    for i in range(1, len(part.cells)):
        if not part.cells[i]:
            continue
        prefix = [p for c in part.cells[: i + 1] for p in c]
        candidates = cell_cores[i] if config.enumerate_anchors else cell_cores[i][:1]
        for v_next in candidates:
            if v_next in anchors:
                continue
            _jk_levels(P, np.asarray(prefix, dtype=int), anchors + [v_next],
                       j, k, config, budget, out, residuals)


def coreset_jk(P: PointSet, j: int, k: int, config: Optional[JkConfig] = None) -> LinfCoreset:
    """Recursive L-infinity coreset for (j,k)-projective clustering.

    Base case k = 1 is the (j,1) construction (general inputs are projected
    onto their best-fit j-flat first; the worst projection residual is
    recorded on the result).  For k >= 2 the input must be integer-grid.
    j = 0 (point queries) uses coordinate extremes as the base case.
    """
    if k < 1:
        raise ParameterError("k must be at least 1")
    if not 0 <= j <= P.dim - 1:
        raise ParameterError(f"j must lie in [0, {P.dim - 1}], got {j}")
    config = config or JkConfig()
    if k >= 2:
        _require_grid(P)

    out: set = set()
    residuals: List[float] = [0.0]
    budget = _Budget(config.node_budget)
    _jk_recurse(P, np.arange(P.n), j, k, config, budget, out, residuals)
    factor = guarantee_bound(j, 1.0) if j >= 1 else max(float(np.sqrt(P.dim)), 1.0)
    return LinfCoreset(tuple(sorted(out)), j, k, factor, max(residuals))


# ---------------------------------------------------------------------------
# randomized verification
# ---------------------------------------------------------------------------


def _haar_basis(rng: np.random.Generator, d: int, j: int) -> np.ndarray:
    g = rng.normal(size=(d, j))
    q, r = np.linalg.qr(g)
    return q * np.sign(np.diag(r))[None, :]


def _random_query_batch(rng, P: np.ndarray, j: int, count: int):
    """(count, d, j) Haar bases and offsets uniform over the bounding box."""
    d = P.shape[1]
    lo, hi = P.min(axis=0), P.max(axis=0)
    offsets = rng.uniform(lo, hi, size=(count, d))
    if j == 0:
        return np.zeros((count, d, 0)), offsets
    g = rng.normal(size=(count, d, j))
    q, r = np.linalg.qr(g)
    sign = np.sign(np.einsum("qjj->qj", r))
    sign[sign == 0] = 1.0
    return q * sign[:, None, :], offsets


def _adversarial_query_batch(rng, P: np.ndarray, complement: np.ndarray, j: int, count: int):
    """Query flats anchored on (j+1)-subsets of the points outside the
    coreset: offset at the subset centroid, basis from its top singular
    directions (padded by the remaining right-singular vectors when the
    subset is affinely degenerate)."""
    d = P.shape[1]
    if complement.size == 0 or j == 0:
        return np.zeros((0, d, j)), np.zeros((0, d))
    take = min(j + 1, complement.size)
    picks = np.argsort(rng.random((count, complement.size)), axis=1)[:, :take]
    subs = P[complement[picks]]  # (count, take, d)
    centroids = subs.mean(axis=1)
    centered = subs - centroids[:, None, :]
    _, _, vt = np.linalg.svd(centered, full_matrices=True)
    bases = vt[:, :j, :].transpose(0, 2, 1)  # (count, d, j)
    return bases, centroids


def verify_linf_ratio(P: PointSet, coreset_indices: Sequence[int], j: int,
                      z: float = 1.0, num_queries: int = 1000,
                      rng_seed: int = 0) -> float:
    """Max over sampled query flats of (max_P dist^z) / (max_C dist^z).

    Queries are Haar-random j-flats with offsets from the bounding box of P
    plus adversarial flats through subsets of the points left out of the
    coreset; 0/0 counts as ratio 1.
    """
    cidx = np.asarray(sorted(set(int(i) for i in coreset_indices)), dtype=int)
    if cidx.min() < 0 or cidx.max() >= P.n:
        raise ParameterError("coreset indices out of range")
    rng = np.random.default_rng(rng_seed)
    pts = P.points
    comp = np.setdiff1d(np.arange(P.n), cidx)
    rb, ro = _random_query_batch(rng, pts, j, num_queries)
    ab, ao = _adversarial_query_batch(rng, pts, comp, j, max(num_queries // 4, 1))
    bases = np.concatenate([rb, ab]) if ab.size else rb
    offsets = np.concatenate([ro, ao]) if ao.size else ro

    # distances below the projection's roundoff floor count as zero, so a
    # query through the whole data set scores 1 rather than 0/0
    noise = 1e-11 * max(1.0, float(np.abs(pts).max()))
    worst = 1.0
    in_core = np.zeros(P.n, dtype=bool)
    in_core[cidx] = True
    chunk = max(1, int(2**23 // max(pts.size, 1)))
    for start in range(0, bases.shape[0], chunk):
        bb = bases[start : start + chunk]
        oo = offsets[start : start + chunk]
        r = pts[None, :, :] - oo[:, None, :]
        if j > 0:
            proj = np.einsum("qnd,qdj->qnj", r, bb)
            r = r - np.einsum("qnj,qdj->qnd", proj, bb)
        dd = np.linalg.norm(r, axis=2)
        top_p = dd.max(axis=1)
        top_c = dd[:, in_core].max(axis=1)
        ratio = np.where(
            top_p <= noise, 1.0,
            np.where(top_c <= noise, np.inf, (top_p / np.maximum(top_c, 1e-300)) ** z),
        )
        worst = max(worst, float(ratio.max()))
    return float(worst)


@dataclass(frozen=True)
class CoverageReport:
    families_checked: int
    violations: int
    worst_expansion: float


def verify_cylinder_coverage(P: PointSet, coreset_indices: Sequence[int], j: int, k: int,
                             config: Optional[VerifyConfig] = None) -> CoverageReport:
    """Brute-force check of the cylinder-coverage property: for sampled
    families of k j-cylinders covering the coreset at radius r, the family
    expanded to radius xi*r must cover every point of P.

    Families mix Haar-random flats with flats through coreset points (the
    latter drive r toward zero, the sharpest case).  ``worst_expansion`` is
    the largest radius inflation that was actually needed.
    """
    config = config or VerifyConfig()
    rng = np.random.default_rng(config.rng_seed)
    cidx = np.asarray(sorted(set(int(i) for i in coreset_indices)), dtype=int)
    pts = P.points
    scale = max(1.0, float(np.abs(pts).max()))
    zero_tol = 1e-9 * scale

    violations = 0
    worst = 0.0
    for _ in range(config.num_queries):
        flats = []
        for _f in range(k):
            if rng.random() < 0.5 and cidx.size >= j + 1:
                pick = rng.choice(cidx, size=j + 1, replace=False)
                flat = geo.affine_span(pts[pick])
                if flat.dim < j:
                    flat = geo.complete_flat_basis(flat, j, rng.normal(size=(P.dim, j)))
            else:
                basis = _haar_basis(rng, P.dim, j) if j > 0 else np.zeros((P.dim, 0))
                flat = AffineFlat(basis, pts[rng.integers(P.n)])
            flats.append(flat)
        dd = np.stack([geo.dists_to_flat(pts, f) for f in flats]).min(axis=0)
        r = float(dd[cidx].max())  # radius at which the family covers the coreset
        full = float(dd.max())
        if r <= zero_tol:
            if full > zero_tol:
                violations += 1
                worst = np.inf
        else:
            worst = max(worst, full / r)
            if full > config.xi * r * (1 + 1e-9):
                violations += 1
    return CoverageReport(config.num_queries, violations, worst)
