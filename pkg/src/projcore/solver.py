"""Downstream optimizers used to evaluate coresets: an EM-like alternating
solver for weighted (j,k)-projective clustering and a multi-start IRLS
solver for M-estimator regression.

The refit step for squared distances is the exact weighted least-squares
flat (weighted centroid plus top-j weighted principal directions); robust
losses reweight by Psi'(r)/r and iterate, so their refit is approximate
and only the best cost seen is kept.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from . import geometry as geo
from .errors import InitError, ParameterError
from .geometry import AffineFlat, PointSet, complete_flat_basis
from .losses import (
    LossSpec,
    RegressionInstance,
    eval_loss,
    influence_over_r,
    regression_objective,
)

__all__ = [
    "FlatSet",
    "SolveConfig",
    "FitResult",
    "RegressionSolution",
    "clustering_cost",
    "fit_flat_weighted",
    "em_projective",
    "robust_regression_solve",
    "approximation_error",
]

Loss = Union[LossSpec, float, int]


@dataclass(frozen=True)
class FlatSet:
    """k affine flats sharing one dimension."""

    flats: tuple

    def __post_init__(self):
        flats = tuple(self.flats)
        if len(flats) < 1:
            raise ParameterError("need at least one flat")
        dims = {f.dim for f in flats}
        ambient = {f.ambient_dim for f in flats}
        if len(dims) != 1 or len(ambient) != 1:
            raise ParameterError("all flats must share dimension and ambient space")
        object.__setattr__(self, "flats", flats)

    @property
    def k(self) -> int:
        return len(self.flats)

    @property
    def dim(self) -> int:
        return self.flats[0].dim


@dataclass(frozen=True)
class SolveConfig:
    restarts: int = 8
    em_steps: int = 6
    rng_seed: int = 0
    inner_tol: float = 1e-9
    max_irls_iters: int = 100

    def __post_init__(self):
        if self.restarts < 1:
            raise ParameterError("restarts must be at least 1")
        if self.em_steps < 1:
            raise ParameterError("em_steps must be at least 1")


@dataclass(frozen=True)
class FitResult:
    flat: AffineFlat
    degenerate: bool


@dataclass(frozen=True)
class RegressionSolution:
    w: np.ndarray
    objective: float
    ridge_damped: bool = False


def _loss_values(loss: Loss, dists: np.ndarray) -> np.ndarray:
    if isinstance(loss, LossSpec):
        return np.asarray(eval_loss(loss, dists), dtype=float)
    z = float(loss)
    if z <= 0:
        raise ParameterError("distance exponent must be positive")
    return dists**z


def _min_dists(points: np.ndarray, flats: Sequence[AffineFlat]):
    dd = np.stack([geo.dists_to_flat(points, f) for f in flats])
    assign = np.argmin(dd, axis=0)  # ties resolve to the lowest flat index
    return dd[assign, np.arange(points.shape[0])], assign


def clustering_cost(P, w: Optional[np.ndarray], F: FlatSet, loss: Loss) -> float:
    """Sum over points of w(p) * g(distance to the nearest flat), where g is
    x**z for a numeric loss or the loss function itself."""
    pts = P.points if isinstance(P, PointSet) else np.atleast_2d(np.asarray(P, dtype=float))
    if pts.shape[1] != F.flats[0].ambient_dim:
        raise ParameterError("point dimension does not match flats")
    if w is not None:
        w = np.asarray(w, dtype=float).ravel()
        if w.shape[0] != pts.shape[0]:
            raise ParameterError("weight count must match points")
        if np.any(w <= 0):
            raise ParameterError("weights must be positive")
    dists, _ = _min_dists(pts, F.flats)
    vals = _loss_values(loss, dists)
    return float(np.sum(vals if w is None else w * vals))


def _weighted_pca_flat(pts: np.ndarray, w: np.ndarray, j: int) -> FitResult:
    total = w.sum()
    c = (w[:, None] * pts).sum(axis=0) / total
    if j == 0:
        return FitResult(AffineFlat(np.zeros((pts.shape[1], 0)), c), False)
    B = (pts - c) * np.sqrt(w)[:, None]
    _, s, vt = np.linalg.svd(B, full_matrices=False)
    rank = int(np.sum(s > 1e-12 * max(s[0] if s.size else 0.0, 1.0)))
    basis = vt[: min(j, rank)].T
    flat = AffineFlat(basis, c) if basis.shape[1] else AffineFlat(np.zeros((pts.shape[1], 0)), c)
    if rank < j:
        return FitResult(complete_flat_basis(flat, j), True)
    return FitResult(flat, False)


def fit_flat_weighted(points, weights, j: int, loss: Loss = 2.0,
                      inner_tol: float = 1e-9, max_iters: int = 20) -> FitResult:
    """Best-fit weighted j-flat.

    Squared loss is solved exactly; robust losses run IRLS, reweighting by
    Psi'(r)/r at the current residuals (floored at ``inner_tol``).  Rank
    deficiency pads the basis deterministically and sets the degeneracy
    flag.
    """
    pts = points.points if isinstance(points, PointSet) else np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != n:
        raise ParameterError("weight count must match points")
    if np.any(w <= 0):
        raise ParameterError("weights must be positive")
    if not 0 <= j < d:
        raise ParameterError(f"j must lie in [0, {d - 1}]")

    plain_z2 = not isinstance(loss, LossSpec) and float(loss) == 2.0
    fit = _weighted_pca_flat(pts, w, j)
    if plain_z2:
        return fit
    if not isinstance(loss, LossSpec):
        # other exponents reuse the IRLS scheme with g(r) = r**z
        loss = LossSpec("power", z=float(loss))

    flat = fit.flat
    degenerate = fit.degenerate
    for _ in range(max_iters):
        r = geo.dists_to_flat(pts, flat)
        omega = w * influence_over_r(loss, r, floor=max(inner_tol, 1e-12))
        omega = np.maximum(omega, 1e-12 * max(float(omega.max()), 1e-300))
        new = _weighted_pca_flat(pts, omega, j)
        shift = np.linalg.norm(new.flat.offset - flat.offset)
        rot = 0.0
        if j > 0:
            overlap = new.flat.basis.T @ flat.basis
            rot = abs(float(np.abs(np.linalg.svd(overlap, compute_uv=False)).min()) - 1.0)
        flat, degenerate = new.flat, new.degenerate or degenerate
        if shift <= inner_tol * max(1.0, float(np.abs(pts).max())) and rot <= 1e-12:
            break
    return FitResult(flat, degenerate)


def _init_flats(pts: np.ndarray, j: int, k: int, rng: np.random.Generator) -> List[AffineFlat]:
    n, d = pts.shape
    flats = []
    for _ in range(k):
        flat = None
        for _attempt in range(20):
            pick = rng.choice(n, size=j + 1, replace=False)
            span = geo.affine_span(pts[pick])
            if span.dim == j:
                flat = span
                break
            flat = complete_flat_basis(span, j, rng.normal(size=(d, j)))
            break
        flats.append(flat)
    return flats


def _run_em_once(pts: np.ndarray, w: np.ndarray, j: int, k: int, loss: Loss,
                 cfg: SolveConfig, rng: np.random.Generator):
    """One restart; returns (best flats, best cost, per-step cost history)."""
    flats = _init_flats(pts, j, k, rng)
    best_flats, best_cost = list(flats), np.inf
    history: List[float] = []
    for _ in range(cfg.em_steps):
        dd = np.stack([geo.dists_to_flat(pts, f) for f in flats])
        assign = np.argmin(dd, axis=0)
        new_flats = []
        for c in range(k):
            members = np.flatnonzero(assign == c)
            if members.size == 0:
                new_flats.append(flats[c])  # keep an empty cluster's flat
                continue
            fit = fit_flat_weighted(pts[members], w[members], j, loss,
                                    inner_tol=cfg.inner_tol)
            new_flats.append(fit.flat)
        flats = new_flats
        cost = clustering_cost(pts, w, FlatSet(tuple(flats)), loss)
        history.append(cost)
        if cost < best_cost:
            best_cost, best_flats = cost, list(flats)
    return best_flats, best_cost, history


def em_projective(P, w: Optional[np.ndarray], j: int, k: int, loss: Loss,
                  cfg: Optional[SolveConfig] = None) -> FlatSet:
    """Multi-restart EM for weighted (j,k)-projective clustering.

    Each restart initializes the k flats from random (j+1)-point subsets,
    then alternates nearest-flat assignment with weighted refits.  For
    squared loss the cost is non-increasing across steps; for robust losses
    the refit is IRLS-approximate and the best cost seen is returned.
    """
    cfg = cfg or SolveConfig()
    pts = P.points if isinstance(P, PointSet) else np.atleast_2d(np.asarray(P, dtype=float))
    n = pts.shape[0]
    if n < k * (j + 1):
        raise InitError(f"need at least k(j+1) = {k * (j + 1)} points, got {n}")
    w_arr = np.ones(n) if w is None else np.asarray(w, dtype=float).ravel()
    rng = np.random.default_rng(cfg.rng_seed)
    best, best_cost = None, np.inf
    for _ in range(cfg.restarts):
        flats, cost, _ = _run_em_once(pts, w_arr, j, k, loss, cfg, rng)
        if cost < best_cost:
            best, best_cost = flats, cost
    return FlatSet(tuple(best))


def robust_regression_solve(inst: RegressionInstance, weights: Optional[np.ndarray],
                            spec: LossSpec, cfg: Optional[SolveConfig] = None) -> RegressionSolution:
    """Multi-start IRLS for min over w of sum of Psi(|p.w - b|).

    A singular normal system is retried with ridge damping 1e-8 and the
    solution flagged.
    """
    cfg = cfg or SolveConfig()
    A = inst.P.points
    b = inst.b
    n, d = A.shape
    if n < d:
        raise InitError(f"need at least d = {d} points, got {n}")
    wts = np.ones(n) if weights is None else np.asarray(weights, dtype=float).ravel()
    if wts.shape[0] != n:
        raise ParameterError("weight count must match instance")
    rng = np.random.default_rng(cfg.rng_seed)

    damped_any = False

    def solve_normal(omega):
        nonlocal damped_any
        M = A.T @ (A * omega[:, None])
        rhs = A.T @ (omega * b)
        try:
            return np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            damped_any = True
            return np.linalg.solve(M + 1e-8 * np.eye(d), rhs)

    w_ls = solve_normal(wts)
    scale = max(1.0, float(np.linalg.norm(w_ls)))

    best_w, best_obj = None, np.inf
    for restart in range(cfg.restarts):
        w_cur = w_ls if restart == 0 else w_ls + rng.normal(size=d) * scale
        for _ in range(cfg.max_irls_iters):
            r = np.abs(A @ w_cur - b)
            omega = wts * influence_over_r(spec, r, floor=max(cfg.inner_tol, 1e-12))
            omega = np.maximum(omega, 1e-14 * max(float(omega.max()), 1e-300))
            w_new = solve_normal(omega)
            step = np.linalg.norm(w_new - w_cur)
            w_cur = w_new
            if step <= cfg.inner_tol * max(1.0, np.linalg.norm(w_cur)):
                break
        obj = regression_objective(inst, spec, w_cur, wts)
        if obj < best_obj:
            best_w, best_obj = w_cur, obj
    return RegressionSolution(best_w, float(best_obj), damped_any)


def approximation_error(P, solution, reference_optimum_cost: float, loss: Loss,
                        weights: Optional[np.ndarray] = None) -> float:
    """(full-data cost of the solution) / (reference optimum cost) - 1.

    When the reference cost is zero the absolute cost is reported instead
    (flagged via a warning) so planted zero-cost instances stay comparable.
    """
    if isinstance(solution, FlatSet):
        cost = clustering_cost(P, weights, solution, loss)
    else:
        if not isinstance(P, RegressionInstance):
            raise ParameterError("vector solutions require a RegressionInstance")
        if not isinstance(loss, LossSpec):
            raise ParameterError("regression solutions require a LossSpec")
        cost = regression_objective(P, loss, np.asarray(solution, dtype=float), weights)
    if reference_optimum_cost > 0.0:
        return float(cost / reference_optimum_cost - 1.0)
    warnings.warn("reference optimum cost is zero; reporting absolute cost",
                  RuntimeWarning, stacklevel=2)
    return float(cost)
