"""Convex-geometry and linear-algebra primitives.

Affine flats and point-to-flat distances, approximate Löwner ellipsoid
rounding of convex hulls, and Carathéodory support extraction.  All types
are immutable after construction and every operation is a pure function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .errors import (
    ConvergenceError,
    FlatRankError,
    NotInHullError,
    ParameterError,
    RankError,
)

__all__ = [
    "PointSet",
    "AffineFlat",
    "Ellipsoid",
    "ConvexCertificate",
    "dist_point_to_flat",
    "dists_to_flat",
    "flat_through_points",
    "lowner_rounding",
    "ellipsoid_axis_vertices",
    "caratheodory_reduce",
    "affine_span",
    "hull_membership",
]

_ORTHO_TOL = 1e-10
_MEMBERSHIP_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PointSet:
    """n points in d-dimensional space, optionally on an integer grid.

    When ``grid_delta`` is set every coordinate must be an integer in
    [-grid_delta, grid_delta]; the value is the aspect ratio used to bound
    the number of dyadic distance bands.
    """

    points: np.ndarray
    grid_delta: Optional[int] = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2:
            raise ParameterError("points must be a 2-d array")
        n, d = pts.shape
        if n < 1 or d < 1:
            raise ParameterError("need at least one point and one dimension")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("points must be finite")
        if self.grid_delta is not None:
            delta = int(self.grid_delta)
            if delta <= 0:
                raise ParameterError("grid_delta must be a positive integer")
            if not np.array_equal(pts, np.round(pts)):
                raise ParameterError("grid-tagged points must have integer coordinates")
            if np.abs(pts).max() > delta:
                raise ParameterError(
                    f"grid coordinates exceed the declared aspect ratio {delta}"
                )
            object.__setattr__(self, "grid_delta", delta)
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, indices) -> "PointSet":
        return PointSet(self.points[np.asarray(indices, dtype=int)], self.grid_delta)


@dataclass(frozen=True)
class AffineFlat:
    """A j-dimensional affine subspace given by an orthonormal basis and an
    offset: the set {X X^T p + v : p in R^d}.  j = 0 (empty basis, a single
    point) is permitted; j = d is not."""

    basis: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.basis, dtype=float)
        v = np.asarray(self.offset, dtype=float).ravel()
        if X.ndim != 2:
            raise ParameterError("basis must be a d x j array")
        d, j = X.shape
        if v.shape[0] != d:
            raise ParameterError("offset dimension does not match basis")
        if not 0 <= j < d:
            raise ParameterError(f"flat dimension must lie in [0, {d - 1}], got {j}")
        if j > 0:
            gram = X.T @ X
            if np.abs(gram - np.eye(j)).max() > _ORTHO_TOL:
                raise ParameterError("basis columns are not orthonormal")
        object.__setattr__(self, "basis", _frozen(X))
        object.__setattr__(self, "offset", _frozen(v))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]


@dataclass(frozen=True)
class Ellipsoid:
    """The set {x : (x-c)^T G (x-c) <= 1} with G symmetric positive definite."""

    form: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        G = np.asarray(self.form, dtype=float)
        c = np.asarray(self.center, dtype=float).ravel()
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise ParameterError("form must be a square matrix")
        if c.shape[0] != G.shape[0]:
            raise ParameterError("center dimension does not match form")
        scale = max(1.0, float(np.abs(G).max()))
        if np.abs(G - G.T).max() > _ORTHO_TOL * scale:
            raise ParameterError("form must be symmetric")
        G = 0.5 * (G + G.T)
        if np.linalg.eigvalsh(G).min() <= 0:
            raise ParameterError("form must be positive definite")
        object.__setattr__(self, "form", _frozen(G))
        object.__setattr__(self, "center", _frozen(c))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def volume(self) -> float:
        """Lebesgue volume up to the dimensional unit-ball constant."""
        sign, logdet = np.linalg.slogdet(self.form)
        if sign <= 0:
            raise ParameterError("invalid form")
        return float(np.exp(-0.5 * logdet))


@dataclass(frozen=True)
class ConvexCertificate:
    """Indices and convex weights witnessing membership in a hull."""

    support: tuple
    weights: np.ndarray

    def __post_init__(self):
        sup = tuple(int(i) for i in self.support)
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(sup) != w.shape[0] or len(sup) == 0:
            raise ParameterError("support and weights must match and be nonempty")
        if w.min() < -1e-12:
            raise ParameterError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ParameterError("weights must sum to 1")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "weights", _frozen(np.clip(w, 0.0, None)))

    def reconstruct(self, points: np.ndarray) -> np.ndarray:
        return self.weights @ np.asarray(points, dtype=float)[list(self.support)]


def _as_points(obj) -> np.ndarray:
    if isinstance(obj, PointSet):
        return obj.points
    return np.atleast_2d(np.asarray(obj, dtype=float))


def dist_point_to_flat(p, flat: AffineFlat) -> float:
    """Euclidean distance from a point to an affine flat.

    Equals the norm of the component of p - v orthogonal to the basis, which
    is also ||(p - v)^T Y||_2 for any orthonormal complement Y of the basis.
    """
    p = np.asarray(p, dtype=float).ravel()
    if p.shape[0] != flat.ambient_dim:
        raise ParameterError("point dimension does not match flat")
    r = p - flat.offset
    if flat.dim > 0:
        r = r - flat.basis @ (flat.basis.T @ r)
    return float(np.linalg.norm(r))


def dists_to_flat(points, flat: AffineFlat) -> np.ndarray:
    """Vectorized ``dist_point_to_flat`` over the rows of an array."""
    pts = _as_points(points)
    if pts.shape[1] != flat.ambient_dim:
        raise ParameterError("point dimension does not match flat")
    r = pts - flat.offset
    if flat.dim == 0:
        return np.linalg.norm(r, axis=1)
    # residual vector directly: avoids cancellation for points near the flat
    perp = r - (r @ flat.basis) @ flat.basis.T
    return np.linalg.norm(perp, axis=1)


def _centered_svd(pts: np.ndarray):
    centroid = pts.mean(axis=0)
    _, s, vt = np.linalg.svd(pts - centroid, full_matrices=False)
    return centroid, s, vt


def affine_rank(points, rtol: float = 1e-9) -> int:
    """Dimension of the affine hull of the rows."""
    pts = _as_points(points)
    if pts.shape[0] == 1:
        return 0
    _, s, _ = _centered_svd(pts)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def flat_through_points(points, j: int, tol: Optional[float] = None) -> AffineFlat:
    """The j-flat containing a point set that is promised to lie on one.

    The offset is the centroid and the basis the top-j right singular
    directions of the centered points.  Raises ``FlatRankError`` carrying
    the (j+1)-th singular value when some point is farther than ``tol``
    from the fitted flat (default tol: 1e-8 times the largest coordinate
    magnitude).
    """
    pts = _as_points(points)
    n, d = pts.shape
    if not 0 <= j < d:
        raise ParameterError(f"j must lie in [0, {d - 1}], got {j}")
    if tol is None:
        tol = 1e-8 * float(np.abs(pts).max())
    centroid, s, vt = _centered_svd(pts)
    basis = vt[:j].T if j > 0 else np.zeros((d, 0))
    flat = AffineFlat(basis, centroid)
    resid = dists_to_flat(pts, flat)
    if resid.max() > tol:
        sigma_next = float(s[j]) if j < s.size else 0.0
        raise FlatRankError(j, sigma_next)
    return flat


def affine_span(points) -> AffineFlat:
    """The affine hull of a list of points, with dimension equal to their
    affine rank."""
    pts = _as_points(points)
    r = affine_rank(pts)
    if r >= pts.shape[1]:
        raise ParameterError("points affinely span the whole space; not a flat")
    return flat_through_points(pts, r, tol=np.inf)


def _orthonormal_complement(basis: np.ndarray) -> np.ndarray:
    """Columns spanning the orthogonal complement of a d x j orthonormal
    basis."""
    d, j = basis.shape
    q, _ = np.linalg.qr(np.hstack([basis, np.eye(d)]))
    return q[:, j:d]


def complete_flat_basis(flat: AffineFlat, j: int, directions: Optional[np.ndarray] = None) -> AffineFlat:
    """Pad a flat's basis with orthonormal complement directions up to
    dimension j (deterministic unless ``directions`` supplies a preference)."""
    if flat.dim >= j:
        return flat
    comp = _orthonormal_complement(flat.basis) if flat.dim > 0 else None
    if flat.dim == 0:
        comp = np.eye(flat.ambient_dim)
    if directions is not None:
        # project the preferred directions onto the complement, re-orthonormalize
        proj = comp @ (comp.T @ directions)
        q, r = np.linalg.qr(proj)
        keep = np.abs(np.diag(r)) > 1e-12
        comp = np.hstack([q[:, keep], comp])
        q, _ = np.linalg.qr(comp)
        comp = q
    extra = comp[:, : j - flat.dim]
    return AffineFlat(np.hstack([flat.basis, extra]), flat.offset)


# ---------------------------------------------------------------------------
# Löwner rounding
# ---------------------------------------------------------------------------


def lowner_rounding(
    Q,
    alpha: Optional[float] = None,
    tol: float = 1e-7,
    *,
    mode: str = "lift",
    max_iter: int = 100_000,
) -> Ellipsoid:
    """Approximate Löwner ellipsoid such that conv(Q) lies inside the result
    and the 1/alpha dilation about the center lies inside conv(Q).

    Barycentric-coordinate ascent on the log-det dual (Khachiyan-style with
    away steps).  ``mode='lift'`` (default) appends a unit coordinate and
    rounds the centrally symmetric lift, which certifies the sandwich for
    alpha >= d; ``mode='center'`` keeps the centroid fixed and is only
    appropriate for inputs that are centrally symmetric about it, where
    alpha >= sqrt(d) suffices.
    """
    pts = _as_points(Q)
    n, d = pts.shape
    if affine_rank(pts) < d:
        raise RankError("points do not affinely span the ambient space")
    if alpha is None:
        alpha = float(d) if mode == "lift" else float(np.sqrt(d))
    min_alpha = d if mode == "lift" else np.sqrt(d)
    if alpha < min_alpha * (1.0 - 1e-12):
        raise ParameterError(
            f"alpha={alpha:.6g} below the attainable rounding {min_alpha:.6g}"
        )

    if d == 1:
        # the hull is an interval; its rounding is exact
        lo, hi = float(pts.min()), float(pts.max())
        c = 0.5 * (lo + hi)
        r = 0.5 * (hi - lo)
        return Ellipsoid(np.array([[1.0 / r**2]]), np.array([c]))

    if mode == "lift":
        X = np.hstack([pts, np.ones((n, 1))])
        m = d + 1
        # achieved rounding is (1 + eps) * d; leave half the slack for it
        eps_target = max((alpha * (1.0 + tol)) / d - 1.0, tol) * 0.5
    elif mode == "center":
        c0 = pts.mean(axis=0)
        X = pts - c0
        m = d
        eps_target = max((alpha * (1.0 + tol)) ** 2 / d - 1.0, tol) * 0.5
    else:
        raise ParameterError(f"unknown rounding mode {mode!r}")

    u = np.full(n, 1.0 / n)
    V = X.T @ (X * u[:, None])
    Vinv = np.linalg.inv(V)
    M = np.einsum("ij,ij->i", X @ Vinv, X)

    it = 0
    refresh = 0
    while True:
        i_plus = int(np.argmax(M))
        kappa = float(M[i_plus])
        eps_plus = kappa / m - 1.0
        if eps_plus <= eps_target:
            break
        if it >= max_iter:
            achieved = (1.0 + eps_plus) * (d if mode == "lift" else np.sqrt(d))
            raise ConvergenceError(float(achieved), it)
        # away step: the support point with smallest leverage
        act = np.flatnonzero(u > 1e-14)
        i_minus = int(act[np.argmin(M[act])])
        eps_minus = 1.0 - float(M[i_minus]) / m
        if eps_plus >= eps_minus:
            i_step, kap = i_plus, kappa
            beta = (kap - m) / (m * (kap - 1.0))
        else:
            i_step, kap = i_minus, float(M[i_minus])
            beta = (kap - m) / (m * (kap - 1.0))
            beta = max(beta, -u[i_step] / (1.0 - u[i_step]))
        u *= 1.0 - beta
        u[i_step] += beta
        x = X[i_step]
        # Sherman-Morrison update of Vinv and the leverage scores
        Vx = Vinv @ x
        denom = 1.0 - beta + beta * kap
        Vinv = (Vinv - (beta / denom) * np.outer(Vx, Vx)) / (1.0 - beta)
        XVx = X @ Vx
        M = (M - (beta / denom) * XVx**2) / (1.0 - beta)
        it += 1
        refresh += 1
        if refresh >= 512:
            # guard against drift in the rank-1 updates
            V = X.T @ (X * u[:, None])
            Vinv = np.linalg.inv(V)
            M = np.einsum("ij,ij->i", X @ Vinv, X)
            refresh = 0

    c = u @ pts
    centered = pts - c
    Lam = centered.T @ (centered * u[:, None])
    Lam = 0.5 * (Lam + Lam.T)
    Linv = np.linalg.inv(Lam)
    Linv = 0.5 * (Linv + Linv.T)
    # normalize so the farthest input point sits on the boundary
    s2 = float(np.einsum("ij,ij->i", centered @ Linv, centered).max())
    return Ellipsoid(Linv / s2, c)


def ellipsoid_axis_vertices(E: Ellipsoid, scale: float = 1.0) -> np.ndarray:
    """The 2d extreme points of scale*(E - c) + c along the symmetry axes:
    c +- scale * lambda_i^{-1/2} u_i for each eigenpair (lambda_i, u_i)."""
    if scale <= 0:
        raise ParameterError("scale must be positive")
    lam, U = np.linalg.eigh(E.form)
    radii = scale / np.sqrt(lam)
    steps = U * radii[None, :]
    return np.concatenate([E.center + steps.T, E.center - steps.T], axis=0)


# ---------------------------------------------------------------------------
# Convex hull membership and Carathéodory reduction
# ---------------------------------------------------------------------------


def hull_membership(points, x, tol: float = _MEMBERSHIP_TOL):
    """Feasibility solve for x in conv(points).

    Returns a weight vector over the rows when feasible, otherwise None and
    a separating direction.
    """
    pts = _as_points(points)
    x = np.asarray(x, dtype=float).ravel()
    n, d = pts.shape
    A_eq = np.vstack([pts.T, np.ones((1, n))])
    b_eq = np.concatenate([x, [1.0]])
    res = linprog(
        c=np.zeros(n),
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=[(0.0, None)] * n,
        method="highs",
        options={"primal_feasibility_tolerance": tol},
    )
    if res.status == 0:
        return np.clip(res.x, 0.0, None), None
    # separation: maximize y.x - b subject to y.q_i <= b, |y| bounded
    c = np.concatenate([-x, [1.0]])
    A_ub = np.hstack([pts, -np.ones((n, 1))])
    bounds = [(-1.0, 1.0)] * d + [(None, None)]
    sep = linprog(c=c, A_ub=A_ub, b_ub=np.zeros(n), bounds=bounds, method="highs")
    witness = sep.x[:d] if sep.status == 0 else None
    return None, witness


def _null_direction(pts: np.ndarray) -> Optional[np.ndarray]:
    """A nonzero gamma with sum(gamma) = 0 and gamma @ pts = 0, or None if
    the points are affinely independent."""
    m, _ = pts.shape
    A = np.vstack([pts.T, np.ones((1, m))])
    _, s, vt = np.linalg.svd(A)
    rank = int(np.sum(s > 1e-12 * max(s[0], 1.0))) if s.size else 0
    if rank >= m:
        return None
    return vt[-1]


def caratheodory_reduce(Q, s, cert_in: Optional[ConvexCertificate] = None) -> ConvexCertificate:
    """A convex certificate for s in conv(Q) whose support has at most
    (affine dimension of Q) + 1 points.

    When no certificate is supplied one is found by a feasibility solve;
    the support is then reduced by repeatedly driving a weight to zero
    along an affine-dependency direction of the active points.
    """
    pts = _as_points(Q)
    s = np.asarray(s, dtype=float).ravel()
    scale = max(1.0, float(np.abs(pts).max()))

    # a coinciding input point is its own certificate
    hits = np.flatnonzero(np.abs(pts - s).max(axis=1) <= 1e-9 * scale)
    if hits.size:
        return ConvexCertificate((int(hits[0]),), np.array([1.0]))

    if pts.shape[1] == 1:
        # the hull is an interval: the two extremes certify any point in it
        vals = pts[:, 0]
        i_lo, i_hi = int(np.argmin(vals)), int(np.argmax(vals))
        lo, hi = vals[i_lo], vals[i_hi]
        if not lo - 1e-9 * scale <= s[0] <= hi + 1e-9 * scale:
            return _raise_not_in_hull(pts, s)
        if hi - lo <= 1e-15 * scale:
            return ConvexCertificate((i_lo,), np.array([1.0]))
        t = float(np.clip((s[0] - lo) / (hi - lo), 0.0, 1.0))
        return ConvexCertificate((i_lo, i_hi), np.array([1.0 - t, t]))

    if cert_in is not None:
        support = np.asarray(cert_in.support, dtype=int)
        w = np.asarray(cert_in.weights, dtype=float)
    else:
        weights, _ = hull_membership(pts, s)
        if weights is None:
            return _raise_not_in_hull(pts, s)
        support = np.flatnonzero(weights > 1e-12)
        w = weights[support]
        w = w / w.sum()

    while True:
        gamma = _null_direction(pts[support])
        if gamma is None:
            break
        pos = gamma > 1e-14
        if not pos.any():
            gamma = -gamma
            pos = gamma > 1e-14
        t = np.min(w[pos] / gamma[pos])
        w = w - t * gamma
        keep = w > 1e-14
        # the minimizing coordinate hits zero exactly; enforce it
        w = np.clip(w, 0.0, None)
        support, w = support[keep], w[keep]
        w = w / w.sum()

    recon = w @ pts[support]
    if np.linalg.norm(recon - s) > 1e-8 * scale:
        return _raise_not_in_hull(pts, s)
    return ConvexCertificate(tuple(int(i) for i in support), w)


def _raise_not_in_hull(pts: np.ndarray, s: np.ndarray):
    _, witness = hull_membership(pts, s)
    raise NotInHullError(witness)
