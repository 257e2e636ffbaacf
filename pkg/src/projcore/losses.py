"""M-estimator loss family, guarantee factors, and the regression lift.

Each loss is evaluated at |x|; the piecewise kinds (huber, tukey) switch
branches at |x| = lambda.  ``guarantee_factor`` returns the multiplicative
L-infinity bound each loss inherits from the distance coreset; the
regression path lifts every point by its label, builds the distance
coreset over the lifted set, and maps the support back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import geometry as geo
from .errors import ParameterError
from .geometry import PointSet
from .linf_coreset import JkConfig, LinfCoreset, _j1_general

__all__ = [
    "LOSS_KINDS",
    "LossSpec",
    "RegressionInstance",
    "eval_loss",
    "guarantee_factor",
    "influence_over_r",
    "regression_lift",
    "regression_linf_coreset",
    "check_loglog_lipschitz",
    "LipschitzReport",
]

LOSS_KINDS = (
    "cauchy",
    "welsch",
    "huber",
    "geman-mcclure",
    "tukey",
    "l1-l2",
    "fair",
    "concave",
    "power",
)

_LAMBDA_KINDS = frozenset({"cauchy", "welsch", "huber", "tukey", "fair"})


def _validate_user_function(kind: str, func: Callable, z: Optional[float]):
    """Registration gate for user-supplied losses: the guarantees are
    conditional on monotonicity plus the concavity / power bound, so a
    function that fails the spot checks is rejected."""
    xs = np.logspace(-3, 3, 60)
    vals = np.array([float(func(x)) for x in xs])
    if abs(float(func(0.0))) > 1e-12:
        raise ParameterError(f"{kind} loss must vanish at 0")
    if np.any(vals < -1e-12):
        raise ParameterError(f"{kind} loss must be nonnegative")
    if np.any(np.diff(vals) < -1e-9 * max(1.0, np.abs(vals).max())):
        raise ParameterError(f"{kind} loss must be non-decreasing")
    if kind == "concave":
        slopes = vals / xs
        if np.any(np.diff(slopes) > 1e-9 * max(1.0, slopes.max())):
            raise ParameterError("concave loss must have non-increasing slope f(x)/x")
    if kind == "power":
        for i in range(len(xs)):
            for jj in range(i + 1, len(xs), 7):
                if vals[i] <= 0:
                    continue
                bound = (xs[jj] / xs[i]) ** z
                if vals[jj] / vals[i] > bound * (1 + 1e-9):
                    raise ParameterError(
                        "power loss violates Psi(y)/Psi(x) <= (y/x)^z "
                        f"at x={xs[i]:.3g}, y={xs[jj]:.3g}"
                    )


@dataclass(frozen=True)
class LossSpec:
    """One of the supported loss kinds with its scale parameter.

    ``concave`` and ``power`` take a user function (defaults: sqrt, and
    x**z); they are validated at construction.
    """

    kind: str
    lam: float = 1.0
    z: Optional[float] = None
    func: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ParameterError(f"unknown loss kind {self.kind!r}; choose from {LOSS_KINDS}")
        if self.lam <= 0:
            raise ParameterError("lambda must be positive")
        if self.kind == "power":
            if self.z is None:
                object.__setattr__(self, "z", 2.0)
            if self.z <= 0:
                raise ParameterError("power exponent z must be positive")
            if self.func is None:
                zz = self.z
                object.__setattr__(self, "func", lambda x, _z=zz: abs(x) ** _z)
            _validate_user_function("power", self.func, self.z)
        elif self.kind == "concave":
            if self.func is None:
                object.__setattr__(self, "func", lambda x: math.sqrt(abs(x)))
            _validate_user_function("concave", self.func, None)
        elif self.func is not None:
            raise ParameterError(f"{self.kind} does not take a user function")


def eval_loss(spec: LossSpec, x) -> np.ndarray | float:
    """Evaluate the loss at |x| (scalar or elementwise on arrays)."""
    ax = np.abs(np.asarray(x, dtype=float))
    lam = spec.lam
    kind = spec.kind
    if kind == "cauchy":
        out = 0.5 * lam**2 * np.log1p((ax / lam) ** 2)
    elif kind == "welsch":
        out = 0.5 * lam**2 * (1.0 - np.exp(-((ax / lam) ** 2)))
    elif kind == "huber":
        out = np.where(ax <= lam, 0.5 * ax**2, lam * ax - 0.5 * lam**2)
    elif kind == "geman-mcclure":
        out = ax**2 / (2.0 + 2.0 * ax**2)
    elif kind == "tukey":
        out = np.where(
            ax <= lam,
            lam**2 / 6.0 * (1.0 - (1.0 - np.minimum(ax, lam) ** 2 / lam**2) ** 3),
            lam**2 / 6.0,
        )
    elif kind == "l1-l2":
        out = 2.0 * (np.sqrt(1.0 + ax**2 / 2.0) - 1.0)
    elif kind == "fair":
        out = lam * ax - lam**2 * np.log1p(ax / lam)
    else:  # concave / power
        out = np.vectorize(spec.func, otypes=[float])(ax)
    if np.isscalar(x) or np.asarray(x).ndim == 0:
        return float(out)
    return out


def influence_over_r(spec: LossSpec, r, floor: float = 1e-12) -> np.ndarray:
    """IRLS weight Psi'(r)/r at residual magnitudes r (floored near zero)."""
    ar = np.maximum(np.abs(np.asarray(r, dtype=float)), floor)
    lam = spec.lam
    kind = spec.kind
    if kind == "cauchy":
        return 1.0 / (1.0 + (ar / lam) ** 2)
    if kind == "welsch":
        return np.exp(-((ar / lam) ** 2))
    if kind == "huber":
        return np.minimum(1.0, lam / ar)
    if kind == "geman-mcclure":
        return 1.0 / (1.0 + ar**2) ** 2
    if kind == "tukey":
        w = (1.0 - (ar / lam) ** 2) ** 2
        return np.where(ar <= lam, w, 0.0)
    if kind == "l1-l2":
        return 1.0 / np.sqrt(1.0 + ar**2 / 2.0)
    if kind == "fair":
        return 1.0 / (1.0 + ar / lam)
    # numerical derivative for user functions
    h = np.maximum(1e-6 * ar, 1e-9)
    dpsi = (np.vectorize(spec.func, otypes=[float])(ar + h)
            - np.vectorize(spec.func, otypes=[float])(np.maximum(ar - h, 0.0))) / (2 * h)
    return np.maximum(dpsi, 0.0) / ar


def guarantee_factor(spec: LossSpec, d: int) -> float:
    """Multiplicative L-infinity regression bound for ambient dimension d."""
    if d < 1:
        raise ParameterError("d must be at least 1")
    if spec.kind == "huber":
        return 16.0 * (d + 1) ** 3
    if spec.kind == "concave":
        return 4.0 * (d + 1) ** 1.5
    if spec.kind == "power":
        return float(4.0**spec.z * (d + 1) ** (1.5 * spec.z))
    return 8.0 * (d + 1) ** 3


def distance_exponent(spec: LossSpec) -> float:
    """The distance-coreset exponent each guarantee proof invokes: z = 2 for
    the closed-form kinds, z = 1 for concave and the power base case."""
    return 1.0 if spec.kind in ("concave", "power") else 2.0


@dataclass(frozen=True)
class RegressionInstance:
    """Points with one real label per point."""

    P: PointSet
    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).ravel()
        if b.shape[0] != self.P.n:
            raise ParameterError("label count must equal the number of points")
        b = b.copy()
        b.flags.writeable = False
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.P.n

    @property
    def dim(self) -> int:
        return self.P.dim

    def residuals(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float).ravel()
        return self.P.points @ w - self.b


def regression_lift(inst: RegressionInstance) -> PointSet:
    """Append each point's label as an extra coordinate."""
    return PointSet(np.hstack([inst.P.points, inst.b[:, None]]))


def regression_objective(inst: RegressionInstance, spec: LossSpec, w,
                         weights: Optional[np.ndarray] = None) -> float:
    r = np.abs(inst.residuals(w))
    vals = eval_loss(spec, r)
    if weights is not None:
        vals = np.asarray(vals) * np.asarray(weights, dtype=float)
    return float(np.sum(vals))


def regression_linf_coreset(inst: RegressionInstance, spec: LossSpec,
                            config: Optional[JkConfig] = None) -> LinfCoreset:
    """L-infinity coreset for M-estimator regression.

    Builds the distance coreset over the lifted points with j = d and maps
    the support back to instance indices.  For every query w,
    max over P of Psi(|p.w - b|) <= guarantee_factor(spec, d) * max over C.
    """
    config = config or JkConfig()
    lifted = regression_lift(inst)
    d = inst.dim
    indices, residual = _j1_general(lifted.points, d, None, config, require_on_flat=False)
    return LinfCoreset(indices, d, 1, guarantee_factor(spec, d), residual)


def verify_regression_ratio(inst: RegressionInstance, coreset_indices, spec: LossSpec,
                            num_queries: int = 1000, rng_seed: int = 0) -> float:
    """Max over sampled queries w of (max_P Psi)/(max_C Psi); 0/0 is 1."""
    cidx = np.asarray(sorted(set(int(i) for i in coreset_indices)), dtype=int)
    rng = np.random.default_rng(rng_seed)
    worst = 1.0
    scale = max(1.0, float(np.abs(inst.b).max()))
    for _ in range(num_queries):
        w = rng.normal(size=inst.dim) * 10.0 ** rng.uniform(-2, 2)
        vals = np.asarray(eval_loss(spec, inst.residuals(w)))
        top_p = float(vals.max())
        top_c = float(vals[cidx].max())
        if top_p <= 0.0:
            ratio = 1.0
        elif top_c <= 0.0:
            ratio = np.inf
        else:
            ratio = top_p / top_c
        worst = max(worst, ratio)
    return float(worst)


@dataclass(frozen=True)
class LipschitzReport:
    holds: bool
    worst_b: float
    worst_x: float
    worst_excess: float

    def __bool__(self) -> bool:
        return self.holds


def check_loglog_lipschitz(spec: LossSpec, rho: float,
                           grid: Optional[tuple] = None) -> LipschitzReport:
    """Check f(b x) <= b^rho f(x) on a logarithmic grid of (b, x) pairs."""
    if rho < 1:
        raise ParameterError("rho must be at least 1")
    if grid is None:
        bs = np.logspace(0, 3, 40)
        xs = np.logspace(-3, 3, 40)
    else:
        bs, xs = grid
    worst = (0.0, 0.0, 0.0)
    ok = True
    for b in np.asarray(bs, dtype=float):
        fx = np.asarray(eval_loss(spec, xs), dtype=float)
        fbx = np.asarray(eval_loss(spec, b * np.asarray(xs)), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            excess = fbx - b**rho * fx
        rel = excess / np.maximum(np.abs(fbx), 1e-300)
        bad = rel > 1e-9
        if bad.any():
            ok = False
            i = int(np.argmax(rel))
            if rel[i] > worst[2]:
                worst = (float(b), float(np.asarray(xs)[i]), float(rel[i]))
    return LipschitzReport(ok, worst[0], worst[1], worst[2])
