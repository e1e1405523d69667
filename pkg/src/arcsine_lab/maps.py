"""Interval maps with indifferent fixed points.

Two systems are provided:

* Boole's transformation ``T x = x - 1/x`` on the real line, with rays
  ``(-inf, -1)`` (label 1), ``(1, inf)`` (label 2) and junction ``[-1, 1]``.
* The cubic three-branch map on ``[0, 1]``,
  ``T x = x + c_j (x - x_j)**3`` on the branches ``[0, 1/3]``, ``(1/3, 2/3)``,
  ``[2/3, 1]`` with fixed points ``x_j = 0, 1/2, 1``.  Its rays are the
  one-sided neighbourhoods ``(0, eps)``, ``(1/2 - eps, 1/2)``,
  ``(1/2, 1/2 + eps)``, ``(1 - eps, 1)`` (labels 1..4).

Label 0 is always the junction.  Near a fixed point the cubic increment is
far below the spacing of floats around ``x_j``, so iteration keeps the state
as ``(branch, offset)`` with ``x = x_j + offset``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .exceptions import AbsorbedError, NumericalError, ParameterError
from .measures import InitialMeasure

__all__ = [
    "MapModel",
    "EscapeIntegral",
    "boole",
    "cubic3",
    "step",
    "step_offset",
    "to_offset",
    "step_state",
    "classify",
    "inverse_branch",
    "inverse_branch_offset",
    "escape_time_tabulate",
    "sample_initial",
]

BOOLE = "boole"
CUBIC3 = "cubic3"

# ray label -> (branch index 1..3, side)
_CUBIC_RAYS = {1: (1, +1), 2: (2, -1), 3: (2, +1), 4: (3, -1)}


@dataclass(frozen=True)
class MapModel:
    """Immutable description of one of the supported maps.

    Use the :func:`boole` and :func:`cubic3` factories rather than building
    this directly; they validate the geometry.
    """

    kind: str
    fixed_points: tuple = ()
    branch_constants: tuple = ()
    ray_epsilon: float = 0.0
    branch_intervals: tuple = ()
    ray_names: tuple = field(default=())

    @property
    def n_rays(self) -> int:
        return len(self.ray_names)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "fixed_points": list(self.fixed_points),
            "branch_constants": list(self.branch_constants),
            "ray_epsilon": self.ray_epsilon,
            "rays": list(self.ray_names),
        }


def boole() -> MapModel:
    return MapModel(
        kind=BOOLE,
        branch_intervals=((-np.inf, 0.0), (0.0, np.inf)),
        ray_names=("(-inf,-1)", "(1,inf)"),
    )


def cubic3(eps: float = 0.05, c=(18.0, 72.0, 18.0), check_grid: int = 1000) -> MapModel:
    """Cubic three-branch map with ray half-width ``eps``.

    Raises :class:`ParameterError` if some ray is not mapped inside its own
    branch interval (checked on a grid of ``check_grid`` points per ray).
    """
    c = tuple(float(v) for v in c)
    if len(c) != 3 or min(c) <= 0:
        raise ParameterError("cubic3 needs three positive branch constants")
    if not 0 < eps < 1 / 6:
        raise ParameterError(f"ray half-width must lie in (0, 1/6), got {eps!r}")
    model = MapModel(
        kind=CUBIC3,
        fixed_points=(0.0, 0.5, 1.0),
        branch_constants=c,
        ray_epsilon=float(eps),
        branch_intervals=((0.0, 1 / 3), (1 / 3, 2 / 3), (2 / 3, 1.0)),
        ray_names=("A1+", "A2-", "A2+", "A3-"),
    )
    for ray, (j, side) in _CUBIC_RAYS.items():
        lo, hi = model.branch_intervals[j - 1]
        offs = side * np.linspace(0.0, eps, check_grid + 2)[1:-1]
        img = model.fixed_points[j - 1] + offs + c[j - 1] * offs ** 3
        if np.any(img <= lo) or np.any(img >= hi):
            raise ParameterError(
                f"ray {model.ray_names[ray - 1]} with eps={eps} is not mapped into its branch")
    return model


def _require(model, kind):
    if model.kind != kind:
        raise ParameterError(f"operation needs a {kind} model, got {model.kind}")


def _branch_of(x: float) -> int:
    if x <= 1 / 3:
        return 1
    if x < 2 / 3:
        return 2
    return 3


def step(model: MapModel, x: float) -> float:
    """One application of the map in absolute coordinates."""
    if model.kind == BOOLE:
        if x == 0.0:
            raise AbsorbedError("Boole's map is undefined at 0; resample the initial point")
        return x - 1.0 / x
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"state {x!r} is outside [0, 1]")
    j = _branch_of(x)
    xj = model.fixed_points[j - 1]
    return x + model.branch_constants[j - 1] * (x - xj) ** 3


def step_offset(model: MapModel, ray: int, delta: float) -> float:
    """Advance the offset from the fixed point of ``ray`` by one step.

    Returns ``delta + c * delta**3``.  Raises :class:`ParameterError` when
    ``delta`` is not inside the ray; callers then fall back to :func:`step`.
    """
    _require(model, CUBIC3)
    j, side = _CUBIC_RAYS[ray]
    if delta != 0.0 and (side * delta < 0 or abs(delta) > model.ray_epsilon):
        raise ParameterError(f"offset {delta!r} is not inside ray {ray}")
    return delta + model.branch_constants[j - 1] * delta ** 3


def to_offset(model: MapModel, x: float):
    """Split an absolute state into ``(branch, offset)``."""
    _require(model, CUBIC3)
    j = _branch_of(x)
    return j, x - model.fixed_points[j - 1]


def step_state(model: MapModel, branch: int, delta: float):
    """One step of the cubic map on the ``(branch, offset)`` representation.

    While the image stays in the same branch the offset is updated without
    ever forming ``x_j + delta``; otherwise the absolute image is rebuilt and
    split again.
    """
    c = model.branch_constants[branch - 1]
    nd = delta + c * delta ** 3
    if branch == 1 and nd <= 1 / 3:
        return 1, nd
    if branch == 2 and -1 / 6 < nd < 1 / 6:
        return 2, nd
    if branch == 3 and nd >= -1 / 3:
        return 3, nd
    x = model.fixed_points[branch - 1] + nd
    return to_offset(model, min(max(x, 0.0), 1.0))


def _classify_offset(model, branch, delta):
    eps = model.ray_epsilon
    if branch == 1:
        return 1 if 0.0 < delta < eps else 0
    if branch == 2:
        if -eps < delta < 0.0:
            return 2
        return 3 if 0.0 < delta < eps else 0
    return 4 if -eps < delta < 0.0 else 0


def classify(model: MapModel, x: float) -> int:
    """Ray label of ``x``; 0 means junction.  Boundary points go to the junction."""
    if model.kind == BOOLE:
        if x < -1.0:
            return 1
        if x > 1.0:
            return 2
        return 0
    if not 0.0 <= x <= 1.0:
        raise ParameterError(f"state {x!r} is outside [0, 1]")
    return _classify_offset(model, *to_offset(model, x))


_BRANCH_OFFSET_BOUNDS = {1: (0.0, 1 / 3), 2: (-1 / 6, 1 / 6), 3: (-1 / 3, 0.0)}


def inverse_branch_offset(model: MapModel, branch: int, eta: float, tol: float = 1e-14,
                          max_iter: int = 100) -> float:
    """Solve ``delta + c delta**3 = eta`` for the offset ``delta`` inside ``branch``.

    Safeguarded Newton iteration: steps leaving the current bracket are
    replaced by bisection.
    """
    _require(model, CUBIC3)
    if branch not in (1, 2, 3):
        raise ParameterError(f"branch must be 1, 2 or 3, got {branch!r}")
    c = model.branch_constants[branch - 1]
    lo, hi = _BRANCH_OFFSET_BOUNDS[branch]
    if eta == 0.0:
        return 0.0
    x = min(max(eta, lo), hi)
    # relative stopping rule: offsets near the fixed point can be ~1e-8 or smaller
    for _ in range(max_iter):
        g = x + c * x ** 3 - eta
        if abs(g) <= tol * abs(eta):
            return x
        if g > 0:
            hi = x
        else:
            lo = x
        nx = x - g / (1.0 + 3.0 * c * x * x)
        if not lo <= nx <= hi:
            nx = 0.5 * (lo + hi)
        if abs(nx - x) <= 4e-16 * abs(x):
            return nx
        x = nx
    raise NumericalError(f"inverse branch {branch} did not converge for eta={eta!r}")


def inverse_branch(model: MapModel, branch: int, y: float) -> float:
    """Preimage of ``y`` in ``[0, 1]`` under the given cubic branch."""
    _require(model, CUBIC3)
    if branch not in (1, 2, 3):
        raise ParameterError(f"branch must be 1, 2 or 3, got {branch!r}")
    if not 0.0 <= y <= 1.0:
        raise ParameterError(f"y must lie in [0, 1], got {y!r}")
    xj = model.fixed_points[branch - 1]
    return xj + inverse_branch_offset(model, branch, y - xj)


@dataclass(frozen=True)
class EscapeIntegral:
    """Tabulated escape-time integral of one ray.

    ``values[k]`` is the time (in steps) needed by the inverse branch to pull
    the far end of the branch down to offset ``offsets[k]`` from the fixed
    point.  ``orbit[n]`` is ``|f^n(boundary) - x_j|``.
    """

    ray: int
    offsets: np.ndarray
    values: np.ndarray
    orbit: np.ndarray

    def __call__(self, x):
        """Log-log interpolation of the table at offset(s) ``x``."""
        lx = np.log(np.asarray(x, dtype=float))
        return np.exp(np.interp(lx, np.log(self.offsets), np.log(self.values)))

    def inverse(self, n):
        """Offset at which the integral equals ``n`` (interpolated)."""
        ln = np.log(np.asarray(n, dtype=float))
        lv, lo = np.log(self.values[::-1]), np.log(self.offsets[::-1])
        return np.exp(np.interp(ln, lv, lo))


def escape_time_tabulate(model: MapModel, ray: int, n_grid: int = 200, lo: float = 1e-8,
                         horizon: int = 10_000) -> EscapeIntegral:
    """Tabulate the escape-time integral of ``ray`` on a log-spaced offset grid.

    For a right-hand ray this is ``U(x) = int_{x_j + x}^1 dy / (y - f_j(y))``
    and for a left-hand ray ``U(x) = int_0^{x_j - x} dy / (f_j(y) - y)``.  The
    integrand is evaluated as ``1 / (c |f_j(y) - x_j|**3)``, which equals
    ``1/|y - f_j(y)|`` but avoids the cancellation in the difference.
    """
    _require(model, CUBIC3)
    if ray not in _CUBIC_RAYS:
        raise ParameterError(f"cubic3 rays are labelled 1..4, got {ray!r}")
    j, side = _CUBIC_RAYS[ray]
    c = model.branch_constants[j - 1]
    xj = model.fixed_points[j - 1]
    far = (1.0 - xj) if side > 0 else xj   # |offset| of the branch end

    def integrand(u):
        delta = inverse_branch_offset(model, j, side * u)
        return 1.0 / (c * abs(delta) ** 3)

    grid = np.geomspace(lo, model.ray_epsilon, n_grid)
    values = np.empty(n_grid)
    acc, _ = integrate.quad(integrand, grid[-1], far, epsabs=0.0, epsrel=1e-12, limit=200)
    values[-1] = acc
    for k in range(n_grid - 2, -1, -1):
        piece, _ = integrate.quad(integrand, grid[k], grid[k + 1], epsabs=0.0, epsrel=1e-12,
                                  limit=200)
        acc += piece
        values[k] = acc
    if np.any(np.diff(values) >= 0):
        raise NumericalError("escape-time table is not strictly decreasing; refine the grid")

    orbit = np.empty(horizon + 1)
    orbit[0] = far
    eta = side * far
    for n in range(1, horizon + 1):
        eta = inverse_branch_offset(model, j, eta)
        orbit[n] = abs(eta)
    return EscapeIntegral(ray=ray, offsets=grid, values=values, orbit=orbit)


_FORBIDDEN = {
    BOOLE: (0.0, 1.0, -1.0),
    CUBIC3: (0.0, 1 / 3, 0.5, 2 / 3, 1.0),
}


def sample_initial(model: MapModel, measure: InitialMeasure, rng=None) -> float:
    """Draw an initial state; fixed points and branch boundaries are redrawn."""
    rng = np.random.default_rng(rng)
    kind = measure.kind
    if kind == "uniform_boole" and model.kind != BOOLE:
        raise ParameterError("uniform_boole is a measure on (-2, 2) for Boole's map")
    if kind == "uniform01" and model.kind != CUBIC3:
        raise ParameterError("uniform01 is a measure on (0, 1) for the cubic map")
    if kind not in ("uniform_boole", "uniform01", "beta_like"):
        raise ParameterError(f"{kind!r} is not an initial measure for interval maps")
    while True:
        if kind == "uniform_boole":
            x = rng.uniform(-2.0, 2.0)
        elif kind == "uniform01":
            x = rng.random()
        else:
            x = rng.beta(measure.a, measure.b)
            if model.kind == BOOLE:
                x = -2.0 + 4.0 * x
        if x not in _FORBIDDEN[model.kind]:
            return float(x)
