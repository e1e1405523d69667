"""Parameter recovery and statistical checks for occupation-time limit laws.

The estimators follow the scikit-learn protocol (``fit`` returns ``self``,
fitted attributes end with an underscore, ``get_params``/``set_params``
come from :class:`~sklearn.base.BaseEstimator`), so they compose with
pipelines and model-selection utilities.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .chain import ChainModel, WanderingTable, exact_survival, laplace_Q
from .engine import EmpiricalLaw, laplace_functional_ensemble
from .exceptions import ArcsineLabError, ParameterError, SizeError
from .gas import GasParams, LaplaceQuery, double_laplace_closed_form, lamperti_cdf, sample_gas
from .gof import GofReport, _jsonable, cvm_distance, energy_permutation_test, ks_distance

__all__ = [
    "FitResult",
    "OccupationRatioTransformer",
    "GeneralizedArcsineFitter",
    "fit_gas",
    "tauberian_check",
    "double_laplace_rhs",
    "double_laplace_asymptotic_check",
    "strong_convergence_check",
    "MonteCarloPrecisionError",
]

DEFAULT_ALPHA_GRID = np.round(np.arange(1, 100) / 100.0, 2)
TRIVIAL_TOL = 1e-3
CONSTANT_VAR_TOL = 1e-6
VERTEX_TOL = 1e-9
MIN_SAMPLES = 1000


class MonteCarloPrecisionError(ArcsineLabError):
    """A Monte Carlo estimate is too noisy for the requested verdict."""


@dataclass
class FitResult:
    """Recovered ``(alpha, beta)``.

    ``kind`` is ``"regular"`` for a grid fit, ``"constant"`` (alpha = 1),
    ``"vertex"`` (alpha = 0) or ``"trivial"`` (beta a vertex; alpha is then
    not identifiable and reported as NaN).
    """

    alpha_hat: float
    beta_hat: np.ndarray
    objective: float
    kind: str = "regular"
    diagnostics: dict = field(default_factory=dict)

    @property
    def params(self) -> GasParams:
        alpha = 1.0 if math.isnan(self.alpha_hat) else self.alpha_hat
        return GasParams(alpha, tuple(self.beta_hat))

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _profile(X, alpha, beta):
    """Sum over non-degenerate coordinates of the CvM statistic, plus per-coordinate KS/CvM."""
    total = 0.0
    per = {}
    for i, b in enumerate(beta):
        if not 0.0 < b < 1.0:
            continue
        cdf = lambda y, b=b: lamperti_cdf(alpha, b, y)  # noqa: E731
        w2 = cvm_distance(X[:, i], cdf)
        total += w2
        per[f"ray_{i + 1}"] = {"cvm": w2, "ks": ks_distance(X[:, i], cdf)}
    return total, per


def _fit_array(X, alpha_grid=DEFAULT_ALPHA_GRID, min_samples=MIN_SAMPLES) -> FitResult:
    n, d = X.shape
    if n < min_samples:
        raise SizeError(f"fitting needs at least {min_samples} samples, got {n}")
    if d < 2:
        raise ParameterError("samples need d >= 2 coordinates")
    mean = X.mean(axis=0)
    beta = mean / mean.sum()

    top = int(np.argmax(beta))
    if beta[top] > 1.0 - TRIVIAL_TOL:
        e = np.zeros(d)
        e[top] = 1.0
        return FitResult(float("nan"), e, 0.0, "trivial", {"max_mean": float(beta[top])})
    if np.all(X.var(axis=0) < CONSTANT_VAR_TOL):
        return FitResult(1.0, beta, 0.0, "constant", {"max_variance": float(X.var(axis=0).max())})
    if np.all(X.max(axis=1) >= 1.0 - VERTEX_TOL):
        return FitResult(0.0, beta, 0.0, "vertex", {})

    xs = np.sort(X, axis=0)
    scores = np.array([_profile(xs, a, beta)[0] for a in alpha_grid])
    k = int(np.argmin(scores))             # first minimum: ties go to the smaller alpha
    alpha = float(alpha_grid[k])
    obj, per = _profile(xs, alpha, beta)
    return FitResult(alpha, beta, obj, "regular", {"marginals": per})


def _law_matrix(law, renormalize):
    if isinstance(law, EmpiricalLaw):
        return law.ratios(renormalize=renormalize)
    X = np.asarray(law, dtype=float)
    if renormalize:
        tot = X.sum(axis=1, keepdims=True)
        X = np.divide(X, tot, out=np.full_like(X, 1.0 / X.shape[1]), where=tot > 0)
    return X


def fit_gas(law, renormalize=True, alpha_grid=DEFAULT_ALPHA_GRID,
            min_samples=MIN_SAMPLES) -> FitResult:
    """Recover ``(alpha, beta)`` from occupation ratios at the last checkpoint.

    ``beta`` is the sample mean (rescaled to sum to one), ``alpha`` the grid
    point minimising the summed Cramer-von Mises distance of the marginals
    to their Lamperti laws.  Degenerate laws are detected first: a mean
    coordinate above ``1 - 1e-3`` gives a trivial law, marginal variances
    all below ``1e-6`` give ``alpha = 1``, all rows on simplex vertices give
    ``alpha = 0``.

    ``law`` is an :class:`EmpiricalLaw` or an array of ratio rows.
    """
    return _fit_array(_law_matrix(law, renormalize), np.asarray(alpha_grid, dtype=float),
                      min_samples)


class OccupationRatioTransformer(TransformerMixin, BaseEstimator):
    """Turn occupation counts into ratio vectors.

    Input rows are ``(S^1, ..., S^d, J)``: ray counts followed by the
    junction count, so each row sums to ``n``.  Output rows are ``S / n``, or
    ``S / sum(S)`` when ``renormalize`` is set.
    """

    def __init__(self, renormalize=True):
        self.renormalize = renormalize

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] < 3:
            raise ValueError("need at least two ray columns plus the junction column")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        if np.any(X < 0):
            raise ValueError("counts must be nonnegative")
        rays = X[:, :-1]
        denom = rays.sum(axis=1, keepdims=True) if self.renormalize else X.sum(axis=1, keepdims=True)
        return np.divide(rays, denom, out=np.full_like(rays, 1.0 / rays.shape[1]), where=denom > 0)


class GeneralizedArcsineFitter(BaseEstimator):
    """Estimator of ``(alpha, beta)`` from rows on the simplex.

    Parameters
    ----------
    alpha_grid : array-like, optional
        Candidate stability indices; defaults to ``0.01, 0.02, ..., 0.99``.
    renormalize : bool
        Divide each row by its sum before fitting.
    min_samples : int
        Smallest accepted sample size.

    Attributes
    ----------
    alpha_, beta_ : fitted parameters
    kind_ : str, see :class:`FitResult`
    result_ : FitResult
    """

    def __init__(self, alpha_grid=None, renormalize=True, min_samples=MIN_SAMPLES):
        self.alpha_grid = alpha_grid
        self.renormalize = renormalize
        self.min_samples = min_samples

    def _validate(self, X):
        X = check_array(X, dtype=np.float64)
        if X.shape[1] < 2:
            raise ValueError("need d >= 2 columns")
        if np.any(X < 0) or np.any(X.sum(axis=1) > 1.0 + 1e-9):
            raise ValueError("rows must be nonnegative with sum <= 1")
        return _law_matrix(X, self.renormalize)

    def fit(self, X, y=None):
        X = self._validate(X)
        grid = DEFAULT_ALPHA_GRID if self.alpha_grid is None else np.asarray(self.alpha_grid, float)
        self.result_ = _fit_array(X, grid, self.min_samples)
        self.alpha_ = self.result_.alpha_hat
        self.beta_ = self.result_.beta_hat
        self.kind_ = self.result_.kind
        self.n_features_in_ = X.shape[1]
        return self

    def score(self, X, y=None):
        """Negative summed marginal Cramer-von Mises distance to the fitted law."""
        check_is_fitted(self, "result_")
        X = self._validate(X)
        if self.kind_ != "regular":
            return -float(np.sum((X - self.beta_) ** 2)) if self.kind_ != "vertex" else 0.0
        return -_profile(np.sort(X, axis=0), self.alpha_, self.beta_)[0]

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "result_")
        return sample_gas(self.result_.params, random_state, n_samples)


def tauberian_check(table: WanderingTable, s_grid, threshold=0.01, rtol=1e-4) -> GofReport:
    """Largest gap ``|Q_i(s) / sum_j Q_j(s) - p_i|`` over rays and ``s_grid``."""
    p = np.asarray(table.p, dtype=float)
    per_s = {}
    worst = 0.0
    for s in s_grid:
        q = np.array([laplace_Q(table, i, float(s), rtol=rtol).value for i in range(1, table.d + 1)])
        dev = float(np.max(np.abs(q / q.sum() - p)))
        per_s[repr(float(s))] = dev
        worst = max(worst, dev)
    return GofReport("tauberian", worst, (table.horizon,), threshold, worst < threshold,
                     {"deviation_by_s": per_s, "p": list(p)})


def double_laplace_rhs(table: WanderingTable, q: float, lam, t: float) -> float:
    """``sum_i Q_i((q+lam_i)/t) / sum_i (q+lam_i) Q_i((q+lam_i)/t)``."""
    lam = np.asarray(lam, dtype=float)
    s = (q + lam) / t
    Q = np.array([laplace_Q(table, i + 1, float(s[i])).value for i in range(table.d)])
    return float(Q.sum() / np.sum((q + lam) * Q))


def double_laplace_asymptotic_check(model: ChainModel, q: float, lam, t_grid, n_traj: int,
                                    seed: int = 0, table: WanderingTable | None = None,
                                    threshold: float = 0.05, max_se: float = 0.01,
                                    workers: int = 1, start=None) -> GofReport:
    """Compare the simulated double Laplace transform with its wandering-rate asymptotics.

    For each ``t`` the left side is estimated over ``n_traj`` exact chain
    paths and the right side evaluated from the exact table.  Passes when
    ``|LHS/RHS - 1|`` decreases along ``t_grid`` and its last value is below
    ``threshold``.
    """
    lam = np.asarray(lam, dtype=float)
    t_grid = [float(t) for t in t_grid]
    if table is None:
        horizon = int(math.ceil(30.0 * max(t_grid) / (q + lam.min())))
        table = exact_survival(model, horizon)
    rows = []
    for k, t in enumerate(t_grid):
        lhs, se = laplace_functional_ensemble(model, q, lam, t, n_traj, seed=seed + k,
                                              start=start, workers=workers)
        if se > max_se:
            raise MonteCarloPrecisionError(
                f"standard error {se:.3g} at t={t:g} exceeds {max_se}; use more trajectories")
        rhs = double_laplace_rhs(table, q, lam, t)
        bound_lo, bound_hi = 1.0 / (q + lam.max()), 1.0 / q
        rows.append({"t": t, "lhs": lhs, "lhs_se": se, "rhs": rhs,
                     "error": abs(lhs / rhs - 1.0),
                     "rhs_in_bounds": bool(bound_lo - 1e-12 <= rhs <= bound_hi + 1e-12)})
    errs = [r["error"] for r in rows]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    limit = double_laplace_closed_form(
        GasParams(0.5, tuple(np.asarray(model.p))), LaplaceQuery(q, tuple(lam)))
    passed = decreasing and errs[-1] < threshold and all(r["rhs_in_bounds"] for r in rows)
    return GofReport("double-laplace-asymptotic", errs[-1], (n_traj,), threshold, passed,
                     {"rows": rows, "decreasing": decreasing, "limit_closed_form": limit})


def strong_convergence_check(law_a: EmpiricalLaw, law_b: EmpiricalLaw, renormalize=False,
                             n_perm=200, quantile=0.99, max_samples=3000, rng=0) -> GofReport:
    """Energy permutation test between the final-checkpoint ratios of two ensembles."""
    if not np.array_equal(law_a.checkpoints, law_b.checkpoints):
        raise ParameterError("ensembles must share checkpoints")
    if law_a.d != law_b.d:
        raise ParameterError("ensembles must have the same number of rays")
    rep = energy_permutation_test(law_a.ratios(renormalize=renormalize),
                                  law_b.ratios(renormalize=renormalize),
                                  n_perm=n_perm, quantile=quantile, max_samples=max_samples, rng=rng)
    rep.kind = "strong-convergence"
    rep.details["checkpoint"] = int(law_a.checkpoints[-1])
    rep.details["measures"] = [law_a.manifest.get("measure"), law_b.manifest.get("measure")]
    return rep
