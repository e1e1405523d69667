"""Multidimensional generalized arcsine distributions.

A law ``zeta(alpha, beta)`` on the simplex in ``R^d`` is the vector of ratios
``xi_i / sum_j xi_j`` of independent one-sided ``alpha``-stable variables
with Laplace transforms ``E exp(-lam xi_i) = exp(-beta_i lam**alpha)``.
``alpha = 1`` is the point mass at ``beta`` and ``alpha = 0`` the mixture of
simplex vertices ``e_i`` with weights ``beta_i``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import BoundaryError, ParameterError, UnsupportedMarginalError

__all__ = [
    "GasParams",
    "LaplaceQuery",
    "sample_one_sided_stable",
    "sample_gas",
    "lamperti_pdf",
    "lamperti_cdf",
    "marginal_params",
    "double_laplace_closed_form",
    "double_laplace_monte_carlo",
    "gas_mean",
]

_BETA_SUM_TOL = 1e-12


@dataclass(frozen=True)
class GasParams:
    """Index ``(alpha, beta)`` of a generalized arcsine law.

    Parameters
    ----------
    alpha : float
        Stability index in ``[0, 1]``.
    beta : sequence of float
        Weights in ``[0, 1]`` summing to one, with at least two entries.
    """

    alpha: float
    beta: tuple

    def __post_init__(self):
        alpha = float(self.alpha)
        beta = tuple(float(b) for b in np.asarray(self.beta, dtype=float).ravel())
        if not 0.0 <= alpha <= 1.0 or not np.isfinite(alpha):
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if len(beta) < 2:
            raise ParameterError(f"beta needs d >= 2 entries, got {len(beta)}")
        if any(not 0.0 <= b <= 1.0 for b in beta):
            raise ParameterError(f"each beta_i must lie in [0, 1], got {beta}")
        if abs(sum(beta) - 1.0) > _BETA_SUM_TOL:
            raise ParameterError(f"beta must sum to 1 within {_BETA_SUM_TOL:g}, got sum {sum(beta)!r}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def d(self) -> int:
        return len(self.beta)

    @property
    def is_trivial(self) -> bool:
        """True when ``beta`` is a simplex vertex, so the law is a point mass there."""
        return max(self.beta) == 1.0

    @property
    def trivial_index(self) -> int | None:
        return self.beta.index(1.0) if self.is_trivial else None

    def as_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)


@dataclass(frozen=True)
class LaplaceQuery:
    """Arguments ``(q, lam)`` of the double Laplace transform."""

    q: float
    lam: tuple

    def __post_init__(self):
        q = float(self.q)
        lam = tuple(float(v) for v in np.asarray(self.lam, dtype=float).ravel())
        if not q > 0 or not np.isfinite(q):
            raise ParameterError(f"q must be > 0, got {self.q!r}")
        if any(not v >= 0 or not np.isfinite(v) for v in lam):
            raise ParameterError(f"lambda entries must be finite and >= 0, got {lam}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "lam", lam)


def _check_stable_args(alpha, scale_beta):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha!r}")
    if not scale_beta > 0 or not np.isfinite(scale_beta):
        raise ParameterError(f"scale_beta must be > 0, got {scale_beta!r}")


def _scaled_log_unit_stable(alpha, rng, size):
    """``alpha * log(xi)`` for unit-scale one-sided stable draws (Kanter's representation).

    ``xi = sin(a U) / sin(U)**(1/a) * (sin((1-a) U) / E)**((1-a)/a)`` with
    ``U ~ Uniform(0, pi)`` and ``E ~ Exp(1)`` has Laplace transform
    ``exp(-lam**a)``.  The scaled log stays finite even when ``1/alpha``
    overflows.
    """
    u = np.pi * (1.0 - rng.random(size))  # (0, pi]
    u = np.where(u >= np.pi, np.nextafter(np.pi, 0.0), u)
    e = rng.standard_exponential(size)
    # log sin(a u) split as log(a) + log(u) + log(sinc) so a subnormal alpha stays finite
    log_sin_au = np.log(alpha) + np.log(u) + np.log(np.sinc(alpha * u / np.pi))
    return (alpha * log_sin_au - np.log(np.sin(u))
            + (1.0 - alpha) * (np.log(np.sin((1.0 - alpha) * u)) - np.log(e)))


def _log_unit_stable(alpha, rng, size):
    """Log of unit-scale one-sided stable draws."""
    return _scaled_log_unit_stable(alpha, rng, size) / alpha


def sample_one_sided_stable(alpha, scale_beta=1.0, rng=None, size=None):
    """Draw positive ``alpha``-stable variables with ``E exp(-lam X) = exp(-scale_beta lam**alpha)``.

    Parameters
    ----------
    alpha : float
        Stability index in ``(0, 1)``.
    scale_beta : float
        Positive scale; the draw is ``scale_beta**(1/alpha)`` times a unit-scale draw.
    rng : numpy.random.Generator, int or None
        Random stream (passed through :func:`numpy.random.default_rng`).
    size : int or tuple, optional
        Output shape; a scalar float is returned when omitted.
    """
    _check_stable_args(alpha, scale_beta)
    rng = np.random.default_rng(rng)
    log_xi = _log_unit_stable(alpha, rng, size) + np.log(scale_beta) / alpha
    out = np.exp(log_xi)
    return float(out) if size is None else out


def sample_gas(params: GasParams, rng=None, size=None):
    """Draw from ``zeta(alpha, beta)``.

    Returns an array of shape ``(d,)`` (``size=None``) or ``(size, d)``; every
    row lies in ``[0, 1]**d`` and sums to one up to rounding.
    """
    rng = np.random.default_rng(rng)
    n = 1 if size is None else int(size)
    d = params.d
    beta = params.as_array()

    if params.is_trivial or params.alpha == 1.0:
        out = np.tile(beta, (n, 1))
    elif params.alpha == 0.0:
        idx = rng.choice(d, size=n, p=beta)
        out = np.zeros((n, d))
        out[np.arange(n), idx] = 1.0
    else:
        a = params.alpha
        # softmax of log(xi_i) = m_i / a; subtracting the row max before dividing
        # by a keeps tiny alpha from overflowing
        m = np.full((n, d), -np.inf)
        for i in range(d):
            if beta[i] > 0:
                m[:, i] = _scaled_log_unit_stable(a, rng, n) + np.log(beta[i])
        m -= m.max(axis=1, keepdims=True)
        with np.errstate(divide="ignore", over="ignore"):
            w = np.exp(m / a)
        out = w / w.sum(axis=1, keepdims=True)
    return out[0] if size is None else out


def _check_lamperti(alpha, beta1):
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha!r}")
    if not 0.0 < beta1 < 1.0:
        raise ParameterError(f"beta1 must lie in (0, 1), got {beta1!r}")


def lamperti_pdf(alpha, beta1, y):
    """Density of Lamperti's generalized arcsine law at ``y`` in ``(0, 1)``.

    This is the law of ``xi_1 / (xi_1 + xi_2)`` with weights ``(beta1, 1 - beta1)``.
    """
    _check_lamperti(alpha, beta1)
    y_arr = np.asarray(y, dtype=float)
    if np.any((y_arr <= 0.0) | (y_arr >= 1.0)):
        raise BoundaryError("lamperti_pdf is only defined on the open interval (0, 1)")
    b1, b2 = beta1, 1.0 - beta1
    ya, za = y_arr ** alpha, (1.0 - y_arr) ** alpha
    num = np.sin(np.pi * alpha) / np.pi * b1 * b2 * (y_arr * (1.0 - y_arr)) ** (alpha - 1.0)
    den = b1 ** 2 * za ** 2 + b2 ** 2 * ya ** 2 + 2.0 * b1 * b2 * ya * za * np.cos(np.pi * alpha)
    out = num / den
    return float(out) if out.ndim == 0 else out


def lamperti_cdf(alpha, beta1, y):
    """Distribution function of Lamperti's law, closed arccot form.

    ``arccot`` takes values in ``(0, pi)`` so the result is continuous and
    nondecreasing, with ``F(0) = 0`` and ``F(1) = 1``.
    """
    _check_lamperti(alpha, beta1)
    y_arr = np.asarray(y, dtype=float)
    if np.any((y_arr < -1e-12) | (y_arr > 1.0 + 1e-12)) or np.any(np.isnan(y_arr)):
        raise ParameterError("lamperti_cdf argument must lie in [0, 1]")
    y_arr = np.clip(y_arr, 0.0, 1.0)
    b1, b2 = beta1, 1.0 - beta1
    s = np.sin(np.pi * alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = b1 * (1.0 - y_arr) ** alpha / (b2 * y_arr ** alpha * s) + np.cos(np.pi * alpha) / s
        out = (0.5 * np.pi - np.arctan(z)) / (np.pi * alpha)
    out = np.where(y_arr == 0.0, 0.0, out)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def marginal_params(params: GasParams, i: int):
    """Parameters ``(alpha, beta_i)`` of the law of coordinate ``i`` (0-based).

    The coordinate ``zeta_i`` is Lamperti-distributed with weights
    ``(beta_i, 1 - beta_i)``: the sum of the other stable variables is again
    one-sided stable with scale ``1 - beta_i``.
    """
    if not 0 <= i < params.d:
        raise IndexError(f"coordinate {i} out of range for d={params.d}")
    b = params.beta[i]
    if not 0.0 < params.alpha < 1.0 or not 0.0 < b < 1.0:
        raise UnsupportedMarginalError(
            f"marginal {i} of zeta(alpha={params.alpha}, beta={params.beta}) is degenerate")
    return params.alpha, b


def double_laplace_closed_form(params: GasParams, query: LaplaceQuery) -> float:
    """``int_0^inf exp(-q u) E[exp(-u lam.zeta)] du`` in closed form.

    Equals ``sum_i beta_i (q+lam_i)**(alpha-1) / sum_i beta_i (q+lam_i)**alpha``
    and lies in ``[1/(q + max lam), 1/q]``.
    """
    lam = np.asarray(query.lam)
    if lam.shape != (params.d,):
        raise ParameterError(f"lambda has {lam.size} entries, expected {params.d}")
    beta = params.as_array()
    base = query.q + lam
    a = params.alpha
    return float(np.sum(beta * base ** (a - 1.0)) / np.sum(beta * base ** a))


def double_laplace_monte_carlo(samples, query: LaplaceQuery):
    """Sampler-side estimate of the double Laplace transform.

    The inner ``u``-integral is done analytically, so each sample contributes
    ``1 / (q + lam.zeta)``.  Returns ``(mean, standard_error)``.
    """
    z = np.atleast_2d(np.asarray(samples, dtype=float))
    vals = 1.0 / (query.q + z @ np.asarray(query.lam))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(len(vals)))


def gas_mean(params: GasParams) -> np.ndarray:
    """``E[zeta] = beta`` for every ``alpha`` (derivative of the double Laplace identity at 0)."""
    return params.as_array().copy()
