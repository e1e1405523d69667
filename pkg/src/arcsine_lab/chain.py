"""Null-recurrent Markov chain on a star of ``d`` half-lines glued at the origin.

From the origin the chain enters ray ``i`` at height 1 with probability
``p_i``; on a ray it performs a simple symmetric walk, height 0 being the
origin.  With the origin given unit invariant mass, the wandering-rate
increments of the origin starting from ray ``i`` are the excursion survival
probabilities ``s_i(n) = P_0[Z_1, ..., Z_n in ray i]``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import NumericalError, ParameterError, SizeError, TailCertificationError

__all__ = [
    "ChainModel",
    "ChainState",
    "WanderingTable",
    "LaplaceValue",
    "RegVarFit",
    "chain_step",
    "exact_survival",
    "unit_survival_dp",
    "srw_survival_bound",
    "laplace_Q",
    "regvar_index",
    "ReturnTimeSampler",
    "sample_segments",
]

MAX_HORIZON = 10_000_000


@dataclass(frozen=True)
class ChainModel:
    """Exit probabilities ``p`` from the origin onto the ``d`` rays."""

    p: tuple

    def __post_init__(self):
        p = tuple(float(v) for v in np.asarray(self.p, dtype=float).ravel())
        if len(p) < 2:
            raise ParameterError("a multiray chain needs d >= 2 rays")
        if any(v < 0 for v in p):
            raise ParameterError(f"exit probabilities must be >= 0, got {p}")
        if abs(sum(p) - 1.0) > 1e-12:
            raise ParameterError(f"exit probabilities must sum to 1, got sum {sum(p)!r}")
        object.__setattr__(self, "p", p)

    @property
    def d(self) -> int:
        return len(self.p)

    @property
    def n_rays(self) -> int:
        return len(self.p)

    @property
    def kind(self) -> str:
        return "chain"

    @property
    def ray_names(self) -> tuple:
        return tuple(f"ray{i}" for i in range(1, self.d + 1))

    def describe(self) -> dict:
        return {"kind": "chain", "p": list(self.p)}


class ChainState(NamedTuple):
    """``ray`` is 0 at the origin, else 1..d; ``height`` is 0 exactly at the origin."""

    ray: int
    height: int

    @classmethod
    def origin(cls):
        return cls(0, 0)

    def validate(self, model: ChainModel):
        if (self.ray == 0) != (self.height == 0) or self.height < 0 or not 0 <= self.ray <= model.d:
            raise ParameterError(f"invalid chain state {tuple(self)} for d={model.d}")
        return self


def chain_step(model: ChainModel, state: ChainState, rng=None) -> ChainState:
    """One transition of the chain."""
    rng = np.random.default_rng(rng)
    state = ChainState(*state).validate(model)
    if state.ray == 0:
        i = int(rng.choice(model.d, p=model.p)) + 1
        return ChainState(i, 1)
    h = state.height + (1 if rng.random() < 0.5 else -1)
    return ChainState(0, 0) if h == 0 else ChainState(state.ray, h)


def _height_cap(n_steps: int) -> int:
    # P(simple walk from 1 reaches height H within n steps) <= exp(-(H-1)^2 / (2n)) < 1e-30
    return min(n_steps + 1, int(math.ceil(12.0 * math.sqrt(max(n_steps, 1)))) + 2)


def unit_survival_dp(n_steps: int):
    """Survival and first-passage laws of the walk started at height 1.

    Returns ``(g, f)`` of length ``n_steps + 1`` with
    ``g[m] = P[walk stays >= 1 for m steps]`` and ``f[m] = P[first hit of 0 at step m]``.
    Heights above ``12 sqrt(n_steps)`` are dropped; the neglected mass is
    below 1e-30 and the recursion is exact when ``n_steps <= 143``.
    """
    if n_steps < 0:
        raise ParameterError("n_steps must be >= 0")
    cap = _height_cap(n_steps)
    v = np.zeros(cap + 2)          # index h holds height h; v[0], v[cap+1] stay 0
    v[1] = 1.0
    g = np.empty(n_steps + 1)
    f = np.zeros(n_steps + 1)
    g[0] = 1.0
    for m in range(1, n_steps + 1):
        f[m] = 0.5 * v[1]
        v[1:cap + 1] = 0.5 * (v[0:cap] + v[2:cap + 2])
        g[m] = v[1:cap + 1].sum()
    # g(2k) = g(2k-1) exactly; summation rounding can break the tie upward
    np.minimum.accumulate(g, out=g)
    return g, f


def srw_survival_bound(m):
    """Upper bound ``min(1, sqrt(2 / (pi m)))`` on ``g(m)``, the unit-ray survival for ``m`` steps.

    ``g(2k - 1) = g(2k) = binom(2k, k) / 4**k <= 1 / sqrt(pi k)``, so
    ``s_i(n) <= p_i * srw_survival_bound(n - 1)``.
    """
    m = np.asarray(m, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(m <= 0, 1.0, np.minimum(1.0, np.sqrt(2.0 / (np.pi * np.maximum(m, 1e-300)))))


@dataclass(frozen=True)
class WanderingTable:
    """Exact wandering-rate data of the origin up to horizon ``N``.

    Arrays are indexed by time (row 0 is ``n = 0``) with one column per ray:
    ``survival[n, i] = s_i(n)`` (row 0 unused, set to 0), ``first_return[k, i]``
    is the mass of excursions into ray ``i`` that come back at step ``k``,
    ``wandering[n, i] = w_i(n) = sum_{1 <= k < n} s_i(k)``.
    """

    horizon: int
    p: tuple
    survival: np.ndarray
    first_return: np.ndarray
    wandering: np.ndarray
    junction_mass: float = 1.0

    @property
    def d(self) -> int:
        return self.survival.shape[1]

    @property
    def total_wandering(self) -> np.ndarray:
        """``w(n) = mu(Y) + sum_i w_i(n)`` for ``n >= 1`` (``w(0) = 0``)."""
        w = self.junction_mass + self.wandering.sum(axis=1)
        w[0] = 0.0
        return w

    @classmethod
    def from_survival(cls, survival, first_return=None, p=None, junction_mass=1.0):
        """Build a table from survival rows ``s(1..N)`` (shape ``(N,)`` or ``(N, d)``)."""
        s = np.asarray(survival, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        n_rows = s.shape[0]
        surv = np.vstack([np.zeros((1, s.shape[1])), s])
        w = np.zeros_like(surv)
        w[2:] = np.cumsum(s[:-1], axis=0)
        if first_return is None:
            fr = np.zeros_like(surv)
        else:
            fr = np.asarray(first_return, dtype=float).reshape(surv.shape)
        if p is None:
            p = tuple(surv[1] / surv[1].sum()) if surv[1].sum() > 0 else (1.0,) * s.shape[1]
        return cls(horizon=n_rows, p=tuple(p), survival=surv, first_return=fr,
                   wandering=w, junction_mass=junction_mass)

    def lemma_tail(self) -> np.ndarray:
        """Certified bound on ``s_i(n) - sum_{n < k <= N} b_i(k)``: the mass ``s_i(N)`` still out."""
        return self.survival[self.horizon]

    def to_csv(self, path):
        d = self.d
        header = (["n"] + [f"s_{i}" for i in range(1, d + 1)]
                  + [f"w_{i}" for i in range(1, d + 1)] + [f"b_{i}" for i in range(1, d + 1)])
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for n in range(1, self.horizon + 1):
                row = [n]
                row += [repr(float(v)) for v in self.survival[n]]
                row += [repr(float(v)) for v in self.wandering[n]]
                row += [repr(float(v)) for v in self.first_return[n]]
                wr.writerow(row)


def exact_survival(model: ChainModel, N: int) -> WanderingTable:
    """Dynamic-programming wandering table of ``model`` up to horizon ``N``."""
    N = int(N)
    if N < 1:
        raise ParameterError("horizon N must be >= 1")
    if N > MAX_HORIZON:
        raise SizeError(f"horizon {N} exceeds the memory budget ({MAX_HORIZON})")
    g, f = unit_survival_dp(N)
    p = np.asarray(model.p)
    surv = np.zeros((N + 1, model.d))
    surv[1:] = g[:N, None] * p[None, :]          # s_i(n) = p_i g(n-1)
    fr = np.zeros((N + 1, model.d))
    fr[2:] = f[1:N, None] * p[None, :]           # b_i(k) = p_i P[return takes k-1 steps]
    w = np.zeros_like(surv)
    w[2:] = np.cumsum(surv[1:N], axis=0)
    return WanderingTable(horizon=N, p=model.p, survival=surv, first_return=fr, wandering=w)


class LaplaceValue(NamedTuple):
    value: float
    lower: float
    upper: float


def laplace_Q(table: WanderingTable, i: int, s: float, rtol: float = 1e-4) -> LaplaceValue:
    """Laplace transform ``Q_i(s) = sum_{n>=1} exp(-n s) s_i(n)`` of ray ``i`` (1-based).

    The series is truncated at the table horizon; since ``s_i`` is
    nonincreasing the remainder is at most
    ``s_i(N) exp(-(N+1) s) / (1 - exp(-s))``.  The returned bracket
    ``[lower, upper]`` contains the exact value.
    """
    if not s > 0:
        raise ParameterError(f"s must be > 0, got {s!r}")
    if not 1 <= i <= table.d:
        raise ParameterError(f"ray index must lie in 1..{table.d}, got {i!r}")
    N = table.horizon
    n = np.arange(1, N + 1)
    col = table.survival[1:, i - 1]
    lower = float(np.sum(np.exp(-n * s) * col))
    tail = float(col[-1] * np.exp(-(N + 1) * s) / -np.expm1(-s))
    if tail > rtol * max(lower, np.finfo(float).tiny):
        raise TailCertificationError(
            f"truncation at N={N} leaves relative tail {tail / max(lower, 1e-300):.3g} "
            f"at s={s:g}; use a larger horizon")
    return LaplaceValue(lower + 0.5 * tail, lower, lower + tail)


class RegVarFit(NamedTuple):
    slope: float
    alpha_hat: float


def regvar_index(table: WanderingTable, lo_frac: float = 0.1) -> RegVarFit:
    """Least-squares slope of ``log w(n)`` against ``log n`` on ``[N lo_frac, N]``.

    The slope estimates ``1 - alpha`` for a wandering rate regularly varying
    of that index.
    """
    N = table.horizon
    if N < 1000:
        raise SizeError("regvar_index needs a horizon of at least 1000")
    lo = max(2, int(N * lo_frac))
    n = np.arange(lo, N + 1)
    w = table.total_wandering[lo:N + 1]
    if np.any(w <= 0) or np.ptp(np.log(w)) == 0:
        raise NumericalError("wandering rate is degenerate on the fitting window")
    slope = float(np.polyfit(np.log(n), np.log(w), 1)[0])
    return RegVarFit(slope, 1.0 - slope)


class ReturnTimeSampler:
    """Exact sampler of the time ``tau`` for the walk at height 1 to reach 0.

    ``P[tau > m] = binom(m, floor(m/2)) / 2**m`` (reflection principle); draws
    are made by inverting this survival function on a table covering
    ``horizon`` steps.  Draws exceeding the horizon are reported as
    ``horizon + 1``.
    """

    def __init__(self, horizon: int):
        self.horizon = int(horizon)
        jmax = self.horizon // 2 + 1
        k = np.arange(1, jmax + 1)
        # u[k-1] = binom(2k, k) / 4**k = P[tau > 2k - 1]
        u = np.exp(np.cumsum(np.log1p(-0.5 / k)))
        self._neg_sf = -u          # ascending

    def sample(self, rng, size):
        uni = 1.0 - rng.random(size)                 # (0, 1]
        j = np.searchsorted(self._neg_sf, -uni, side="right")
        tau = 2 * j + 1
        return np.where(tau > self.horizon, self.horizon + 1, tau).astype(np.int64)


def sample_segments(model: ChainModel, horizon: int, rng, sampler: ReturnTimeSampler,
                    start: ChainState | None = None):
    """Decompose a chain path on ``[0, horizon]`` into ray segments.

    Segment ``j`` starts at time ``a_j`` (the chain is at the origin, or at its
    initial state for ``j = 0``), spends ``L_j`` steps on ray ``r_j`` and is at
    the origin at time ``a_j + L_j + 1 = a_{j+1}``.  Returns arrays
    ``(starts, rays, lengths)`` with ``starts[-1] < horizon <= starts[-1] + L + 1``
    or the last segment running past the horizon.
    """
    cum_p = np.cumsum(model.p)
    cum_p[-1] = 1.0
    rays, lengths = [], []
    total = 0
    if start is not None and start.ray != 0:
        tau = sampler.sample(rng, int(start.height))
        hit = int(tau.sum()) if np.all(tau <= horizon) else horizon + 1
        rays.append(np.array([start.ray], dtype=np.int64))
        lengths.append(np.array([min(hit, horizon + 1) - 1], dtype=np.int64))
        total = int(lengths[0][0]) + 1
    batch = max(64, int(2.0 * math.sqrt(horizon)))
    while total < horizon:
        r = np.searchsorted(cum_p, rng.random(batch), side="right").astype(np.int64) + 1
        r = np.minimum(r, model.d)
        L = sampler.sample(rng, batch)
        span = np.cumsum(L + 1)
        cut = int(np.searchsorted(span, horizon - total, side="left")) + 1
        rays.append(r[:cut])
        lengths.append(L[:cut])
        total += int(span[min(cut, batch) - 1])
        batch *= 2
    rays = np.concatenate(rays)
    lengths = np.concatenate(lengths)
    starts = np.concatenate([[0], np.cumsum(lengths + 1)[:-1]]).astype(np.int64)
    return starts, rays, lengths


def segment_counts(model: ChainModel, starts, rays, lengths, checkpoints):
    """Ray occupation counts ``S_n`` (steps ``1..n``) at each checkpoint."""
    d = model.d
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    onehot = np.zeros((len(rays), d), dtype=np.int64)
    onehot[np.arange(len(rays)), rays - 1] = lengths
    before = np.vstack([np.zeros((1, d), dtype=np.int64), np.cumsum(onehot, axis=0)])
    idx = np.searchsorted(starts, checkpoints, side="left") - 1
    counts = before[idx].copy()
    partial = np.minimum(checkpoints - starts[idx], lengths[idx])
    counts[np.arange(len(checkpoints)), rays[idx] - 1] += partial
    return counts


def simulate_path(model: ChainModel, n: int, rng=None, start: ChainState | None = None):
    """Step-by-step reference path ``Z_0..Z_n`` as an array of ``(ray, height)`` rows."""
    rng = np.random.default_rng(rng)
    state = ChainState(*(start or ChainState.origin())).validate(model)
    out = np.empty((n + 1, 2), dtype=np.int64)
    out[0] = state
    for k in range(1, n + 1):
        state = chain_step(model, state, rng)
        out[k] = state
    return out
