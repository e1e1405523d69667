"""Ensemble driver for occupation times.

Every trajectory ``t`` draws from its own random stream, keyed by
``(seed, t)`` through :class:`numpy.random.SeedSequence` and fed to a
Philox counter-based generator.  Work is cut into fixed blocks of
trajectories, so the output depends on the :class:`EnsembleSpec` only and
never on how many workers process the blocks.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, maps
from ._version import __version__
from .chain import ChainModel, ChainState, ReturnTimeSampler, sample_segments, segment_counts
from .exceptions import ArcsineLabError, ParameterError
from .measures import InitialMeasure

__all__ = [
    "EnsembleSpec",
    "EmpiricalLaw",
    "ResampleBudgetError",
    "trajectory_rng",
    "run_ensemble",
    "junction_fraction_profile",
    "laplace_functional_ensemble",
]

log = logging.getLogger(__name__)

BLOCK = 128
MAX_RESAMPLES = 100


class ResampleBudgetError(ArcsineLabError, RuntimeError):
    """A trajectory slot needed more than the allowed number of fresh starts."""


@dataclass(frozen=True)
class EnsembleSpec:
    model: object
    measure: InitialMeasure
    checkpoints: tuple
    n_traj: int
    seed: int = 0

    def __post_init__(self):
        chk = tuple(int(c) for c in self.checkpoints)
        if not chk or chk[0] < 1 or any(b <= a for a, b in zip(chk, chk[1:])):
            raise ParameterError(f"checkpoints must be positive and strictly increasing, got {chk}")
        if int(self.n_traj) < 1:
            raise ParameterError("n_traj must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ParameterError("seed must be an unsigned 64-bit integer")
        is_chain = isinstance(self.model, ChainModel)
        if is_chain and self.measure.kind not in ("origin", "chain_state"):
            raise ParameterError(f"measure {self.measure.id} does not apply to a chain")
        if not is_chain and self.measure.kind in ("origin", "chain_state"):
            raise ParameterError(f"measure {self.measure.id} does not apply to an interval map")
        if is_chain and self.measure.kind == "chain_state" and int(self.measure.a) > self.model.d:
            raise ParameterError(f"start ray {int(self.measure.a)} exceeds d={self.model.d}")
        if isinstance(self.model, maps.MapModel):
            if self.model.kind == maps.BOOLE and self.measure.kind == "uniform01":
                raise ParameterError("uniform01 is not a measure for Boole's map")
            if self.model.kind == maps.CUBIC3 and self.measure.kind == "uniform_boole":
                raise ParameterError("uniform_boole is not a measure for the cubic map")
        object.__setattr__(self, "checkpoints", chk)
        object.__setattr__(self, "n_traj", int(self.n_traj))
        object.__setattr__(self, "seed", int(self.seed))

    def describe(self) -> dict:
        return {
            "model": self.model.describe(),
            "measure": self.measure.id,
            "checkpoints": list(self.checkpoints),
            "n_traj": self.n_traj,
            "seed": self.seed,
            "version": __version__,
        }


def trajectory_rng(seed: int, t: int) -> np.random.Generator:
    """Independent stream for trajectory ``t`` of an ensemble with master ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(t,))))


@dataclass
class EmpiricalLaw:
    """Occupation counts of an ensemble at its checkpoints.

    ``counts`` has shape ``(n_traj, n_checkpoints, d)`` and ``junction``
    ``(n_traj, n_checkpoints)``; for every entry ``counts.sum(-1) + junction == n``.
    """

    checkpoints: np.ndarray
    counts: np.ndarray
    junction: np.ndarray
    ray_names: tuple
    manifest: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_traj(self) -> int:
        return self.counts.shape[0]

    @property
    def d(self) -> int:
        return self.counts.shape[2]

    def _index(self, n):
        if n is None:
            return len(self.checkpoints) - 1
        hits = np.flatnonzero(self.checkpoints == n)
        if hits.size == 0:
            raise ParameterError(f"{n} is not a checkpoint of this ensemble")
        return int(hits[0])

    def ratios(self, n=None, renormalize=False) -> np.ndarray:
        """``S_n / n`` at checkpoint ``n`` (default: the last one).

        With ``renormalize=True`` the junction time is dropped and rows are
        divided by the total ray time instead; rows with no ray time are
        returned as the uniform vector.
        """
        k = self._index(n)
        c = self.counts[:, k, :].astype(float)
        if not renormalize:
            return c / float(self.checkpoints[k])
        tot = c.sum(axis=1, keepdims=True)
        out = np.full_like(c, 1.0 / self.d)
        np.divide(c, tot, out=out, where=tot > 0)
        return out

    def junction_fraction(self, n=None) -> np.ndarray:
        k = self._index(n)
        return self.junction[:, k] / float(self.checkpoints[k])

    def merge(self, groups, names=None) -> "EmpiricalLaw":
        """Sum ray columns; ``groups`` lists 1-based ray labels per new ray."""
        cols = [self.counts[:, :, [g - 1 for g in grp]].sum(axis=2) for grp in groups]
        names = tuple(names) if names else tuple(
            "+".join(self.ray_names[g - 1] for g in grp) for grp in groups)
        manifest = dict(self.manifest, merged=[list(g) for g in groups])
        return EmpiricalLaw(self.checkpoints.copy(), np.stack(cols, axis=2), self.junction.copy(),
                            names, manifest, dict(self.diagnostics))

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["trajectory_id", "n"] + [f"ratio_{i}" for i in range(1, self.d + 1)]
                        + ["junction_fraction"])
            for k, n in enumerate(self.checkpoints):
                r = self.counts[:, k, :] / float(n)
                jf = self.junction[:, k] / float(n)
                for t in range(self.n_traj):
                    wr.writerow([t, int(n)] + [repr(float(v)) for v in r[t]] + [repr(float(jf[t]))])

    def write_manifest(self, path):
        payload = dict(self.manifest, ray_names=list(self.ray_names), diagnostics=self.diagnostics)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)


def _map_block(spec: EnsembleSpec, t0: int, t1: int, audit: bool):
    model = spec.model
    n = t1 - t0
    m = len(spec.checkpoints)
    d = model.n_rays
    chk = np.asarray(spec.checkpoints, dtype=np.int64)
    rngs = [trajectory_rng(spec.seed, t) for t in range(t0, t1)]
    x0 = np.array([maps.sample_initial(model, spec.measure, r) for r in rngs])
    counts = np.zeros((n, m, d), dtype=np.int64)
    junction = np.zeros((n, m), dtype=np.int64)
    status = np.zeros(n, dtype=np.int64)
    viol = np.zeros(n, dtype=np.int64)
    resamples = np.zeros(n, dtype=np.int64)
    todo = np.arange(n)
    while todo.size:
        xs = x0[todo]
        c = np.zeros((todo.size, m, d), dtype=np.int64)
        j = np.zeros((todo.size, m), dtype=np.int64)
        st = np.zeros(todo.size, dtype=np.int64)
        v = np.zeros(todo.size, dtype=np.int64)
        if model.kind == maps.BOOLE:
            _kernels.boole_block(xs, chk, c, j, st, v, audit)
        else:
            consts = np.asarray(model.branch_constants, dtype=float)
            _kernels.cubic_block(xs, consts, model.ray_epsilon, chk, c, j, st, v, audit)
        counts[todo], junction[todo], status[todo], viol[todo] = c, j, st, v
        bad = todo[st != 0]
        for b in bad:
            resamples[b] += 1
            if resamples[b] > MAX_RESAMPLES:
                raise ResampleBudgetError(
                    f"trajectory {t0 + b} needed more than {MAX_RESAMPLES} fresh starts")
            x0[b] = maps.sample_initial(model, spec.measure, rngs[b])
        todo = bad
    return counts, junction, resamples, viol


def _chain_start(spec: EnsembleSpec):
    if spec.measure.kind == "chain_state":
        return ChainState(int(spec.measure.a), int(spec.measure.b))
    return None


def _chain_block(spec: EnsembleSpec, t0: int, t1: int, audit: bool):
    model = spec.model
    chk = np.asarray(spec.checkpoints, dtype=np.int64)
    horizon = int(chk[-1])
    sampler = ReturnTimeSampler(horizon)
    start = _chain_start(spec)
    n = t1 - t0
    counts = np.zeros((n, len(chk), model.d), dtype=np.int64)
    for k, t in enumerate(range(t0, t1)):
        starts, rays, lengths = sample_segments(model, horizon, trajectory_rng(spec.seed, t),
                                                sampler, start)
        counts[k] = segment_counts(model, starts, rays, lengths, chk)
    junction = chk[None, :] - counts.sum(axis=2)
    # ray changes always pass through the origin by construction
    return counts, junction, np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64)


def run_ensemble(spec: EnsembleSpec, workers: int = 1, audit: bool = False) -> EmpiricalLaw:
    """Simulate ``spec.n_traj`` trajectories and record ``S_n`` at every checkpoint.

    ``workers`` only changes how blocks are scheduled; results are identical
    for any value.  With ``audit=True`` map kernels count consecutive visits
    to two different rays without an intermediate junction visit.
    """
    if workers < 1:
        raise ParameterError("workers must be >= 1")
    block_fn = _chain_block if isinstance(spec.model, ChainModel) else _map_block
    bounds = [(t0, min(t0 + BLOCK, spec.n_traj)) for t0 in range(0, spec.n_traj, BLOCK)]
    if workers == 1:
        parts = [block_fn(spec, a, b, audit) for a, b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: block_fn(spec, ab[0], ab[1], audit), bounds))
    counts = np.concatenate([p[0] for p in parts])
    junction = np.concatenate([p[1] for p in parts])
    resamples = np.concatenate([p[2] for p in parts])
    viol = np.concatenate([p[3] for p in parts])
    diagnostics = {
        "resampled_starts": int(resamples.sum()),
        "separation_violations": int(viol.sum()) if audit else None,
    }
    if resamples.any():
        log.info("redrew %d initial points after absorbed orbits", int(resamples.sum()))
    return EmpiricalLaw(
        checkpoints=np.asarray(spec.checkpoints, dtype=np.int64),
        counts=counts,
        junction=junction,
        ray_names=tuple(spec.model.ray_names),
        manifest=spec.describe(),
        diagnostics=diagnostics,
    )


def junction_fraction_profile(law: EmpiricalLaw) -> list:
    """Median and 90th percentile of the junction fraction at each checkpoint."""
    if law.n_traj == 0:
        raise ParameterError("empty ensemble")
    out = []
    for n in law.checkpoints:
        jf = law.junction_fraction(int(n))
        out.append({"n": int(n), "median": float(np.median(jf)), "p90": float(np.quantile(jf, 0.9))})
    return out


def _segment_functional(starts, rays, lengths, d, q, lam, t, n_max):
    """Exact ``sum_{n <= n_max} c_n exp(-lam.S_n / t)`` for one segmented chain path.

    ``c_n = int_{n/t}^{(n+1)/t} exp(-q u) du``.  On a segment the exponent is
    linear in ``n``, so each segment contributes a geometric sum.
    """
    keep = starts <= n_max
    starts, rays, lengths = starts[keep], rays[keep], lengths[keep]
    onehot = np.zeros((len(rays), d))
    onehot[np.arange(len(rays)), rays - 1] = lengths
    s_at_start = np.vstack([np.zeros((1, d)), np.cumsum(onehot, axis=0)[:-1]])
    m = np.minimum(lengths, n_max - starts)           # last index inside the window
    rate = (q + lam[rays - 1]) / t
    geo = -np.expm1(-rate * (m + 1)) / -np.expm1(-rate)
    log_front = -q * starts / t - (s_at_start @ lam) / t
    return -np.expm1(-q / t) / q * float(np.sum(np.exp(log_front) * geo))


def laplace_functional_ensemble(model: ChainModel, q: float, lam, t: float, n_traj: int,
                                seed: int = 0, start: ChainState | None = None,
                                workers: int = 1, window: float = 40.0):
    """Monte Carlo estimate of ``int_0^inf e^{-qu} E[exp(-lam.S_floor(ut) / t)] du``.

    The sum over ``n`` is truncated at ``window * t / q`` (remainder below
    ``exp(-window) / q``).  Returns ``(mean, standard_error)``; the error is
    NaN for a single trajectory.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (model.d,) or np.any(lam < 0):
        raise ParameterError("lambda needs d nonnegative entries")
    if not q > 0 or not t > 0:
        raise ParameterError("q and t must be positive")
    if int(n_traj) < 1:
        raise ParameterError("n_traj must be >= 1")
    n_max = int(math.ceil(window * t / q))
    sampler = ReturnTimeSampler(n_max)

    def one_block(ab):
        vals = np.empty(ab[1] - ab[0])
        for k, tr in enumerate(range(*ab)):
            seg = sample_segments(model, n_max, trajectory_rng(seed, tr), sampler, start)
            vals[k] = _segment_functional(*seg, model.d, q, lam, t, n_max)
        return vals

    bounds = [(a, min(a + BLOCK, n_traj)) for a in range(0, n_traj, BLOCK)]
    if workers == 1:
        parts = [one_block(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one_block, bounds))
    vals = np.concatenate(parts)
    se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
    return float(vals.mean()), se
