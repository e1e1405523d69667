"""Goodness-of-fit distances and a two-sample energy permutation test."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "GofReport",
    "ks_distance",
    "cvm_distance",
    "energy_distance",
    "energy_permutation_test",
]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


@dataclass
class GofReport:
    """Outcome of a statistical check; ``threshold`` is echoed for provenance."""

    kind: str
    value: float
    sizes: tuple
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def ks_distance(samples, cdf, continuous=True) -> float:
    """Kolmogorov-Smirnov distance between the empirical law of ``samples`` and ``cdf``.

    With ``continuous=True`` both one-sided gaps at every order statistic are
    used, which gives the supremum over the whole line for a continuous
    ``cdf``.  With ``continuous=False`` only the right-continuous ECDF values
    at the sample points are compared.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("ks_distance needs at least one sample")
    F = np.asarray(cdf(x), dtype=float)
    # searchsorted handles ties: right/left limits of the ECDF at each point
    ecdf_right = np.searchsorted(x, x, side="right") / n
    ecdf_left = np.searchsorted(x, x, side="left") / n
    d = np.max(np.abs(ecdf_right - F))
    if continuous:
        d = max(d, np.max(np.abs(F - ecdf_left)))
    return float(d)


def cvm_distance(samples, cdf) -> float:
    """Cramer-von Mises statistic ``1/(12 n) + sum_i (F(x_(i)) - (2i - 1)/(2n))**2``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise ValueError("cvm_distance needs at least one sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(1.0 / (12.0 * n) + np.sum((F - (2 * i - 1) / (2.0 * n)) ** 2))


def _mean_dist(a, b, block=2048):
    tot = 0.0
    for s in range(0, a.shape[0], block):
        tot += cdist(a[s:s + block], b).sum()
    return tot / (a.shape[0] * b.shape[0])


def _as_2d(x):
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _subsample(x, cap, rng):
    if x.shape[0] <= cap:
        return x
    return x[rng.choice(x.shape[0], size=cap, replace=False)]


def energy_distance(sample_a, sample_b, max_samples=10_000, rng=0) -> float:
    """Energy distance ``2 E|A-B| - E|A-A'| - E|B-B'|`` (V-statistic form).

    Samples larger than ``max_samples`` are randomly subsampled, which caps
    the work at ``max_samples**2`` pair distances per term.
    """
    rng = np.random.default_rng(rng)
    a = _subsample(_as_2d(sample_a), max_samples, rng)
    b = _subsample(_as_2d(sample_b), max_samples, rng)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("energy_distance needs two nonempty samples")
    val = 2.0 * _mean_dist(a, b) - _mean_dist(a, a) - _mean_dist(b, b)
    return max(float(val), 0.0)


def energy_permutation_test(sample_a, sample_b, n_perm=200, quantile=0.99,
                            max_samples=3000, rng=0) -> GofReport:
    """Two-sample energy test against a label-permutation null.

    Both samples are subsampled to at most ``max_samples`` points; the
    pooled distance matrix is built once and each permutation is scored
    with matrix products.  ``passed`` means the observed statistic does not
    exceed the ``quantile`` of the null, i.e. no evidence of different laws.
    """
    rng = np.random.default_rng(rng)
    a = _subsample(_as_2d(sample_a), max_samples, rng)
    b = _subsample(_as_2d(sample_b), max_samples, rng)
    na, nb = a.shape[0], b.shape[0]
    pooled = np.vstack([a, b])
    D = cdist(pooled, pooled)
    row = D.sum(axis=1)
    total = row.sum()

    def stats(labels):
        # labels: (N, k) 0/1 matrix, 1 marks sample A
        s_aa = np.einsum("ik,ik->k", labels, D @ labels)
        s_ab = labels.T @ row - s_aa
        s_bb = total - 2.0 * s_ab - s_aa
        return 2.0 * s_ab / (na * nb) - s_aa / na ** 2 - s_bb / nb ** 2

    obs_lab = np.zeros((na + nb, 1))
    obs_lab[:na] = 1.0
    observed = float(stats(obs_lab)[0])
    perms = np.zeros((na + nb, n_perm))
    for k in range(n_perm):
        perms[rng.permutation(na + nb)[:na], k] = 1.0
    null = stats(perms)
    thr = float(np.quantile(null, quantile))
    return GofReport(
        kind="energy",
        value=max(observed, 0.0),
        sizes=(na, nb),
        threshold=thr,
        passed=bool(observed <= thr),
        details={"n_perm": n_perm, "quantile": quantile,
                 "p_value": float((1 + np.sum(null >= observed)) / (n_perm + 1))},
    )
