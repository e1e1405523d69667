"""End-to-end verification experiments with pinned seeds and thresholds.

Each runner returns a :class:`Verdict` bundling one :class:`GofReport` per
check.  Default arguments reproduce the full-size experiment; smaller sizes
can be passed for smoke runs but then the thresholds are no longer
calibrated.
"""
from __future__ import annotations

import itertools
import json
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import maps
from .chain import ChainModel, exact_survival, regvar_index
from .engine import EnsembleSpec, junction_fraction_profile, run_ensemble
from .gas import (GasParams, LaplaceQuery, double_laplace_closed_form, double_laplace_monte_carlo,
                  lamperti_cdf, sample_gas, sample_one_sided_stable)
from .gof import GofReport, _jsonable, energy_permutation_test, ks_distance
from .inference import (double_laplace_asymptotic_check, fit_gas, strong_convergence_check,
                        tauberian_check)
from .measures import InitialMeasure

__all__ = ["Verdict", "EXPERIMENTS", "run_experiment", "enumerate_chain_excursions",
           "offset_vs_absolute"]

SEEDS = {
    "boole-arcsine": 101,
    "chain-gas": 202,
    "cubic3-gas": 303,
    "prop51": 505,
    "sampler-laplace": 606,
    "double-laplace": 707,
    "round-trip": 808,
    "strong-conv": 909,
    "exact-oracles": 1010,
}


@dataclass
class Verdict:
    """Outcome of one experiment: passes iff every check passes."""

    name: str
    checks: list
    runtime: float
    config: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return _jsonable({
            "name": self.name,
            "passed": self.passed,
            "runtime_seconds": self.runtime,
            "config": self.config,
            "checks": [asdict(c) for c in self.checks],
        })

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        if len(self.checks) <= 4:
            body = ", ".join(f"{c.kind}={c.value:.4g}/{c.threshold:.4g}" for c in self.checks)
        else:
            ok = sum(c.passed for c in self.checks)
            w = max(self.checks, key=lambda c: c.value / c.threshold if c.threshold > 0 else math.inf)
            body = (f"{ok}/{len(self.checks)} checks passed; tightest "
                    f"{w.kind}={w.value:.4g}/{w.threshold:.4g}")
        return f"{self.name}: {verdict} ({body}) [{self.runtime:.1f}s]"


def _ecdf_curve(x, cdf, n_grid=201):
    x = np.sort(np.asarray(x, dtype=float))
    grid = np.linspace(0.0, 1.0, n_grid)
    emp = np.searchsorted(x, grid, side="right") / x.size
    return [{"y": float(g), "ecdf": float(e), "theory": float(t)}
            for g, e, t in zip(grid, emp, cdf(grid))]


def _timed(name, config, fn):
    t0 = time.perf_counter()
    checks, artifacts = fn()
    return Verdict(name, checks, time.perf_counter() - t0, config, artifacts)


def boole_arcsine(n_traj=10_000, n=100_000, seed=None, workers=1, threshold=0.03) -> Verdict:
    """Occupation ratio of ``(1, inf)`` under Boole's map against the arcsine law."""
    seed = SEEDS["boole-arcsine"] if seed is None else seed
    checkpoints = tuple(c for c in (10 ** 3, 10 ** 4) if c < n) + (n,)
    spec = EnsembleSpec(maps.boole(), InitialMeasure("uniform_boole"), checkpoints, n_traj, seed)

    def body():
        law = run_ensemble(spec, workers=workers)
        x = law.ratios()[:, 1]
        cdf = lambda y: lamperti_cdf(0.5, 0.5, y)  # noqa: E731
        ks = ks_distance(x, cdf)
        rep = GofReport("KS", ks, (n_traj,), threshold, ks < threshold,
                        {"n": n, "junction_profile": junction_fraction_profile(law)})
        return [rep], {"ecdf": _ecdf_curve(x, cdf)}

    return _timed("boole-arcsine", spec.describe(), body)


def chain_gas(p=(0.2, 0.3, 0.5), n_traj=20_000, n=100_000, seed=None, workers=1,
              threshold=0.03, n_perm=200) -> Verdict:
    """Chain occupation ratios against the generalized arcsine law ``(1/2, p)``."""
    seed = SEEDS["chain-gas"] if seed is None else seed
    model = ChainModel(tuple(p))
    spec = EnsembleSpec(model, InitialMeasure("origin"), (n,), n_traj, seed)

    def body():
        law = run_ensemble(spec, workers=workers)
        X = law.ratios()
        checks, artifacts = [], {}
        for i, b in enumerate(model.p):
            cdf = lambda y, b=b: lamperti_cdf(0.5, b, y)  # noqa: E731
            ks = ks_distance(X[:, i], cdf)
            checks.append(GofReport("KS", ks, (n_traj,), threshold, ks < threshold,
                                    {"ray": i + 1, "beta": b}))
            artifacts[f"ecdf_ray{i + 1}"] = _ecdf_curve(X[:, i], cdf)
        ref = sample_gas(GasParams(0.5, model.p), np.random.default_rng([seed, 1]), n_traj)
        energy = energy_permutation_test(X, ref, n_perm=n_perm, rng=seed)
        checks.append(energy)
        return checks, artifacts

    return _timed("chain-gas", spec.describe(), body)


def cubic3_gas(n_traj=5_000, n=1_000_000, eps=0.05, seed=None, workers=1) -> Verdict:
    """Recover ``(alpha, beta)`` for the cubic map with the two rays at 1/2 merged."""
    seed = SEEDS["cubic3-gas"] if seed is None else seed
    spec = EnsembleSpec(maps.cubic3(eps), InitialMeasure("uniform01"), (n,), n_traj, seed)

    def body():
        law = run_ensemble(spec, workers=workers).merge([[1], [2, 3], [4]], ("A1", "A2", "A3"))
        fit = fit_gas(law)
        b = fit.beta_hat
        checks = [
            GofReport("alpha_hat", abs(fit.alpha_hat - 0.5), (n_traj,), 0.05,
                      0.45 <= fit.alpha_hat <= 0.55, {"alpha_hat": fit.alpha_hat}),
            GofReport("beta_symmetry", abs(b[0] - b[2]), (n_traj,), 0.02,
                      abs(b[0] - b[2]) <= 0.02, {"beta_hat": list(b)}),
            GofReport("beta_sum", abs(b.sum() - 1.0), (n_traj,), 1e-9, abs(b.sum() - 1.0) <= 1e-9),
        ]
        return checks, {}

    return _timed("cubic3-gas", spec.describe(), body)


def tauberian(p=(0.2, 0.3, 0.5), horizon=10_000, s=1e-3, threshold=0.01) -> Verdict:
    """Ray balance of the discrete Laplace transforms and the regular-variation index."""
    model = ChainModel(tuple(p))

    def body():
        table = exact_survival(model, horizon)
        bal = tauberian_check(table, [s], threshold=threshold)
        fit = regvar_index(table)
        rv = GofReport("regvar_alpha", abs(fit.alpha_hat - 0.5), (horizon,), 0.05,
                       abs(fit.alpha_hat - 0.5) <= 0.05, {"slope": fit.slope, "alpha_hat": fit.alpha_hat})
        return [bal, rv], {}

    return _timed("tauberian", {"p": list(p), "horizon": horizon, "s": s}, body)


def laplace_asymptotics(p=(0.5, 0.5), q=1.0, lam=(1.0, 0.0), t_grid=(1e2, 1e3, 1e4),
                        n_traj=20_000, seed=None, workers=1) -> Verdict:
    """Simulated double Laplace transform against its wandering-rate asymptotics."""
    seed = SEEDS["prop51"] if seed is None else seed
    model = ChainModel(tuple(p))
    cfg = {"p": list(p), "q": q, "lam": list(lam), "t_grid": list(t_grid), "n_traj": n_traj,
           "seed": seed}
    return _timed("prop51", cfg, lambda: ([double_laplace_asymptotic_check(
        model, q, lam, t_grid, n_traj, seed=seed, workers=workers)], {}))


def sampler_laplace(alphas=(0.3, 0.5, 0.7), betas=(0.5, 1.0, 2.0), lams=(0.5, 1.0, 2.0),
                    n_samples=1_000_000, seed=None) -> Verdict:
    """Laplace transform of the one-sided stable sampler against ``exp(-beta lam**alpha)``."""
    seed = SEEDS["sampler-laplace"] if seed is None else seed

    def body():
        checks = []
        for k, (a, b) in enumerate(itertools.product(alphas, betas)):
            xi = sample_one_sided_stable(a, b, np.random.default_rng([seed, k]), n_samples)
            for lam in lams:
                v = np.exp(-lam * xi)
                mean, se = v.mean(), v.std(ddof=1) / math.sqrt(n_samples)
                err = abs(mean - math.exp(-b * lam ** a))
                tol = 3 * se + 1e-3
                checks.append(GofReport("laplace_abs_error", err, (n_samples,), tol, err < tol,
                                        {"alpha": a, "beta": b, "lambda": lam, "se": se}))
        return checks, {}

    cfg = {"alphas": list(alphas), "betas": list(betas), "lams": list(lams),
           "n_samples": n_samples, "seed": seed}
    return _timed("sampler-laplace", cfg, body)


DOUBLE_LAPLACE_CASES = (
    (GasParams(0.3, (0.3, 0.7)), (1.0, 0.25)),
    (GasParams(0.7, (0.2, 0.3, 0.5)), (1.0, 0.5, 0.0)),
)


def double_laplace(cases=DOUBLE_LAPLACE_CASES, qs=(0.5, 1.0, 2.0), scales=(0.5, 1.0, 2.0),
                   n_samples=1_000_000, seed=None, threshold=1e-2) -> Verdict:
    """Monte Carlo ``E[1/(q + lam.zeta)]`` against the closed-form double Laplace transform."""
    seed = SEEDS["double-laplace"] if seed is None else seed

    def body():
        checks = []
        for k, (params, base) in enumerate(cases):
            Z = sample_gas(params, np.random.default_rng([seed, k]), n_samples)
            for q, sc in itertools.product(qs, scales):
                query = LaplaceQuery(q, tuple(sc * np.asarray(base)))
                exact = double_laplace_closed_form(params, query)
                mc, se = double_laplace_monte_carlo(Z, query)
                rel = abs(mc / exact - 1.0)
                checks.append(GofReport("relative_error", rel, (n_samples,), threshold,
                                        rel < threshold,
                                        {"d": params.d, "alpha": params.alpha, "q": q,
                                         "lambda": list(query.lam), "exact": exact, "se": se}))
        return checks, {}

    return _timed("double-laplace", {"n_samples": n_samples, "seed": seed}, body)


ROUND_TRIP_BETAS = ((0.5, 0.5), (0.2, 0.8), (0.2, 0.3, 0.5))


def round_trip(alphas=(0.3, 0.5, 0.7), betas=ROUND_TRIP_BETAS, n_samples=100_000,
               seed=None) -> Verdict:
    """Sampler to fitter recovery, plus exact detection of the degenerate laws."""
    seed = SEEDS["round-trip"] if seed is None else seed

    def body():
        checks = []
        for k, (a, b) in enumerate(itertools.product(alphas, betas)):
            X = sample_gas(GasParams(a, b), np.random.default_rng([seed, k]), n_samples)
            fit = fit_gas(X)
            da = abs(fit.alpha_hat - a)
            db = float(np.max(np.abs(fit.beta_hat - np.asarray(b))))
            info = {"alpha": a, "beta": list(b), "alpha_hat": fit.alpha_hat,
                    "beta_hat": list(fit.beta_hat)}
            checks.append(GofReport("alpha_error", da, (n_samples,), 0.05, da <= 0.05, info))
            checks.append(GofReport("beta_error", db, (n_samples,), 0.02, db <= 0.02, info))
        rng = np.random.default_rng([seed, 99])
        for a, b, kind, alpha_expected in ((1.0, (0.2, 0.8), "constant", 1.0),
                                           (0.0, (0.7, 0.3), "vertex", 0.0),
                                           (0.5, (1.0, 0.0), "trivial", None)):
            fit = fit_gas(sample_gas(GasParams(a, b), rng, n_samples))
            ok = fit.kind == kind and (alpha_expected is None or fit.alpha_hat == alpha_expected)
            if kind == "trivial":
                ok = ok and np.array_equal(fit.beta_hat, np.asarray(b))
            db = float(np.max(np.abs(fit.beta_hat - np.asarray(b))))
            checks.append(GofReport(f"degenerate_{kind}", db, (n_samples,), 0.02,
                                    bool(ok and db <= 0.02),
                                    {"kind": fit.kind, "alpha_hat": fit.alpha_hat,
                                     "beta_hat": list(fit.beta_hat)}))
        return checks, {}

    return _timed("round-trip", {"n_samples": n_samples, "seed": seed}, body)


def strong_conv(n_traj=10_000, n=100_000, other="beta_like:4,4", seed=None, workers=1) -> Verdict:
    """Boole's map under two initial densities yields the same occupation law."""
    seed = SEEDS["strong-conv"] if seed is None else seed
    spec_a = EnsembleSpec(maps.boole(), InitialMeasure("uniform_boole"), (n,), n_traj, seed)
    spec_b = EnsembleSpec(maps.boole(), InitialMeasure.parse(other), (n,), n_traj, seed + 1)

    def body():
        rep = strong_convergence_check(run_ensemble(spec_a, workers=workers),
                                       run_ensemble(spec_b, workers=workers), rng=seed)
        return [rep], {}

    return _timed("strong-conv", {"a": spec_a.describe(), "b": spec_b.describe()}, body)


def enumerate_chain_excursions(p, n_max):
    """Excursion survival and return laws by listing every coin-flip sequence.

    Returns ``(s, b)`` of shape ``(n_max + 1, d)``: ``s[n, i]`` is the
    probability that the first ``n`` states after leaving the origin all sit
    in ray ``i``, and ``b[k, i]`` the probability that the first return to
    the origin happens at step ``k`` through ray ``i``.  Cost is
    ``2**(n_max - 1)``.
    """
    p = np.asarray(p, dtype=float)
    g = np.zeros(n_max + 1)
    f = np.zeros(n_max + 1)
    m = n_max - 1
    for bits in itertools.product((-1, 1), repeat=max(m, 0)):
        h, alive = 1, m
        for j, step in enumerate(bits):
            h += step
            if h == 0:
                alive = j
                break
        w = 0.5 ** m
        # survival counts the sequence for every prefix length it survives
        g[:alive + 1] += w
        if alive < m:
            f[alive + 1] += w
    s = np.zeros((n_max + 1, p.size))
    b = np.zeros((n_max + 1, p.size))
    s[1:] = g[:n_max, None] * p
    b[2:] = f[1:n_max, None] * p
    return s, b


def offset_vs_absolute(model, delta0=0.01, max_steps=1000):
    """Largest relative gap between offset and absolute iteration inside each ray.

    Each ray's orbit starts at offset ``delta0`` on the ray's side of its
    fixed point and is followed for ``max_steps`` steps or until it leaves
    the ray, where offset stepping no longer applies.
    """
    worst, steps = 0.0, {}
    for ray, (j, side) in maps._CUBIC_RAYS.items():
        xj = model.fixed_points[j - 1]
        dl = side * delta0
        x = xj + dl
        k = 0
        while k < max_steps and 0 < side * dl < model.ray_epsilon:
            x = maps.step(model, x)
            dl = maps.step_offset(model, ray, dl)
            worst = max(worst, abs((xj + dl) - x) / abs(x))
            k += 1
        steps[ray] = k
    return worst, steps


def _deterministic_csv(spec):
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for w in (1, 3):
            path = os.path.join(tmp, f"w{w}.csv")
            run_ensemble(spec, workers=w).to_csv(path)
            with open(path, "rb") as fh:
                outs.append(fh.read())
    return outs[0] == outs[1]


def exact_oracles(seed=None) -> Verdict:
    """Exact identities: DP versus enumeration, return-time lemma, offset arithmetic, determinism."""
    seed = SEEDS["exact-oracles"] if seed is None else seed

    def body():
        checks = []
        p = (0.2, 0.3, 0.5)
        model = ChainModel(p)
        s_enum, b_enum = enumerate_chain_excursions(p, 13)
        table = exact_survival(model, 13)
        err = max(np.max(np.abs(table.survival[1:13] - s_enum[1:13])),
                  np.max(np.abs(table.first_return[2:13] - b_enum[2:13])))
        checks.append(GofReport("dp_vs_enumeration", float(err), (12,), 1e-12, err <= 1e-12))

        big = exact_survival(model, 10_000)
        tail = np.cumsum(big.first_return[::-1], axis=0)[::-1]        # tail[n] = sum_{k >= n} b(k)
        lhs = big.survival[1:-1] - tail[2:]                            # s(n) - sum_{n < k <= N} b(k)
        gap = float(np.max(np.abs(lhs - big.lemma_tail()[None, :])))
        checks.append(GofReport("return_lemma", gap, (10_000,), 1e-12, gap <= 1e-12,
                                {"certified_tail": list(big.lemma_tail())}))

        cub = maps.cubic3()
        rel, steps = offset_vs_absolute(cub)
        checks.append(GofReport("offset_vs_absolute", rel, (len(steps),), 1e-12, rel <= 1e-12,
                                {"steps_inside_ray": steps}))

        specs = [
            EnsembleSpec(maps.boole(), InitialMeasure("uniform_boole"), (100, 5000), 300, seed),
            EnsembleSpec(cub, InitialMeasure("uniform01"), (100, 5000), 300, seed),
            EnsembleSpec(model, InitialMeasure("origin"), (100, 5000), 300, seed),
        ]
        same = [_deterministic_csv(sp) for sp in specs]
        checks.append(GofReport("thread_determinism", float(not all(same)), (300,), 0.0, all(same),
                                {"identical": same}))
        return checks, {}

    return _timed("exact-oracles", {"seed": seed}, body)


EXPERIMENTS = {
    "boole-arcsine": boole_arcsine,
    "chain-gas": chain_gas,
    "cubic3-gas": cubic3_gas,
    "tauberian": tauberian,
    "prop51": laplace_asymptotics,
    "strong-conv": strong_conv,
    "sampler-laplace": sampler_laplace,
    "double-laplace": double_laplace,
    "round-trip": round_trip,
    "exact-oracles": exact_oracles,
}


def run_experiment(name, **kwargs) -> Verdict:
    """Run the named experiment; raises ``KeyError`` for unknown names."""
    return EXPERIMENTS[name](**kwargs)
