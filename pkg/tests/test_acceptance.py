"""Acceptance criteria A1-A10 at full size.

Each test runs one pinned experiment, checks every statistic against the
stated tolerance (and that the experiment used that tolerance), records a
one-line PASS/FAIL verdict, and only then asserts.  The lines are printed
immediately and again in the terminal summary.
"""
import math

import numpy as np
import pytest
from scipy import stats

from arcsine_lab.experiments import EXPERIMENTS
from arcsine_lab.gas import lamperti_cdf

from conftest import ACCEPTANCE_LINES

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def record(key, title, verdict, ok, budget):
    ok = bool(ok) and verdict.runtime < budget
    line = (f"{key} {title}: {'PASS' if ok else 'FAIL'} | {verdict.summary()} "
            f"| budget {budget:.0f}s")
    ACCEPTANCE_LINES[key] = line
    print(line, flush=True)
    return ok


def checks_of(verdict, kind):
    return [c for c in verdict.checks if c.kind == kind]


def test_a1_boole_arcsine():
    v = EXPERIMENTS["boole-arcsine"]()
    (ks,) = checks_of(v, "KS")
    grid = [row["y"] for row in v.artifacts["ecdf"]]
    ecdf = np.array([row["ecdf"] for row in v.artifacts["ecdf"]])
    # scipy's arcsine law is an independent formula for the same CDF
    ref = stats.arcsine.cdf(grid)
    np.testing.assert_allclose(lamperti_cdf(0.5, 0.5, np.array(grid)), ref, atol=1e-12)
    grid_gap = float(np.max(np.abs(ecdf - ref)))
    ok = (ks.threshold == 0.03 and ks.value < 0.03 and ks.sizes == (10_000,)
          and v.config["checkpoints"][-1] == 100_000 and grid_gap <= ks.value + 1e-12)
    assert record("A1", "Boole arcsine law", v, ok, 120)


def test_a2_chain_gas():
    v = EXPERIMENTS["chain-gas"]()
    ks = checks_of(v, "KS")
    (energy,) = checks_of(v, "energy")
    ok = (len(ks) == 3 and all(c.threshold == 0.03 and c.value < 0.03 for c in ks)
          and energy.details["n_perm"] == 200 and energy.details["quantile"] == 0.99
          and energy.value <= energy.threshold and v.config["n_traj"] == 20_000
          and v.config["checkpoints"] == [100_000])
    assert record("A2", "chain generalized arcsine", v, ok, 300)


def test_a3_cubic3_gas():
    v = EXPERIMENTS["cubic3-gas"]()
    (alpha,) = checks_of(v, "alpha_hat")
    (sym,) = checks_of(v, "beta_symmetry")
    (total,) = checks_of(v, "beta_sum")
    a = alpha.details["alpha_hat"]
    b = np.array(sym.details["beta_hat"])
    ok = (0.45 <= a <= 0.55 and abs(b[0] - b[2]) <= 0.02 and abs(b.sum() - 1) <= 1e-9
          and total.passed and v.config["n_traj"] == 5_000
          and v.config["checkpoints"] == [1_000_000] and v.config["model"]["ray_epsilon"] == 0.05)
    assert record("A3", "cubic map recovery", v, ok, 900)


def test_a4_tauberian():
    v = EXPERIMENTS["tauberian"]()
    (bal,) = checks_of(v, "tauberian")
    (rv,) = checks_of(v, "regvar_alpha")
    ok = (bal.threshold == 0.01 and bal.value < 0.01 and bal.sizes == (10_000,)
          and abs(rv.details["alpha_hat"] - 0.5) <= 0.05 and v.config["s"] == 1e-3)
    assert record("A4", "Tauberian balance", v, ok, 10)


def test_a5_double_laplace_asymptotics():
    v = EXPERIMENTS["prop51"]()
    (rep,) = v.checks
    rows = rep.details["rows"]
    errs = [r["error"] for r in rows]
    ok = ([r["t"] for r in rows] == [1e2, 1e3, 1e4]
          and all(b < a for a, b in zip(errs, errs[1:])) and errs[-1] < 0.05
          and all(r["lhs_se"] <= 0.01 for r in rows)
          and v.config["p"] == [0.5, 0.5] and v.config["lam"] == [1.0, 0.0] and v.config["q"] == 1.0)
    assert record("A5", "double Laplace asymptotics", v, ok, 300)


def test_a6_sampler_laplace():
    v = EXPERIMENTS["sampler-laplace"]()
    ok = len(v.checks) == 27
    for c in v.checks:
        se = c.details["se"]
        ok = ok and c.sizes == (1_000_000,) and c.value < 3 * se + 1e-3
        ok = ok and math.isclose(c.threshold, 3 * se + 1e-3, rel_tol=1e-12)
    assert record("A6", "stable sampler Laplace", v, ok, 30)


def test_a7_double_laplace():
    v = EXPERIMENTS["double-laplace"]()
    dims = {c.details["d"] for c in v.checks}
    ok = (len(v.checks) == 18 and dims == {2, 3}
          and all(c.value < 1e-2 and c.sizes == (1_000_000,) for c in v.checks))
    assert record("A7", "double Laplace closed form", v, ok, 60)


def test_a8_round_trip():
    v = EXPERIMENTS["round-trip"]()
    alpha = checks_of(v, "alpha_error")
    beta = checks_of(v, "beta_error")
    degen = {c.kind: c for c in v.checks if c.kind.startswith("degenerate_")}
    ok = (len(alpha) == len(beta) == 9
          and all(c.value <= 0.05 and c.sizes == (100_000,) for c in alpha)
          and all(c.value <= 0.02 for c in beta)
          and degen["degenerate_constant"].details["kind"] == "constant"
          and degen["degenerate_constant"].details["alpha_hat"] == 1.0
          and degen["degenerate_vertex"].details["kind"] == "vertex"
          and degen["degenerate_vertex"].details["alpha_hat"] == 0.0
          and degen["degenerate_trivial"].details["kind"] == "trivial"
          and degen["degenerate_trivial"].details["beta_hat"] == [1.0, 0.0])
    assert record("A8", "inverse round trip", v, ok, 120)


def test_a9_strong_convergence():
    v = EXPERIMENTS["strong-conv"]()
    (rep,) = v.checks
    ok = (rep.value <= rep.threshold and rep.details["n_perm"] == 200
          and rep.details["quantile"] == 0.99 and rep.details["checkpoint"] == 100_000
          and len(set(rep.details["measures"])) == 2)
    assert record("A9", "strong convergence", v, ok, 180)


def test_a10_exact_oracles():
    v = EXPERIMENTS["exact-oracles"]()
    by = {c.kind: c for c in v.checks}
    ok = (by["dp_vs_enumeration"].value <= 1e-12 and by["dp_vs_enumeration"].sizes == (12,)
          and by["return_lemma"].passed
          and by["offset_vs_absolute"].value <= 1e-12
          and by["thread_determinism"].value == 0 and by["thread_determinism"].passed)
    assert record("A10", "exact oracles", v, ok, 60)
