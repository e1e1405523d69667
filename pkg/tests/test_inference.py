import json
import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from arcsine_lab.chain import ChainModel, exact_survival, laplace_Q
from arcsine_lab.engine import EnsembleSpec, run_ensemble
from arcsine_lab.exceptions import ParameterError, SizeError
from arcsine_lab.gas import GasParams, sample_gas
from arcsine_lab.inference import (FitResult, GeneralizedArcsineFitter, MonteCarloPrecisionError,
                                   OccupationRatioTransformer, double_laplace_asymptotic_check,
                                   fit_gas, double_laplace_rhs, strong_convergence_check, tauberian_check)
from arcsine_lab.measures import InitialMeasure

GRID = np.round(np.arange(1, 20) / 20.0, 2)
CHAIN = ChainModel((0.2, 0.3, 0.5))


@pytest.fixture(scope="module")
def table():
    return exact_survival(CHAIN, 10_000)


class TestFitGas:
    @pytest.mark.parametrize("alpha,beta", [(0.3, (0.5, 0.5)), (0.5, (0.2, 0.3, 0.5)),
                                            (0.8, (0.6, 0.1, 0.1, 0.2))])
    def test_round_trip(self, alpha, beta):
        X = sample_gas(GasParams(alpha, beta), np.random.default_rng(1), 20_000)
        res = fit_gas(X, alpha_grid=GRID)
        assert res.kind == "regular"
        assert abs(res.alpha_hat - alpha) <= 0.05 + 1e-12
        np.testing.assert_allclose(res.beta_hat, beta, atol=0.02)
        assert res.beta_hat.sum() == pytest.approx(1.0)
        assert set(res.diagnostics["marginals"]) == {f"ray_{i + 1}" for i in range(len(beta))}

    def test_constant(self):
        X = np.tile([0.25, 0.75], (2000, 1))
        res = fit_gas(X)
        assert res.kind == "constant" and res.alpha_hat == 1.0
        np.testing.assert_allclose(res.beta_hat, [0.25, 0.75])

    def test_vertex(self):
        rng = np.random.default_rng(2)
        X = np.eye(3)[rng.choice(3, size=3000, p=[0.2, 0.3, 0.5])]
        res = fit_gas(X)
        assert res.kind == "vertex" and res.alpha_hat == 0.0
        np.testing.assert_allclose(res.beta_hat, [0.2, 0.3, 0.5], atol=0.03)

    def test_trivial(self):
        X = np.tile([0.0, 1.0, 0.0], (1500, 1))
        res = fit_gas(X)
        assert res.kind == "trivial" and math.isnan(res.alpha_hat)
        np.testing.assert_array_equal(res.beta_hat, [0, 1, 0])
        assert res.params.beta == (0.0, 1.0, 0.0)

    def test_too_few_samples(self):
        with pytest.raises(SizeError):
            fit_gas(np.full((999, 2), 0.5))

    def test_renormalize(self):
        X = sample_gas(GasParams(0.5, (0.5, 0.5)), np.random.default_rng(3), 5000)
        shrunk = 0.8 * X
        a = fit_gas(shrunk, alpha_grid=GRID)
        b = fit_gas(X, alpha_grid=GRID)
        assert a.alpha_hat == b.alpha_hat
        np.testing.assert_allclose(a.beta_hat, b.beta_hat)

    def test_empirical_law_input(self):
        law = run_ensemble(EnsembleSpec(CHAIN, InitialMeasure("origin"), (20_000,), 1500, seed=0))
        res = fit_gas(law, alpha_grid=GRID)
        assert res.kind == "regular"
        assert abs(res.alpha_hat - 0.5) <= 0.1

    def test_json(self):
        X = np.tile([0.25, 0.75], (2000, 1))
        data = json.loads(fit_gas(X).to_json())
        assert data["kind"] == "constant" and data["beta_hat"] == [0.25, 0.75]
        res = FitResult(float("nan"), np.array([1.0, 0.0]), 0.0, "trivial")
        assert json.loads(res.to_json())["alpha_hat"] is None


class TestSklearnApi:
    def test_params_and_clone(self):
        est = GeneralizedArcsineFitter(alpha_grid=GRID, renormalize=False)
        assert est.get_params() == {"alpha_grid": GRID, "renormalize": False, "min_samples": 1000}
        c = clone(est)
        assert c is not est and c.get_params()["renormalize"] is False

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            GeneralizedArcsineFitter().sample(3)

    def test_fit_score_sample(self):
        X = sample_gas(GasParams(0.5, (0.3, 0.7)), np.random.default_rng(4), 5000)
        est = GeneralizedArcsineFitter(alpha_grid=GRID).fit(X)
        assert est.kind_ == "regular" and abs(est.alpha_ - 0.5) <= 0.1
        assert est.n_features_in_ == 2
        assert est.score(X) <= 0.0
        Y = est.sample(10, random_state=0)
        assert Y.shape == (10, 2)
        np.testing.assert_allclose(Y.sum(axis=1), 1.0)

    def test_score_prefers_true_law(self):
        rng = np.random.default_rng(5)
        X = sample_gas(GasParams(0.5, (0.5, 0.5)), rng, 5000)
        est = GeneralizedArcsineFitter(alpha_grid=GRID).fit(X)
        other = sample_gas(GasParams(0.9, (0.5, 0.5)), rng, 5000)
        assert est.score(X) > est.score(other)

    def test_rejects_bad_rows(self):
        with pytest.raises(ValueError):
            GeneralizedArcsineFitter().fit(np.full((2000, 2), 0.7))
        with pytest.raises(ValueError):
            GeneralizedArcsineFitter().fit(np.full((2000, 1), 0.5))

    def test_pipeline_with_transformer(self):
        law = run_ensemble(EnsembleSpec(CHAIN, InitialMeasure("origin"), (5000,), 1200, seed=1))
        counts = np.hstack([law.counts[:, -1, :], law.junction[:, -1:]])
        pipe = make_pipeline(OccupationRatioTransformer(renormalize=False),
                             GeneralizedArcsineFitter(alpha_grid=GRID, renormalize=True))
        pipe.fit(counts)
        direct = fit_gas(law, renormalize=True, alpha_grid=GRID)
        assert pipe[-1].alpha_ == direct.alpha_hat
        np.testing.assert_allclose(pipe[-1].beta_, direct.beta_hat)


class TestTransformer:
    def test_ratios(self):
        X = np.array([[2, 3, 5], [0, 0, 4]])
        t = OccupationRatioTransformer(renormalize=False).fit(X)
        np.testing.assert_allclose(t.transform(X), [[0.2, 0.3], [0.0, 0.0]])
        r = OccupationRatioTransformer(renormalize=True).fit_transform(X)
        np.testing.assert_allclose(r, [[0.4, 0.6], [0.5, 0.5]])

    def test_errors(self):
        with pytest.raises(ValueError):
            OccupationRatioTransformer().fit(np.ones((3, 2)))
        t = OccupationRatioTransformer().fit(np.ones((3, 3)))
        with pytest.raises(ValueError):
            t.transform(np.ones((3, 4)))
        with pytest.raises(ValueError):
            t.transform(-np.ones((3, 3)))
        with pytest.raises(NotFittedError):
            OccupationRatioTransformer().transform(np.ones((3, 3)))


class TestTauberian:
    def test_symmetric_chain_is_exact(self):
        tab = exact_survival(ChainModel((0.5, 0.5)), 2000)
        assert tauberian_check(tab, [0.1, 0.01]).value == pytest.approx(0.0, abs=1e-14)

    def test_deviation_shrinks_with_s(self, table):
        rep = tauberian_check(table, [1e-1, 1e-2, 1e-3])
        dev = list(rep.details["deviation_by_s"].values())
        assert all(b <= a + 1e-15 for a, b in zip(dev, dev[1:]))
        assert rep.passed and rep.to_dict()["sizes"] == [10_000]

    def test_matches_hand_ratio(self, table):
        s = 0.05
        q = np.array([laplace_Q(table, i, s).value for i in (1, 2, 3)])
        rep = tauberian_check(table, [s])
        assert rep.value == pytest.approx(np.max(np.abs(q / q.sum() - np.array(CHAIN.p))), abs=1e-15)


class TestDoubleLaplaceAsymptotics:
    def test_rhs_with_zero_lambda(self, table):
        assert double_laplace_rhs(table, 2.0, [0, 0, 0], 100.0) == pytest.approx(0.5, rel=1e-12)

    @pytest.mark.parametrize("lam", [[1.0, 0.0, 0.0], [0.5, 2.0, 1.0], [3.0, 3.0, 3.0]])
    def test_rhs_bounds(self, table, lam):
        q = 1.0
        rhs = double_laplace_rhs(table, q, lam, 200.0)
        assert 1 / (q + max(lam)) - 1e-12 <= rhs <= 1 / (q + min(lam)) + 1e-12

    def test_equal_lambda(self, table):
        assert double_laplace_rhs(table, 1.0, [2.0, 2.0, 2.0], 50.0) == pytest.approx(1 / 3, rel=1e-12)

    def test_precision_guard(self, table):
        with pytest.raises(MonteCarloPrecisionError):
            double_laplace_asymptotic_check(CHAIN, 1.0, [1.0, 0.5, 2.0], [10.0], 10,
                                            table=table, max_se=1e-6)

    def test_zero_lambda_check(self, table):
        rep = double_laplace_asymptotic_check(CHAIN, 1.0, [0, 0, 0], [10.0, 100.0], 20, table=table)
        for row in rep.details["rows"]:
            assert row["lhs"] == pytest.approx(1.0, rel=1e-9)
            assert row["error"] < 1e-9 and row["rhs_in_bounds"]
        assert rep.details["limit_closed_form"] == pytest.approx(1.0)


class TestStrongConvergence:
    def test_same_spec_different_seeds(self):
        spec = dict(model=CHAIN, measure=InitialMeasure("origin"), checkpoints=(5000,), n_traj=800)
        a = run_ensemble(EnsembleSpec(seed=1, **spec))
        b = run_ensemble(EnsembleSpec(seed=2, **spec))
        rep = strong_convergence_check(a, b)
        assert rep.kind == "strong-convergence" and rep.passed
        assert rep.details["checkpoint"] == 5000

    def test_start_state_washes_out(self):
        base = dict(model=CHAIN, checkpoints=(20_000,), n_traj=800)
        a = run_ensemble(EnsembleSpec(measure=InitialMeasure("origin"), seed=3, **base))
        b = run_ensemble(EnsembleSpec(measure=InitialMeasure("chain_state", 1, 3), seed=4, **base))
        assert strong_convergence_check(a, b).passed

    def test_detects_distant_start(self):
        base = dict(model=CHAIN, checkpoints=(1000,), n_traj=800)
        a = run_ensemble(EnsembleSpec(measure=InitialMeasure("origin"), seed=5, **base))
        b = run_ensemble(EnsembleSpec(measure=InitialMeasure("chain_state", 1, 500), seed=6, **base))
        assert not strong_convergence_check(a, b).passed

    def test_mismatch(self):
        a = run_ensemble(EnsembleSpec(CHAIN, InitialMeasure("origin"), (100,), 10))
        b = run_ensemble(EnsembleSpec(CHAIN, InitialMeasure("origin"), (200,), 10))
        with pytest.raises(ParameterError):
            strong_convergence_check(a, b)
        c = run_ensemble(EnsembleSpec(ChainModel((0.5, 0.5)), InitialMeasure("origin"), (100,), 10))
        with pytest.raises(ParameterError):
            strong_convergence_check(a, c)
