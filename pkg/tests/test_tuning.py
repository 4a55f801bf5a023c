import numpy as np
import pytest

from adapdiscom import (ModalityLayout, ScenarioSpec, TuneSpec, gen_scenario,
                        predict, standardize, transform_validation, tune)
from adapdiscom import tuning as tuning_mod
from adapdiscom.datamodel import StandardizationReport
from adapdiscom.errors import NoFeasibleCombination, OutOfRange, ShapeError
from adapdiscom.fusion import FastBounds

from conftest import random_block_missing


def small_problem(seed=5, scenario="III", tau2=0.3):
    spec = ScenarioSpec(scenario=scenario, n=24, p=15, K=3, tau2=tau2,
                        seed=seed, val_n=40, test_n=40)
    data = gen_scenario(spec)
    train, report = standardize(data.train)
    val_X = transform_validation(data.val_X, report)
    val_y = data.val_y - report.y_center
    return train, val_X, val_y, report, data


class TestTransformValidation:
    def test_identity_report(self):
        report = StandardizationReport(scales=np.ones(3), centers=np.zeros(3),
                                       y_center=0.0, degenerate_columns=())
        X = np.arange(6.0).reshape(2, 3)
        assert np.array_equal(transform_validation(X, report), X)

    def test_center_and_scale(self):
        report = StandardizationReport(scales=np.array([0.5, 1.0]),
                                       centers=np.array([1.0, 0.0]),
                                       y_center=0.0, degenerate_columns=())
        X = np.array([[3.0, 2.0]])
        assert np.allclose(transform_validation(X, report), [[1.0, 2.0]])

    def test_round_trip_with_standardize(self, rng):
        layout = ModalityLayout((3, 3))
        ds = random_block_missing(rng, 30, layout, complete_frac=1.1)
        out, report = standardize(ds)
        again = transform_validation(ds.X, report)
        assert np.max(np.abs(again - out.X)) <= 1e-12

    def test_shape_check(self):
        report = StandardizationReport(scales=np.ones(3), centers=np.zeros(3),
                                       y_center=0.0, degenerate_columns=())
        with pytest.raises(ShapeError):
            transform_validation(np.ones((2, 4)), report)


class TestTune:
    def test_single_combination_grid(self):
        train, val_X, val_y, _, _ = small_problem()
        spec = TuneSpec(method="discom", weight_grid=(0.6,), lambda_points=6)
        res = tune(train, val_X, val_y, spec)
        assert res.best_params == {"alpha_i": 0.6, "alpha_c": 0.6}
        assert res.n_feasible == 1
        assert len(res.table) == 6

    @pytest.mark.parametrize("value", [0.2, 0.6, 1.0])
    def test_adapdiscom_reduces_to_discom(self, value):
        # constraining the adaptive grid to equal weights reproduces the
        # non-adaptive search exactly; weight 1.0 keeps the raw pairwise
        # matrix, which is only feasible without missingness
        scenario = "IV" if value == 1.0 else "III"
        train, val_X, val_y, _, _ = small_problem(scenario=scenario)
        discom = tune(train, val_X, val_y,
                      TuneSpec(method="discom", weight_grid=(value,),
                               lambda_points=8))
        adaptive = tune(train, val_X, val_y,
                        TuneSpec(method="adapdiscom", weight_grid=(value,),
                                 lambda_points=8))
        assert adaptive.validation_mse == pytest.approx(discom.validation_mse,
                                                        rel=1e-12)
        assert adaptive.best_lambda == discom.best_lambda

    def test_degenerate_l0_interval_single_candidate(self, monkeypatch):
        train, val_X, val_y, _, _ = small_problem()
        real = tuning_mod.fast_bounds
        seen = {}

        def degenerate(m, part):
            b = real(m, part)
            seen["l_max"] = b.l_max
            return FastBounds(m=b.m, m_c=b.m_c, l_min=b.l_max, l_max=b.l_max)

        monkeypatch.setattr(tuning_mod, "fast_bounds", degenerate)
        res = tune(train, val_X, val_y,
                   TuneSpec(method="fast-adapdiscom", lambda_points=5))
        assert res.n_feasible == 1
        assert res.best_params["l0"] == pytest.approx(seen["l_max"])

    def test_fast_interval_fully_feasible(self):
        train, val_X, val_y, _, _ = small_problem(seed=9)
        spec = TuneSpec(method="fast-adapdiscom", l0_points=10, lambda_points=5)
        res = tune(train, val_X, val_y, spec)
        assert res.n_feasible == 10
        assert all(row.feasible for row in res.table)

    def test_determinism(self):
        train, val_X, val_y, _, _ = small_problem(seed=11)
        spec = TuneSpec(method="discom", weight_grid=(0.3, 0.7, 1.0),
                        lambda_points=7)
        a = tune(train, val_X, val_y, spec)
        b = tune(train, val_X, val_y, spec)
        assert a.best_params == b.best_params
        assert a.validation_mse == b.validation_mse
        assert [(r.params, r.lam, r.val_mse) for r in a.table] == \
               [(r.params, r.lam, r.val_mse) for r in b.table]

    def test_self_consistency_of_best(self):
        train, val_X, val_y, _, _ = small_problem(seed=13)
        res = tune(train, val_X, val_y,
                   TuneSpec(method="fast-adapdiscom", lambda_points=6))
        again = float(np.mean((val_y - predict(val_X, res.best_fit.beta)) ** 2))
        assert again == pytest.approx(res.validation_mse, rel=1e-12)

    def test_no_feasible_combination(self, rng):
        # indefinite pairwise moments and a weight grid without shrinkage
        layout = ModalityLayout((4, 4, 4))
        ds = random_block_missing(rng, 10, layout, complete_frac=0.3)
        train, report = standardize(ds)
        val_X = rng.standard_normal((5, 12))
        val_y = rng.standard_normal(5)
        spec = TuneSpec(method="adapdiscom", weight_grid=(1.0,), lambda_points=4)
        with pytest.raises(NoFeasibleCombination):
            tune(train, val_X, val_y, spec)

    def test_requires_standardized_train(self, rng):
        layout = ModalityLayout((3, 3))
        ds = random_block_missing(rng, 20, layout)
        with pytest.raises(ShapeError):
            tune(ds, np.ones((4, 6)), np.ones(4), TuneSpec(method="discom"))

    def test_unknown_method_rejected(self):
        with pytest.raises(OutOfRange):
            TuneSpec(method="ridge")

    def test_baseline_methods_run(self):
        train, val_X, val_y, _, _ = small_problem(seed=17)
        for method in ("lasso-mean", "lasso-svd", "lasso-complete", "cocolasso"):
            res = tune(train, val_X, val_y,
                       TuneSpec(method=method, lambda_points=5,
                                tau2=(0.2, 0.5, 0.3) if method == "cocolasso" else None))
            assert np.isfinite(res.validation_mse)
            assert res.n_feasible == 1

    def test_tie_break_prefers_larger_lambda(self):
        # a zero validation target makes beta = 0 optimal, so every lambda
        # whose fit stays empty ties at the same mse; the largest must win
        train, val_X, val_y, _, _ = small_problem(seed=19)
        zero_y = np.zeros_like(val_y)
        spec = TuneSpec(method="discom", weight_grid=(0.5,), lambda_points=4)
        res = tune(train, val_X, zero_y, spec)
        table = [r for r in res.table if r.feasible]
        best_mse = min(r.val_mse for r in table)
        ties = [r.lam for r in table if r.val_mse == best_mse]
        assert res.best_lambda == max(ties)
