import numpy as np
import pytest
from sklearn.base import clone
from sklearn.utils.estimator_checks import parametrize_with_checks

from l1l2pg import (
    ConfigurationError,
    ISTARegressor,
    PGGCGMRegressor,
    PGSFRegressor,
    STL1L2Regressor,
    SolverConfig,
    relative_error,
    solve_pg_sf,
)

ALL = [ISTARegressor, STL1L2Regressor, PGGCGMRegressor, PGSFRegressor]


@parametrize_with_checks([E(max_iter=200) for E in ALL])
def test_sklearn_compatible(estimator, check):
    check(estimator)


@pytest.mark.parametrize("E", ALL)
def test_params_round_trip(E):
    est = E(alpha=0.05, max_iter=10)
    params = est.get_params()
    assert params["alpha"] == 0.05 and params["max_iter"] == 10 and params["rescale"] is True
    twin = clone(est)
    assert twin.get_params() == params and twin is not est


def test_ball_params():
    params = PGSFRegressor().get_params()
    assert {"radius", "noise_level", "tau1", "tau2", "radius_start", "radius_step"} <= set(params)


def test_matches_functional_solver(cs_instance):
    X = cs_instance.operator.matrix
    est = PGSFRegressor(radius=16.0, alpha=0.02, eta=1.0).fit(X, cs_instance.y_noisy)
    out = solve_pg_sf(cs_instance, SolverConfig(alpha=0.02, eta=1.0, radius=16.0))
    assert est.scale_ == 1.0
    np.testing.assert_array_equal(est.coef_, out.x_final)
    assert est.n_iter_ == out.stats["outer_iterations"]
    assert relative_error(est.coef_, cs_instance.x_true) < 0.05


@pytest.mark.parametrize("E", ALL)
def test_predict_is_linear(E, small_instance, rng):
    X = small_instance.operator.matrix
    est = E(max_iter=300).fit(X, small_instance.y_noisy)
    Z = rng.standard_normal((4, X.shape[1]))
    np.testing.assert_allclose(est.predict(Z), Z @ est.coef_)


def test_discrepancy_radius(cs_instance):
    X = cs_instance.operator.matrix
    est = PGSFRegressor(radius="discrepancy", noise_level=cs_instance.delta, radius_start=10.0)
    est.fit(X, cs_instance.y_noisy)
    assert abs(est.radius_ - 16) <= 1
    assert est.radius_search_.satisfied
    assert np.abs(est.coef_).sum() <= est.radius_ * (1 + 1e-9)


def test_discrepancy_needs_noise_level(small_instance):
    with pytest.raises(ValueError):
        PGGCGMRegressor(radius="discrepancy").fit(small_instance.operator.matrix, small_instance.y_noisy)


def test_rescale(small_instance):
    X, y = 10 * small_instance.operator.matrix, 10 * small_instance.y_noisy
    est = PGSFRegressor(radius=3.0, max_iter=300).fit(X, y)
    assert est.scale_ > 1
    assert np.abs(est.coef_).sum() <= 3.0 * (1 + 1e-9)
    np.testing.assert_allclose(est.predict(X), X @ est.coef_)


def test_rescale_off_rejects_large_operator(small_instance):
    X, y = 10 * small_instance.operator.matrix, 10 * small_instance.y_noisy
    with pytest.raises(ConfigurationError):
        ISTARegressor(rescale=False).fit(X, y)
