import numpy as np
import pytest

from nvc13.lm import covariance_from_jacobian, lm_minimize, numeric_jacobian


def _linear_problem(rng, m=30, n=3):
    a = rng.normal(size=(m, n))
    y = rng.normal(size=m)
    return a, y


def test_linear_converges_in_two_iterations(rng):
    a, y = _linear_problem(rng)
    res = lm_minimize(lambda x: a @ x - y, np.zeros(3), jac=lambda x: a)
    assert res.converged and res.iterations <= 2
    assert np.allclose(res.params, np.linalg.lstsq(a, y, rcond=None)[0], atol=1e-12)


def test_linear_covariance(rng):
    a, y = _linear_problem(rng)
    res = lm_minimize(lambda x: a @ x - y, np.zeros(3), jac=lambda x: a)
    r = a @ res.params - y
    expected = (r @ r) / (30 - 3) * np.linalg.inv(a.T @ a)
    assert np.allclose(res.covariance, expected, rtol=1e-8)
    assert np.allclose(res.covariance, res.covariance.T)
    assert np.all(np.linalg.eigvalsh(res.covariance) >= -1e-15)


def test_rosenbrock():
    fun = lambda p: np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]])
    res = lm_minimize(fun, [-1.2, 1.0])
    assert res.converged
    assert np.allclose(res.params, [1.0, 1.0], atol=1e-6)


def test_iteration_limit_reports_not_converged():
    fun = lambda p: np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]])
    res = lm_minimize(fun, [-1.2, 1.0], max_iter=2)
    assert not res.converged
    assert res.covariance is None
    assert np.all(np.isnan(res.stderr))
    assert "maximum" in res.message


def test_unidentifiable_parameter_is_frozen():
    t = np.linspace(0, 1, 20)
    y = 2.0 * t + 1.0
    res = lm_minimize(lambda p: p[0] * t + p[1] - y + 0 * p[2], [0.0, 0.0, 5.0])
    assert res.converged and res.rank_deficient
    assert res.params[2] == 5.0
    assert np.allclose(res.params[:2], [2.0, 1.0])


def test_non_finite_start_rejected():
    with pytest.raises(ValueError):
        lm_minimize(lambda p: p, [np.nan])


def test_numeric_jacobian(rng):
    a = rng.normal(size=(5, 3))
    fun = lambda x: np.sin(a @ x)
    x = rng.normal(size=3)
    exact = np.cos(a @ x)[:, None] * a
    assert np.allclose(numeric_jacobian(fun, x), exact, atol=1e-8)


def test_covariance_from_jacobian_symmetric(rng):
    j = rng.normal(size=(10, 4))
    cov = covariance_from_jacobian(j, rng.normal(size=10))
    assert np.allclose(cov, cov.T)


def test_result_accessors(rng):
    a, y = _linear_problem(rng)
    res = lm_minimize(lambda x: a @ x - y, np.zeros(3), jac=lambda x: a, names=("u", "v", "w"))
    assert res.value("v") == res.params[1]
    assert res.error("w") == res.stderr[2]
    d = res.as_dict()
    assert d["names"] == ["u", "v", "w"] and d["converged"]
