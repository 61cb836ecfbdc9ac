import numpy as np
import pytest
from scipy import optimize

from cslbound.lsq import covariance_from_jacobian, levenberg_marquardt
from cslbound.quadrature import QuadConfig, QuadratureError, integrate


@pytest.mark.parametrize("f, a, b, exact", [
    (np.exp, 0.0, 1.0, np.e - 1.0),
    (lambda x: np.sin(50 * x) ** 2, 0.0, np.pi, np.pi / 2),
    (lambda x: np.exp(-x * x), -8.0, 8.0, np.sqrt(np.pi)),
    (lambda x: np.sqrt(np.abs(x)), -1.0, 1.0, 4.0 / 3.0),
])
def test_integrate_known_values(f, a, b, exact):
    val, err, n = integrate(f, a, b, QuadConfig(rtol=1e-10))
    assert val == pytest.approx(exact, rel=1e-9, abs=0)
    assert err <= 1e-10 * abs(val) + 1e-300
    assert n % 21 == 0


def test_integrate_oscillatory_closed_form():
    f = lambda x: np.cos(30 * x) * np.exp(-x)  # noqa: E731
    z = 1 - 30j
    ref = ((1 - np.exp(-5 * z)) / z).real
    val, _, _ = integrate(f, 0.0, 5.0, QuadConfig(rtol=1e-11), initial_panels=40)
    assert val == pytest.approx(ref, rel=1e-10, abs=0)


def test_integrate_reversed_limits_and_breakpoints():
    f = lambda x: np.where(x < 0.3, 1.0, 2.0)  # noqa: E731
    val, _, _ = integrate(f, 1.0, 0.0, QuadConfig(rtol=1e-12), breakpoints=(0.3,))
    assert val == pytest.approx(-(0.3 + 1.4), rel=1e-12, abs=0)
    assert integrate(f, 2.0, 2.0)[0] == 0.0


def test_integrate_budget_exhaustion_reports_estimate():
    f = lambda x: np.sin(1.0 / (x + 1e-9))  # noqa: E731
    with pytest.raises(QuadratureError) as info:
        integrate(f, 0.0, 1.0, QuadConfig(rtol=1e-12, max_evals=2000), initial_panels=2)
    exc = info.value
    assert np.isfinite(exc.estimate) and exc.error > 0 and exc.evaluations <= 2000


def test_quadconfig_validation():
    with pytest.raises(ValueError):
        QuadConfig(rtol=0, atol=0)
    with pytest.raises(ValueError):
        QuadConfig(max_evals=5)
    with pytest.raises(ValueError):
        integrate(np.exp, 0.0, np.inf)


def _exp_problem(rng):
    t = np.linspace(0, 4, 60)
    y = 2.5 * np.exp(-1.3 * t) + 0.4 + 0.02 * rng.standard_normal(t.size)

    def resid(p):
        return p[0] * np.exp(-p[1] * t) + p[2] - y

    def jac(p):
        e = np.exp(-p[1] * t)
        return np.column_stack([e, -p[0] * t * e, np.ones_like(t)])

    return resid, jac


def test_lm_matches_scipy_least_squares(rng):
    resid, jac = _exp_problem(rng)
    x0 = np.array([1.0, 0.5, 0.0])
    ours = levenberg_marquardt(resid, jac, x0)
    ref = optimize.least_squares(resid, x0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15)
    assert ours.converged
    np.testing.assert_allclose(ours.x, ref.x, rtol=1e-7)
    assert ours.cost == pytest.approx(2 * ref.cost, rel=1e-10, abs=0)


def test_lm_rosenbrock():
    def resid(p):
        return np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]])

    def jac(p):
        return np.array([[-20 * p[0], 10.0], [-1.0, 0.0]])

    sol = levenberg_marquardt(resid, jac, [-1.2, 1.0])
    np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-8)


def test_lm_zero_residual_fixed_point():
    sol = levenberg_marquardt(lambda p: p - 3.0, lambda p: np.eye(2), [3.0, 3.0])
    assert sol.cost == 0.0 and sol.converged


def test_covariance_from_jacobian(rng):
    J = rng.normal(size=(40, 3)) * np.array([1e-6, 1.0, 1e6])
    cov = covariance_from_jacobian(J)
    np.testing.assert_allclose(cov, np.linalg.inv(J.T @ J), rtol=1e-8)
    J[:, 2] = 2 * J[:, 1] * 1e6
    assert covariance_from_jacobian(J) is None
    assert covariance_from_jacobian(np.zeros((5, 2))) is None
