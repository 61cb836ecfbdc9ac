import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from cslbound._kernels import _pykernels

try:
    from cslbound._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])
needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")


def _segments(rng, n=9):
    return rng.normal(size=n) * 1e-6, rng.uniform(1e-8, 1e-6, n), rng.uniform(-3e3, 8e3, n)


@pytest.mark.parametrize("mod", BACKENDS)
def test_profile_transform_direct_sum(mod, rng):
    c, h, w = _segments(rng)
    q = np.concatenate([rng.normal(size=200) * 5e6, [0.0, 1e-3]])
    re, im = mod.profile_transform(q, c, h, w)
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = np.sum(w * np.where(q[:, None] == 0, 2 * h, 2 * np.sin(q[:, None] * h) / q[:, None])
                        * np.exp(-1j * q[:, None] * c), axis=1)
    scale = np.sum(np.abs(2 * h * w))
    np.testing.assert_allclose(re, direct.real, atol=1e-13 * scale)
    np.testing.assert_allclose(im, direct.imag, atol=1e-13 * scale)
    re_q, im_q = mod.profile_transform(q, c, h, w, True)
    np.testing.assert_allclose(re_q, q * re, atol=1e-12 * scale * 5e6)
    np.testing.assert_allclose(im_q, q * im, atol=1e-12 * scale * 5e6)


@pytest.mark.parametrize("mod", BACKENDS)
@pytest.mark.parametrize("n_lay", [0, 1, 4, 23])
def test_bracket_matches_secant_form(mod, n_lay):
    u = np.linspace(0.01, 12.0, 997)
    u = u[np.abs(np.cos(u / 2)) > 1e-2]
    direct = (7.17e3 * np.sin((n_lay + 1) * u) + 2.2e3 * np.sin(n_lay * u)) ** 2 / np.cos(u / 2) ** 2
    np.testing.assert_allclose(mod.multilayer_bracket_sq(u, n_lay, 7.17e3, 2.2e3), direct,
                               rtol=1e-9, atol=1e-9 * direct.max())


@pytest.mark.parametrize("mod", BACKENDS)
def test_bracket_regular_at_secant_poles(mod):
    # at u = pi the bracket vanishes like cos(u/2), so the ratio stays finite
    n, r1, r2 = 5, 7.17e3, 2.2e3
    eps = np.array([1e-3, 1e-5, 0.0, -1e-5, -1e-3])
    got = mod.multilayer_bracket_sq(np.pi + eps, n, r1, r2)
    # L'Hopital: d/du bracket at pi over d/du cos(u/2) at pi
    deriv = r1 * (n + 1) * np.cos((n + 1) * np.pi) + r2 * n * np.cos(n * np.pi)
    limit = (deriv / 0.5) ** 2
    assert np.all(np.isfinite(got))
    assert got[2] == pytest.approx(limit, rel=1e-10, abs=0)
    assert got[1] == pytest.approx(limit, rel=1e-6, abs=0)


@pytest.mark.parametrize("mod", BACKENDS)
@pytest.mark.parametrize("cl", [0.68, 0.9, 0.95])
def test_fc_acceptance_definition(mod, cl):
    mu = np.array([0.0, 0.05, 0.3, 1.0, 2.5, 6.0])
    lo, hi = mod.fc_acceptance(mu, cl)
    cover = stats.norm.cdf(hi - mu) - stats.norm.cdf(lo - mu)
    np.testing.assert_allclose(cover, cl, atol=1e-9)

    def ratio(x, m):
        best = np.maximum(x, 0.0)
        return -0.5 * (x - m) ** 2 + 0.5 * (x - best) ** 2

    inner = np.isfinite(lo)
    np.testing.assert_allclose(ratio(lo[inner], mu[inner]), ratio(hi[inner], mu[inner]), atol=1e-8)
    assert not np.isfinite(lo[0])  # mu = 0 accepts every negative x
    # far from the boundary the interval is central
    assert hi[-1] - mu[-1] == pytest.approx(stats.norm.ppf(0.5 + cl / 2), abs=1e-9)


@needs_ext
def test_backends_agree(rng):
    c, h, w = _segments(rng, 47)
    q = rng.normal(size=5000) * 3e7
    for flag in (False, True):
        a = np.array(_pykernels.profile_transform(q, c, h, w, flag))
        b = np.array(_ckernels.profile_transform(q, c, h, w, flag))
        np.testing.assert_allclose(b, a, rtol=0, atol=1e-12 * np.abs(a).max())
    u = rng.uniform(0, 40, 5000)
    a = _pykernels.multilayer_bracket_sq(u, 23, 7.17e3, 2.2e3)
    np.testing.assert_allclose(_ckernels.multilayer_bracket_sq(u, 23, 7.17e3, 2.2e3), a,
                               rtol=0, atol=1e-12 * a.max())
    mu = np.linspace(0, 8, 300)
    for x, y in zip(_pykernels.fc_acceptance(mu, 0.95), _ckernels.fc_acceptance(mu, 0.95)):
        np.testing.assert_allclose(y, x, rtol=0, atol=1e-12)


def _backend_in_subprocess(flag):
    env = dict(os.environ)
    if flag is None:
        env.pop("CSLBOUND_PURE_PYTHON", None)
    else:
        env["CSLBOUND_PURE_PYTHON"] = flag
    code = ("import cslbound._kernels as k, cslbound.thermal_inference as t;"
            "print(k.BACKEND, repr(t.feldman_cousins_upper(-0.853, 1.0)))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    name, value = out.stdout.split()
    return name, float(value)


def test_pure_python_switch():
    name, value = _backend_in_subprocess("1")
    assert name == "python"
    default_name, default_value = _backend_in_subprocess(None)
    assert default_name == ("cython" if _ckernels is not None else "python")
    assert value == pytest.approx(default_value, rel=1e-12, abs=0)
    assert _backend_in_subprocess("0")[0] == default_name
