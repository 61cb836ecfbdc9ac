import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cslbound.csl_noise import (CslParams, csl_psd_multilayer, layer_integral,
                                layer_integral_interfaces)
from cslbound.mass_model import Cuboid, MultilayerStack, Sphere, fourier_transform
from cslbound.spectral_fit import SpectralModelParams, expand_params, model_psd, reduce_params
from cslbound.thermal_inference import feldman_cousins_upper

settings.register_profile("cslbound", deadline=None, max_examples=60)
settings.load_profile("cslbound")

pos = st.floats(1e-3, 1e3)
length = st.floats(1e-8, 1e-4)
density = st.floats(1e2, 2e4)
wavevector = st.lists(st.floats(-1e8, 1e8), min_size=3, max_size=3)


@given(A=st.floats(0, 1e-9), B=st.floats(0, 1e-15), C=st.floats(0, 1e-9), f0=st.floats(100, 1e4),
       df1=st.floats(-5, 5), Qp=st.floats(10, 1e7), f=st.floats(1, 2e4))
def test_model_never_below_white_floor(A, B, C, f0, df1, Qp, f):
    p = SpectralModelParams(A, B, C, f0, f0 + df1, Qp)
    assert model_psd(f, p) >= A


@given(A=st.floats(1e-14, 1e-10), B=st.floats(1e-21, 1e-15), C=st.floats(1e-14, 1e-10),
       df1=st.floats(-2, 2), Qp=st.floats(1e3, 1e7))
def test_reduce_expand_round_trip(A, B, C, df1, Qp):
    p = SpectralModelParams(A, B, C, 3532.7, 3532.7 + df1, Qp)
    back = expand_params(reduce_params(p), Qp, C / (A + C))
    assert back.C == pytest.approx(C, rel=1e-9, abs=0)
    assert back.f1 == pytest.approx(p.f1, rel=1e-9, abs=0)
    f = np.linspace(3520, 3545, 50)
    np.testing.assert_allclose(model_psd(f, back), model_psd(f, p), rtol=1e-7)


@given(rho=density, lx=length, ly=length, lz=length, q=wavevector)
def test_cuboid_transform_bounded_by_mass(rho, lx, ly, lz, q):
    c = Cuboid(rho, (lx, ly, lz), (1e-6, -2e-6, 0.5e-6))
    assert abs(fourier_transform(c, np.array(q))) <= c.mass * (1 + 1e-12)


@given(rho=density, r=length, q=wavevector)
def test_sphere_transform_bounded_by_mass(rho, r, q):
    s = Sphere(rho, r)
    assert abs(fourier_transform(s, np.array(q))) <= s.mass * (1 + 1e-12)


@given(n=st.integers(0, 12), d=st.floats(5e-8, 1e-6), q=wavevector)
def test_stack_transform_bounded_by_mass(n, d, q):
    s = MultilayerStack(7.17e3, 2.2e3, n, d, 2e-5, 3e-5)
    assert abs(fourier_transform(s, np.array(q))) <= s.mass * (1 + 1e-12)


@given(x1=st.floats(-4, 4), dx=st.floats(0.01, 3), cl=st.sampled_from([0.68, 0.9, 0.95]))
@settings(max_examples=25)
def test_fc_upper_monotone_and_positive(x1, dx, cl):
    a = feldman_cousins_upper(x1, 1.0, cl)
    b = feldman_cousins_upper(x1 + dx, 1.0, cl)
    assert 0 < a <= b + 1e-9


@given(lam=st.floats(1e-20, 1e-2), n=st.integers(0, 30), rc=st.floats(1e-8, 1e-5))
@settings(max_examples=30)
def test_noise_linear_in_rate(lam, n, rc):
    s = MultilayerStack(7.17e3, 2.2e3, n, 320e-9, 1e-4, 1e-4)
    one = csl_psd_multilayer(s, CslParams(1.0, rc))
    assert csl_psd_multilayer(s, CslParams(lam, rc)) == pytest.approx(lam * one, rel=1e-12, abs=0)


@given(n=st.integers(0, 40), d=st.floats(3e-8, 1e-6), rc=st.floats(1e-8, 1e-6))
@settings(max_examples=30)
def test_layer_integral_two_forms(n, d, rc):
    a = layer_integral(n, d, rc, 7.17e3, 2.2e3)
    b = layer_integral_interfaces(n, d, rc, 7.17e3, 2.2e3)
    assert a == pytest.approx(b, rel=1e-6, abs=0)
