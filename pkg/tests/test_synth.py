import numpy as np
import pytest
from scipy import stats

from cslbound.io import read_spectrum, read_thermal, write_spectrum, write_thermal
from cslbound.spectral_fit import SpectralModelParams, model_psd
from cslbound.synth import RNG_ALGORITHM, SynthConfig, philox, synth_spectrum, synth_thermal
from cslbound.thermal_inference import saturation_model

BROAD = SpectralModelParams(A=1e-12, B=2e-15, C=2e-13, f0=1000.0, f1=1010.0, Qprime=500.0)


def test_large_average_converges_to_model(truth):
    sp = synth_spectrum(SynthConfig(truth, n_av=1_000_000, seed=3))
    ratio = sp.psd / model_psd(sp.freqs, truth)
    assert np.max(np.abs(ratio - 1)) < 0.005


def test_fixed_seed_is_byte_identical(truth, tmp_path):
    a = synth_spectrum(SynthConfig(truth, seed=11))
    b = synth_spectrum(SynthConfig(truth, seed=11))
    assert a.psd.tobytes() == b.psd.tobytes()
    write_spectrum(tmp_path / "a.csv", a)
    write_spectrum(tmp_path / "b.csv", b)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert synth_spectrum(SynthConfig(truth, seed=12)).psd.tobytes() != a.psd.tobytes()
    assert a.meta["rng"] == RNG_ALGORITHM and a.meta["seed"] == 11


def test_streams_do_not_collide():
    draws = {(s, i): philox(s, i).standard_normal(4).tobytes() for s in range(4) for i in range(4)}
    assert len(set(draws.values())) == len(draws)
    assert philox(2**64 - 1, 5).standard_normal() == philox(2**64 - 1, 5).standard_normal()


def test_scatter_bin_statistics():
    # per-bin mean ~ model and variance ~ model^2 / n_av over many seeds
    n_av, runs = 20, 3000
    cfg = dict(params=BROAD, n_av=n_av, n_samples=2 ** 14, sample_rate=1e4, band=(990.0, 1020.0))
    draws = np.array([synth_spectrum(SynthConfig(seed=s, **cfg)).psd for s in range(runs)])
    freqs = synth_spectrum(SynthConfig(seed=0, **cfg)).freqs
    m = model_psd(freqs, BROAD)
    z = (draws.mean(0) / m - 1) / np.sqrt(1 / (n_av * runs))
    assert np.max(np.abs(z)) < 4.5
    var_ratio = draws.var(0, ddof=1) / (m ** 2 / n_av)
    # standard error of a sample variance of a Gamma(n_av) variable
    se = np.sqrt((2 + 6 / n_av) / runs)
    assert np.max(np.abs(var_ratio - 1)) < 4.5 * se
    # each bin is the model times chi^2(2 n_av) / (2 n_av)
    u = (draws[:, 3] / m[3]) * 2 * n_av
    assert stats.kstest(u, stats.chi2(2 * n_av).cdf).pvalue > 1e-3


def test_scatter_bins_are_independent():
    cfg = SynthConfig(BROAD, n_av=5, n_samples=2 ** 14, sample_rate=1e4, band=(990.0, 1020.0))
    x = np.array([synth_spectrum(SynthConfig(**{**cfg.__dict__, "seed": s})).psd for s in range(2000)])
    r = np.corrcoef(x[:, 10], x[:, 11])[0, 1]
    assert abs(r) < 4 / np.sqrt(2000)


def test_time_domain_mean_matches_model():
    cfg = SynthConfig(BROAD, n_av=200, n_samples=2 ** 12, sample_rate=8192.0, seed=5,
                      mode="time-domain", band=(900.0, 1100.0))
    sp = synth_spectrum(cfg)
    m = model_psd(sp.freqs, BROAD)
    # the 2 Hz linewidth is one bin wide, so leakage dominates near the peak; compare away from it
    far = np.abs(sp.freqs - BROAD.f0) > 30
    pull = (sp.psd[far] / m[far] - 1) * np.sqrt(cfg.n_av)
    assert abs(np.mean(pull)) < 4 / np.sqrt(far.sum())
    assert 0.8 < np.std(pull) < 1.2


def test_time_domain_seeds_are_independent():
    base = dict(params=BROAD, n_av=8, n_samples=2 ** 12, sample_rate=8192.0, mode="time-domain",
                band=(900.0, 1100.0))
    sa = synth_spectrum(SynthConfig(seed=0, **base))
    m = model_psd(sa.freqs, BROAD)
    a = sa.psd / m
    b = synth_spectrum(SynthConfig(seed=1, **base)).psd / m
    # fluctuations around the model are uncorrelated between neighbouring seeds
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / np.sqrt(a.size)
    again = synth_spectrum(SynthConfig(seed=0, **base)).psd
    assert again.tobytes() == sa.psd.tobytes()


def test_config_validation(truth):
    with pytest.raises(ValueError):
        SynthConfig(truth, n_av=0)
    with pytest.raises(ValueError):
        SynthConfig(truth, mode="white")
    with pytest.raises(ValueError):
        synth_spectrum(SynthConfig(truth, band=(1e5, 1e5 + 1)))


def test_spectrum_file_round_trip(ref_spectrum, tmp_path):
    path = tmp_path / "s.csv"
    write_spectrum(path, ref_spectrum, temperature_K=0.1)
    back = read_spectrum(path)
    np.testing.assert_allclose(back.freqs, ref_spectrum.freqs, rtol=1e-8)
    np.testing.assert_allclose(back.psd, ref_spectrum.psd, rtol=1e-8)
    assert back.n_av == ref_spectrum.n_av and back.meta["temperature_K"] == 0.1
    assert back.meta["Qprime"] == ref_spectrum.meta["Qprime"]


def test_thermal_zero_noise_is_the_model():
    x = np.geomspace(1e-8, 1e-6, 9)
    d = synth_thermal(1e-21, 1.6e-12, 1.7e-12, 5.3e-8, x=x, noise=0.0)
    np.testing.assert_array_equal(d.B, saturation_model(x, 1e-21, 1.6e-12, 1.7e-12, 5.3e-8))
    np.testing.assert_allclose(d.x, x, rtol=1e-14)


def test_thermal_noise_is_gaussian():
    x = np.geomspace(1e-8, 1e-6, 14)
    truth = saturation_model(x, 0.0, 1.6e-12, 1.7e-12, 5.3e-8)
    z = np.concatenate([(synth_thermal(0.0, 1.6e-12, 1.7e-12, 5.3e-8, x=x, noise=0.05, seed=s).B - truth)
                        / (0.05 * truth) for s in range(300)])
    assert stats.kstest(z, "norm").pvalue > 1e-3


def test_thermal_file_round_trip(tmp_path):
    d = synth_thermal(1e-21, 1.6e-12, 1.7e-12, 5.3e-8, noise=0.05, seed=2)
    write_thermal(tmp_path / "t.csv", d)
    back = read_thermal(tmp_path / "t.csv")
    for a, b in ((back.T, d.T), (back.Q, d.Q), (back.B, d.B), (back.sigma_B, d.sigma_B)):
        np.testing.assert_allclose(a, b, rtol=1e-8)
