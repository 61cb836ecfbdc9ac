"""Synthetic spectra and thermal datasets with known ground truth.

Random numbers come from numpy's Philox4x64 counter-based generator.  The
stream for periodogram ``j`` is keyed by ``seed XOR (j << 64)`` (see
:func:`philox`); psd-scatter spectra and thermal datasets use ``j = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .spectral_fit import NoiseSpectrum, SpectralModelParams, model_psd
from .thermal_inference import ThermalDataset, saturation_model

RNG_ALGORITHM = "Philox4x64-10"
MODES = ("psd-scatter", "time-domain")


def philox(seed, index=0):
    """Generator for stream ``index`` of ``seed``.

    The 128-bit Philox key is ``seed XOR (index << 64)``: the 64-bit seed
    fills the low word and the stream index the high word, so distinct
    (seed, index) pairs never share a stream.
    """
    key = (int(seed) & 0xFFFFFFFFFFFFFFFF) ^ ((int(index) & 0xFFFFFFFFFFFFFFFF) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def reference_params(f0=3532.7, Qprime=3.5e5, A=1e-12, B=6.8e-19):
    """Spectral parameters resembling a mid-temperature measurement."""
    return SpectralModelParams(A=A, B=B, C=0.2 * A, f0=f0, f1=f0 + 0.2, Qprime=Qprime)


@dataclass(frozen=True)
class SynthConfig:
    params: SpectralModelParams
    n_av: int = 60
    sample_rate: float = 1e5
    n_samples: int = 2 ** 22
    seed: int = 0
    mode: str = "psd-scatter"
    band: tuple | None = None

    def __post_init__(self):
        if self.n_av < 1:
            raise ValueError("n_av must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not (self.sample_rate > 0 and self.n_samples >= 8):
            raise ValueError("invalid sampling")

    @property
    def frequency_band(self):
        if self.band is not None:
            return tuple(self.band)
        return (self.params.f0 - 25.0, self.params.f0 + 25.0)


def _band_bins(cfg):
    df = cfg.sample_rate / cfg.n_samples
    lo, hi = cfg.frequency_band
    k0 = max(1, int(np.ceil(lo / df)))
    k1 = min(cfg.n_samples // 2 - 1, int(np.floor(hi / df)))
    if k1 < k0:
        raise ValueError("frequency band contains no bins")
    return np.arange(k0, k1 + 1), df


def _resonator_filters(p: SpectralModelParams, fs):
    """Impulse-invariant discretizations of the force and back-action paths.

    Force path ``w0^2 / (s^2 + w0 s/Q' + w0^2)``; back-action path
    ``(s^2 + w1^2) / (same)`` split as ``1 - (w0 s/Q' + w0^2 - w1^2) / (...)``.
    """
    w0, w1 = 2 * np.pi * p.f0, 2 * np.pi * p.f1
    den = [1.0, w0 / p.Qprime, w0 * w0]
    dt = 1.0 / fs
    bf, af, _ = signal.cont2discrete(([w0 * w0], den), dt, method="impulse")
    bc, ac, _ = signal.cont2discrete(([w0 / p.Qprime, w0 * w0 - w1 * w1], den), dt, method="impulse")
    return (np.ravel(bf), np.ravel(af)), (np.ravel(bc), np.ravel(ac))


def _time_domain(cfg, bins):
    p = cfg.params
    fs, N = cfg.sample_rate, cfg.n_samples
    # one-sided white PSD S -> per-sample variance S fs / 2
    sa, sb, sc = (np.sqrt(max(v, 0.0) * fs / 2.0) for v in (p.A, p.B, p.C))
    (bf, af), (bc, ac) = _resonator_filters(p, fs)
    zf = np.zeros(max(len(af), len(bf)) - 1)
    zc = np.zeros(max(len(ac), len(bc)) - 1)
    win = np.blackman(N)
    norm = 2.0 / (fs * np.sum(win ** 2))
    tau = p.Qprime / (np.pi * p.f0)
    n_warm = int(np.ceil(10 * tau * fs))
    acc = np.zeros(bins.size)

    def run(rng, n, zf, zc):
        force = rng.standard_normal(n) * sb
        back = rng.standard_normal(n) * sc
        y_f, zf = signal.lfilter(bf, af, force, zi=zf)
        y_c, zc = signal.lfilter(bc, ac, back, zi=zc)
        return rng.standard_normal(n) * sa + y_f + back - y_c, zf, zc

    # the warm-up stream brings both filters to their stationary state
    warm = philox(cfg.seed, 1 << 62)
    done = 0
    while done < n_warm:
        n = min(N, n_warm - done)
        _, zf, zc = run(warm, n, zf, zc)
        done += n
    for j in range(cfg.n_av):
        x, zf, zc = run(philox(cfg.seed, j), N, zf, zc)
        spec = np.fft.rfft(x * win)
        acc += norm * np.abs(spec[bins]) ** 2
    return acc / cfg.n_av


def synth_spectrum(cfg: SynthConfig) -> NoiseSpectrum:
    """Averaged PSD drawn from the model with exact averaging statistics.

    ``psd-scatter`` draws each bin as ``model * Gamma(n_av, 1/n_av)``, i.e.
    ``chi^2(2 n_av) / (2 n_av)``.  ``time-domain`` filters white noise through
    the resonator and averages ``n_av`` Blackman-windowed periodograms of
    ``n_samples`` points, so it carries genuine spectral leakage.
    """
    bins, df = _band_bins(cfg)
    freqs = bins * df
    if cfg.mode == "psd-scatter":
        rng = philox(cfg.seed, 0)
        psd = model_psd(freqs, cfg.params) * rng.gamma(cfg.n_av, 1.0 / cfg.n_av, size=freqs.size)
    else:
        psd = _time_domain(cfg, bins)
    meta = {"seed": int(cfg.seed), "mode": cfg.mode, "rng": RNG_ALGORITHM, "Qprime": cfg.params.Qprime}
    return NoiseSpectrum(freqs, psd, cfg.n_av, "blackman", cfg.sample_rate, cfg.n_samples, meta)


def synth_thermal(B0, Ba, Bb, x_co, n=4, x=None, noise=0.05, seed=0, Q=2.83e6):
    """Thermal dataset scattered around the saturation model.

    ``noise`` is the relative 1-sigma error on each ``B``; ``T = x Q``.
    The default grid has 14 points log-spaced over [0.2, 40] x_co.
    """
    x = np.geomspace(0.2 * x_co, 40 * x_co, 14) if x is None else np.asarray(x, dtype=float)
    truth = saturation_model(x, B0, Ba, Bb, x_co, n)
    sigma = noise * np.abs(truth)
    if noise == 0:
        sigma = np.full_like(truth, max(np.max(np.abs(truth)), 1e-300) * 1e-6)
        B = truth.copy()
    else:
        B = truth + sigma * philox(seed).standard_normal(x.size)
    Qa = np.broadcast_to(np.asarray(Q, dtype=float), x.shape)
    return ThermalDataset(x * Qa, Qa.copy(), B, sigma)
