"""Resonance/antiresonance fits of averaged SQUID flux-noise spectra."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .constants import PHI0
from .errors import (ConvergenceError, DegenerateDataError, TooFewPointsError,
                     UnsupportedWindowError)
from .lsq import covariance_from_jacobian, levenberg_marquardt

PARAM_NAMES = ("A", "B", "C", "f0", "f1")

#: main-lobe half-width of the Blackman window, in frequency bins
BLACKMAN_HALF_WIDTH_BINS = 3.0

DEFAULT_HALF_WINDOW_HZ = 17.5
MIN_RESIDUAL_BINS = 50


@dataclass(frozen=True)
class NoiseSpectrum:
    """Averaged one-sided flux-noise PSD.

    ``n_samples`` is the length of each periodogram, so the bin spacing is
    ``sample_rate / n_samples``.
    """

    freqs: np.ndarray
    psd: np.ndarray
    n_av: int
    window: str = "blackman"
    sample_rate: float | None = None
    n_samples: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        p = np.asarray(self.psd, dtype=float)
        if f.ndim != 1 or f.shape != p.shape:
            raise ValueError("freqs and psd must be 1D arrays of equal length")
        if f.size > 1 and np.any(np.diff(f) <= 0):
            raise ValueError("freqs must be strictly increasing")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("psd must be finite and non-negative")
        if int(self.n_av) < 1:
            raise ValueError("n_av must be >= 1")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "psd", p)
        object.__setattr__(self, "n_av", int(self.n_av))

    @property
    def bin_width(self):
        if self.sample_rate and self.n_samples:
            return self.sample_rate / self.n_samples
        return float(np.median(np.diff(self.freqs)))

    def restrict(self, lo, hi):
        """Sub-spectrum with ``lo <= f <= hi`` and the matching index array."""
        idx = np.nonzero((self.freqs >= lo) & (self.freqs <= hi))[0]
        return replace(self, freqs=self.freqs[idx], psd=self.psd[idx]), idx


@dataclass(frozen=True)
class SpectralModelParams:
    A: float
    B: float
    C: float
    f0: float
    f1: float
    Qprime: float

    def __post_init__(self):
        if min(self.A, self.B, self.C) < 0:
            raise ValueError("A, B and C must be non-negative")
        if not (self.f0 > 0 and self.f1 > 0 and self.Qprime > 0):
            raise ValueError("f0, f1 and Qprime must be positive")

    def as_array(self):
        return np.array([self.A, self.B, self.C, self.f0, self.f1])

    def to_dict(self):
        return {k: float(getattr(self, k)) for k in PARAM_NAMES + ("Qprime",)}


@dataclass
class ResidualTestResult:
    passed: bool
    p_value: float
    statistic: float
    n_points: int
    n_bins: int
    bin_width: float
    dof_expected: int
    dof_fitted: float
    mean: float
    variance: float

    def to_dict(self):
        return {k: (v.item() if isinstance(v, np.generic) else v) for k, v in self.__dict__.items()}


@dataclass
class SpectralFitResult:
    """Outcome of :func:`fit_spectrum`.

    ``params`` is one representative of the family of parameter sets that
    give the identical curve (see :func:`fit_spectrum`); the measurable
    Lorentzian amplitude is ``lorentzian_amplitude``.
    """

    params: SpectralModelParams
    param_covariance: np.ndarray
    chi2: float
    dof: int
    masked_bins: list
    kept_bins: np.ndarray
    iterations: int
    lorentzian_amplitude: float
    lorentzian_sigma: float
    c_fraction: float
    reduced: dict = field(default_factory=dict)
    residual_test: ResidualTestResult | None = None

    @property
    def errors(self):
        return dict(zip(PARAM_NAMES, np.sqrt(np.maximum(np.diag(self.param_covariance), 0.0))))

    @property
    def reduced_chi2(self):
        return self.chi2 / self.dof

    def to_dict(self):
        return {
            "params": self.params.to_dict(),
            "errors": {k: float(v) for k, v in self.errors.items()},
            "covariance": np.asarray(self.param_covariance).tolist(),
            "lorentzian_amplitude": self.lorentzian_amplitude,
            "lorentzian_sigma": self.lorentzian_sigma,
            "c_fraction": self.c_fraction,
            "reduced": {k: (v.tolist() if isinstance(v, np.ndarray) else float(v))
                        for k, v in self.reduced.items()},
            "chi2": self.chi2,
            "dof": self.dof,
            "reduced_chi2": self.reduced_chi2,
            "iterations": self.iterations,
            "masked_bins": [int(i) for i in self.masked_bins],
            "n_kept": int(len(self.kept_bins)),
            "residual_test": None if self.residual_test is None else self.residual_test.to_dict(),
        }


def model_psd(f, p: SpectralModelParams):
    """``A + [B f0^4 + C (f^2 - f1^2)^2] / [(f^2 - f0^2)^2 + (f f0 / Q')^2]``."""
    f = np.asarray(f, dtype=float)
    f2 = f * f
    den = (f2 - p.f0 ** 2) ** 2 + (f * p.f0 / p.Qprime) ** 2
    return p.A + (p.B * p.f0 ** 4 + p.C * (f2 - p.f1 ** 2) ** 2) / den


def leakage_mask(spectrum: NoiseSpectrum, peak_freq):
    """Indices of bins within the window main lobe around ``peak_freq``.

    For the Blackman window the main lobe spans +-3 bins, which is also the
    region where the window's power response stays above -85 dB.
    """
    if str(spectrum.window).lower() != "blackman":
        raise UnsupportedWindowError(f"no leakage model for window {spectrum.window!r}")
    f = spectrum.freqs
    df = spectrum.bin_width
    if not (f[0] - 0.5 * df <= peak_freq <= f[-1] + 0.5 * df):
        raise ValueError("peak frequency outside the spectrum")
    offset = np.abs(f - peak_freq) / df
    return [int(i) for i in np.nonzero(offset < BLACKMAN_HALF_WIDTH_BINS - 1e-9)[0]]


def reduce_params(p: SpectralModelParams):
    """Map (A, B, C, f0, f1) to the identifiable ``(K, a, b, f0)``.

    With ``g = f^2 - f0^2`` and ``den = g^2 + (f f0/Q')^2`` the model equals
    ``K + (a + b g) / den`` exactly, where ``K = A + C``,
    ``a = B f0^4 + C e^2 - C f0^4/Q'^2``, ``b = -C (2 e + f0^2/Q'^2)`` and
    ``e = f1^2 - f0^2``.
    """
    e = p.f1 ** 2 - p.f0 ** 2
    q2 = p.Qprime ** 2
    return np.array([p.A + p.C,
                     p.B * p.f0 ** 4 + p.C * e * e - p.C * p.f0 ** 4 / q2,
                     -p.C * (2.0 * e + p.f0 ** 2 / q2),
                     p.f0])


def expand_params(r, Qprime, c_fraction):
    """Inverse of :func:`reduce_params` for a chosen split ``C = c_fraction * K``."""
    K, a, b, f0 = r
    if not 0.0 < c_fraction <= 1.0:
        raise ValueError("c_fraction must lie in (0, 1]")
    C = c_fraction * K
    A = K - C
    q2 = Qprime ** 2
    e = -0.5 * (b / C + f0 ** 2 / q2)
    B = (a - C * e * e + C * f0 ** 4 / q2) / f0 ** 4
    if f0 ** 2 + e <= 0 or B < 0:
        raise DegenerateDataError(
            f"no non-negative decomposition with C/(A+C) = {c_fraction}; choose a larger fraction")
    return SpectralModelParams(A, B, C, f0, float(np.sqrt(f0 ** 2 + e)), Qprime)


def _reduced_model(f, r, Qp):
    K, a, b, f0 = r
    g = f * f - f0 * f0
    den = g * g + (f * f0 / Qp) ** 2
    return K + (a + b * g) / den


def _reduced_jacobian(f, r, Qp):
    K, a, b, f0 = r
    g = f * f - f0 * f0
    den = g * g + (f * f0 / Qp) ** 2
    num = a + b * g
    dden = -4.0 * f0 * g + 2.0 * f * f * f0 / Qp ** 2
    return np.column_stack([
        np.ones_like(f),
        1.0 / den,
        g / den,
        (-2.0 * f0 * b * den - num * dden) / den ** 2,
    ])


def _linear_start(f, y, w, f0_grid, Qp):
    """Best ``(K, a, b, f0)`` over ``f0_grid``; (K, a, b) by weighted linear LSQ."""
    best = None
    for f0 in f0_grid:
        M = _reduced_jacobian(f, (0.0, 0.0, 0.0, f0), Qp)[:, :3] * w[:, None]
        scale = np.sqrt(np.sum(M * M, axis=0))
        coef = np.linalg.lstsq(M / scale, y * w, rcond=None)[0] / scale
        cost = float(np.sum((M @ coef - y * w) ** 2))
        if best is None or cost < best[0]:
            best = (cost, np.array([coef[0], coef[1], coef[2], f0]))
    return best[1]


def default_init(spectrum: NoiseSpectrum, Qprime):
    """Cold start: median level, peak bin, peak height, small back-action."""
    psd = spectrum.psd
    A = float(np.median(psd))
    i = int(np.argmax(psd))
    f0 = float(spectrum.freqs[i])
    B = max(psd[i] - A, A) / Qprime ** 2
    return SpectralModelParams(A, B, A, f0, f0 * (1 + 1e-3), Qprime)


def fit_spectrum(spectrum: NoiseSpectrum, init: SpectralModelParams | None = None,
                 Qprime: float | None = None, window=None, mask="auto",
                 free=PARAM_NAMES, c_fraction=None, rel_tol=1e-4, max_outer=100,
                 residual_check=True):
    """Recursively re-weighted least-squares fit of :func:`model_psd`.

    Parameters
    ----------
    spectrum : NoiseSpectrum
    init : SpectralModelParams, optional
        Starting point (default :func:`default_init`); supplies ``Qprime``
        when that is not given and the default ``c_fraction``.
    Qprime : float, optional
        Apparent quality factor, held fixed.
    window : (float, float), optional
        Analysis band in Hz, default ``f0 -+ 17.5``.
    mask : "auto", None or sequence of int
        Bins (indices into ``spectrum``) left out of the fit.  ``"auto"``
        applies :func:`leakage_mask` for Blackman spectra, centred on a
        sub-bin estimate of the resonance.
    free : tuple of str
        Must be the five amplitudes/frequencies; Q' cannot be freed.
    c_fraction : float, optional
        Split ``C / (A + C)`` used to report (A, B, C, f1).

    Notes
    -----
    The curve depends on (A, B, C, f0, f1) only through the four
    combinations of :func:`reduce_params`, so one direction in parameter
    space is exactly flat whatever the data.  The fit is carried out in the
    reduced coordinates (linear start over an f0 scan, then damped
    Gauss-Newton), and the five parameters are reported for the requested
    split; their covariance has rank four.  ``a / f0^4`` is the Lorentzian
    amplitude, i.e. ``B + C (f1^2 - f0^2)^2 / f0^4 - C / Q'^2``.

    Per-point errors start as ``psd / sqrt(n_av)`` and are replaced by
    ``model / sqrt(n_av)`` after every pass, until the relative change of
    chi2/dof drops below ``rel_tol``.
    """
    if "Qprime" in free:
        raise ValueError("Q' is an external input and cannot be fitted")
    if set(free) != set(PARAM_NAMES):
        raise ValueError(f"free parameters must be {PARAM_NAMES}")
    if Qprime is None:
        if init is None:
            raise ValueError("Qprime is required")
        Qprime = init.Qprime
    if init is None:
        guess_band = spectrum
        if window is not None:
            guess_band, _ = spectrum.restrict(*window)
        if guess_band.freqs.size == 0:
            raise TooFewPointsError("analysis window contains no bins")
        init = default_init(guess_band, Qprime)
    init = replace(init, Qprime=Qprime)
    if not np.all(np.isfinite(init.as_array())):
        raise ValueError("non-finite initial parameters")
    if c_fraction is None:
        c_fraction = init.C / (init.A + init.C) if init.C > 0 else 0.5

    if window is None:
        window = (init.f0 - DEFAULT_HALF_WINDOW_HZ, init.f0 + DEFAULT_HALF_WINDOW_HZ)
    in_band = (spectrum.freqs >= window[0]) & (spectrum.freqs <= window[1])
    if isinstance(mask, str):
        if mask != "auto":
            raise ValueError("mask must be 'auto', None or a list of indices")
        masked = []
        if str(spectrum.window).lower() == "blackman":
            # centre the mask on a sub-bin peak estimate from the unmasked band
            fb, yb = spectrum.freqs[in_band], spectrum.psd[in_band]
            if fb.size > 4 and np.all(yb > 0):
                grid = init.f0 + spectrum.bin_width * np.linspace(-1.0, 1.0, 41)
                peak = _linear_start(fb, yb, np.sqrt(spectrum.n_av) / yb, grid, Qprime)[3]
            else:
                peak = init.f0
            masked = leakage_mask(spectrum, peak)
    else:
        masked = sorted(int(i) for i in (mask or ()))
    keep = in_band.copy()
    keep[np.asarray(masked, dtype=int)] = False
    kept = np.nonzero(keep)[0]
    if kept.size <= len(PARAM_NAMES):
        raise TooFewPointsError(f"only {kept.size} bins left to fit five parameters")
    f = spectrum.freqs[kept]
    y = spectrum.psd[kept]
    if np.any(y <= 0):
        raise DegenerateDataError("zero PSD values in the fit band")
    sqn = np.sqrt(spectrum.n_av)
    dof = kept.size - len(PARAM_NAMES)
    df = spectrum.bin_width

    r0 = _linear_start(f, y, sqn / y, init.f0 + df * np.linspace(-1.0, 1.0, 21), Qprime)
    # working variables: K = (sK t0)^2, a = (sa t1)^2, b = sb t2, f0 = f0ref + df t3
    sK = np.sqrt(max(r0[0], 1e-3 * np.median(y)))
    sa = np.sqrt(max(r0[1], 1e-300)) if r0[1] > 0 else np.sqrt(max(init.B, 1e-300)) * init.f0 ** 2
    sb = abs(r0[2]) if r0[2] != 0 else sK ** 2 * init.f0 ** 2
    fref = r0[3]
    t = np.array([np.sqrt(max(r0[0], 0.0)) / sK, np.sqrt(max(r0[1], 0.0)) / sa or 1e-3, r0[2] / sb, 0.0])
    t[:2] = np.maximum(t[:2], 1e-3)

    def to_red(tt):
        return np.array([(sK * tt[0]) ** 2, (sa * tt[1]) ** 2, sb * tt[2], fref + df * tt[3]])

    def dred(tt):
        return np.array([2.0 * sK ** 2 * tt[0], 2.0 * sa ** 2 * tt[1], sb, df])

    sigma = y / sqn
    prev = None
    for outer in range(1, max_outer + 1):
        def resid(tt, sigma=sigma):
            return (y - _reduced_model(f, to_red(tt), Qprime)) / sigma

        def jac(tt, sigma=sigma):
            return -_reduced_jacobian(f, to_red(tt), Qprime) * dred(tt) / sigma[:, None]

        sol = levenberg_marquardt(resid, jac, t)
        t = sol.x
        red = sol.cost / dof
        r = to_red(t)
        sigma = _reduced_model(f, r, Qprime) / sqn
        if np.any(sigma <= 0):
            raise DegenerateDataError("fitted model is not positive over the band")
        if prev is not None and (red == prev or abs(red - prev) < rel_tol * abs(prev)):
            break
        prev = red
    else:
        raise ConvergenceError(f"re-weighting did not converge in {max_outer} passes", max_outer)

    model = _reduced_model(f, r, Qprime)
    Jr = _reduced_jacobian(f, r, Qprime) / (model / sqn)[:, None]
    cov_r = covariance_from_jacobian(Jr)
    if cov_r is None:
        raise DegenerateDataError("singular normal equations: spectrum does not constrain the model")
    chi2 = float(np.sum(((y - model) * sqn / model) ** 2))

    params = expand_params(r, Qprime, c_fraction)
    # propagate through the expansion map (central differences)
    H = np.empty((5, 4))
    for j in range(4):
        h = 1e-6 * (abs(r[j]) + np.sqrt(cov_r[j, j]))
        up, dn = r.copy(), r.copy()
        up[j] += h
        dn[j] -= h
        H[:, j] = (_expand_array(up, Qprime, c_fraction) - _expand_array(dn, Qprime, c_fraction)) / (2 * h)
    cov = H @ cov_r @ H.T
    cov = 0.5 * (cov + cov.T)
    g = np.array([0.0, 1.0 / r[3] ** 4, 0.0, -4.0 * r[1] / r[3] ** 5])
    result = SpectralFitResult(
        params, cov, chi2, dof, list(masked), kept, outer,
        lorentzian_amplitude=float(r[1] / r[3] ** 4),
        lorentzian_sigma=float(np.sqrt(g @ cov_r @ g)),
        c_fraction=float(c_fraction),
        reduced={"K": r[0], "a": r[1], "b": r[2], "f0": r[3], "covariance": cov_r},
    )
    if residual_check and kept.size >= MIN_RESIDUAL_BINS:
        result.residual_test = residual_distribution_check(spectrum, result)
    return result


def _expand_array(r, Qprime, c_fraction):
    K, a, b, f0 = r
    C = c_fraction * K
    q2 = Qprime ** 2
    e = -0.5 * (b / C + f0 ** 2 / q2)
    B = (a - C * e * e + C * f0 ** 4 / q2) / f0 ** 4
    return np.array([K - C, B, C, f0, np.sqrt(f0 ** 2 + e)])


def freedman_diaconis_width(x):
    q75, q25 = np.percentile(x, [75, 25])
    return 2.0 * (q75 - q25) * len(x) ** (-1.0 / 3.0)


def residual_distribution_check(spectrum: NoiseSpectrum, fit: SpectralFitResult, alpha=0.01):
    """Compare normalized residuals with the chi-square(2 n_av) law.

    The statistic ``x = 2 n_av psd / model`` is histogrammed with the
    Freedman-Diaconis bin width; neighbouring bins are merged until every
    expected count is at least 5, and Pearson's chi-square goodness-of-fit
    test decides (pass if ``p > alpha``).
    """
    kept = np.asarray(fit.kept_bins)
    if kept.size < MIN_RESIDUAL_BINS:
        raise TooFewPointsError(f"{kept.size} bins kept, at least {MIN_RESIDUAL_BINS} needed")
    k = 2 * spectrum.n_av
    x = k * spectrum.psd[kept] / model_psd(spectrum.freqs[kept], fit.params)
    n = x.size
    width = freedman_diaconis_width(x)
    if not width > 0:
        raise DegenerateDataError("zero interquartile range of residuals")
    inner = np.arange(x.min() + width, x.max(), width)
    obs = np.bincount(np.searchsorted(inner, x, side="right"), minlength=inner.size + 1)
    exp = n * np.diff(stats.chi2.cdf(np.concatenate([[0.0], inner, [np.inf]]), k))
    mo, me = [], []
    acc_o = acc_e = 0.0
    for o, e in zip(obs, exp):
        acc_o += o
        acc_e += e
        if acc_e >= 5.0:
            mo.append(acc_o)
            me.append(acc_e)
            acc_o = acc_e = 0.0
    if acc_e > 0 or acc_o > 0:
        if me:
            mo[-1] += acc_o
            me[-1] += acc_e
        else:
            mo.append(acc_o)
            me.append(acc_e)
    mo, me = np.array(mo), np.array(me)
    stat = float(np.sum((mo - me) ** 2 / me))
    nb = mo.size
    p = float(stats.chi2.sf(stat, nb - 1)) if nb > 1 else 1.0
    return ResidualTestResult(
        passed=p > alpha, p_value=p, statistic=stat, n_points=n, n_bins=nb,
        bin_width=float(width), dof_expected=k, dof_fitted=float(np.mean(x)),
        mean=float(np.mean(x)), variance=float(np.var(x, ddof=1)),
    )


def antiresonance_coupling(f0, f1, k, Phi_x, units="SI"):
    """Flux back-action coupling from the resonance/antiresonance pair.

    ``J = k (1 - f1^2/f0^2) / Phi_x^2`` with ``Phi_x`` in flux quanta per
    metre.  ``units="SI"`` returns 1/H (Phi_x converted to Wb/m);
    ``units="phi0"`` returns N m / Phi0^2.
    """
    if min(f0, f1, k, Phi_x) <= 0:
        raise ValueError("inputs must be positive")
    J = k * (1.0 - (f1 / f0) ** 2) / Phi_x ** 2
    if units == "phi0":
        return J
    if units == "SI":
        return J / PHI0 ** 2
    raise ValueError("units must be 'SI' or 'phi0'")


def antiresonance_frequency(f0, J, k, Phi_x, units="SI"):
    """Inverse of :func:`antiresonance_coupling`."""
    Jp = J * PHI0 ** 2 if units == "SI" else J
    return f0 * np.sqrt(1.0 - Jp * Phi_x ** 2 / k)
