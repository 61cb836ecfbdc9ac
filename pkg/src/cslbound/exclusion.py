"""Exclusion curves on (lambda, rC) and multilayer design studies."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .csl_noise import (DEFAULT_QUAD_3D, CslParams, csl_psd_multilayer, csl_psd_scan,
                        layer_integral_interfaces)
from .mass_model import CompositeMass, MultilayerStack

#: The CSL expression gives d<p^2>/dt, i.e. the two-sided white-noise level;
#: the measured force PSD is one-sided, so the comparison carries a factor 2.
ONE_SIDED_FACTOR = 2.0

#: lambda reached at rC = 1e-7 m, used as the reference target (1/s)
REFERENCE_LAMBDA = 4.4e-10
REFERENCE_RC = 1e-7

RHO_WO3 = 7.17e3
RHO_SIO2 = 2.20e3


def default_rc_grid(n=60, lo=1e-9, hi=1e-4):
    return np.geomspace(lo, hi, n)


@dataclass
class ExclusionCurve:
    rC_grid: np.ndarray
    lambda_upper: np.ndarray
    CL: float
    geometry: str = ""
    S_upper: float = float("nan")
    psd_factor: float = ONE_SIDED_FACTOR
    psd_at_lambda1: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.rC_grid = np.asarray(self.rC_grid, dtype=float)
        self.lambda_upper = np.asarray(self.lambda_upper, dtype=float)
        if self.rC_grid.shape != self.lambda_upper.shape:
            raise ValueError("grid and curve lengths differ")
        if np.any(self.lambda_upper <= 0):
            raise ValueError("lambda_upper must be positive")

    def at(self, rC):
        """Log-log interpolation of the curve."""
        return float(np.exp(np.interp(np.log(rC), np.log(self.rC_grid), np.log(self.lambda_upper))))


def exclusion_curve(mass: CompositeMass, S_upper, rC_grid=None, CL=0.95, config=DEFAULT_QUAD_3D,
                    psd_factor=ONE_SIDED_FACTOR, workers=None, geometry=""):
    """``lambda_upper(rC) = S_upper / (psd_factor * S_CSL(lambda=1, rC))``.

    ``S_upper`` is the one-sided force-noise limit in N^2/Hz.
    """
    if not S_upper > 0:
        raise ValueError("S_upper must be positive")
    grid = default_rc_grid() if rC_grid is None else np.asarray(rC_grid, dtype=float)
    scan = csl_psd_scan(mass, grid, config, lam=1.0, workers=workers)
    psd = np.array([v for _, v in scan])
    return ExclusionCurve(grid, S_upper / (psd_factor * psd), CL, geometry or mass.name,
                          S_upper, psd_factor, psd)


def improvement_factor(full: CompositeMass, baseline: CompositeMass, rC=REFERENCE_RC, config=DEFAULT_QUAD_3D):
    """Ratio of CSL noise of ``full`` to ``baseline`` (equal to the ratio of lambda bounds)."""
    from .csl_noise import csl_psd_quadrature

    p = CslParams(1.0, rC)
    return csl_psd_quadrature(full, p, config) / csl_psd_quadrature(baseline, p, config)


@dataclass(frozen=True)
class AdlerRegion:
    """Band of lambda values suggested by latent-image formation arguments.

    Each anchor is ``(rC, lambda_central, decades)``: the band spans
    ``lambda_central * 10**(+-decades)``.  Between anchors the edges are
    interpolated linearly in log-log; the region is indicative only.
    """

    anchors: tuple = ((1e-7, 1e-17 * 1e9, 2.0), (1e-6, 1e-17 * 1e11, 2.0))

    def __post_init__(self):
        for rc, lam, dec in self.anchors:
            if min(rc, lam) <= 0 or dec < 0:
                raise ValueError("anchors must be positive")

    def edges(self, rC):
        a = np.array(self.anchors, dtype=float)
        lr = np.log10(rC)
        centre = np.interp(lr, np.log10(a[:, 0]), np.log10(a[:, 1]))
        dec = np.interp(lr, np.log10(a[:, 0]), a[:, 2])
        return 10 ** (centre - dec), 10 ** (centre + dec)

    def span(self):
        a = np.array(self.anchors, dtype=float)
        return a[:, 0].min(), a[:, 0].max()

    def polygon(self, n=20):
        """Closed (rC, lambda) vertex list for plotting tools."""
        rc = np.geomspace(*self.span(), n)
        lo, hi = self.edges(rc)
        return np.concatenate([np.column_stack([rc, lo]), np.column_stack([rc[::-1], hi[::-1]])])

    def overlap(self, curve: ExclusionCurve):
        """Per-rC fraction (in log lambda) of the band excluded by ``curve``."""
        lo_r, hi_r = self.span()
        sel = (curve.rC_grid >= lo_r) & (curve.rC_grid <= hi_r)
        rc = curve.rC_grid[sel]
        lo, hi = self.edges(rc)
        lam = curve.lambda_upper[sel]
        frac = np.clip((np.log10(hi) - np.log10(lam)) / (np.log10(hi) - np.log10(lo)), 0.0, 1.0)
        return rc, frac


def design_base(L1=100e-6, L2=100e-6, rho1=RHO_WO3, rho2=RHO_SIO2):
    """Stack template used by the design study (layer count and d are set per call)."""
    return MultilayerStack(rho1, rho2, 1, 320e-9, L1, L2)


def design_scan(base: MultilayerStack, n_lay_list, d, S_target, rC=REFERENCE_RC,
                psd_factor=ONE_SIDED_FACTOR):
    """Testable lambda ``S_target / (psd_factor * S_multi(lambda=1, rC))`` per layer count."""
    if not S_target > 0:
        raise ValueError("S_target must be positive")
    out = []
    for n in n_lay_list:
        stack = replace(base, n_lay=int(n), d=float(d))
        out.append((int(n), S_target / (psd_factor * csl_psd_multilayer(stack, CslParams(1.0, rC)))))
    return out


def minimal_layers(scan, threshold=REFERENCE_LAMBDA):
    """Smallest layer count in ``scan`` whose testable lambda is below ``threshold``."""
    hits = [n for n, lam in scan if lam < threshold]
    return min(hits) if hits else None


class NoInteriorMaximumError(ValueError):
    pass


def thickness_figure(d, rC, rho1=RHO_WO3, rho2=RHO_SIO2):
    """CSL noise gained per unit stack thickness by adding one layer pair.

    The stacking-axis factor of the closed form for ``N`` and ``N+1`` pairs
    (``N`` deep enough that end effects cancel), divided by the added
    thickness ``2 d``.  The transverse factors do not depend on ``d``.
    """
    n0 = int(np.ceil(8.0 * rC / d)) + 2
    gain = (layer_integral_interfaces(n0 + 1, d, rC, rho1, rho2)
            - layer_integral_interfaces(n0, d, rC, rho1, rho2))
    return gain / (2.0 * d)


def golden_section_max(fun, lo, hi, tol):
    """Maximize a unimodal ``fun`` on ``[lo, hi]`` to bracket width ``tol``."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return 0.5 * (a + b)


def optimal_thickness(rC, bounds=None, rho1=RHO_WO3, rho2=RHO_SIO2, tol=1e-9):
    """Layer thickness maximizing :func:`thickness_figure` (golden-section, 1 nm).

    At a fixed number of layers the noise grows monotonically with ``d``, so
    the optimum is defined at fixed total thickness.  Raises
    :class:`NoInteriorMaximumError` if the maximum sits on a bound.
    """
    lo, hi = (0.5 * rC, 10.0 * rC) if bounds is None else bounds
    if not 0 < lo < hi:
        raise ValueError("bounds must be positive and increasing")

    def fig(d):
        return thickness_figure(d, rC, rho1, rho2)

    d_star = golden_section_max(fig, lo, hi, tol)
    if d_star - lo <= 2 * tol or hi - d_star <= 2 * tol or fig(d_star) <= max(fig(lo), fig(hi)):
        raise NoInteriorMaximumError(f"no interior maximum of the thickness figure in [{lo:.3g}, {hi:.3g}] m")
    return d_star
