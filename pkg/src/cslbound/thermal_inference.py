"""From Lorentzian amplitudes versus T/Q to a bound on non-thermal force noise."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ._kernels import fc_acceptance
from .constants import CONSTANTS
from .errors import ConvergenceError, DegenerateDataError, GridResolutionError
from .lsq import LsqResult, covariance_from_jacobian, levenberg_marquardt

DEFAULT_REL_SIGMA_X = 0.01
FC_GRID_STEP = 0.005


class CrossoverWarning(UserWarning):
    """Fitted saturation crossover lies outside the sampled T/Q range."""


@dataclass(frozen=True)
class ThermalPoint:
    T: float
    Q: float
    B: float
    sigma_B: float

    def __post_init__(self):
        if not (self.T > 0 and self.Q > 0 and self.sigma_B > 0):
            raise ValueError("T, Q and sigma_B must be positive")

    @property
    def x(self):
        return self.T / self.Q


@dataclass(frozen=True)
class ThermalDataset:
    """Columns ``T`` (K), ``Q``, ``B`` and ``sigma_B`` (Phi0^2/Hz)."""

    T: np.ndarray
    Q: np.ndarray
    B: np.ndarray
    sigma_B: np.ndarray

    def __post_init__(self):
        cols = [np.atleast_1d(np.asarray(getattr(self, k), dtype=float)) for k in ("T", "Q", "B", "sigma_B")]
        if len({c.shape for c in cols}) != 1 or cols[0].ndim != 1:
            raise ValueError("columns must be 1D and of equal length")
        if np.any(cols[0] <= 0) or np.any(cols[1] <= 0) or np.any(cols[3] <= 0):
            raise ValueError("T, Q and sigma_B must be positive")
        for k, c in zip(("T", "Q", "B", "sigma_B"), cols):
            object.__setattr__(self, k, c)

    @classmethod
    def from_points(cls, points):
        pts = list(points)
        return cls(*(np.array([getattr(p, k) for p in pts]) for k in ("T", "Q", "B", "sigma_B")))

    @property
    def x(self):
        return self.T / self.Q

    def __len__(self):
        return self.T.size

    def points(self):
        return [ThermalPoint(*v) for v in zip(self.T, self.Q, self.B, self.sigma_B)]

    def select(self, mask):
        m = np.asarray(mask)
        return ThermalDataset(self.T[m], self.Q[m], self.B[m], self.sigma_B[m])

    def restrict(self, T_min):
        """Points with ``T >= T_min``."""
        return self.select(self.T >= T_min)


@dataclass(frozen=True)
class ResonatorParams:
    """Stiffness ``k`` (N/m), resonance ``f0`` (Hz), effective mass ``m``
    (kg), flux coupling ``Phi_x`` (Phi0/m) and the 1-sigma error on k."""

    k: float
    f0: float
    m: float
    Phi_x: float
    sigma_k: float = 0.0

    def __post_init__(self):
        if min(self.k, self.f0, self.m, self.Phi_x) <= 0 or self.sigma_k < 0:
            raise ValueError("resonator parameters must be positive")

    @property
    def omega0(self):
        return 2.0 * np.pi * self.f0


@dataclass
class LinearFitResult:
    B0: float
    B1: float
    covariance: np.ndarray
    chi2: float
    dof: int

    @property
    def sigma_B0(self):
        return float(np.sqrt(self.covariance[0, 0]))

    @property
    def sigma_B1(self):
        return float(np.sqrt(self.covariance[1, 1]))

    def to_dict(self):
        return {"B0": self.B0, "B1": self.B1, "sigma_B0": self.sigma_B0, "sigma_B1": self.sigma_B1,
                "covariance": self.covariance.tolist(), "chi2": self.chi2, "dof": self.dof}


@dataclass
class SaturationFitResult:
    B0: float
    Ba: float
    Bb: float
    x_co: float
    n: float
    covariance: np.ndarray
    chi2: float
    dof: int
    crossover_in_range: bool = True

    def to_dict(self):
        err = np.sqrt(np.diag(self.covariance))
        return {"B0": self.B0, "Ba": self.Ba, "Bb": self.Bb, "x_co": self.x_co, "n": self.n,
                "errors": dict(zip(("B0", "Ba", "Bb", "x_co"), err.tolist())),
                "covariance": self.covariance.tolist(), "chi2": self.chi2, "dof": self.dof,
                "crossover_in_range": self.crossover_in_range}


def thermal_force_psd(p: ResonatorParams, T, Q, constants=CONSTANTS):
    """Thermal force PSD ``4 kB T m omega0 / Q`` (N^2/Hz)."""
    return 4.0 * constants.kB * np.asarray(T) * p.m * p.omega0 / np.asarray(Q)


def added_mass_stiffness(f0, f0_prime, m_added):
    """Stiffness from the frequency shift caused by a known added mass.

    ``f0`` is the loaded frequency and ``f0_prime`` the bare one:
    ``k = 4 pi^2 m / (1/f0^2 - 1/f0'^2)``.
    """
    if not (f0_prime > f0 > 0 and m_added > 0):
        raise ValueError("need f0_prime > f0 > 0 and m_added > 0")
    return 4.0 * np.pi ** 2 * m_added / (1.0 / f0 ** 2 - 1.0 / f0_prime ** 2)


def kapitza_crossover(W, c_K, S_area):
    """Crossover temperature ``(4 W / (c_K S))^(1/4)`` of a Kapitza-limited link."""
    if min(W, c_K, S_area) <= 0:
        raise ValueError("inputs must be positive")
    return (4.0 * W / (c_K * S_area)) ** 0.25


def saturated_temperature(T, T_co, n=4):
    """Effective bath temperature ``(T^n + T_co^n)^(1/n)``."""
    T = np.asarray(T, dtype=float)
    return (T ** n + T_co ** n) ** (1.0 / n)


# --- linear fit -------------------------------------------------------------

def _wls_line(x, y, w):
    """Closed-form weighted least squares for ``y = a + b x``."""
    S, Sx, Sy = w.sum(), (w * x).sum(), (w * y).sum()
    Sxx, Sxy = (w * x * x).sum(), (w * x * y).sum()
    det = S * Sxx - Sx * Sx
    return (Sxx * Sy - Sx * Sxy) / det, (S * Sxy - Sx * Sy) / det


def fit_linear(data: ThermalDataset, sigma_x=None, rel_sigma_x=DEFAULT_REL_SIGMA_X):
    """Orthogonal weighted fit of ``B = B0 + B1 x`` with ``x = T/Q``.

    Errors in both coordinates are handled through the effective variance
    ``sigma_B^2 + B1^2 sigma_x^2``, which for a straight line is the exact
    minimum over the latent ``x`` of the orthogonal-distance chi-square.
    ``sigma_x`` defaults to ``rel_sigma_x * x``.
    """
    if len(data) < 3:
        raise DegenerateDataError("a linear fit needs at least 3 points")
    x = data.x
    if np.ptp(x) == 0:
        raise DegenerateDataError("all T/Q values are equal")
    sx = rel_sigma_x * x if sigma_x is None else np.broadcast_to(np.asarray(sigma_x, float), x.shape)
    # dimensionless working units
    xs, ys = np.max(np.abs(x)), np.max(np.abs(data.B))
    ys = ys if ys > 0 else 1.0
    u, v, su, sv = x / xs, data.B / ys, sx / xs, data.sigma_B / ys

    a0, b0 = _wls_line(u, v, 1.0 / sv ** 2)

    def resid(p):
        return (v - p[0] - p[1] * u) / np.sqrt(sv ** 2 + p[1] ** 2 * su ** 2)

    def jac(p):
        var = sv ** 2 + p[1] ** 2 * su ** 2
        r = (v - p[0] - p[1] * u)
        dr1 = -u / np.sqrt(var) - r * p[1] * su ** 2 / var ** 1.5
        return np.column_stack([-1.0 / np.sqrt(var), dr1])

    if np.all(su == 0):
        p = np.array([a0, b0])
        chi2 = float(np.sum(resid(p) ** 2))
    else:
        sol = levenberg_marquardt(resid, jac, [a0, b0])
        if not sol.converged:
            raise ConvergenceError("orthogonal linear fit did not converge", sol.iterations)
        p, chi2 = sol.x, sol.cost
    cov = covariance_from_jacobian(jac(p))
    if cov is None:
        raise DegenerateDataError("singular normal equations in linear fit")
    scale = np.array([ys, ys / xs])
    return LinearFitResult(float(p[0] * ys), float(p[1] * ys / xs), cov * np.outer(scale, scale),
                           float(chi2), len(data) - 2)


# --- saturation fit ----------------------------------------------------------

def saturation_model(x, B0, Ba, Bb, x_co, n=4):
    """``B0 + Ba (x^n + x_co^n)^(1/n) + Bb x``."""
    x = np.asarray(x, dtype=float)
    return B0 + Ba * (x ** n + x_co ** n) ** (1.0 / n) + Bb * x


def fit_saturation(data: ThermalDataset, n=4, x_co_init=None, max_iter=500):
    """Weighted nonlinear fit of :func:`saturation_model` (``n`` fixed).

    The crossover is parameterized as ``log x_co``.  For a fixed crossover the
    model is linear in (B0, Ba, Bb), so the fit minimizes the profile chi^2
    over ``log x_co`` (a log-spaced scan refined by bounded Brent) and then
    polishes all four parameters jointly with Levenberg-Marquardt.  When all
    data sit far above the crossover the profile is flat; the fit then
    returns the profile minimum and flags it with :class:`CrossoverWarning`.
    """
    if len(data) < 5:
        raise DegenerateDataError("the saturation fit needs at least 5 points")
    x = data.x
    if np.ptp(x) == 0:
        raise DegenerateDataError("all T/Q values are equal")
    xs = np.max(x)
    ys = np.max(np.abs(data.B)) or 1.0
    u, v, sv = x / xs, data.B / ys, data.sigma_B / ys
    w = 1.0 / sv

    def design(lc):
        return np.column_stack([np.ones_like(u), (u ** n + np.exp(n * lc)) ** (1.0 / n), u])

    def linear_solve(lc):
        M = design(lc) * w[:, None]
        coef = np.linalg.lstsq(M, v * w, rcond=None)[0]
        r = M @ coef - v * w
        return coef, float(r @ r)

    if x_co_init is not None:
        lo = hi = np.log(x_co_init / xs)
    else:
        grid = np.log(np.geomspace(u.min() / 10.0, 2.0, 41))
        prof = [linear_solve(lc)[1] for lc in grid]
        i = int(np.argmin(prof))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda lc: linear_solve(lc)[1], bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-10})
        if not res.success:
            raise ConvergenceError("profile minimization over the crossover failed", int(res.nit))
        lc0 = float(res.x)
    else:
        lc0 = float(lo)
    coef0, cost0 = linear_solve(lc0)
    at_edge = x_co_init is None and (np.isclose(lc0, grid[0]) or np.isclose(lc0, grid[-1]))

    def resid(p):
        return (saturation_model(u, p[0], p[1], p[2], np.exp(p[3]), n) - v) * w

    def jac(p):
        xc = np.exp(p[3])
        g = (u ** n + xc ** n) ** (1.0 / n)
        dg = g ** (1 - n) * xc ** n  # d g / d log x_co
        return np.column_stack([np.ones_like(u), g, u, p[1] * dg]) * w[:, None]

    p0 = np.concatenate([coef0, [lc0]])
    sol = levenberg_marquardt(resid, jac, p0, max_iter=max_iter)
    if not (sol.converged and sol.cost <= cost0):
        # flat profile: the joint polish wanders along the degenerate valley
        sol = LsqResult(p0, cost0, resid(p0), jac(p0), sol.iterations, False)
    p = sol.x
    xc = float(np.exp(p[3]) * xs)
    # covariance in (B0, Ba, Bb, x_co)
    J = jac(p)
    J[:, 3] /= np.exp(p[3])
    cov = covariance_from_jacobian(J)
    if cov is None:
        cov = np.full((4, 4), np.inf)
    scale = np.array([ys, ys / xs, ys / xs, xs])
    cov = cov * np.outer(scale, scale)
    rel_err = np.sqrt(cov[3, 3]) / xc if np.isfinite(cov[3, 3]) and cov[3, 3] >= 0 else np.inf
    in_range = bool(x.min() <= xc <= x.max())
    constrained = bool(rel_err < 1.0 and not at_edge)
    if not in_range:
        warnings.warn(f"saturation crossover x_co={xc:.3g} K lies outside the data range "
                      f"[{x.min():.3g}, {x.max():.3g}] K", CrossoverWarning, stacklevel=2)
    elif not constrained:
        warnings.warn(f"saturation crossover x_co={xc:.3g} K is not constrained by the data "
                      f"(relative error {rel_err:.3g})", CrossoverWarning, stacklevel=2)
    return SaturationFitResult(float(p[0] * ys), float(p[1] * ys / xs), float(p[2] * ys / xs), xc, n,
                               cov, float(sol.cost), len(data) - 4, in_range and constrained)


# --- force-noise floor and its limit -----------------------------------------

def nonthermal_psd(fit: LinearFitResult, p: ResonatorParams, sigma_k=None, constants=CONSTANTS):
    """Residual force-noise PSD ``(4 kB k / omega0) (B0 / B1)`` and its 1-sigma error.

    The error includes the B0-B1 covariance and the stiffness error
    (``sigma_k`` or ``p.sigma_k``).
    """
    sk = p.sigma_k if sigma_k is None else sigma_k
    c = 4.0 * constants.kB * p.k / p.omega0
    S = c * fit.B0 / fit.B1
    g = np.array([c / fit.B1, -c * fit.B0 / fit.B1 ** 2])
    var = float(g @ fit.covariance @ g) + (S / p.k * sk) ** 2
    return float(S), float(np.sqrt(var))


def _check_fc_inputs(sigma, cl):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if not 0.5 < cl < 1.0:
        raise ValueError("confidence level must lie in (0.5, 1)")


def fc_belt(x_max, cl=0.95, step=FC_GRID_STEP):
    """Confidence belt on the grid ``mu = 0, step, ..., >= x_max + 6``."""
    n = int(np.ceil((max(x_max, 0.0) + 6.0) / step)) + 1
    mu = np.arange(n) * step
    x_lo, x_hi = fc_acceptance(mu, cl)
    return mu, np.asarray(x_lo), np.asarray(x_hi)


def feldman_cousins_intervals(measured, sigma, cl=0.95, step=FC_GRID_STEP, precision=None):
    """Unified (likelihood-ratio ordered) intervals for a non-negative Gaussian mean.

    ``measured`` may be an array; one belt is built for all of it.  Returns
    ``(lower, upper)`` arrays in the units of ``measured``.  The belt lives
    on a grid of step ``step`` in units of sigma and is inverted with linear
    interpolation between grid points.
    """
    _check_fc_inputs(sigma, cl)
    if precision is not None and precision < step:
        raise GridResolutionError(f"requested precision {precision} is finer than the grid step {step}")
    x0 = np.atleast_1d(np.asarray(measured, dtype=float)) / sigma
    if not np.all(np.isfinite(x0)):
        raise ValueError("measured values must be finite")
    mu, x_lo, x_hi = fc_belt(float(x0.max()), cl, step)
    n = mu.size

    # upper edge: last mu whose acceptance region still reaches down to x0
    i = np.searchsorted(x_lo, x0, side="right") - 1
    nxt = np.minimum(i + 1, n - 1)
    gap = x_lo[nxt] - x_lo[i]
    interp = (i + 1 < n) & np.isfinite(x_lo[i]) & (gap > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(interp, np.clip((x0 - x_lo[i]) / np.where(interp, gap, 1.0), 0.0, 1.0), 0.0)
    upper = mu[i] + frac * step
    # lower edge: first mu whose acceptance region reaches up to x0
    j = np.clip(np.searchsorted(x_hi, x0, side="left"), 1, n - 1)
    frac = (x0 - x_hi[j - 1]) / (x_hi[j] - x_hi[j - 1])
    lower = np.where(x_hi[0] >= x0, 0.0, mu[j - 1] + frac * step)
    return lower * sigma, upper * sigma


def feldman_cousins_interval(measured, sigma, cl=0.95, step=FC_GRID_STEP, precision=None):
    """Unified interval ``(lower, upper)`` for a single measurement."""
    lo, hi = feldman_cousins_intervals(measured, sigma, cl, step, precision)
    return float(lo[0]), float(hi[0])


def feldman_cousins_upper(measured, sigma, cl=0.95, step=FC_GRID_STEP, precision=None):
    """Upper end of the unified interval (same units as ``measured``)."""
    return feldman_cousins_interval(measured, sigma, cl, step, precision)[1]
