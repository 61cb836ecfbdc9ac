"""CSL force-noise spectral density of rigid mass distributions.

Two independent routes are provided:

* :func:`csl_psd_quadrature` integrates
  ``hbar^2 lam rC^3 / (pi^1.5 m0^2) * int d^3q q_x^2 exp(-q^2 rC^2) |rho~(q)|^2``
  numerically for any :class:`~cslbound.mass_model.CompositeMass`.
* :func:`csl_psd_multilayer` evaluates the separable closed form for a
  single multilayer stack moving along its stacking axis.

Both return the same normalization (the one written above).  See
:data:`cslbound.exclusion.ONE_SIDED_FACTOR` for the conversion applied when
comparing against a measured one-sided force PSD.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, ndtr, spherical_jn

from ._kernels import multilayer_bracket_sq
from .constants import CONSTANTS
from .mass_model import BoxLike, CompositeMass, MultilayerStack, Sphere, axis_index
from .quadrature import QuadConfig, QuadratureError, integrate

#: integrals are truncated at ``Q_CUTOFF / rC``; exp(-64) ~ 1.6e-28
Q_CUTOFF = 8.0

DEFAULT_QUAD_3D = QuadConfig(rtol=1e-5, max_evals=100_000_000)
DEFAULT_QUAD_1D = QuadConfig(rtol=1e-6, max_evals=100_000_000)


@dataclass(frozen=True)
class CslParams:
    """Collapse rate ``lam`` (1/s) and correlation length ``rC`` (m)."""

    lam: float
    rC: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("collapse rate must be non-negative")
        if not self.rC > 0:
            raise ValueError("correlation length must be positive")


def csl_prefactor(params: CslParams, constants=CONSTANTS):
    return constants.hbar ** 2 * params.lam * params.rC ** 3 / (np.pi ** 1.5 * constants.m0 ** 2)


def max_workers():
    """Worker cap from ``CSLBOUND_MAX_WORKERS`` (default: CPU count)."""
    env = os.environ.get("CSLBOUND_MAX_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# --- numerical route ------------------------------------------------------

def _initial_panels(span, qmax, per_panel=4.0):
    periods = qmax * span / (2.0 * np.pi)
    return int(np.clip(periods / per_panel, 16, 50_000))


def _profile_span(p, r):
    e = np.concatenate([p.edges(), r.edges()])
    return float(e.max() - e.min())


def _axis_integral(p, r, motion, rC, config):
    """``int_{-inf}^{inf} dq w(q) Re[P(q) R(q)^*]`` with the Gaussian cutoff."""
    a = rC * rC
    qmax = Q_CUTOFF / rC
    same = p is r

    def f(q):
        fp = p.transform(q, times_q=motion)
        if same:
            v = fp.real ** 2 + fp.imag ** 2
        else:
            fr = r.transform(q, times_q=motion)
            v = fp.real * fr.real + fp.imag * fr.imag
        return np.exp(-a * q * q) * v

    val, err, _ = integrate(f, 0.0, qmax, config,
                            initial_panels=_initial_panels(_profile_span(p, r), qmax))
    return 2.0 * val


def _boxbox_terms(boxes, m, rC, rtol, max_evals):
    """Self and pair contributions of separable bodies, keyed by (i, j)."""
    cfg = QuadConfig(rtol=rtol / 4.0, max_evals=max_evals)
    axis_self = {}
    out = {}
    for i, (scale, profs) in enumerate(boxes):
        h = [_axis_integral(profs[a], profs[a], a == m, rC, cfg) for a in range(3)]
        axis_self[i] = h
        out[(i, i)] = scale * scale * float(np.prod(h))
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            si, pi = boxes[i]
            sj, pj = boxes[j]
            h = []
            for a in range(3):
                atol = rtol / 4.0 * np.sqrt(abs(axis_self[i][a] * axis_self[j][a]))
                h.append(_axis_integral(pi[a], pj[a], a == m, rC,
                                        QuadConfig(rtol=rtol / 4.0, atol=atol, max_evals=max_evals)))
            out[(i, j)] = 2.0 * si * sj * float(np.prod(h))
    return out


def _sphere_self(s, rC, config):
    a = rC * rC
    qmax = Q_CUTOFF / rC

    def f(q):
        t = s.radial_transform(q)
        return 4.0 * np.pi / 3.0 * q ** 4 * np.exp(-a * q * q) * t * t

    val, _, _ = integrate(f, 0.0, qmax, config,
                          initial_panels=_initial_panels(2 * s.radius, qmax))
    return val


def _angular_kernel(u, cos2):
    """``(1/4pi) int dOmega n_m^2 exp(i u n.e)`` for a unit vector e with (e_m)^2 = cos2."""
    small = u < 1e-3
    us = np.where(small, 1.0, u)
    j1u = np.where(small, 1.0 / 3.0 - u * u / 30.0, spherical_jn(1, us) / us)
    j2 = np.where(small, u * u / 15.0, spherical_jn(2, us))
    return j1u - cos2 * j2


def _sphere_pair(s1, s2, m, rC, config):
    a = rC * rC
    qmax = Q_CUTOFF / rC
    delta = np.asarray(s1.center) - np.asarray(s2.center)
    dist = float(np.linalg.norm(delta))
    cos2 = (delta[m] / dist) ** 2 if dist > 0 else 1.0 / 3.0

    def f(q):
        return (8.0 * np.pi * q ** 4 * np.exp(-a * q * q) * s1.radial_transform(q)
                * s2.radial_transform(q) * _angular_kernel(q * dist, cos2))

    span = dist + s1.radius + s2.radius
    val, _, _ = integrate(f, 0.0, qmax, config, initial_panels=_initial_panels(span, qmax))
    return val


_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GRADING = np.array([0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 12.0])
_PHI_NORM = 1.0 / np.sqrt(2.0 * np.pi)


def _smoothed_profile(p, y, s):
    """``(G_s * p)(y)`` for a top-hat profile ``p``."""
    out = np.zeros_like(y)
    for c, h, w in zip(p.centers, p.halfwidths, p.weights):
        out += w * (ndtr((y - c + h) / s) - ndtr((y - c - h) / s))
    return out


def _smoothed_profile_antideriv(p, z, s):
    def g(u):
        return u * ndtr(u) + _PHI_NORM * np.exp(-0.5 * u * u)

    out = np.zeros_like(z)
    for c, h, w in zip(p.centers, p.halfwidths, p.weights):
        out += w * s * (g((z - c + h) / s) - g((z - c - h) / s))
    return out


def _smoothed_second_derivative(p, x, s):
    """``d^2/dx^2 (G_s * p)(x)``: sums of Gaussian-derivative spikes at the edges."""
    out = np.zeros_like(x)
    norm = _PHI_NORM / s
    for c, h, w in zip(p.centers, p.halfwidths, p.weights):
        for edge, sign in ((c - h, 1.0), (c + h, -1.0)):
            u = (x - edge) / s
            out += sign * w * (-u / s) * norm * np.exp(-0.5 * u * u)
    return out


def _graded_points(edges, s, lo, hi):
    pts = [lo, hi]
    for e in edges:
        for g in _GRADING:
            pts.extend((e - g * s, e + g * s))
    pts = np.unique(np.clip(pts, lo, hi))
    return pts


def _sphere_box_pair(sph, box, m, rC, config):
    """Interference term of a sphere with a separable body.

    Evaluated in position space: by Parseval the pair term of the q-integral
    equals ``-2 (2 pi)^3 rho_s scale * int_ball d^2/dx_m^2 (G * p_m) prod (G * p_a)``
    with ``G`` a Gaussian of width ``sqrt(2) rC`` along each axis.
    """
    scale, profs = box
    s = np.sqrt(2.0) * rC
    reach = 12.0 * s
    lo_b, hi_b = [], []
    for p in profs:
        e = p.edges()
        lo_b.append(e[0])
        hi_b.append(e[-1])
    c = np.asarray(sph.center)
    R = sph.radius
    if np.any(c - R > np.asarray(hi_b) + reach) or np.any(c + R < np.asarray(lo_b) - reach):
        return 0.0
    ay, az = (m + 1) % 3, (m + 2) % 3
    px, py, pz = profs[m], profs[ay], profs[az]
    xc, yc, zc = c[m], c[ay], c[az]
    y_edges = py.edges()
    z_edges = pz.edges()

    def disk_integral(x):
        rho = np.sqrt(max(R * R - (x - xc) ** 2, 0.0))
        if rho == 0.0:
            return 0.0
        ylo = max(yc - rho, y_edges[0] - reach)
        yhi = min(yc + rho, y_edges[-1] + reach)
        if ylo >= yhi:
            return 0.0
        t_lo = np.arcsin(np.clip((ylo - yc) / rho, -1, 1))
        t_hi = np.arcsin(np.clip((yhi - yc) / rho, -1, 1))
        tb = [np.arcsin(np.clip((y - yc) / rho, -1, 1)) for y in _graded_points(y_edges, s, ylo, yhi)]
        for ze in z_edges:
            for g in _GRADING:
                for dz in (ze - zc - g * s, ze - zc + g * s):
                    r = abs(dz) / rho
                    if r < 1.0:
                        ac = np.arccos(r)
                        tb.extend((ac, -ac))
        tb = np.unique(np.clip(np.concatenate([[t_lo, t_hi], tb]), t_lo, t_hi))
        mid = 0.5 * (tb[1:] + tb[:-1])
        half = 0.5 * (tb[1:] - tb[:-1])
        th = (mid[:, None] + half[:, None] * _GL_X).ravel()
        wts = (half[:, None] * _GL_W).ravel()
        y = yc + rho * np.sin(th)
        w = rho * np.cos(th)
        inner = _smoothed_profile_antideriv(pz, zc + w, s) - _smoothed_profile_antideriv(pz, zc - w, s)
        return float(np.sum(wts * _smoothed_profile(py, y, s) * inner * rho * np.cos(th)))

    def f(x):
        k = _smoothed_second_derivative(px, x, s)
        out = np.zeros_like(x)
        nz = np.abs(k) > 0
        out[nz] = k[nz] * np.array([disk_integral(xi) for xi in x[nz]])
        return out

    # x-windows around the motion-axis edges of the body, clipped to the ball
    windows = []
    for e in px.edges():
        a0, b0 = max(e - reach, xc - R), min(e + reach, xc + R)
        if a0 < b0:
            windows.append([a0, b0])
    windows.sort()
    merged = []
    for w in windows:
        if merged and w[0] <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], w[1])
        else:
            merged.append(w)
    total = 0.0
    for a0, b0 in merged:
        bp = [e for e in px.edges() if a0 < e < b0]
        val, _, _ = integrate(f, a0, b0, config, breakpoints=bp, initial_panels=4)
        total += val
    return -2.0 * (2.0 * np.pi) ** 3 * sph.density * scale * total


def csl_integral(mass: CompositeMass, rC: float, config: QuadConfig = DEFAULT_QUAD_3D):
    """``int d^3q q_m^2 exp(-q^2 rC^2) |rho~(q)|^2`` for a composite (kg^2/m^5).

    Separable bodies are handled with a tensor-product rule; because their
    integrand factorizes per axis, the tensor sum collapses into a product of
    adaptive 1D sums over ``q in [0, 8/rC]`` (times 2 by Hermitian symmetry).
    Spheres use the exact angular reduction to a radial integral.
    """
    m = axis_index(mass.motion_axis)
    boxes = [c.profiles() for c in mass.components if isinstance(c, BoxLike)]
    spheres = [c for c in mass.components if isinstance(c, Sphere)]
    total = 0.0
    if boxes:
        total += sum(_boxbox_terms(boxes, m, rC, config.rtol, config.max_evals).values())
    cfg = QuadConfig(rtol=config.rtol / 2.0, atol=config.atol, max_evals=config.max_evals)
    selfs = [_sphere_self(s, rC, cfg) for s in spheres]
    total += sum(selfs)
    scale = max(abs(total), 1e-300)
    pair_cfg = QuadConfig(rtol=config.rtol / 2.0, atol=config.rtol * scale / 10.0,
                          max_evals=config.max_evals)
    for i in range(len(spheres)):
        for j in range(i + 1, len(spheres)):
            total += _sphere_pair(spheres[i], spheres[j], m, rC, pair_cfg)
        for b in boxes:
            total += _sphere_box_pair(spheres[i], b, m, rC, pair_cfg)
    return total


def csl_psd_quadrature(mass: CompositeMass, params: CslParams,
                       config: QuadConfig = DEFAULT_QUAD_3D, constants=CONSTANTS):
    """CSL force PSD (N^2/Hz) of a composite mass by numerical q-integration.

    Raises
    ------
    QuadratureError
        If any adaptive integral exhausts ``config.max_evals``.
    """
    if params.lam == 0:
        return 0.0
    try:
        integral = csl_integral(mass, params.rC, config)
    except QuadratureError as exc:
        exc.rC = params.rC
        raise
    return csl_prefactor(params, constants) * integral


# --- closed form for a multilayer ------------------------------------------

def transverse_factor(L, rC):
    """``1 - exp(-L^2/4rC^2) - sqrt(pi) L/(2 rC) erf(L/(2 rC))`` (negative)."""
    u = L / (2.0 * rC)
    return 1.0 - np.exp(-u * u) - np.sqrt(np.pi) * u * erf(u)


def layer_integral(n_lay, d, rC, rho1, rho2, config: QuadConfig = DEFAULT_QUAD_1D):
    """``int dq exp(-rC^2 q^2) sec^2(qd/2) [rho1 sin((N+1)qd) + rho2 sin(N qd)]^2``.

    Integrated over the whole line using the regularized integrand, so the
    poles of the secant never need special treatment.
    """
    qmax = Q_CUTOFF / rC
    a = rC * rC

    def f(q):
        return np.exp(-a * q * q) * multilayer_bracket_sq(q * d, n_lay, rho1, rho2)

    span = (2 * n_lay + 1) * d
    val, _, _ = integrate(f, 0.0, qmax, config, initial_panels=_initial_panels(span, qmax))
    return 2.0 * val


def layer_integral_interfaces(n_lay, d, rC, rho1, rho2):
    """Same integral as :func:`layer_integral`, summed over density steps.

    Writing the stacking-axis profile as a sum of steps of height
    ``Delta_b`` at positions ``z_b`` gives the closed form
    ``sqrt(pi)/rC * sum_{b,b'} Delta_b Delta_b' exp(-(z_b - z_b')^2 / (4 rC^2))``.
    """
    n = 2 * n_lay + 1
    rho = np.where(np.arange(n) % 2 == 0, rho1, rho2)
    padded = np.concatenate([[0.0], rho, [0.0]])
    jumps = np.diff(padded)
    z = (np.arange(n + 1) - 0.5 * n) * d
    dz = z[:, None] - z[None, :]
    return float(np.sqrt(np.pi) / rC * jumps @ np.exp(-dz * dz / (4.0 * rC * rC)) @ jumps)


def csl_psd_multilayer(stack: MultilayerStack, params: CslParams,
                       config: QuadConfig = DEFAULT_QUAD_1D, constants=CONSTANTS):
    """Closed-form CSL PSD (N^2/Hz) of a stack moving along its stacking axis.

    ``16 hbar^2 lam rC^5 / (sqrt(pi) m0^2) * J(L1) J(L2) * I(N_lay, d)``.
    """
    if params.lam == 0:
        return 0.0
    rC = params.rC
    try:
        layer = layer_integral(stack.n_lay, stack.d, rC, stack.rho1, stack.rho2, config)
    except QuadratureError as exc:
        exc.rC = rC
        raise
    pref = 16.0 * constants.hbar ** 2 * params.lam * rC ** 5 / (np.sqrt(np.pi) * constants.m0 ** 2)
    return pref * transverse_factor(stack.L1, rC) * transverse_factor(stack.L2, rC) * layer


# --- scans ----------------------------------------------------------------

def csl_psd_scan(mass, rC_grid, config: QuadConfig | None = None, lam=1.0, workers=None,
                 method="quadrature"):
    """PSD at ``lam`` for each correlation length; returns ``[(rC, psd), ...]``.

    Grid points are evaluated on a thread pool; output order follows the grid.
    ``method="multilayer"`` uses the closed form (``mass`` must then be a
    :class:`MultilayerStack`).  ``config`` defaults to the 3D or 1D
    tolerances according to ``method``.
    """
    grid = np.asarray(rC_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("rC grid must be a non-empty 1D sequence")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("rC grid must be positive and strictly increasing")
    if config is None:
        config = DEFAULT_QUAD_1D if method == "multilayer" else DEFAULT_QUAD_3D
    if method == "quadrature":
        def one(rc):
            return csl_psd_quadrature(mass, CslParams(lam, rc), config)
    elif method == "multilayer":
        def one(rc):
            return csl_psd_multilayer(mass, CslParams(lam, rc), config)
    else:
        raise ValueError(f"unknown method {method!r}")
    n = workers or max_workers()
    if n == 1 or grid.size == 1:
        values = [one(rc) for rc in grid]
    else:
        with ThreadPoolExecutor(max_workers=min(n, grid.size)) as pool:
            values = list(pool.map(one, grid))
    return [(float(rc), float(v)) for rc, v in zip(grid, values)]


csl_psd_derivative_scan = csl_psd_scan
