"""Pure numpy implementations of the hot kernels.

Every function here has a twin with an identical signature in the compiled
``_ckernels`` module.  Results agree to rounding.
"""

import numpy as np
from scipy.special import ndtr

_CHUNK = 1 << 15


def profile_transform(q, centers, halfwidths, weights, times_q=False):
    """Fourier transform of a 1D piecewise-constant profile.

    The profile is a sum of top-hat segments ``w * 1[|x - c| <= h]``.  Returns
    real and imaginary parts of ``sum_s w_s * 2 sin(q h_s) / q * exp(-i q c_s)``.
    With ``times_q`` the transform is multiplied by ``q``, which removes the
    ``1/q`` and keeps the function regular for the motion-axis factor.
    """
    q = np.ascontiguousarray(q, dtype=float)
    c = np.asarray(centers, dtype=float)
    h = np.asarray(halfwidths, dtype=float)
    w = np.asarray(weights, dtype=float)
    re = np.empty_like(q)
    im = np.empty_like(q)
    for start in range(0, q.size, _CHUNK):
        qs = q[start:start + _CHUNK, None]
        x = qs * h
        if times_q:
            amp = 2.0 * w * np.sin(x)
        else:
            small = np.abs(x) < 1e-6
            x2 = x * x
            sinc = np.where(small, 1.0 - x2 / 6.0 + x2 * x2 / 120.0,
                            np.sin(x) / np.where(small, 1.0, x))
            amp = 2.0 * h * w * sinc
        ph = qs * c
        re[start:start + _CHUNK] = np.sum(amp * np.cos(ph), axis=1)
        im[start:start + _CHUNK] = -np.sum(amp * np.sin(ph), axis=1)
    return re, im


def multilayer_bracket_sq(u, n_lay, rho1, rho2):
    """Regularized ``sec^2(u/2) [rho1 sin((N+1)u) + rho2 sin(N u)]^2``.

    Uses ``sin(2 M v) / cos(v) = 2 sum_{k=1}^{M} (-1)^(M-k) sin((2k-1) v)``
    with ``v = u / 2`` so the poles of the secant never appear.
    """
    u = np.ascontiguousarray(u, dtype=float)
    out = np.empty_like(u)
    m1 = n_lay + 1
    k = np.arange(1, m1 + 1)
    odd = 2 * k - 1
    s1 = np.where((m1 - k) % 2 == 0, 1.0, -1.0)
    # the rho2 series has M = n_lay terms; same odd harmonics, opposite parity
    s2 = np.where((n_lay - k) % 2 == 0, 1.0, -1.0)
    s2[-1] = 0.0
    coef = 2.0 * (rho1 * s1 + rho2 * s2)
    for start in range(0, u.size, _CHUNK):
        v = 0.5 * u[start:start + _CHUNK, None]
        g = np.sin(odd * v) @ coef
        out[start:start + _CHUNK] = g * g
    return out


def _fc_coverage(t, mu):
    x1 = np.where(t <= mu, mu - t, 0.5 * (mu * mu - t * t) / np.where(mu > 0, mu, 1.0))
    x1 = np.where(mu > 0, x1, -np.inf)
    return ndtr(t) - ndtr(x1 - mu), x1


def fc_acceptance(mu, cl, tol=1e-12):
    """Likelihood-ratio ordered acceptance intervals for a unit Gaussian.

    For each true mean ``mu >= 0`` returns ``(x_lo, x_hi)`` such that the
    interval holds probability ``cl`` and its end points have equal
    likelihood ratio against the best physically allowed mean ``max(x, 0)``.
    """
    mu = np.asarray(mu, dtype=float)
    lo = np.zeros_like(mu)
    hi = np.full_like(mu, 40.0)
    while np.max(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        cov, _ = _fc_coverage(mid, mu)
        below = cov < cl
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    t = 0.5 * (lo + hi)
    _, x1 = _fc_coverage(t, mu)
    return x1, mu + t
