"""Small damped Gauss-Newton (Levenberg-Marquardt) solver."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LsqResult:
    x: np.ndarray
    cost: float
    residuals: np.ndarray
    jac: np.ndarray
    iterations: int
    converged: bool


def levenberg_marquardt(resid, jac, x0, xtol=1e-12, ftol=1e-15, max_iter=500, lam0=1e-3):
    """Minimize ``sum(resid(x)**2)``.

    Steps solve the damped normal equations ``(J^T J + lam D) dx = -J^T r``
    with Marquardt's diagonal scaling ``D = diag(J^T J)``, through a QR-based
    least-squares solve of the augmented system.  Convergence when every
    component of the accepted step is below ``xtol * (|x| + xtol)`` or the
    relative cost decrease is below ``ftol``.
    """
    x = np.array(x0, dtype=float)
    r = resid(x)
    cost = float(r @ r)
    lam = lam0
    J = jac(x)
    for it in range(1, max_iter + 1):
        d = np.sum(J * J, axis=0)
        d = np.maximum(d, 1e-30 * max(d.max(), 1e-300))
        accepted = False
        while lam < 1e20:
            aug = np.vstack([J, np.diag(np.sqrt(lam * d))])
            rhs = np.concatenate([-r, np.zeros(x.size)])
            dx = np.linalg.lstsq(aug, rhs, rcond=None)[0]
            x_new = x + dx
            r_new = resid(x_new)
            cost_new = float(r_new @ r_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                accepted = True
                break
            lam *= 4.0
        if not accepted:
            # no descent direction left: stationary to working precision
            return LsqResult(x, cost, r, J, it, True)
        small_step = np.all(np.abs(dx) <= xtol * (np.abs(x) + xtol))
        small_drop = cost - cost_new <= ftol * cost
        x, r, cost = x_new, r_new, cost_new
        J = jac(x)
        lam = max(lam / 3.0, 1e-15)
        if small_step or small_drop or cost == 0.0:
            return LsqResult(x, cost, r, J, it, True)
    return LsqResult(x, cost, r, J, max_iter, False)


def covariance_from_jacobian(J, rcond=1e-13):
    """``(J^T J)^-1`` with column equilibration; ``None`` if singular."""
    scale = np.sqrt(np.sum(J * J, axis=0))
    if np.any(scale == 0) or not np.all(np.isfinite(scale)):
        return None
    Js = J / scale
    s = np.linalg.svd(Js, compute_uv=False)
    if s[-1] <= rcond * s[0]:
        return None
    cov = np.linalg.inv(Js.T @ Js) / np.outer(scale, scale)
    return 0.5 * (cov + cov.T)
