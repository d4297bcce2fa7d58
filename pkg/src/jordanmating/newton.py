"""Damped Newton iteration for small holomorphic systems.

The residual maps a complex parameter vector to a complex residual vector
of the same length.  Residuals arising here (orbit relations in map
coefficients) are holomorphic, so the complex central-difference Jacobian
is the honest derivative and quadratic convergence applies.
"""

from __future__ import annotations

import numpy as np

from .errors import NonConvergence, SingularJacobian

__all__ = ["newton_solve", "NewtonReport"]

_DEFAULT_FD_STEP = 1e-7
_MAX_HALVINGS = 25


class NewtonReport:
    """Trace of a solve: iterate count, final residual norm, damping events."""

    def __init__(self):
        self.iterations = 0
        self.residual_norm = np.inf
        self.halvings = 0

    def __repr__(self):
        return (
            f"NewtonReport(iterations={self.iterations}, "
            f"residual_norm={self.residual_norm:.3e}, halvings={self.halvings})"
        )


def _jacobian(residual, x, fx, step):
    n = len(x)
    jac = np.empty((len(fx), n), dtype=complex)
    for k in range(n):
        h = step * max(1.0, abs(x[k]))
        e = np.zeros(n, dtype=complex)
        e[k] = h
        jac[:, k] = (residual(x + e) - residual(x - e)) / (2 * h)
    return jac


def newton_solve(residual, seed, tol=1e-12, max_iter=50, fd_step=_DEFAULT_FD_STEP,
                 report=None):
    """Solve residual(x) = 0 by damped Newton from the given seed.

    Steps are halved while the full update would increase the residual
    norm.  Accepts scalar or vector seeds; returns the same shape.

    Raises
    ------
    NonConvergence
        if no iterate reaches ``||residual||_inf < tol`` within max_iter;
        the exception carries the best iterate and its residual norm.
    SingularJacobian
        if the finite-difference Jacobian cannot be solved.
    """
    scalar = np.isscalar(seed) or isinstance(seed, complex)
    x = np.atleast_1d(np.asarray(seed, dtype=complex)).copy()

    def res_vec(v):
        out = residual(v[0] if scalar else v)
        return np.atleast_1d(np.asarray(out, dtype=complex))

    if report is None:
        report = NewtonReport()
    fx = res_vec(x)
    best_x, best_norm = x.copy(), float(np.max(np.abs(fx)))
    for it in range(max_iter):
        norm = float(np.max(np.abs(fx)))
        if norm < best_norm:
            best_x, best_norm = x.copy(), norm
        if norm < tol:
            report.iterations = it
            report.residual_norm = norm
            return x[0] if scalar else x
        jac = _jacobian(res_vec, x, fx, fd_step)
        if not np.all(np.isfinite(jac)):
            raise SingularJacobian(f"non-finite Jacobian at iterate {it}")
        try:
            step = np.linalg.solve(jac, fx)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"singular Jacobian at iterate {it}: {exc}") from exc
        lam = 1.0
        for _ in range(_MAX_HALVINGS):
            trial = x - lam * step
            ft = res_vec(trial)
            if np.all(np.isfinite(ft)) and float(np.max(np.abs(ft))) < norm:
                x, fx = trial, ft
                break
            lam *= 0.5
            report.halvings += 1
        else:
            # no damping factor improved the residual: stuck
            break
    norm = float(np.max(np.abs(fx)))
    if norm < best_norm:
        best_x, best_norm = x.copy(), norm
    if best_norm < tol:
        report.iterations = max_iter
        report.residual_norm = best_norm
        return best_x[0] if scalar else best_x
    raise NonConvergence(
        f"Newton stalled at ||r|| = {best_norm:.3e} (tol {tol:.1e})",
        best=best_x[0] if scalar else best_x,
        residual=best_norm,
        iterations=max_iter,
    )
