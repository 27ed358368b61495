"""
Levenberg-Marquardt least squares with covariance estimation.

Each iteration first tries the undamped Gauss-Newton step and keeps it if
the cost drops as predicted; otherwise Marquardt damping
``(J^T J + lam diag(J^T J)) dx = -J^T r`` is increased until the cost
decreases. Jacobian columns that vanish identically (unidentifiable
parameters at the current point) are frozen for that iteration.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    ``chi_rms`` is sqrt(sum r^2 / (m - n)) of the weighted residuals.
    ``covariance`` is ``None`` unless the fit converged.
    """

    params: np.ndarray
    names: tuple
    units: tuple
    chi_rms: float
    covariance: np.ndarray
    converged: bool
    iterations: int
    cost: float
    residuals: np.ndarray
    message: str = ""
    nfev: int = 0
    rank_deficient: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def stderr(self):
        if self.covariance is None:
            return np.full(len(self.params), np.nan)
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def value(self, name):
        return float(self.params[self.names.index(name)])

    def error(self, name):
        return float(self.stderr[self.names.index(name)])

    def as_dict(self):
        return {
            "names": list(self.names),
            "units": list(self.units),
            "params": [float(p) for p in self.params],
            "stderr": [float(s) for s in self.stderr],
            "covariance": None
            if self.covariance is None
            else [[float(c) for c in row] for row in self.covariance],
            "chi_rms": float(self.chi_rms),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "nfev": int(self.nfev),
            "message": self.message,
        }


def numeric_jacobian(fun, x, step=1e-6, f0=None):
    """Central-difference Jacobian with relative step ``step``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        h = step * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        cols.append((np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * h))
    return np.column_stack(cols)


def covariance_from_jacobian(jac, residuals):
    """s^2 (J^T J)^+ with s^2 the residual variance per degree of freedom."""
    m, n = jac.shape
    dof = m - n
    s2 = float(residuals @ residuals) / dof if dof > 0 else np.nan
    cov = s2 * np.linalg.pinv(jac.T @ jac)
    return 0.5 * (cov + cov.T)


def lm_minimize(
    fun,
    x0,
    jac=None,
    names=None,
    units=None,
    max_iter=500,
    xtol=1e-10,
    ftol=1e-12,
    lambda0=1e-3,
    fd_step=1e-6,
):
    """Minimise ``0.5 * |fun(x)|^2`` by Levenberg-Marquardt.

    Converged when the relative step falls below ``xtol`` or the relative
    cost decrease stays below ``ftol`` for three consecutive iterations.

    Parameters
    ----------
    fun : callable
        Weighted residual vector as a function of the parameters.
    jac : callable, optional
        Analytic Jacobian; central differences are used otherwise.

    Returns
    -------
    FitResult
    """
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("initial parameters must be finite")
    n = x.size
    names = tuple(names) if names is not None else tuple(f"p{k}" for k in range(n))
    units = tuple(units) if units is not None else ("",) * n
    nfev = 0

    def evaluate(p):
        nonlocal nfev
        nfev += 1
        return np.asarray(fun(p), dtype=float)

    def jacobian(p, r):
        if jac is not None:
            return np.asarray(jac(p), dtype=float)
        return numeric_jacobian(evaluate, p, fd_step)

    r = evaluate(x)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are not finite at the initial parameters")
    cost = 0.5 * float(r @ r)
    lam = None
    small_decrease = 0
    converged, message = False, "maximum iterations reached"
    rank_deficient = False
    it = 0

    while it < max_iter:
        it += 1
        if cost == 0.0:
            converged, message = True, "zero residual"
            break
        J = jacobian(x, r)
        norms = np.linalg.norm(J, axis=0)
        active = norms > 1e-14 * max(norms.max(), 1e-300)
        Ja = J[:, active]
        g = Ja.T @ r
        A = Ja.T @ Ja
        diag = np.maximum(np.diag(A), 1e-12 * max(np.diag(A).max(), 1e-300))
        if lam is None:
            lam = lambda0
        rank_deficient = np.linalg.matrix_rank(Ja) < Ja.shape[1] or not active.all()

        accepted = False
        # Gauss-Newton trial (minimum-norm for rank-deficient J)
        step = np.linalg.lstsq(Ja, -r, rcond=None)[0]
        if np.linalg.norm(step) < xtol * (np.linalg.norm(x) + xtol):
            converged, message = True, "relative step below xtol"
            break
        trials = [(step, True)]
        for _ in range(40):
            if not trials:
                try:
                    step = np.linalg.solve(A + lam * np.diag(diag), -g)
                except np.linalg.LinAlgError:
                    lam *= 10.0
                    continue
                trials.append((step, False))
            step, is_gn = trials.pop()
            dx = np.zeros(n)
            dx[active] = step
            x_new = x + dx
            r_new = evaluate(x_new)
            if not np.all(np.isfinite(r_new)):
                lam *= 10.0
                continue
            cost_new = 0.5 * float(r_new @ r_new)
            predicted = -(g @ step) - 0.5 * step @ A @ step
            actual = cost - cost_new
            rho = actual / predicted if predicted > 0 else (1.0 if actual >= 0 else -1.0)
            if is_gn:
                if actual >= 0 and rho > 0.75:
                    lam = max(lam / 10.0, 1e-15)
                    accepted = True
                    break
                continue
            if actual >= 0:
                lam = max(lam / 3.0, 1e-15)
                accepted = True
                break
            lam *= 10.0

        if not accepted:
            # no descent direction left at working precision
            converged = bool(np.max(np.abs(g)) <= 1e-8 * (1.0 + cost))
            message = "no further decrease" if converged else "damping exhausted"
            break

        rel_step = np.linalg.norm(dx) / (np.linalg.norm(x) + xtol)
        rel_dec = (cost - cost_new) / cost if cost > 0 else 0.0
        x, r, cost = x_new, r_new, cost_new
        if rel_step < xtol:
            converged, message = True, "relative step below xtol"
            break
        small_decrease = small_decrease + 1 if rel_dec < ftol else 0
        if small_decrease >= 3:
            converged, message = True, "relative cost decrease below ftol"
            break

    J = jacobian(x, r)
    m = r.size
    dof = m - n
    chi_rms = float(np.sqrt(2 * cost / dof)) if dof > 0 else float("nan")
    cov = covariance_from_jacobian(J, r) if converged else None
    if rank_deficient and converged:
        message += " (rank-deficient Jacobian)"
    return FitResult(
        params=x,
        names=names,
        units=units,
        chi_rms=chi_rms,
        covariance=cov,
        converged=converged,
        iterations=it,
        cost=cost,
        residuals=r,
        message=message,
        nfev=nfev,
        rank_deficient=bool(rank_deficient),
    )
