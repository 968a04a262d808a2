"""Convex quadratic program with two-sided linear fairness constraints.

Solves   minimize_beta  (1/2) beta' Q beta - c' beta
         subject to     |a_j' beta| <= delta_j,   j = 1..m,

by an over-relaxed operator-splitting (ADMM) iteration on the equivalent
box form  -delta <= A beta <= delta. The splitting solves one quasi-definite
KKT system per iteration whose factorization is cached across iterations and
refreshed only when the penalty parameter is rescaled. Once the iterates are
moderately accurate, the active faces are identified and the corresponding
equality-constrained KKT system is solved directly ("polish"), which brings
the residuals down to machine precision; if the identification is wrong the
iteration simply continues.

Dual convention: one signed multiplier y_j per constraint, split into face
multipliers lambda_plus = max(y, 0) (upper face a_j' beta = delta_j) and
lambda_minus = max(-y, 0) (lower face). Since beta = 0 is always feasible
(delta_j >= 0), the problem is never infeasible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ParameterError, QPNonconvergenceError, SingularMatrixError


@dataclass(frozen=True)
class LinearConstraint:
    """One two-sided constraint |a' beta| <= delta (delta may be inf)."""

    a: np.ndarray
    delta: float

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 1 or not np.all(np.isfinite(a)):
            raise ParameterError("constraint vector must be a finite 1-D array")
        if np.isnan(self.delta) or self.delta < 0:
            raise ParameterError(f"constraint tolerance must be >= 0, got {self.delta}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "delta", float(self.delta))


@dataclass(frozen=True)
class QPProblem:
    Q: np.ndarray
    c: np.ndarray
    constraints: tuple[LinearConstraint, ...] = ()

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ParameterError("Q must be square")
        if c.shape != (Q.shape[0],):
            raise ParameterError("c must match the dimension of Q")
        scale = max(1.0, float(np.abs(Q).max(initial=0.0)))
        if np.abs(Q - Q.T).max(initial=0.0) > 1e-12 * scale:
            raise ParameterError("Q must be symmetric")
        for con in self.constraints:
            if con.a.shape != c.shape:
                raise ParameterError("constraint vectors must match the dimension of Q")
        object.__setattr__(self, "Q", (Q + Q.T) / 2.0)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def k(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class QPSettings:
    max_iter: int = 20000
    feas_tol: float = 1e-8
    stat_tol: float = 1e-8
    cs_tol: float = 1e-8
    ridge_jitter: float | None = None   # None: 1e-10 * trace(Q) / k
    rho: float = 1.0
    sigma: float = 1e-6
    over_relaxation: float = 1.6
    check_every: int = 25
    active_tol: float = 1e-7


@dataclass(frozen=True)
class QPSolution:
    """Optimal point with per-face dual multipliers and KKT diagnostics.

    ``duals`` has one (lambda_minus, lambda_plus) row per constraint in the
    original problem ordering; ``lambda_total`` is their sum, the single
    multiplier of the two-sided constraint (at most one face is active when
    delta > 0). Residuals are measured against the original Q.
    """

    beta: np.ndarray
    duals: np.ndarray               # (m, 2): [lower face, upper face]
    active_set: tuple[int, ...]
    iterations: int
    primal_residual: float
    dual_residual: float
    cs_residual: float
    objective: float
    notes: tuple[str, ...] = ()

    @property
    def lambda_total(self) -> np.ndarray:
        return self.duals.sum(axis=1)


def _repair_gram(Q: np.ndarray, settings: QPSettings) -> tuple[np.ndarray, list[str]]:
    k = Q.shape[0]
    jitter = settings.ridge_jitter
    if jitter is None:
        jitter = 1e-10 * max(np.trace(Q) / k, 1.0)
    min_eig = float(np.linalg.eigvalsh(Q)[0])
    if min_eig < jitter:
        warnings.warn(f"Gram matrix min eigenvalue {min_eig:.3e} below jitter "
                      f"threshold; adding ridge {jitter:.3e}", stacklevel=3)
        return Q + jitter * np.eye(k), [f"ridge jitter {jitter:.3e} added "
                                        f"(min eigenvalue {min_eig:.3e})"]
    return Q, []


def solve_unconstrained(Q: np.ndarray, c: np.ndarray,
                        settings: QPSettings | None = None) -> np.ndarray:
    """Minimizer Q^-1 c via a symmetric (Cholesky) factorization, with the
    same automatic ridge repair as the constrained solver."""
    settings = settings or QPSettings()
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    Qj, _ = _repair_gram((Q + Q.T) / 2.0, settings)
    try:
        factor = scipy.linalg.cho_factor(Qj)
    except np.linalg.LinAlgError as err:
        raise SingularMatrixError(f"Gram matrix singular after jitter: {err}") from None
    return scipy.linalg.cho_solve(factor, c)


def _assemble(problem: QPProblem, beta: np.ndarray, y_full: np.ndarray,
              iterations: int, notes: list[str], settings: QPSettings) -> QPSolution:
    m = len(problem.constraints)
    duals = np.zeros((m, 2))
    duals[:, 0] = np.maximum(-y_full, 0.0)
    duals[:, 1] = np.maximum(y_full, 0.0)
    margins = np.array([con.a @ beta for con in problem.constraints])
    deltas = np.array([con.delta for con in problem.constraints])
    finite = np.isfinite(deltas)

    primal = float(np.maximum(np.abs(margins) - deltas, 0.0).max(initial=0.0))
    grad = problem.Q @ beta - problem.c
    for j, con in enumerate(problem.constraints):
        grad = grad + y_full[j] * con.a
    dual = float(np.abs(grad).max(initial=0.0))
    cs = 0.0
    if m:
        cs_upper = duals[finite, 1] * (deltas[finite] - margins[finite])
        cs_lower = duals[finite, 0] * (deltas[finite] + margins[finite])
        cs = float(max(np.abs(cs_upper).max(initial=0.0),
                       np.abs(cs_lower).max(initial=0.0)))
    active = tuple(
        j for j in range(m)
        if finite[j] and abs(margins[j]) >= deltas[j] - settings.active_tol * (1 + deltas[j]))
    if active:
        rows = np.array([problem.constraints[j].a for j in active])
        if np.linalg.matrix_rank(rows) < len(active):
            notes = notes + ["degenerate active set: active constraint matrix "
                             "is rank-deficient"]
    objective = float(0.5 * beta @ problem.Q @ beta - problem.c @ beta)
    return QPSolution(beta=beta, duals=duals, active_set=active,
                      iterations=iterations, primal_residual=primal,
                      dual_residual=dual, cs_residual=cs, objective=objective,
                      notes=tuple(notes))


def _try_polish(Qj: np.ndarray, c: np.ndarray, A: np.ndarray, delta: np.ndarray,
                z: np.ndarray, y: np.ndarray, settings: QPSettings
                ) -> tuple[np.ndarray, np.ndarray] | None:
    """Solve the equality KKT system on the candidate active faces.

    Returns (beta, y_eff) when the polished point satisfies the KKT
    conditions at the requested tolerances, else None.
    """
    k = Qj.shape[0]
    m = A.shape[0]
    act_tol = settings.active_tol * (1.0 + delta)
    y_tol = 1e-9 * (1.0 + np.abs(y).max(initial=0.0))
    upper = (delta - z <= act_tol) | (y > y_tol)
    lower = (z + delta <= act_tol) | (y < -y_tol)
    equality = delta == 0.0
    upper |= equality
    lower &= ~equality

    idx = np.flatnonzero(upper | lower)
    signs = np.where(equality, 0.0, np.where(upper, 1.0, -1.0))[idx]
    n_act = idx.size
    if n_act == 0:
        try:
            beta = scipy.linalg.cho_solve(scipy.linalg.cho_factor(Qj), c)
        except np.linalg.LinAlgError:
            return None
        y_eff = np.zeros(m)
    else:
        G = A[idx]
        rhs_eq = np.where(equality[idx], 0.0, signs * delta[idx])
        M = np.zeros((k + n_act, k + n_act))
        M[:k, :k] = Qj
        M[:k, k:] = G.T
        M[k:, :k] = G
        rhs = np.concatenate([c, rhs_eq])
        try:
            sol = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        beta = sol[:k]
        nu = sol[k:]
        sign_ok = np.where(equality[idx], True, nu * signs >= -1e-8 * (1 + np.abs(nu)))
        if not sign_ok.all():
            return None
        y_eff = np.zeros(m)
        y_eff[idx] = nu

    margins = A @ beta
    if np.any(np.abs(margins) > delta + settings.feas_tol):
        return None
    grad = Qj @ beta - c + A.T @ y_eff
    if np.abs(grad).max(initial=0.0) > settings.stat_tol:
        return None
    return beta, y_eff


def solve(problem: QPProblem, settings: QPSettings | None = None,
          warm_start: QPSolution | None = None) -> QPSolution:
    """Solve the fairness-constrained QP to the configured KKT tolerances.

    Deterministic for fixed inputs and settings. Constraints with infinite
    tolerance are inert (zero duals). Raises QPNonconvergenceError with the
    final residuals when the iteration budget is exhausted.
    """
    settings = settings or QPSettings()
    Qj, notes = _repair_gram(problem.Q, settings)
    k = problem.k
    deltas_all = np.array([con.delta for con in problem.constraints])
    finite_idx = np.flatnonzero(np.isfinite(deltas_all)) if len(deltas_all) else np.array([], int)

    if finite_idx.size == 0:
        try:
            factor = scipy.linalg.cho_factor(Qj)
        except np.linalg.LinAlgError as err:
            raise SingularMatrixError(f"Gram matrix singular after jitter: {err}") from None
        beta = scipy.linalg.cho_solve(factor, problem.c)
        return _assemble(problem, beta, np.zeros(len(deltas_all)), 0,
                         notes + ["solved unconstrained (no finite constraints)"],
                         settings)

    A = np.array([problem.constraints[j].a for j in finite_idx])
    delta = deltas_all[finite_idx]
    m = A.shape[0]
    c = problem.c
    sigma = settings.sigma
    alpha = settings.over_relaxation
    # stiffer penalty on equality (delta = 0) rows speeds up identification
    rho_scale = np.where(delta == 0.0, 1e3, 1.0)
    rho_base = settings.rho

    def factorize(rho_vec):
        M = np.zeros((k + m, k + m))
        M[:k, :k] = Qj + sigma * np.eye(k)
        M[:k, k:] = A.T
        M[k:, :k] = A
        M[k:, k:] = -np.diag(1.0 / rho_vec)
        return scipy.linalg.lu_factor(M)

    rho = rho_base * rho_scale
    factors = factorize(rho)

    if warm_start is not None and warm_start.beta.shape == (k,):
        x = warm_start.beta.copy()
        y_warm = warm_start.duals[:, 1] - warm_start.duals[:, 0]
        y = y_warm[finite_idx] if y_warm.shape[0] == len(deltas_all) else np.zeros(m)
    else:
        x = np.zeros(k)
        y = np.zeros(m)
    z = np.clip(A @ x, -delta, delta)

    scale = max(1.0, float(np.abs(c).max(initial=0.0)))
    polish_trigger = 1e-3 * scale
    rhs = np.empty(k + m)

    for it in range(1, settings.max_iter + 1):
        rhs[:k] = sigma * x + c
        rhs[k:] = z - y / rho
        sol = scipy.linalg.lu_solve(factors, rhs)
        x_t = sol[:k]
        nu = sol[k:]
        z_t = z + (nu - y) / rho
        x = alpha * x_t + (1.0 - alpha) * x
        z_hat = alpha * z_t + (1.0 - alpha) * z
        z_new = np.clip(z_hat + y / rho, -delta, delta)
        y = y + rho * (z_hat - z_new)
        z = z_new

        if it % settings.check_every == 0 or it == settings.max_iter:
            margins = A @ x
            r_prim = float(np.abs(margins - z).max(initial=0.0))
            r_dual = float(np.abs(Qj @ x - c + A.T @ y).max(initial=0.0))
            if max(r_prim, r_dual) <= polish_trigger:
                polished = _try_polish(Qj, c, A, delta, z, y, settings)
                if polished is not None:
                    beta, y_eff = polished
                    y_full = np.zeros(len(deltas_all))
                    y_full[finite_idx] = y_eff
                    return _assemble(problem, beta, y_full, it,
                                     notes + ["polished on identified active set"],
                                     settings)
            if r_prim <= settings.feas_tol and r_dual <= settings.stat_tol:
                y_full = np.zeros(len(deltas_all))
                y_full[finite_idx] = y
                return _assemble(problem, x, y_full, it, notes, settings)
            if it % (settings.check_every * 8) == 0 and r_dual > 0:
                ratio = np.sqrt(r_prim / max(r_dual, 1e-16))
                new_base = float(np.clip(rho_base * ratio, 1e-6, 1e6))
                if new_base > 5 * rho_base or new_base < rho_base / 5:
                    rho_base = new_base
                    rho = rho_base * rho_scale
                    factors = factorize(rho)

    margins = A @ x
    r_prim = float(np.abs(margins - z).max(initial=0.0))
    r_dual = float(np.abs(Qj @ x - c + A.T @ y).max(initial=0.0))
    raise QPNonconvergenceError(
        f"QP did not converge in {settings.max_iter} iterations "
        f"(primal {r_prim:.3e}, dual {r_dual:.3e})",
        iterations=settings.max_iter, primal_residual=r_prim, dual_residual=r_dual)
