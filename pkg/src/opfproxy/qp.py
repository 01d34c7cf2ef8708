"""Primal-dual interior-point solver for convex quadratic programs.

Problem form::

    minimize    0.5 x'Gx + a'x + constant
    subject to  A_eq x = b_eq
                lower <= C x <= upper      (entries may be +-inf)

Two-sided rows are split into one-sided rows ``D x + s = e, s >= 0``; the
Newton system is reduced to the symmetric indefinite ``(x, y)`` block and
factorized with LAPACK ``sytrf``, reused for Mehrotra's predictor and
corrector solves.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

__all__ = [
    "QpNumericalError",
    "QpProblem",
    "QpSolution",
    "check_feasible",
    "kkt_residuals",
    "phase1_violation",
    "solve_qp",
]

SOLVE_TOL = 1e-8
FEASIBILITY_TOL = 1e-6
MAX_ITER = 100
REGULARIZATION = 1e-10
_STEP_TO_BOUNDARY = 0.995
_DIVERGENCE = 1e14


class QpNumericalError(ArithmeticError):
    """The interior-point iteration broke down (degenerate KKT system or no convergence)."""


@dataclass(frozen=True)
class QpProblem:
    G: np.ndarray
    a: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    C: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        n = len(self.a)
        G = np.atleast_2d(np.asarray(self.G, dtype=float))
        A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        C = np.asarray(self.C, dtype=float).reshape(-1, n)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "A_eq", A_eq)
        object.__setattr__(self, "b_eq", np.asarray(self.b_eq, dtype=float).reshape(-1))
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float).reshape(-1))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float).reshape(-1))
        if G.shape != (n, n):
            raise ValueError(f"G must be {n}x{n}, got {G.shape}")
        if len(self.b_eq) != A_eq.shape[0]:
            raise ValueError("A_eq and b_eq row counts differ")
        if not (len(self.lower) == len(self.upper) == C.shape[0]):
            raise ValueError("C, lower and upper row counts differ")
        if not np.allclose(G, G.T, rtol=0, atol=1e-12 * max(1.0, np.abs(G).max(initial=0))):
            raise ValueError("G must be symmetric")
        if np.any(self.lower > self.upper):
            bad = int(np.argmax(self.lower > self.upper))
            raise ValueError(f"row {bad}: lower bound exceeds upper bound")

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def n_equalities(self) -> int:
        return self.A_eq.shape[0]

    @property
    def n_inequalities(self) -> int:
        """Number of finite one-sided inequality constraints."""
        return int(np.isfinite(self.lower).sum() + np.isfinite(self.upper).sum())

    def objective(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.G @ x + self.a @ x + self.constant)

    def _one_sided(self):
        """Return ``(D, e, lower_rows, upper_rows)`` with ``D x <= e``."""
        up = np.flatnonzero(np.isfinite(self.upper))
        lo = np.flatnonzero(np.isfinite(self.lower))
        D = np.vstack([self.C[up], -self.C[lo]])
        e = np.concatenate([self.upper[up], -self.lower[lo]])
        return D, e, lo, up


@dataclass
class QpSolution:
    x_star: np.ndarray
    objective: float
    status: str  # "optimal" | "infeasible" | "max_iter"
    iterations: int
    duals: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass
class _IpmResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    iterations: int
    converged: bool


def _fraction_to_boundary(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _factor_kkt(K, H, A, reg, it):
    """Factor ``[[H + r I, A'], [A, -r I]]`` with LDL' (Bunch-Kaufman).

    ``r`` starts at the static regularization; on an exactly singular pivot it
    is raised relative to the largest diagonal entry of ``H``.
    """
    n, m = len(H), len(A)
    h_max = max(1.0, np.abs(np.diag(H)).max(initial=0.0))
    for r in (reg, 1e-12 * h_max, 1e-10 * h_max, 1e-8 * h_max):
        K[:n, :n] = H
        K[:n, :n].flat[:: n + 1] += r
        K[:n, n:] = A.T
        K[n:, :n] = A
        K[n:, n:] = 0.0
        K[n:, n:].flat[:: m + 1] = -r
        lu, piv, info = lapack.dsytrf(K, lower=0)
        if info == 0:
            return lu, piv
    raise QpNumericalError(f"KKT factorization failed (info={info}) at iteration {it}")


def _ipm(G, a, A, b, D, e, tol=SOLVE_TOL, max_iter=MAX_ITER) -> _IpmResult:
    """Mehrotra predictor-corrector on ``min .5x'Gx + a'x, Ax = b, Dx <= e``.

    Arguments must already be scaled; returned duals are in the same scale.
    """
    n, m, p = len(a), A.shape[0], D.shape[0]
    reg = REGULARIZATION
    sytrs = lapack.dsytrs

    # Starting point: regularized equality-constrained minimizer, slacks pushed inside.
    K0 = np.zeros((n + m, n + m))
    K0[:n, :n] = G + np.eye(n)
    K0[:n, n:] = A.T
    K0[n:, :n] = A
    K0[n:, n:] = -reg * np.eye(m)
    try:
        x = np.linalg.solve(K0, np.concatenate([-a, b]))[:n]
    except np.linalg.LinAlgError as exc:
        raise QpNumericalError("singular starting system") from exc
    y = np.zeros(m)
    s = e - D @ x
    s = np.maximum(s, 1.0)
    z = np.ones(p)

    scale_d = 1.0 + np.abs(a).max(initial=0.0)
    scale_e = 1.0 + np.abs(b).max(initial=0.0)
    scale_i = 1.0 + np.abs(e).max(initial=0.0)

    K = np.empty((n + m, n + m))
    for it in range(max_iter + 1):
        r_d = G @ x + a + A.T @ y + D.T @ z
        r_e = A @ x - b
        r_i = D @ x + s - e
        sz = s @ z
        mu = sz / p if p else 0.0
        obj = 0.5 * x @ G @ x + a @ x
        if (
            np.abs(r_d).max(initial=0.0) <= tol * scale_d
            and np.abs(r_e).max(initial=0.0) <= tol * scale_e
            and np.abs(r_i).max(initial=0.0) <= tol * scale_i
            and sz <= tol * (1.0 + abs(obj))
        ):
            return _IpmResult(x, y, z, s, it, True)
        if it == max_iter or mu > _DIVERGENCE or np.abs(x).max(initial=0.0) > _DIVERGENCE:
            break

        w = z / s
        H = G + D.T @ (w[:, None] * D)
        lu, piv = _factor_kkt(K, H, A, reg, it)

        def newton(r_sz):
            # Eliminates ds = -r_i - D dx and dz = (-r_sz - z*ds) / s.
            rhs_x = -r_d - D.T @ ((-r_sz + z * r_i) / s)
            sol, info = sytrs(lu, piv, np.concatenate([rhs_x, -r_e]), lower=0)
            if info != 0:
                raise QpNumericalError(f"KKT back-substitution failed (info={info})")
            dx, dy = sol[:n], sol[n:]
            ds = -r_i - D @ dx
            dz = (-r_sz - z * ds) / s
            return dx, dy, ds, dz

        # Predictor (affine scaling).
        dx, dy, ds, dz = newton(s * z)
        alpha_aff = min(_fraction_to_boundary(s, ds), _fraction_to_boundary(z, dz))
        mu_aff = (s + alpha_aff * ds) @ (z + alpha_aff * dz) / p if p else 0.0
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # Corrector.
        dx, dy, ds, dz = newton(s * z + ds * dz - sigma * mu)
        alpha = _STEP_TO_BOUNDARY * min(
            _fraction_to_boundary(s, ds), _fraction_to_boundary(z, dz)
        )
        alpha = min(alpha, 1.0)
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * ds
        z = z + alpha * dz
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(z))):
            raise QpNumericalError(f"non-finite iterate at iteration {it}")
    return _IpmResult(x, y, z, s, it, False)


def _objective_scale(problem: QpProblem) -> float:
    return max(1.0, np.abs(problem.G).max(initial=0.0), np.abs(problem.a).max(initial=0.0))


def _solve_interior(problem: QpProblem, tol: float = SOLVE_TOL, max_iter: int = MAX_ITER) -> QpSolution:
    D, e, lo, up = problem._one_sided()
    scale = _objective_scale(problem)
    res = _ipm(problem.G / scale, problem.a / scale, problem.A_eq, problem.b_eq, D, e, tol, max_iter)
    z = res.z * scale
    n_up = len(up)
    upper_duals = np.zeros(len(problem.upper))
    lower_duals = np.zeros(len(problem.lower))
    upper_duals[up] = z[:n_up]
    lower_duals[lo] = z[n_up:]
    return QpSolution(
        x_star=res.x,
        objective=problem.objective(res.x),
        status="optimal" if res.converged else "max_iter",
        iterations=res.iterations,
        duals={"equality": res.y * scale, "lower": lower_duals, "upper": upper_duals},
    )


def phase1_violation(problem: QpProblem) -> float:
    """Minimal total constraint violation of ``problem`` (0 iff feasible).

    Solves the linear program ``min 1't`` over ``(x, t_eq+, t_eq-, t_in)`` with
    ``A x + t_eq+ - t_eq- = b`` and ``D x - t_in <= e``, all ``t >= 0``.
    """
    D, e, _, _ = problem._one_sided()
    n, m, p = problem.n, problem.n_equalities, D.shape[0]
    n_t = 2 * m + p
    nv = n + n_t
    A1 = np.hstack([problem.A_eq, np.eye(m), -np.eye(m), np.zeros((m, p))])
    D1 = np.vstack(
        [
            np.hstack([D, np.zeros((p, 2 * m)), -np.eye(p)]),
            np.hstack([np.zeros((n_t, n)), -np.eye(n_t)]),
        ]
    )
    e1 = np.concatenate([e, np.zeros(n_t)])
    c = np.concatenate([np.zeros(n), np.ones(n_t)])
    res = _ipm(np.zeros((nv, nv)), c, A1, problem.b_eq, D1, e1)
    if not res.converged:
        raise QpNumericalError(f"phase-1 program did not converge in {res.iterations} iterations")
    return float(np.maximum(res.x[n:], 0.0).sum())


def check_feasible(problem: QpProblem, tol: float = FEASIBILITY_TOL) -> bool:
    """True iff the minimal total constraint violation is at most ``tol``."""
    return phase1_violation(problem) <= tol


def solve_qp(problem: QpProblem, tol: float = SOLVE_TOL, max_iter: int = MAX_ITER) -> QpSolution:
    """Solve ``problem``; ``status`` is ``optimal``, ``infeasible`` or ``max_iter``.

    When the interior-point iteration fails to converge, the phase-1 program
    decides between an empty feasible set and plain numerical trouble.
    """
    try:
        sol = _solve_interior(problem, tol, max_iter)
    except QpNumericalError:
        if not check_feasible(problem):
            return _infeasible(problem)
        raise
    if sol.status != "optimal" and not check_feasible(problem):
        return _infeasible(problem, sol.iterations)
    return sol


def _infeasible(problem: QpProblem, iterations: int = 0) -> QpSolution:
    return QpSolution(
        x_star=np.full(problem.n, np.nan), objective=float("nan"), status="infeasible", iterations=iterations
    )


def kkt_residuals(problem: QpProblem, solution: QpSolution) -> dict[str, float]:
    """Scaled KKT residuals of a solution.

    Stationarity and complementarity are divided by ``max(1, |G|, |a|)`` so
    that they are comparable across cost units; primal residuals are in the
    units of the constraints.
    """
    x = solution.x_star
    y = solution.duals["equality"]
    z_lo = solution.duals["lower"]
    z_up = solution.duals["upper"]
    scale = _objective_scale(problem)
    grad = problem.G @ x + problem.a + problem.A_eq.T @ y + problem.C.T @ (z_up - z_lo)
    cx = problem.C @ x
    with np.errstate(invalid="ignore"):
        comp_up = np.where(np.isfinite(problem.upper), z_up * (problem.upper - cx), 0.0)
        comp_lo = np.where(np.isfinite(problem.lower), z_lo * (cx - problem.lower), 0.0)
    viol = np.concatenate(
        [
            np.abs(problem.A_eq @ x - problem.b_eq),
            np.maximum(cx - problem.upper, 0.0),
            np.maximum(problem.lower - cx, 0.0),
        ]
    )
    return {
        "stationarity": float(np.abs(grad).max(initial=0.0) / scale),
        "complementarity": float(np.abs(np.concatenate([comp_up, comp_lo])).max(initial=0.0) / scale),
        "primal": float(viol.max(initial=0.0)),
        "dual_sign": float(-min(z_lo.min(initial=0.0), z_up.min(initial=0.0)) / scale),
    }
