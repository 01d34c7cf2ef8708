"""DC optimal power flow: QP assembly and the feasibility/cost label oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .netcase import DcModel
from .qp import QpNumericalError, QpProblem, _solve_interior, check_feasible

__all__ = ["OpfOutcome", "OpfSolveError", "assemble_dcopf", "solve_opf"]


class OpfSolveError(ArithmeticError):
    """Numerical failure while solving the OPF for a specific load vector."""

    def __init__(self, message: str, load: np.ndarray):
        self.load = np.asarray(load, dtype=float)
        self.message = message
        super().__init__(f"{message} (load={self.load.tolist()})")


@dataclass(frozen=True)
class OpfOutcome:
    feasible: bool
    cost: float | None
    dispatch: np.ndarray | None
    solve_time: float


def assemble_dcopf(model: DcModel, load) -> QpProblem:
    """Build the DC-OPF QP over generator outputs for one load vector.

    Constraint rows of ``C`` are the branch flows ``F (Gamma p - l)`` followed
    by the generator outputs themselves.
    """
    load = np.asarray(load, dtype=float)
    if load.shape != (model.n_b,):
        raise ValueError(f"load must have length {model.n_b}, got shape {load.shape}")
    if not np.all(np.isfinite(load)) or np.any(load < 0):
        raise ValueError("load entries must be finite and >= 0")

    n_gen = model.n_gen
    flow_from_gen = model.injection_shift_matrix @ model.gen_incidence
    flow_from_load = model.injection_shift_matrix @ load
    C = np.vstack([flow_from_gen, np.eye(n_gen)])
    lower = np.concatenate([flow_from_load - model.flow_limit, model.p_min])
    upper = np.concatenate([flow_from_load + model.flow_limit, model.p_max])
    return QpProblem(
        G=np.diag(2.0 * model.cost_quadratic),
        a=model.cost_linear.copy(),
        A_eq=np.ones((1, n_gen)),
        b_eq=np.array([load.sum()]),
        C=C,
        lower=lower,
        upper=upper,
        constant=float(model.cost_constant.sum()),
    )


def solve_opf(model: DcModel, load) -> OpfOutcome:
    """Label one load vector: feasibility via phase-1, then the optimal cost."""
    start = time.perf_counter()
    problem = assemble_dcopf(model, load)
    try:
        if not check_feasible(problem):
            return OpfOutcome(False, None, None, time.perf_counter() - start)
        sol = _solve_interior(problem)
    except QpNumericalError as exc:
        raise OpfSolveError(str(exc), load) from exc
    if sol.status != "optimal":
        raise OpfSolveError(f"interior point stopped with status {sol.status}", load)
    dispatch = np.clip(sol.x_star, model.p_min, model.p_max)
    return OpfOutcome(True, sol.objective, dispatch, time.perf_counter() - start)
