"""Thin conic-programming layer: LPs over the nonnegative orthant and small
dense SDPs, with explicit status certificates and residual replay.

Backed by scipy's HiGHS for LPs and cvxpy/CLARABEL for SDPs; problem sizes
here are tiny (matrix dimension M+1 with M <= ~8), so a dense formulation is
fine. Solutions whose replayed residuals exceed the stated tolerances are
reported as NumericalFailure, never as Optimal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np
from scipy.optimize import linprog

LP_FEAS_ATOL = 1e-8
SDP_FEAS_ATOL = 1e-7
SDP_EIG_TOL = 1e-7
SDP_DIM_CAP = 32


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverStatus:
    status: Status
    x: np.ndarray | None = None          # vector for LPs, matrix for SDPs
    value: float | None = None
    max_violation: float = 0.0           # normalized constraint residual
    duality_gap: float | None = None

    @property
    def ok(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class LinearProgram:
    """minimize c.x  subject to  rows[i] . x >= bounds[i],  x >= lower."""

    c: np.ndarray
    rows: np.ndarray            # K x n
    bounds: np.ndarray          # length K
    lower: np.ndarray | float = 0.0

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        self.rows = np.asarray(self.rows, dtype=float).reshape(-1, self.c.size)
        self.bounds = np.atleast_1d(np.asarray(self.bounds, dtype=float))
        if self.bounds.size != self.rows.shape[0]:
            raise ValueError("one bound per constraint row required")

    def residual(self, x: np.ndarray) -> float:
        """Max normalized violation of rows and lower bounds at x."""
        scale = np.maximum(1.0, np.max(np.abs(self.rows), axis=1, initial=0.0))
        row_viol = (self.bounds - self.rows @ x) / scale if self.rows.size else np.zeros(0)
        low_viol = np.asarray(self.lower) - x
        return float(max(np.max(row_viol, initial=0.0), np.max(low_viol, initial=0.0)))


def solve_lp(lp: LinearProgram) -> SolverStatus:
    """Solve with HiGHS; trusts its infeasibility/unboundedness certificates.

    Rows and columns are equilibrated first: channel-derived programs mix
    coefficients across many decades (gains ~1e-8, noise ~1e-14), which is
    far below the solver's feasibility tolerance without scaling.
    """
    rows = lp.rows
    bounds = lp.bounds
    col_scale = np.ones(lp.c.size)
    if rows.size:
        row_scale = np.max(np.abs(rows), axis=1)
        row_scale[row_scale == 0.0] = 1.0
        rows = rows / row_scale[:, None]
        bounds = bounds / row_scale
        col_max = np.max(np.abs(rows), axis=0)
        col_scale = np.where(col_max > 0.0, 1.0 / col_max, 1.0)
        rows = rows * col_scale
        # Bring the right-hand sides near unity via a uniform variable scale.
        finite = np.abs(bounds[bounds != 0.0])
        if finite.size:
            mag = float(np.exp(np.mean(np.log(finite))))
            col_scale = col_scale * mag
            bounds = bounds / mag
    lower = np.broadcast_to(np.asarray(lp.lower, dtype=float), lp.c.shape) / col_scale
    res = linprog(
        lp.c * col_scale,
        A_ub=-rows if rows.size else None,
        b_ub=-bounds if rows.size else None,
        bounds=list(zip(lower, [None] * lp.c.size)),
        method="highs",
    )
    if res.status == 2:
        return SolverStatus(status=Status.INFEASIBLE)
    if res.status == 3:
        return SolverStatus(status=Status.UNBOUNDED)
    if res.status != 0 or res.x is None:
        return SolverStatus(status=Status.NUMERICAL_FAILURE)
    x = col_scale * np.asarray(res.x, dtype=float)
    viol = lp.residual(x)
    if viol > LP_FEAS_ATOL:
        return SolverStatus(status=Status.NUMERICAL_FAILURE, x=x, max_violation=viol)
    return SolverStatus(
        status=Status.OPTIMAL, x=x, value=float(lp.c @ x), max_violation=viol
    )


@dataclass
class SemidefiniteProgram:
    """minimize <C, Y>  over symmetric PSD Y of dimension d, subject to
    equality pairs <A_k, Y> = b_k, signed inequalities <B_j, Y> >= 0 (sense
    +1) or <= 0 (sense -1), and optional entrywise nonnegativity."""

    dim: int
    C: np.ndarray
    equalities: list[tuple[np.ndarray, float]] = field(default_factory=list)
    inequalities: list[tuple[np.ndarray, int]] = field(default_factory=list)
    nonneg_entries: bool = False

    def __post_init__(self):
        if self.dim > SDP_DIM_CAP:
            raise ValueError(f"matrix dimension {self.dim} exceeds cap {SDP_DIM_CAP}")
        self.C = _check_sym(np.asarray(self.C, dtype=float), self.dim)
        self.equalities = [
            (_check_sym(np.asarray(a, dtype=float), self.dim), float(b))
            for a, b in self.equalities
        ]
        self.inequalities = [
            (_check_sym(np.asarray(b, dtype=float), self.dim), int(s))
            for b, s in self.inequalities
        ]

    def residual(self, y: np.ndarray) -> float:
        """Max normalized violation of all linear constraints, nonnegativity
        and the PSD cone at y."""
        viol = 0.0
        for a, b in self.equalities:
            scale = max(1.0, float(np.max(np.abs(a))))
            viol = max(viol, abs(float(np.sum(a * y)) - b) / scale)
        for b_mat, sense in self.inequalities:
            scale = max(1.0, float(np.max(np.abs(b_mat))))
            viol = max(viol, -sense * float(np.sum(b_mat * y)) / scale)
        if self.nonneg_entries:
            viol = max(viol, -float(np.min(y, initial=0.0)))
        norm = 1.0 + float(np.linalg.norm(y))
        min_eig = float(np.min(np.linalg.eigvalsh((y + y.T) / 2.0)))
        viol = max(viol, -min_eig / norm)
        return viol


def _check_sym(mat: np.ndarray, dim: int) -> np.ndarray:
    if mat.shape != (dim, dim):
        raise ValueError(f"coefficient matrix shape {mat.shape}, expected {(dim, dim)}")
    if not np.allclose(mat, mat.T, atol=1e-12 * (1.0 + np.max(np.abs(mat)))):
        raise ValueError("coefficient matrices must be symmetric")
    return (mat + mat.T) / 2.0


def solve_sdp(sdp: SemidefiniteProgram) -> SolverStatus:
    """Solve the dense SDP with CLARABEL (SCS fallback) and replay residuals."""
    y = cp.Variable((sdp.dim, sdp.dim), symmetric=True)
    constraints: list = [y >> 0]
    for a, b in sdp.equalities:
        constraints.append(cp.sum(cp.multiply(a, y)) == b)
    for b_mat, sense in sdp.inequalities:
        expr = cp.sum(cp.multiply(b_mat, y))
        constraints.append(expr >= 0 if sense > 0 else expr <= 0)
    if sdp.nonneg_entries:
        constraints.append(y >= 0)
    problem = cp.Problem(cp.Minimize(cp.sum(cp.multiply(sdp.C, y))), constraints)
    for solver in (cp.CLARABEL, cp.SCS):
        try:
            problem.solve(solver=solver)
        except cp.SolverError:
            continue
        if problem.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) and y.value is not None:
            y_val = np.asarray((y.value + y.value.T) / 2.0)
            viol = sdp.residual(y_val)
            if viol > SDP_FEAS_ATOL:
                continue
            gap = _relative_gap(problem)
            if gap is not None and gap > 1e-6:
                continue
            return SolverStatus(
                status=Status.OPTIMAL,
                x=y_val,
                value=float(np.sum(sdp.C * y_val)),
                max_violation=viol,
                duality_gap=gap,
            )
        if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return SolverStatus(status=Status.INFEASIBLE)
        if problem.status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            return SolverStatus(status=Status.UNBOUNDED)
    return SolverStatus(status=Status.NUMERICAL_FAILURE)


def _relative_gap(problem: cp.Problem) -> float | None:
    stats = problem.solver_stats
    if stats is None or stats.extra_stats is None:
        return None
    # CLARABEL exposes the absolute gap; normalize by the objective scale.
    gap = getattr(stats.extra_stats, "gap", None)
    if gap is None:
        return None
    return abs(float(gap)) / (1.0 + abs(problem.value or 0.0))
