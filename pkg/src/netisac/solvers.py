"""Power-control solvers: feasibility gate, SDR lifting with Gaussian
randomization, entrywise CRLB approximation with iterative refinement, the
separate communication-then-scaling benchmark, and a brute-force grid oracle.

All methods minimize total transmit power subject to per-user SINR floors
(linear rows of a SinrSystem) and a ceiling on the summed localization CRLB.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import conic
from .channel import ChannelConfig, CommChannels, RadarChannels, generate_comm_channels, generate_radar_channels
from .conic import LinearProgram, SemidefiniteProgram, Status
from .geometry import Scene
from .metrics import (
    ProblemSpec,
    SensingCoefficients,
    SinrSystem,
    UnobservableTargetError,
    all_sinrs,
    build_sinr_system,
    crlb_sum,
    sensing_coefficients,
)

REPLAY_RTOL = 1e-6


class Outcome(enum.Enum):
    SUCCESS = "success"
    INFEASIBLE = "infeasible"
    RELAXATION_INFEASIBLE = "relaxation_infeasible"
    ALL_CANDIDATES_INFEASIBLE = "all_candidates_infeasible"
    NUMERICAL_FAILURE = "numerical_failure"
    UNOBSERVABLE = "unobservable"


class SolveFailure(RuntimeError):
    def __init__(self, outcome: Outcome, message: str):
        super().__init__(message)
        self.outcome = outcome


@dataclass(frozen=True)
class SolverConfig:
    randomization_count: int = 200
    step_size: float | None = None       # watts; None = 1e-3 * stage-1 total / M
    refine_epsilon: float = 1e-3         # stop within this relative slack of the ceiling
    rng_seed: int = 0
    oracle_grid_points: int = 200
    oracle_power_cap: float | None = None  # watts; None = 4x separate-design total
    max_refine_iterations: int = 10**6

    def __post_init__(self):
        if self.randomization_count < 1:
            raise ValueError("randomization_count must be >= 1")
        if self.step_size is not None and self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not 0.0 < self.refine_epsilon < 1.0:
            raise ValueError("refine_epsilon must lie in (0, 1)")


@dataclass(frozen=True)
class PowerControlInstance:
    """Everything a solver needs: channels, sensing coefficients, thresholds."""

    comm: CommChannels
    coeffs: SensingCoefficients
    spec: ProblemSpec

    @classmethod
    def from_scene(cls, scene: Scene, cfg: ChannelConfig, spec: ProblemSpec
                   ) -> "PowerControlInstance":
        comm = generate_comm_channels(scene, cfg)
        radar = generate_radar_channels(scene, cfg)
        return cls(comm=comm, coeffs=sensing_coefficients(scene, radar), spec=spec)

    @classmethod
    def from_channels(cls, scene: Scene, comm: CommChannels, radar: RadarChannels,
                      spec: ProblemSpec) -> "PowerControlInstance":
        return cls(comm=comm, coeffs=sensing_coefficients(scene, radar), spec=spec)

    @property
    def num_users(self) -> int:
        return self.comm.num_users

    def sinr_system(self) -> SinrSystem:
        return build_sinr_system(self.comm, self.spec)


@dataclass(frozen=True)
class SolveResult:
    method: str
    outcome: Outcome
    power: np.ndarray | None = None
    total_power: float | None = None
    achieved_sinrs: np.ndarray | None = None
    achieved_crlb: float | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.outcome is Outcome.SUCCESS


def _finish(method: str, inst: PowerControlInstance, p: np.ndarray,
            diagnostics: dict) -> SolveResult:
    """Assemble a success result, replaying both constraint families."""
    sinrs = all_sinrs(inst.comm, p)
    crlb = crlb_sum(inst.coeffs, p)
    gamma = np.broadcast_to(inst.spec.sinr_thresholds, sinrs.shape)
    if np.any(sinrs < gamma * (1.0 - REPLAY_RTOL)) or \
            crlb > inst.spec.crlb_ceiling * (1.0 + REPLAY_RTOL):
        raise SolveFailure(
            Outcome.NUMERICAL_FAILURE,
            f"{method}: solution fails constraint replay "
            f"(min SINR margin {np.min(sinrs / gamma):.6g}, "
            f"crlb/ceiling {crlb / inst.spec.crlb_ceiling:.6g})",
        )
    return SolveResult(
        method=method,
        outcome=Outcome.SUCCESS,
        power=p,
        total_power=float(np.sum(p)),
        achieved_sinrs=sinrs,
        achieved_crlb=crlb,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Feasibility gate and scaling lemma
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    witness: np.ndarray | None = None


def check_feasibility(sys: SinrSystem) -> FeasibilityResult:
    """The full problem is feasible iff the SINR rows alone admit a
    nonnegative power vector: any SINR-feasible point can be scaled up to meet
    the CRLB ceiling without breaking the rows."""
    m = sys.G.shape[0]
    lp = LinearProgram(c=np.ones(m), rows=sys.G, bounds=sys.gamma_tilde)
    res = conic.solve_lp(lp)
    if res.status is Status.INFEASIBLE:
        return FeasibilityResult(feasible=False)
    if not res.ok:
        raise SolveFailure(Outcome.NUMERICAL_FAILURE,
                           f"feasibility LP ended with {res.status}")
    return FeasibilityResult(feasible=True, witness=res.x)


def feasible_scaling(p_bar: np.ndarray, coeffs: SensingCoefficients,
                     spec: ProblemSpec) -> np.ndarray:
    """Scale an SINR-feasible vector up (never down) until the CRLB ceiling
    holds; the rows keep holding because their right-hand sides are fixed."""
    p_bar = np.asarray(p_bar, dtype=float)
    quad = p_bar @ coeffs.A @ p_bar
    if quad <= 0.0:
        raise UnobservableTargetError("cannot scale: p.A.p is not positive")
    eta = max(float(coeffs.b @ p_bar) / (spec.crlb_ceiling * float(quad)), 1.0)
    return eta * p_bar


# ---------------------------------------------------------------------------
# SDR pipeline
# ---------------------------------------------------------------------------

def build_sdr_program(sys: SinrSystem, coeffs: SensingCoefficients,
                      spec: ProblemSpec) -> SemidefiniteProgram:
    """Lift p to Y = [1, p]^T [1, p] and drop the rank-one requirement.

    Constraints: Y[0,0] = 1; all entries nonnegative; for each column i the M
    linearized SINR rows [-gamma_tilde, G] Y e_i >= 0; the trace form of the
    CRLB ceiling <[[0, b/2],[b/2, -tau*A]], Y> <= 0; Y PSD.
    """
    m = sys.G.shape[0]
    d = m + 1
    c_mat = np.zeros((d, d))
    c_mat[1:, 1:] = 1.0  # <C, Y> = 1^T P 1 = (1^T p)^2 at rank one
    anchor = np.zeros((d, d))
    anchor[0, 0] = 1.0
    ineqs: list[tuple[np.ndarray, int]] = []
    lifted_rows = np.hstack([-sys.gamma_tilde[:, None], sys.G])  # M x (M+1)
    # Sign constraints are scale-invariant, so normalize every coefficient
    # matrix to unit magnitude; raw channel gains sit far below solver
    # tolerances otherwise.
    lifted_rows = lifted_rows / np.max(np.abs(lifted_rows), axis=1, keepdims=True)
    for i in range(d):
        e_i = np.zeros(d)
        e_i[i] = 1.0
        for row in lifted_rows:
            b_mat = (np.outer(row, e_i) + np.outer(e_i, row)) / 2.0
            ineqs.append((b_mat, +1))
    a_sym = (coeffs.A + coeffs.A.T) / 2.0
    trace_mat = np.zeros((d, d))
    trace_mat[0, 1:] = coeffs.b / 2.0
    trace_mat[1:, 0] = coeffs.b / 2.0
    trace_mat[1:, 1:] = -spec.crlb_ceiling * a_sym
    trace_mat = trace_mat / np.max(np.abs(trace_mat))
    ineqs.append((trace_mat, -1))
    return SemidefiniteProgram(
        dim=d,
        C=c_mat,
        equalities=[(anchor, 1.0)],
        inequalities=ineqs,
        nonneg_entries=True,
    )


def gaussian_randomize(P: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One randomized rank-one candidate |V sqrt(D) w| from the EVD of P.

    Eigenvalues below zero (numerical residue, tolerated down to -1e-7
    relative) are clipped before the square root.
    """
    P = np.asarray(P, dtype=float)
    eigvals, eigvecs = np.linalg.eigh((P + P.T) / 2.0)
    scale = 1.0 + float(np.max(np.abs(eigvals), initial=0.0))
    if np.min(eigvals, initial=0.0) < -1e-7 * scale:
        raise ValueError("matrix is not (numerically) positive semidefinite")
    root = np.sqrt(np.clip(eigvals, 0.0, None))
    w = rng.standard_normal(P.shape[0])
    return np.abs(eigvecs @ (root * w))


def scale_candidate(z: np.ndarray, sys: SinrSystem, coeffs: SensingCoefficients,
                    spec: ProblemSpec) -> np.ndarray | None:
    """Minimal positive scaling of a candidate direction that satisfies every
    constraint, or None when no positive scaling can (some row has nonpositive
    throughput at z, or the target is unobservable along z)."""
    z = np.asarray(z, dtype=float)
    row_vals = sys.G @ z
    if np.any(row_vals <= 0.0):
        return None
    quad = z @ coeffs.A @ z
    if quad <= 0.0:
        return None
    xi_star = max(
        float(np.max(sys.gamma_tilde / row_vals)),
        float(coeffs.b @ z) / (spec.crlb_ceiling * float(quad)),
    )
    if xi_star <= 0.0:
        return None
    return xi_star * z


@dataclass(frozen=True)
class _ScaledInstance:
    """Substituting p = s*q turns the problem into an identical one with
    row targets gamma_tilde/s and CRLB ceiling tau*s; solving in q keeps the
    SDP variables O(1) even when physical powers are huge."""

    sys: SinrSystem
    spec: ProblemSpec
    scale: float

    @classmethod
    def build(cls, sys: SinrSystem, spec: ProblemSpec, scale: float) -> "_ScaledInstance":
        scaled_sys = SinrSystem(G=sys.G, gamma_tilde=sys.gamma_tilde / scale)
        scaled_spec = ProblemSpec(
            sinr_thresholds=spec.sinr_thresholds,
            crlb_ceiling=spec.crlb_ceiling * scale,
        )
        return cls(sys=scaled_sys, spec=scaled_spec, scale=scale)


def solve_sdr(inst: PowerControlInstance, cfg: SolverConfig | None = None
              ) -> SolveResult:
    """SDR pipeline: solve the lifted SDP, then recover a rank-one point via
    repeated Gaussian randomization plus closed-form rescaling, always also
    trying the deterministic first-column extraction; keep the cheapest
    feasible candidate. The square root of the SDP objective is a lower bound
    on the achievable total power, reported in diagnostics."""
    cfg = cfg or SolverConfig()
    sys = inst.sinr_system()
    gate = check_feasibility(sys)
    if not gate.feasible:
        return SolveResult(method="sdr", outcome=Outcome.INFEASIBLE)
    try:
        reference = feasible_scaling(gate.witness, inst.coeffs, inst.spec)
    except UnobservableTargetError:
        # The witness direction carries no sensing information; fall back to
        # its raw total for conditioning and let the SDP decide feasibility.
        reference = gate.witness
    scale = float(np.sum(reference))
    scaled = _ScaledInstance.build(sys, inst.spec, scale)
    program = build_sdr_program(scaled.sys, inst.coeffs, scaled.spec)
    sdp_res = conic.solve_sdp(program)
    if sdp_res.status is Status.INFEASIBLE:
        # The lift of any feasible point is feasible for the relaxation, so
        # this can only mean the gate and the SDP disagree numerically.
        raise SolveFailure(Outcome.NUMERICAL_FAILURE,
                           "SDR reported infeasible after a feasible gate")
    if not sdp_res.ok:
        raise SolveFailure(Outcome.NUMERICAL_FAILURE,
                           f"SDP solve ended with {sdp_res.status}")
    y_star = sdp_res.x
    objective = max(float(sdp_res.value), 0.0)
    lower_bound_w = scale * math.sqrt(objective)
    p_block = y_star[1:, 1:]
    candidates: list[np.ndarray] = [np.clip(y_star[1:, 0], 0.0, None)]
    for k in range(cfg.randomization_count):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.rng_seed, k]))
        candidates.append(gaussian_randomize(p_block, rng))
    best_q: np.ndarray | None = None
    best_total = math.inf
    feasible_count = 0
    for q in candidates:
        if not np.any(q > 0.0):
            continue
        scaled_q = scale_candidate(q, scaled.sys, inst.coeffs, scaled.spec)
        if scaled_q is None:
            continue
        feasible_count += 1
        total = float(np.sum(scaled_q))
        if total < best_total:
            best_total = total
            best_q = scaled_q
    diagnostics = {
        "sdr_objective": objective * scale**2,
        "sdr_lower_bound_w": lower_bound_w,
        "randomization_feasible": feasible_count,
        "randomization_total": len(candidates),
        "internal_scale_w": scale,
        "sdp_max_violation": sdp_res.max_violation,
    }
    if best_q is None:
        return SolveResult(
            method="sdr",
            outcome=Outcome.ALL_CANDIDATES_INFEASIBLE,
            diagnostics=diagnostics,
        )
    return _finish("sdr", inst, scale * best_q, diagnostics)


# ---------------------------------------------------------------------------
# CRLB-approximation pipeline
# ---------------------------------------------------------------------------

def solve_crlb_approx(inst: PowerControlInstance, cfg: SolverConfig | None = None
                      ) -> SolveResult:
    """Stage 1: replace the CRLB ceiling with the entrywise sufficient
    condition b <= tau*A*p, giving an LP whose optimum is feasible for the
    original problem. Stage 2: walk the power down one step at a time,
    subtracting the step from whichever coordinate keeps both constraint
    families satisfied while leaving the smallest CRLB, until the CRLB is
    within refine_epsilon of the ceiling or no coordinate survives."""
    cfg = cfg or SolverConfig()
    sys = inst.sinr_system()
    gate = check_feasibility(sys)
    if not gate.feasible:
        return SolveResult(method="crlb-approx", outcome=Outcome.INFEASIBLE)
    m = inst.num_users
    tau = inst.spec.crlb_ceiling
    rows = np.vstack([sys.G, tau * inst.coeffs.A])
    bounds = np.concatenate([sys.gamma_tilde, inst.coeffs.b])
    res = conic.solve_lp(LinearProgram(c=np.ones(m), rows=rows, bounds=bounds))
    if res.status is Status.INFEASIBLE:
        # The entrywise condition is only sufficient; it can be unsatisfiable
        # even when the original problem is not. Reported distinctly.
        return SolveResult(method="crlb-approx", outcome=Outcome.RELAXATION_INFEASIBLE)
    if not res.ok:
        raise SolveFailure(Outcome.NUMERICAL_FAILURE,
                           f"stage-1 LP ended with {res.status}")
    p = np.asarray(res.x, dtype=float)
    stage1_total = float(np.sum(p))
    step = cfg.step_size if cfg.step_size is not None else 1e-3 * stage1_total / m
    iterations = 0
    crlb = crlb_sum(inst.coeffs, p)
    while crlb <= tau * (1.0 - cfg.refine_epsilon) and \
            iterations < cfg.max_refine_iterations:
        best_m = -1
        best_crlb = math.inf
        for idx in range(m):
            if p[idx] <= 0.0:
                continue
            cand = p.copy()
            cand[idx] = max(cand[idx] - step, 0.0)
            if not sys.rows_satisfied(cand):
                continue
            try:
                cand_crlb = crlb_sum(inst.coeffs, cand)
            except UnobservableTargetError:
                continue
            if cand_crlb > tau:
                continue
            if cand_crlb < best_crlb:
                best_crlb = cand_crlb
                best_m = idx
        if best_m < 0:
            break
        p[best_m] = max(p[best_m] - step, 0.0)
        crlb = best_crlb
        iterations += 1
    diagnostics = {
        "stage1_total_w": stage1_total,
        "refine_iterations": iterations,
        "step_size_w": step,
    }
    return _finish("crlb-approx", inst, p, diagnostics)


# ---------------------------------------------------------------------------
# Separate-design benchmark
# ---------------------------------------------------------------------------

def solve_separate(inst: PowerControlInstance) -> SolveResult:
    """Benchmark: solve the communication-only LP, then uniformly scale the
    result up just enough to meet the CRLB ceiling."""
    sys = inst.sinr_system()
    m = inst.num_users
    res = conic.solve_lp(
        LinearProgram(c=np.ones(m), rows=sys.G, bounds=sys.gamma_tilde)
    )
    if res.status is Status.INFEASIBLE:
        return SolveResult(method="separate", outcome=Outcome.INFEASIBLE)
    if not res.ok:
        raise SolveFailure(Outcome.NUMERICAL_FAILURE,
                           f"communication LP ended with {res.status}")
    p_hat = np.asarray(res.x, dtype=float)
    try:
        p = feasible_scaling(p_hat, inst.coeffs, inst.spec)
    except UnobservableTargetError:
        return SolveResult(method="separate", outcome=Outcome.UNOBSERVABLE,
                           diagnostics={"comm_only_total_w": float(np.sum(p_hat))})
    eta = float(np.sum(p)) / float(np.sum(p_hat))
    return _finish("separate", inst, p,
                   {"comm_only_total_w": float(np.sum(p_hat)), "eta": eta})


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

def brute_force_oracle(inst: PowerControlInstance, cfg: SolverConfig | None = None
                       ) -> SolveResult:
    """Exhaustive grid search over [0, cap]^M, refined once around the
    incumbent with 10x finer spacing. Verification oracle for M <= 3."""
    cfg = cfg or SolverConfig()
    m = inst.num_users
    if m > 3:
        raise ValueError("oracle only supports up to three transmitters")
    cap = cfg.oracle_power_cap
    if cap is None:
        separate = solve_separate(inst)
        if not separate.ok:
            return SolveResult(method="oracle", outcome=separate.outcome)
        cap = 4.0 * separate.total_power
    sys = inst.sinr_system()
    axes = [np.linspace(0.0, cap, cfg.oracle_grid_points)] * m
    starts = _grid_search(axes, sys, inst.coeffs, inst.spec, keep=8)
    if not starts:
        return SolveResult(
            method="oracle",
            outcome=Outcome.INFEASIBLE,
            diagnostics={"hint": "no feasible grid point; consider raising the cap",
                         "power_cap_w": cap},
        )
    # Constrained local polish from several coarse starts: the feasible set
    # is nonconvex, so near-tied basins exist and a single shrinking window
    # can converge to the wrong one. The grid finds the basins; SLSQP
    # resolves each local optimum far below the comparison slack used in
    # tests.
    best, best_total = starts[0]
    for start, _ in starts:
        polished = _polish(start, sys, inst.coeffs, inst.spec, cap)
        if polished is not None and float(np.sum(polished)) < best_total:
            best, best_total = polished, float(np.sum(polished))
    return _finish(
        "oracle", inst, best,
        {"grid_points": cfg.oracle_grid_points, "power_cap_w": cap,
         "refine_starts": len(starts)},
    )


def _polish(start: np.ndarray, sys: SinrSystem, coeffs: SensingCoefficients,
            spec: ProblemSpec, cap: float) -> np.ndarray | None:
    """Locally minimize total power from a feasible grid point; returns a
    point that replays feasible, or None."""
    # Optimize over u = p / cap with unit-normalized constraint rows; raw
    # channel magnitudes span too many decades for SLSQP's fixed tolerances.
    g_rows = sys.G * cap
    row_scale = np.maximum(np.max(np.abs(g_rows), axis=1), 1e-300)
    g_rows = g_rows / row_scale[:, None]
    g_rhs = sys.gamma_tilde / row_scale
    a_quad = spec.crlb_ceiling * cap**2 * coeffs.A
    b_lin = cap * coeffs.b
    q_scale = max(np.max(np.abs(a_quad)), np.max(np.abs(b_lin)), 1e-300)
    a_quad = a_quad / q_scale
    b_lin = b_lin / q_scale
    res = minimize(
        lambda u: float(np.sum(u)),
        start / cap,
        jac=lambda u: np.ones_like(u),
        method="SLSQP",
        bounds=[(0.0, 1.0)] * start.size,
        constraints=[
            {"type": "ineq",
             "fun": lambda u: g_rows @ u - g_rhs,
             "jac": lambda u: g_rows},
            {"type": "ineq",
             "fun": lambda u: u @ a_quad @ u - b_lin @ u,
             "jac": lambda u: (a_quad + a_quad.T) @ u - b_lin},
        ],
        options={"ftol": 1e-14, "maxiter": 400},
    )
    if not res.success:
        return None
    res.x = res.x * cap
    # Scaling up slightly improves both constraint families, making the
    # replay robust to SLSQP's own feasibility tolerance.
    p = np.clip(np.asarray(res.x, dtype=float), 0.0, None) * (1.0 + 1e-9)
    quad = float(p @ coeffs.A @ p)
    if np.any(sys.G @ p < sys.gamma_tilde) or quad <= 0.0 \
            or float(coeffs.b @ p) > spec.crlb_ceiling * quad:
        return None
    return p


def _grid_search(axes: list[np.ndarray], sys: SinrSystem,
                 coeffs: SensingCoefficients, spec: ProblemSpec,
                 keep: int = 1) -> list[tuple[np.ndarray, float]]:
    """Up to `keep` least-total-power feasible points on the outer product of
    the axes, best first."""
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([ax.ravel() for ax in mesh], axis=1)  # K x M
    found: list[tuple[np.ndarray, float]] = []
    chunk = 1_000_000
    for start in range(0, points.shape[0], chunk):
        block = points[start:start + chunk]
        ok = np.all(block @ sys.G.T >= sys.gamma_tilde, axis=1)
        quad = np.einsum("ij,jk,ik->i", block, coeffs.A, block)
        ok &= quad > 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            crlb = (block @ coeffs.b) / quad
        ok &= np.where(np.isfinite(crlb), crlb <= spec.crlb_ceiling, False)
        if not np.any(ok):
            continue
        totals = np.where(ok, block.sum(axis=1), math.inf)
        order = np.argsort(totals)[:keep]
        found.extend(
            (block[i].copy(), float(totals[i])) for i in order if np.isfinite(totals[i])
        )
    found.sort(key=lambda pair: pair[1])
    return found[:keep]
