"""Coordinated power control for network integrated sensing and communication.

Models distributed ISAC transmitters that serve communication users while
their reflections localize a target, and minimizes total transmit power
subject to per-user SINR floors and a ceiling on the localization CRLB.
"""

from .channel import ChannelConfig, CommChannels, RadarChannels, generate_comm_channels, generate_radar_channels, load_channels
from .geometry import Point2D, Scene
from .metrics import ProblemSpec, SensingCoefficients, SinrSystem, all_sinrs, build_sinr_system, compute_sinr, crlb_matrix, crlb_sum, sensing_coefficients
from .solvers import (
    Outcome,
    PowerControlInstance,
    SolveResult,
    SolverConfig,
    brute_force_oracle,
    check_feasibility,
    feasible_scaling,
    solve_crlb_approx,
    solve_sdr,
    solve_separate,
)

__all__ = [
    "ChannelConfig",
    "CommChannels",
    "Outcome",
    "Point2D",
    "PowerControlInstance",
    "ProblemSpec",
    "RadarChannels",
    "Scene",
    "SensingCoefficients",
    "SinrSystem",
    "SolveResult",
    "SolverConfig",
    "all_sinrs",
    "brute_force_oracle",
    "build_sinr_system",
    "check_feasibility",
    "compute_sinr",
    "crlb_matrix",
    "crlb_sum",
    "feasible_scaling",
    "generate_comm_channels",
    "generate_radar_channels",
    "load_channels",
    "sensing_coefficients",
    "solve_crlb_approx",
    "solve_sdr",
    "solve_separate",
]

__version__ = "0.1.0"
