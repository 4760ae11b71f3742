"""SINR evaluation and the localization CRLB as functions of transmit power."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import CommChannels, RadarChannels
from .geometry import Scene, direction_terms

FIM_DET_FLOOR = 1e-30


class UnobservableTargetError(ValueError):
    """Fisher information is singular under the given power vector."""


@dataclass(frozen=True)
class ProblemSpec:
    """Per-user SINR floors (linear) and the CRLB ceiling (m^2)."""

    sinr_thresholds: np.ndarray
    crlb_ceiling: float

    def __post_init__(self):
        gamma = np.atleast_1d(np.asarray(self.sinr_thresholds, dtype=float))
        if np.any(gamma <= 0):
            raise ValueError("SINR thresholds must be positive linear ratios")
        if self.crlb_ceiling <= 0:
            raise ValueError("CRLB ceiling must be positive")
        object.__setattr__(self, "sinr_thresholds", gamma)
        self.sinr_thresholds.setflags(write=False)


@dataclass(frozen=True)
class SinrSystem:
    """Linear-row form of the SINR constraints: row m of G dotted with p must
    reach gamma_tilde[m]; equivalent to SINR_m >= threshold."""

    G: np.ndarray            # M x M
    gamma_tilde: np.ndarray  # length M

    def __post_init__(self):
        G = np.asarray(self.G, dtype=float)
        gt = np.asarray(self.gamma_tilde, dtype=float)
        if np.any(np.diag(G) <= 0):
            raise ValueError("diagonal of G must be strictly positive")
        off = G - np.diag(np.diag(G))
        if np.any(off > 0):
            raise ValueError("off-diagonal entries of G must be non-positive")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "gamma_tilde", gt)
        self.G.setflags(write=False)
        self.gamma_tilde.setflags(write=False)

    def rows_satisfied(self, p: np.ndarray, rtol: float = 0.0) -> bool:
        return bool(np.all(self.G @ p >= self.gamma_tilde * (1.0 - rtol)))


@dataclass(frozen=True)
class SensingCoefficients:
    """Per-transmitter Fisher-information weights and the rational-form pieces.

    crlb_sum(p) = b.p / (p.A.p) with b = g_a + g_b and
    A = outer(g_a, g_b) - outer(g_c, g_c).
    """

    g_a: np.ndarray
    g_b: np.ndarray
    g_c: np.ndarray

    def __post_init__(self):
        g_a = np.asarray(self.g_a, dtype=float)
        g_b = np.asarray(self.g_b, dtype=float)
        g_c = np.asarray(self.g_c, dtype=float)
        if g_a.shape != g_b.shape or g_a.shape != g_c.shape:
            raise ValueError("coefficient vectors must share one length")
        if np.any(g_a < 0) or np.any(g_b < 0):
            raise ValueError("g_a and g_b must be entrywise non-negative")
        # Cauchy-Schwarz per entry; guarantees p.A.p >= 0 for p >= 0.
        if np.any(g_c**2 > g_a * g_b * (1.0 + 1e-12) + 1e-300):
            raise ValueError("g_c^2 must not exceed g_a * g_b entrywise")
        for name, v in (("g_a", g_a), ("g_b", g_b), ("g_c", g_c)):
            object.__setattr__(self, name, v)
            v.setflags(write=False)

    @property
    def b(self) -> np.ndarray:
        return self.g_a + self.g_b

    @property
    def A(self) -> np.ndarray:
        return np.outer(self.g_a, self.g_b) - np.outer(self.g_c, self.g_c)


def compute_sinr(comm: CommChannels, p: np.ndarray, m: int) -> float:
    """Received SINR of CU m under power vector p (linear ratio)."""
    if not 0 <= m < comm.num_users:
        raise IndexError(f"user index {m} out of range")
    p = np.asarray(p, dtype=float)
    gains = np.abs(comm.h[m]) ** 2
    interference = gains @ p - gains[m] * p[m]
    return gains[m] * p[m] / (interference + comm.noise_power[m])


def all_sinrs(comm: CommChannels, p: np.ndarray) -> np.ndarray:
    return np.array([compute_sinr(comm, p, m) for m in range(comm.num_users)])


def build_sinr_system(comm: CommChannels, spec: ProblemSpec) -> SinrSystem:
    """Rewrite the per-user SINR floors as linear rows in p."""
    m_users = comm.num_users
    gamma = np.broadcast_to(spec.sinr_thresholds, (m_users,))
    gains = np.abs(comm.h) ** 2
    G = -gamma[:, None] * gains
    G[np.arange(m_users), np.arange(m_users)] = np.diag(gains)
    return SinrSystem(G=G, gamma_tilde=gamma * comm.noise_power)


def sensing_coefficients(scene: Scene, radar: RadarChannels) -> SensingCoefficients:
    """Direction-weighted Fisher-information coefficients per transmitter."""
    m_tx = scene.num_transmitters
    n_rx = scene.num_receivers
    if radar.num_transmitters != m_tx or radar.num_receivers != n_rx:
        raise ValueError("radar channel dimensions do not match scene")
    g_a = np.zeros(m_tx)
    g_b = np.zeros(m_tx)
    g_c = np.zeros(m_tx)
    for m in range(m_tx):
        for n in range(n_rx):
            dx, dy = direction_terms(scene, n, m)
            w = np.abs(radar.h_rad[n, m]) ** 2
            g_a[m] += w * dx * dx
            g_b[m] += w * dy * dy
            g_c[m] += w * dx * dy
        g_a[m] *= radar.xi[m]
        g_b[m] *= radar.xi[m]
        g_c[m] *= radar.xi[m]
    return SensingCoefficients(g_a=g_a, g_b=g_b, g_c=g_c)


def fisher_information(coeffs: SensingCoefficients, p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.array(
        [
            [coeffs.g_a @ p, coeffs.g_c @ p],
            [coeffs.g_c @ p, coeffs.g_b @ p],
        ]
    )


def crlb_matrix(coeffs: SensingCoefficients, p: np.ndarray) -> np.ndarray:
    """2x2 location-error covariance bound: inverse of the summed FIM."""
    fim = fisher_information(coeffs, p)
    det = fim[0, 0] * fim[1, 1] - fim[0, 1] * fim[1, 0]
    if det <= FIM_DET_FLOOR:
        raise UnobservableTargetError(
            f"Fisher information singular (det={det:.3e}) under this power vector"
        )
    return np.array([[fim[1, 1], -fim[0, 1]], [-fim[1, 0], fim[0, 0]]]) / det


def crlb_sum(coeffs: SensingCoefficients, p: np.ndarray) -> float:
    """Sum of the x and y CRLBs via the rational closed form b.p / (p.A.p)."""
    p = np.asarray(p, dtype=float)
    quad = p @ coeffs.A @ p
    if quad <= 0.0:
        raise UnobservableTargetError(
            f"quadratic form p.A.p = {quad:.3e} is not positive"
        )
    return float(coeffs.b @ p) / float(quad)
