"""Channel generation: Rician communication links, bistatic radar coefficients.

All generation is a pure function of (scene, config); the RNG stream for each
link is split off a root seed sequence as SeedSequence([seed, kind, i, j]) with
kind 0 for communication links and 1 for radar paths, so any single link is
reproducible regardless of matrix dimensions or evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import SPEED_OF_LIGHT, DegenerateSceneError, MIN_RANGE_M, Scene, rx_range, tx_range

XI_CONSISTENCY_RTOL = 1e-12


@dataclass(frozen=True)
class ChannelConfig:
    carrier_frequency_hz: float = 6e9
    bandwidth_hz: float = 1e6
    rician_k_db: float = 5.0
    noise_psd_dbm_hz: float = -174.0
    # Log-distance pathloss for the communication links: free space at the
    # reference distance, then distance^-exponent. The steep default exponent
    # keeps the direct links dominant in the tight default geometries, so the
    # interference channel stays feasible across the SINR range studied.
    pathloss_exponent_comm: float = 14.0
    pathloss_ref_distance_m: float = 30.0
    rcs_m2: float = 1.0
    obs_duration_s: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if not math.isfinite(self.rician_k_db):
            raise ValueError("Rician K factor must be finite")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")

    @property
    def noise_power_w(self) -> float:
        """Thermal noise power over the signal bandwidth, watts."""
        return 10.0 ** ((self.noise_psd_dbm_hz - 30.0) / 10.0) * self.bandwidth_hz

    @property
    def noise_psd_w_per_hz(self) -> float:
        """Thermal noise spectral density, W/Hz."""
        return 10.0 ** ((self.noise_psd_dbm_hz - 30.0) / 10.0)

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency_hz


@dataclass(frozen=True)
class CommChannels:
    """Interference-channel gains h[m, l] (transmitter l -> CU m) and noise."""

    h: np.ndarray            # complex, M x M
    noise_power: np.ndarray  # watts, length M

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        noise = np.asarray(self.noise_power, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"comm channel matrix must be square, got {h.shape}")
        if noise.shape != (h.shape[0],):
            raise ValueError("noise_power length must match channel dimension")
        if np.any(np.abs(np.diag(h)) == 0):
            raise ValueError("direct links must have nonzero gain")
        if np.any(noise <= 0):
            raise ValueError("noise powers must be strictly positive")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "noise_power", noise)
        self.h.setflags(write=False)
        self.noise_power.setflags(write=False)

    @property
    def num_users(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True)
class RadarChannels:
    """Radar path coefficients h_rad[n, m] and the delay-estimation constants.

    xi[m] folds effective bandwidth, observation time and sensing noise into
    the per-transmitter Fisher-information scale: 8 pi^2 beta^2 T / (sigma_w^2 c^2).
    """

    h_rad: np.ndarray          # complex, N x M
    noise_level: float         # sigma_w^2, watts
    eff_bandwidth: np.ndarray  # beta_m, Hz, length M
    obs_duration: float        # T, seconds
    xi: np.ndarray             # length M

    def __post_init__(self):
        h = np.asarray(self.h_rad, dtype=complex)
        beta = np.asarray(self.eff_bandwidth, dtype=float)
        xi = np.asarray(self.xi, dtype=float)
        if h.ndim != 2:
            raise ValueError("radar channel matrix must be 2-D (N x M)")
        if beta.shape != (h.shape[1],) or xi.shape != (h.shape[1],):
            raise ValueError("eff_bandwidth and xi must have one entry per transmitter")
        expected = 8.0 * np.pi**2 * beta**2 * self.obs_duration / (
            self.noise_level * SPEED_OF_LIGHT**2
        )
        if np.any(xi <= 0) or np.any(
            np.abs(xi - expected) > XI_CONSISTENCY_RTOL * expected
        ):
            raise ValueError("xi inconsistent with eff_bandwidth / obs_duration / noise_level")
        object.__setattr__(self, "h_rad", h)
        object.__setattr__(self, "eff_bandwidth", beta)
        object.__setattr__(self, "xi", xi)
        self.h_rad.setflags(write=False)
        self.eff_bandwidth.setflags(write=False)
        self.xi.setflags(write=False)

    @property
    def num_receivers(self) -> int:
        return self.h_rad.shape[0]

    @property
    def num_transmitters(self) -> int:
        return self.h_rad.shape[1]


def _link_rng(seed: int, kind: int, i: int, j: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, kind, i, j]))


def log_distance_gain(distance_m: float, carrier_frequency_hz: float,
                      exponent: float, ref_distance_m: float) -> float:
    """Power pathloss: free space at the reference distance, then
    (d / d_ref)^-alpha beyond it."""
    fs_ref = (
        SPEED_OF_LIGHT / (4.0 * np.pi * carrier_frequency_hz * ref_distance_m)
    ) ** 2
    return fs_ref * (distance_m / ref_distance_m) ** (-exponent)


def generate_comm_channels(scene: Scene, cfg: ChannelConfig) -> CommChannels:
    """Rician-faded gains for every transmitter-to-CU link.

    |h| follows the free-space-referenced pathloss with exponent
    cfg.pathloss_exponent_comm; the LOS phase and the diffuse component come
    from the per-link seeded stream, so equal (scene, cfg) reproduce the
    matrix bit for bit.
    """
    m_tx = scene.num_transmitters
    k_lin = 10.0 ** (cfg.rician_k_db / 10.0)
    los_w = math.sqrt(k_lin / (k_lin + 1.0))
    nlos_w = math.sqrt(1.0 / (k_lin + 1.0))
    h = np.zeros((m_tx, m_tx), dtype=complex)
    for m in range(m_tx):
        for l in range(m_tx):
            d = scene.cu_receivers[m].distance_to(scene.transmitters[l])
            if d < MIN_RANGE_M:
                raise DegenerateSceneError(
                    f"CU receiver {m} coincides with transmitter {l}"
                )
            rng = _link_rng(cfg.seed, 0, m, l)
            theta = rng.uniform(0.0, 2.0 * np.pi)
            g = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2.0)
            fading = los_w * np.exp(1j * theta) + nlos_w * g
            h[m, l] = math.sqrt(
                log_distance_gain(
                    d,
                    cfg.carrier_frequency_hz,
                    cfg.pathloss_exponent_comm,
                    cfg.pathloss_ref_distance_m,
                )
            ) * fading
    noise = np.full(m_tx, cfg.noise_power_w)
    return CommChannels(h=h, noise_power=noise)


class ChannelSchemaError(ValueError):
    """Explicit channel block missing fields or dimensionally inconsistent."""


def load_channels(document: dict, scene: Scene | None = None
                  ) -> tuple[CommChannels, RadarChannels]:
    """Build channels verbatim from an explicit-channel document block.

    Expects {"comm": {h_real, h_imag, noise_power_w},
             "radar": {h_real, h_imag, noise_level_w, eff_bandwidth_hz,
                       obs_duration_s[, xi]}}.
    When a scene is given, matrix dimensions are checked against it.
    """
    try:
        comm_doc = document["comm"]
        radar_doc = document["radar"]
        h = np.asarray(comm_doc["h_real"], dtype=float) \
            + 1j * np.asarray(comm_doc["h_imag"], dtype=float)
        noise = np.asarray(comm_doc["noise_power_w"], dtype=float)
        h_rad = np.asarray(radar_doc["h_real"], dtype=float) \
            + 1j * np.asarray(radar_doc["h_imag"], dtype=float)
        noise_level = float(radar_doc["noise_level_w"])
        obs_duration = float(radar_doc["obs_duration_s"])
        beta = np.asarray(radar_doc["eff_bandwidth_hz"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ChannelSchemaError(f"explicit channel block malformed: {exc}") from exc
    if h_rad.ndim != 2:
        raise ChannelSchemaError("radar h matrix must be 2-D (N x M)")
    if beta.ndim == 0:
        beta = np.full(h_rad.shape[1], float(beta))
    xi = 8.0 * np.pi**2 * beta**2 * obs_duration / (noise_level * SPEED_OF_LIGHT**2)
    if "xi" in radar_doc:
        given = np.asarray(radar_doc["xi"], dtype=float)
        if given.shape != xi.shape or np.any(
            np.abs(given - xi) > XI_CONSISTENCY_RTOL * np.abs(xi)
        ):
            raise ChannelSchemaError("given xi inconsistent with beta/T/noise_level")
    if scene is not None:
        if h.shape != (scene.num_transmitters, scene.num_transmitters):
            raise ChannelSchemaError(
                f"comm matrix {h.shape} does not match scene with "
                f"M={scene.num_transmitters}"
            )
        if h_rad.shape != (scene.num_receivers, scene.num_transmitters):
            raise ChannelSchemaError(
                f"radar matrix {h_rad.shape} does not match scene with "
                f"N={scene.num_receivers}, M={scene.num_transmitters}"
            )
    try:
        comm = CommChannels(h=h, noise_power=noise)
        radar = RadarChannels(
            h_rad=h_rad,
            noise_level=noise_level,
            eff_bandwidth=beta,
            obs_duration=obs_duration,
            xi=xi,
        )
    except ValueError as exc:
        raise ChannelSchemaError(str(exc)) from exc
    return comm, radar


def generate_radar_channels(scene: Scene, cfg: ChannelConfig) -> RadarChannels:
    """Bistatic radar coefficients: deterministic magnitude from the radar
    equation (RCS over R_tx^2 R_rx^2), random phase from the seeded stream."""
    m_tx = scene.num_transmitters
    n_rx = scene.num_receivers
    ref = (SPEED_OF_LIGHT / (4.0 * np.pi * cfg.carrier_frequency_hz)) ** 2
    h = np.zeros((n_rx, m_tx), dtype=complex)
    for n in range(n_rx):
        for m in range(m_tx):
            r_t = tx_range(scene, m)
            r_r = rx_range(scene, n)
            mag_sq = cfg.rcs_m2 * ref / (4.0 * np.pi * r_t**2 * r_r**2)
            phase = _link_rng(cfg.seed, 1, n, m).uniform(0.0, 2.0 * np.pi)
            h[n, m] = math.sqrt(mag_sq) * np.exp(1j * phase)
    # The sensing noise enters through its delta-autocorrelation level, i.e.
    # a spectral density, so it is not integrated over the bandwidth.
    sigma_w_sq = cfg.noise_psd_w_per_hz
    beta = np.full(m_tx, cfg.bandwidth_hz / math.sqrt(12.0))  # flat spectrum
    xi = 8.0 * np.pi**2 * beta**2 * cfg.obs_duration_s / (
        sigma_w_sq * SPEED_OF_LIGHT**2
    )
    return RadarChannels(
        h_rad=h,
        noise_level=sigma_w_sq,
        eff_bandwidth=beta,
        obs_duration=cfg.obs_duration_s,
        xi=xi,
    )
