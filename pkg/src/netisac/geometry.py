"""Scene geometry: node placement, bistatic ranges, delays, direction terms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

SPEED_OF_LIGHT = 299_792_458.0  # m/s, exact SI value

# Distances below this are treated as a degenerate scene rather than risking
# division blow-up in the direction terms.
MIN_RANGE_M = 1e-6


class DegenerateSceneError(ValueError):
    """Target coincides (within tolerance) with a transmitter or receiver."""


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def distance_to(self, other: "Point2D") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Scene:
    """Placement of transmitters, sensing receivers, CU receivers and the target.

    One CU receiver per transmitter. All indices are 0-based.
    """

    transmitters: tuple[Point2D, ...]
    sensing_receivers: tuple[Point2D, ...]
    cu_receivers: tuple[Point2D, ...]
    target: Point2D = field(default_factory=lambda: Point2D(0.0, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "transmitters", tuple(self.transmitters))
        object.__setattr__(self, "sensing_receivers", tuple(self.sensing_receivers))
        object.__setattr__(self, "cu_receivers", tuple(self.cu_receivers))
        if len(self.transmitters) < 1:
            raise ValueError("need at least one transmitter")
        if len(self.sensing_receivers) < 1:
            raise ValueError("need at least one sensing receiver")
        if len(self.cu_receivers) != len(self.transmitters):
            raise ValueError(
                f"{len(self.cu_receivers)} CU receivers for "
                f"{len(self.transmitters)} transmitters (need one per transmitter)"
            )
        for node in (*self.transmitters, *self.sensing_receivers):
            if node.distance_to(self.target) < MIN_RANGE_M:
                raise DegenerateSceneError(
                    f"target {self.target} coincides with node {node}"
                )

    @property
    def num_transmitters(self) -> int:
        return len(self.transmitters)

    @property
    def num_receivers(self) -> int:
        return len(self.sensing_receivers)


def tx_range(scene: Scene, m: int) -> float:
    """Distance from transmitter m to the target (meters)."""
    return scene.transmitters[_check_index(m, scene.num_transmitters)].distance_to(
        scene.target
    )


def rx_range(scene: Scene, n: int) -> float:
    """Distance from sensing receiver n to the target (meters)."""
    return scene.sensing_receivers[_check_index(n, scene.num_receivers)].distance_to(
        scene.target
    )


def propagation_delay(scene: Scene, n: int, m: int) -> float:
    """Bistatic echo delay (R_tx + R_rx) / c for the (n, m) radar path, seconds."""
    return (tx_range(scene, m) + rx_range(scene, n)) / SPEED_OF_LIGHT


def direction_terms(scene: Scene, n: int, m: int) -> tuple[float, float]:
    """Summed unit-vector components from the target toward tx m and rx n.

    Returns (dx, dy) with dx = (x_tx - x)/R_tx + (x_rx - x)/R_rx and
    likewise for dy; each component lies in [-2, 2].
    """
    tx = scene.transmitters[_check_index(m, scene.num_transmitters)]
    rx = scene.sensing_receivers[_check_index(n, scene.num_receivers)]
    r_tx = tx.distance_to(scene.target)
    r_rx = rx.distance_to(scene.target)
    if r_tx < MIN_RANGE_M or r_rx < MIN_RANGE_M:
        raise DegenerateSceneError("zero range in direction terms")
    dx = (tx.x - scene.target.x) / r_tx + (rx.x - scene.target.x) / r_rx
    dy = (tx.y - scene.target.y) / r_tx + (rx.y - scene.target.y) / r_rx
    return dx, dy


def _check_index(i: int, size: int) -> int:
    if not 0 <= i < size:
        raise IndexError(f"index {i} out of range [0, {size})")
    return i
