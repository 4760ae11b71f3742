"""Shared scenario builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from netisac import ChannelConfig, Point2D, ProblemSpec, Scene


def two_tx_scene(target_x: float = 30.0) -> Scene:
    """Two transmitters, two CUs, two sensing receivers."""
    return Scene(
        transmitters=(Point2D(-50.0, 0.0), Point2D(0.0, 50.0)),
        cu_receivers=(Point2D(-20.0, 0.0), Point2D(20.0, 0.0)),
        sensing_receivers=(Point2D(-50.0, -10.0), Point2D(50.0, 10.0)),
        target=Point2D(target_x, 0.0),
    )


def three_tx_scene() -> Scene:
    return Scene(
        transmitters=(Point2D(-100.0, 0.0), Point2D(100.0, 0.0), Point2D(0.0, 100.0)),
        cu_receivers=(Point2D(-80.0, 20.0), Point2D(80.0, 20.0), Point2D(0.0, 80.0)),
        sensing_receivers=(Point2D(-100.0, 50.0), Point2D(100.0, 50.0)),
        target=Point2D(0.0, 50.0),
    )


def make_spec(m: int, gamma_db: float, tau: float) -> ProblemSpec:
    return ProblemSpec(sinr_thresholds=np.full(m, 10.0 ** (gamma_db / 10.0)),
                       crlb_ceiling=tau)


@pytest.fixture
def default_channel_cfg() -> ChannelConfig:
    return ChannelConfig(seed=0)
