"""Shared physical constants and helpers for the benchmark environments."""

from __future__ import annotations

import numpy as np

GRAVITY = 9.81
VELOCITY_LIMIT = 50.0  # |velocity| beyond this ends the episode (failure)
POSITION_LIMIT = 5.0  # cart |x| beyond this ends the episode (failure)


def wrap_angle(theta):
    """Wrap angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)
