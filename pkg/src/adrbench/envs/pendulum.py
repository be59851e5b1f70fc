"""Torque-limited pendulum swing-up.

Latent state (theta, theta_dot) with theta measured from upright and wrapped
to (-pi, pi]; observation (cos theta, sin theta, theta_dot). Dynamics
parameters: rod mass m, rod length l, viscous joint damping b. The rod pivots
at one end (inertia m l^2 / 3 about the pivot, center of mass at l/2).
"""

from __future__ import annotations

import numpy as np

from adrbench.envs.base import GRAVITY, VELOCITY_LIMIT, wrap_angle

NAME = "pendulum"
LATENT_DIM = 2
OBS_DIM = 3
ACT_DIM = 1
XI_NAMES = ("mass", "length", "damping")
XI_UNITS = ("kg", "m", "N.m.s")
REST = np.array([np.pi, 0.0])  # hanging straight down
ANGLE_DIMS = (0,)


def accel(pos, vel, act, xi):
    theta = pos[..., 0]
    theta_dot = vel[..., 0]
    torque = act[..., 0]
    m, l, b = xi[..., 0], xi[..., 1], xi[..., 2]
    theta_acc = (3.0 * GRAVITY / (2.0 * l)) * np.sin(theta) + 3.0 / (m * l * l) * (
        torque - b * theta_dot
    )
    return theta_acc[..., None]


def observe(latent):
    theta = latent[..., 0]
    theta_dot = latent[..., 1]
    return np.stack([np.cos(theta), np.sin(theta), theta_dot], axis=-1)


def reward(latent, act):
    theta = wrap_angle(latent[..., 0])
    theta_dot = latent[..., 1]
    torque = act[..., 0]
    return -(theta**2 + 0.1 * theta_dot**2 + 0.001 * torque**2)


def energy(latent, xi):
    """Mechanical energy; conserved when damping and torque are zero."""
    theta = latent[..., 0]
    theta_dot = latent[..., 1]
    m, l = xi[..., 0], xi[..., 1]
    kinetic = (m * l * l / 6.0) * theta_dot**2
    potential = (m * GRAVITY * l / 2.0) * np.cos(theta)
    return kinetic + potential


def failed(latent):
    return np.abs(latent[..., 1]) > VELOCITY_LIMIT
