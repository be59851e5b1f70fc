"""Two-link acrobot swing-up with torque on both joints and viscous damping.

Latent state (theta1, theta2, theta1_dot, theta2_dot); theta1 is the first
link's angle from hanging, theta2 the second link's angle relative to the
first. Observation (sin t1, cos t1, sin t2, cos t2, t1_dot, t2_dot). Dynamics
parameters: link masses m1, m2, link lengths l1, l2, joint dampings b1, b2.
Links are uniform rods (COM at l/2, inertia m l^2 / 12 about the COM).
"""

from __future__ import annotations

import numpy as np

from adrbench.envs.base import GRAVITY, VELOCITY_LIMIT

NAME = "acrobot"
LATENT_DIM = 4
OBS_DIM = 6
ACT_DIM = 2
XI_NAMES = ("mass_1", "mass_2", "length_1", "length_2", "damping_1", "damping_2")
XI_UNITS = ("kg", "kg", "m", "m", "N.m.s", "N.m.s")
REST = np.array([0.0, 0.0, 0.0, 0.0])  # both links hanging down
ANGLE_DIMS = (0, 1)


def _mass_terms(theta2, xi):
    m1, m2 = xi[..., 0], xi[..., 1]
    l1, l2 = xi[..., 2], xi[..., 3]
    lc1, lc2 = 0.5 * l1, 0.5 * l2
    i1 = m1 * l1 * l1 / 12.0
    i2 = m2 * l2 * l2 / 12.0
    cos2 = np.cos(theta2)
    d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2.0 * l1 * lc2 * cos2) + i1 + i2
    d2 = m2 * (lc2**2 + l1 * lc2 * cos2) + i2
    d3 = m2 * lc2**2 + i2
    return d1, d2, d3


def accel(pos, vel, act, xi):
    theta1, theta2 = pos[..., 0], pos[..., 1]
    w1, w2 = vel[..., 0], vel[..., 1]
    tau1, tau2 = act[..., 0], act[..., 1]
    m1, m2 = xi[..., 0], xi[..., 1]
    l1, l2 = xi[..., 2], xi[..., 3]
    b1, b2 = xi[..., 4], xi[..., 5]
    lc1, lc2 = 0.5 * l1, 0.5 * l2

    d1, d2, d3 = _mass_terms(theta2, xi)
    h = m2 * l1 * lc2 * np.sin(theta2)
    c1 = -h * w2**2 - 2.0 * h * w1 * w2
    c2 = h * w1**2
    g1 = (m1 * lc1 + m2 * l1) * GRAVITY * np.sin(theta1) + m2 * lc2 * GRAVITY * np.sin(
        theta1 + theta2
    )
    g2 = m2 * lc2 * GRAVITY * np.sin(theta1 + theta2)

    r1 = tau1 - b1 * w1 - c1 - g1
    r2 = tau2 - b2 * w2 - c2 - g2
    det = d1 * d3 - d2 * d2
    acc1 = (d3 * r1 - d2 * r2) / det
    acc2 = (d1 * r2 - d2 * r1) / det
    return np.stack([acc1, acc2], axis=-1)


def observe(latent):
    t1, t2 = latent[..., 0], latent[..., 1]
    return np.stack(
        [np.sin(t1), np.cos(t1), np.sin(t2), np.cos(t2), latent[..., 2], latent[..., 3]],
        axis=-1,
    )


def reward(latent, act):
    t1, t2 = latent[..., 0], latent[..., 1]
    height = (2.0 - np.cos(t1) - np.cos(t1 + t2)) / 4.0  # 0 hanging, 1 upright
    return height - 0.001 * (act[..., 0] ** 2 + act[..., 1] ** 2)


def energy(latent, xi):
    """Mechanical energy; conserved when dampings and torques are zero."""
    t1, t2 = latent[..., 0], latent[..., 1]
    w1, w2 = latent[..., 2], latent[..., 3]
    m1, m2 = xi[..., 0], xi[..., 1]
    l1, l2 = xi[..., 2], xi[..., 3]
    lc1, lc2 = 0.5 * l1, 0.5 * l2
    d1, d2, d3 = _mass_terms(t2, xi)
    kinetic = 0.5 * (d1 * w1**2 + 2.0 * d2 * w1 * w2 + d3 * w2**2)
    potential = -GRAVITY * ((m1 * lc1 + m2 * l1) * np.cos(t1) + m2 * lc2 * np.cos(t1 + t2))
    return kinetic + potential


def failed(latent):
    return (np.abs(latent[..., 2]) > VELOCITY_LIMIT) | (
        np.abs(latent[..., 3]) > VELOCITY_LIMIT
    )
