"""Cart-pole swing-up with viscous cart and joint friction.

Latent state (x, theta, x_dot, theta_dot) with theta measured from upright;
observation (x, x_dot, sin theta, cos theta, theta_dot). Dynamics parameters:
cart mass M, pole mass m, pole length L (uniform rod, pivot at one end),
viscous cart friction f_c, viscous joint friction f_j. Equations follow the
classic cart-pole derivation with the Coulomb track friction replaced by a
viscous term.
"""

from __future__ import annotations

import numpy as np

from adrbench.envs.base import GRAVITY, POSITION_LIMIT, VELOCITY_LIMIT

NAME = "cartpole"
LATENT_DIM = 4
OBS_DIM = 5
ACT_DIM = 1
XI_NAMES = ("cart_mass", "pole_mass", "pole_length", "cart_friction", "joint_friction")
XI_UNITS = ("kg", "kg", "m", "N.s/m", "N.m.s")
REST = np.array([0.0, np.pi, 0.0, 0.0])  # pole hanging below a centered cart
ANGLE_DIMS = (1,)


def accel(pos, vel, act, xi):
    theta = pos[..., 1]
    x_dot = vel[..., 0]
    theta_dot = vel[..., 1]
    force = act[..., 0]
    cart_m = xi[..., 0]
    pole_m = xi[..., 1]
    half_len = 0.5 * xi[..., 2]  # equations use the half-length (COM offset)
    f_cart = xi[..., 3]
    f_joint = xi[..., 4]

    total_m = cart_m + pole_m
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    eff_force = force - f_cart * x_dot
    num = (
        GRAVITY * sin_t
        + cos_t * (-eff_force - pole_m * half_len * theta_dot**2 * sin_t) / total_m
        - f_joint * theta_dot / (pole_m * half_len)
    )
    den = half_len * (4.0 / 3.0 - pole_m * cos_t**2 / total_m)
    theta_acc = num / den
    x_acc = (
        eff_force + pole_m * half_len * (theta_dot**2 * sin_t - theta_acc * cos_t)
    ) / total_m
    return np.stack([x_acc, theta_acc], axis=-1)


def observe(latent):
    x = latent[..., 0]
    theta = latent[..., 1]
    x_dot = latent[..., 2]
    theta_dot = latent[..., 3]
    return np.stack([x, x_dot, np.sin(theta), np.cos(theta), theta_dot], axis=-1)


def reward(latent, act):
    x = latent[..., 0]
    theta = latent[..., 1]
    force = act[..., 0]
    height = 0.5 * (1.0 + np.cos(theta))  # 1 upright, 0 hanging
    return height - 0.005 * x**2 - 0.001 * force**2


def energy(latent, xi):
    """Mechanical energy; conserved when both frictions and the force are zero."""
    theta = latent[..., 1]
    x_dot = latent[..., 2]
    theta_dot = latent[..., 3]
    cart_m = xi[..., 0]
    pole_m = xi[..., 1]
    half_len = 0.5 * xi[..., 2]
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    com_vx = x_dot + half_len * theta_dot * cos_t
    com_vy = -half_len * theta_dot * sin_t
    kinetic = (
        0.5 * cart_m * x_dot**2
        + 0.5 * pole_m * (com_vx**2 + com_vy**2)
        + 0.5 * (pole_m * half_len**2 / 3.0) * theta_dot**2
    )
    potential = pole_m * GRAVITY * half_len * cos_t
    return kinetic + potential


def failed(latent):
    return (
        (np.abs(latent[..., 0]) > POSITION_LIMIT)
        | (np.abs(latent[..., 2]) > VELOCITY_LIMIT)
        | (np.abs(latent[..., 3]) > VELOCITY_LIMIT)
    )
