"""Shared closed-form test trajectory: sinusoidal translation plus
fixed-axis sinusoidal attitude, with analytic derivatives. Serves as the
continuous signal behind fine-step and pose-composition oracles."""

import numpy as np

from dynafuse import so3
from dynafuse.imu import ImuBias, ImuSample, WorldState, gravity_w

AXIS = np.array([0.3, -0.5, 0.8]) / np.linalg.norm([0.3, -0.5, 0.8])
R0 = so3.exp_so3(np.array([0.1, 0.2, -0.3]))


def truth_state(t):
    """Returns (R_wb, p, v, a_w, w_b) at time t."""
    theta = 0.4 * np.sin(1.3 * t)
    theta_dot = 0.4 * 1.3 * np.cos(1.3 * t)
    r_wb = R0 @ so3.exp_so3(AXIS * theta)
    w_b = AXIS * theta_dot
    p = np.array([np.sin(1.1 * t), 0.5 * np.cos(0.9 * t), 0.2 * t])
    v = np.array([1.1 * np.cos(1.1 * t), -0.45 * np.sin(0.9 * t), 0.2])
    a = np.array([-1.21 * np.sin(1.1 * t), -0.405 * np.cos(0.9 * t), 0.0])
    return r_wb, p, v, a, w_b


def truth_samples(rate, duration, bias=None):
    """Noise-free IMU stream from the closed-form trajectory."""
    bias = bias or ImuBias()
    g = gravity_w()
    out = []
    for t in np.arange(0.0, duration + 0.5 / rate, 1.0 / rate):
        r_wb, _, _, a_w, w_b = truth_state(t)
        out.append(ImuSample(t, w_b + bias.b_w, r_wb.T @ (a_w + g) + bias.b_a))
    return out


def truth_world_state(t):
    r_wb, p, v, _, _ = truth_state(t)
    return WorldState(p, v, so3.quat_from_rot(r_wb), gravity_w(), t)
