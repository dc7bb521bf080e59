"""IMU measurement model, motion-dynamics integration, and preintegration
with conversion to camera-centric ego-motion.

Frames: ``w`` world, ``b`` IMU body, ``c`` camera. ``R_ab`` maps vectors
from frame ``b`` to frame ``a``. Gravity is ``g_w = (0, 0, +9.81)`` so a
stationary accelerometer with identity attitude reads +9.81 on z.

Discretization: per consecutive sample pair, the de-biased gyro average
drives the rotation increment, and the de-biased accel average is rotated
by the mean of the endpoint rotations. This midpoint rule is second-order
accurate and is shared (with identical arithmetic) by
:func:`integrate_dynamics`, :func:`preintegrate`, and the EKF nominal
propagation, so preintegration composes with the start state exactly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from dynafuse import so3

GRAVITY = 9.81


def gravity_w(magnitude: float = GRAVITY) -> np.ndarray:
    """World-frame gravity vector, +z up-convention (see module docstring)."""
    return np.array([0.0, 0.0, magnitude])


@dataclass
class ImuSample:
    """One gyroscope/accelerometer reading: rad/s and m/s^2 at time t (s)."""

    t: float
    w_m: np.ndarray
    a_m: np.ndarray

    def __post_init__(self):
        self.w_m = np.asarray(self.w_m, dtype=float)
        self.a_m = np.asarray(self.a_m, dtype=float)


@dataclass
class ImuBias:
    b_w: np.ndarray = field(default_factory=lambda: np.zeros(3))
    b_a: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.b_w = np.asarray(self.b_w, dtype=float)
        self.b_a = np.asarray(self.b_a, dtype=float)


@dataclass
class ImuNoiseParams:
    """Continuous-time noise densities; discrete per-sample std is sigma*sqrt(rate)."""

    sigma_w: float = 1.7e-4
    sigma_bw: float = 2e-5
    sigma_a: float = 2e-3
    sigma_ba: float = 3e-3

    def __post_init__(self):
        if min(self.sigma_w, self.sigma_bw, self.sigma_a, self.sigma_ba) < 0:
            raise ValueError("noise densities must be non-negative")


@dataclass
class WorldState:
    """World-frame state: position, velocity, attitude quaternion, gravity."""

    p_wb: np.ndarray
    v_w: np.ndarray
    q_wb: np.ndarray
    g_w: np.ndarray = field(default_factory=gravity_w)
    t: float = 0.0

    def __post_init__(self):
        self.p_wb = np.asarray(self.p_wb, dtype=float)
        self.v_w = np.asarray(self.v_w, dtype=float)
        self.q_wb = so3.quat_normalize(np.asarray(self.q_wb, dtype=float))
        self.g_w = np.asarray(self.g_w, dtype=float)

    @property
    def r_wb(self) -> np.ndarray:
        return so3.rot_from_quat(self.q_wb)


@dataclass
class PreintegratedDelta:
    """Relative IMU increments over an image interval, body-i frame.

    ``alpha`` (m) and ``beta`` (m/s) are the double/single integrals of the
    rotated de-biased accelerometer signal; ``q_bibj`` is the relative
    rotation. None of them depend on world velocity, pose, or gravity.
    """

    alpha: np.ndarray
    beta: np.ndarray
    q_bibj: np.ndarray
    dt_total: float

    @property
    def r_bibj(self) -> np.ndarray:
        return so3.rot_from_quat(self.q_bibj)


@dataclass
class Extrinsics:
    """Rigid body-camera transform: ``x_c = R_cb x_b + p_cb``, ``p_cb = -R_cb p_bc``."""

    R_cb: np.ndarray
    p_bc: np.ndarray

    def __post_init__(self):
        self.R_cb = np.asarray(self.R_cb, dtype=float)
        self.p_bc = np.asarray(self.p_bc, dtype=float)

    @property
    def R_bc(self) -> np.ndarray:
        return self.R_cb.T

    @property
    def p_cb(self) -> np.ndarray:
        return -self.R_cb @ self.p_bc

    @classmethod
    def identity(cls) -> "Extrinsics":
        return cls(np.eye(3), np.zeros(3))


@dataclass
class CameraEgoMotion:
    """Relative camera transform ``x_{c_k} = R x_{c_{k+1}} + p``.

    ``cov``, when present, is a 6x6 covariance over (rotation-vector,
    translation) in that order.
    """

    R: np.ndarray
    p: np.ndarray
    cov: np.ndarray | None = None

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float)
        self.p = np.asarray(self.p, dtype=float)

    def inverse(self) -> "CameraEgoMotion":
        return CameraEgoMotion(self.R.T, -self.R.T @ self.p)

    def as_xi(self) -> np.ndarray:
        """(rotation-vector, translation) 6-vector."""
        return np.concatenate([so3.log_so3(self.R), self.p])

    @classmethod
    def from_xi(cls, xi: np.ndarray, cov: np.ndarray | None = None) -> "CameraEgoMotion":
        xi = np.asarray(xi, dtype=float)
        return cls(so3.exp_so3(xi[:3]), xi[3:], cov)


def simulate_measurement(
    state: WorldState,
    a_w: np.ndarray,
    w_b: np.ndarray,
    bias: ImuBias,
    noise: ImuNoiseParams,
    rate: float,
    rng: int | np.random.Generator = 0,
) -> ImuSample:
    """Synthesize one IMU reading from the true world acceleration and body rate.

    ``a_m = R_bw (a_w + g_w) + b_a + n_a`` and ``w_m = w_b + b_w + n_g``
    with discrete noise std ``sigma * sqrt(rate)``. Deterministic given an
    integer seed.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    r_bw = state.r_wb.T
    n_g = rng.normal(0.0, noise.sigma_w * np.sqrt(rate), 3)
    n_a = rng.normal(0.0, noise.sigma_a * np.sqrt(rate), 3)
    w_m = np.asarray(w_b, dtype=float) + bias.b_w + n_g
    a_m = r_bw @ (np.asarray(a_w, dtype=float) + state.g_w) + bias.b_a + n_a
    return ImuSample(state.t, w_m, a_m)


def _check_samples(samples: Sequence[ImuSample], minimum: int) -> None:
    if len(samples) < minimum:
        raise ValueError(f"need at least {minimum} IMU sample(s), got {len(samples)}")
    ts = np.array([s.t for s in samples])
    if np.any(np.diff(ts) <= 0):
        raise ValueError("IMU timestamps must be strictly increasing")


def integrate_dynamics(
    state: WorldState, samples: Sequence[ImuSample], bias: ImuBias
) -> WorldState:
    """Advance a world-frame state through an IMU sample sequence.

    Midpoint rule per consecutive pair after bias removal; gravity is
    subtracted in the world frame.
    """
    _check_samples(samples, 1)
    p = state.p_wb.copy()
    v = state.v_w.copy()
    q = state.q_wb.copy()
    g = state.g_w
    for k in range(len(samples) - 1):
        s0, s1 = samples[k], samples[k + 1]
        dt = s1.t - s0.t
        w_hat = 0.5 * (s0.w_m + s1.w_m) - bias.b_w
        a_hat = 0.5 * (s0.a_m + s1.a_m) - bias.b_a
        q_next = so3.quat_integrate(q, w_hat, dt)
        r_mid = 0.5 * (so3.rot_from_quat(q) + so3.rot_from_quat(q_next))
        a_world = r_mid @ a_hat - g
        p = p + v * dt + 0.5 * a_world * dt * dt
        v = v + a_world * dt
        q = q_next
    return WorldState(p, v, q, g.copy(), samples[-1].t)


def preintegrate(samples: Sequence[ImuSample], bias: ImuBias) -> PreintegratedDelta:
    """Summarize an IMU sequence into relative increments (alpha, beta, q).

    Independent of any world-frame quantity; uses the same midpoint
    discretization as :func:`integrate_dynamics`, so composing the result
    with a start state reproduces the full integration exactly.
    """
    _check_samples(samples, 2)
    alpha = np.zeros(3)
    beta = np.zeros(3)
    q = np.array([1.0, 0.0, 0.0, 0.0])
    for k in range(len(samples) - 1):
        s0, s1 = samples[k], samples[k + 1]
        dt = s1.t - s0.t
        w_hat = 0.5 * (s0.w_m + s1.w_m) - bias.b_w
        a_hat = 0.5 * (s0.a_m + s1.a_m) - bias.b_a
        q_next = so3.quat_integrate(q, w_hat, dt)
        r_mid = 0.5 * (so3.rot_from_quat(q) + so3.rot_from_quat(q_next))
        a_rel = r_mid @ a_hat
        alpha = alpha + beta * dt + 0.5 * a_rel * dt * dt
        beta = beta + a_rel * dt
        q = q_next
    return PreintegratedDelta(alpha, beta, q, samples[-1].t - samples[0].t)


def to_camera_frame(
    delta: PreintegratedDelta,
    ex: Extrinsics,
    v_ck: np.ndarray,
    g_ck: np.ndarray,
) -> CameraEgoMotion:
    """Convert body-frame increments into camera-centric ego-motion.

    ``v_ck`` and ``g_ck`` are the body velocity and gravity expressed in
    the camera frame at the start epoch. No covariance is attached; all
    uncertainty flows through the filter.
    """
    if delta.dt_total <= 0:
        raise ValueError("delta.dt_total must be positive")
    v_ck = np.asarray(v_ck, dtype=float)
    g_ck = np.asarray(g_ck, dtype=float)
    dt = delta.dt_total
    r_rel = ex.R_cb @ delta.r_bibj @ ex.R_bc
    p_rel = (
        ex.R_cb @ delta.alpha
        + r_rel @ ex.R_cb @ ex.p_bc
        - ex.R_cb @ ex.p_bc
        + v_ck * dt
        - 0.5 * g_ck * dt * dt
    )
    return CameraEgoMotion(r_rel, p_rel)


def save_imu_csv(path: str | Path, samples: Sequence[ImuSample]) -> None:
    """Write samples as ``t,wx,wy,wz,ax,ay,az`` rows (s, rad/s, m/s^2)."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "wx", "wy", "wz", "ax", "ay", "az"])
        for s in samples:
            writer.writerow([repr(float(x)) for x in (s.t, *s.w_m, *s.a_m)])


def load_imu_csv(path: str | Path) -> list[ImuSample]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return [ImuSample(row[0], row[1:4], row[4:7]) for row in data]
