"""Camera-centric error-state EKF over IMU motion dynamics.

State (18 error coordinates, block order fixed everywhere):

====  =========  =====================================================
slot  slice      meaning
====  =========  =====================================================
dphi  0:3        right-perturbation of R_ckbt (body-to-camera-k)
dp    3:6        body position in the camera-k frame
dv    6:9        body velocity expressed in camera-k axes
dg    9:12       gravity expressed in camera-k axes
dbw   12:15      gyroscope bias
dba   15:18      accelerometer bias
====  =========  =====================================================

Between camera epochs the filter propagates per IMU interval; at each
epoch it updates from a visual ego-motion observation, emits the fused
relative motion with its 6x6 covariance, and re-anchors the relative
state to the new camera frame. The process noise vector order is
(n_g, n_bw, n_a, n_ba), matching the Q diagonal.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from dynafuse import so3
from dynafuse._kernels import covariance_chain
from dynafuse.imu import CameraEgoMotion, Extrinsics, ImuBias, ImuNoiseParams, ImuSample

PHI = slice(0, 3)
POS = slice(3, 6)
VEL = slice(6, 9)
GRAV = slice(9, 12)
BW = slice(12, 15)
BA = slice(15, 18)

STATE_DIM = 18
NOISE_DIM = 12

_I3 = np.eye(3)


class FilterNumericsError(RuntimeError):
    """Raised when a covariance loses positive definiteness or an
    innovation covariance becomes numerically singular."""


@dataclass
class NominalState:
    """Nominal (deterministically integrated) camera-centric state."""

    R_ckbt: np.ndarray
    p_ckbt: np.ndarray
    v_ck: np.ndarray
    g_ck: np.ndarray
    b_w: np.ndarray
    b_a: np.ndarray
    t: float

    def __post_init__(self):
        self.R_ckbt = np.asarray(self.R_ckbt, dtype=float)
        self.p_ckbt = np.asarray(self.p_ckbt, dtype=float)
        self.v_ck = np.asarray(self.v_ck, dtype=float)
        self.g_ck = np.asarray(self.g_ck, dtype=float)
        self.b_w = np.asarray(self.b_w, dtype=float)
        self.b_a = np.asarray(self.b_a, dtype=float)


@dataclass
class VisualObservation:
    """Visual ego-motion measurement: xi = (rotation-vector, translation),
    with positive-definite 6x6 covariance gamma."""

    xi: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)


@dataclass
class FusedEgoMotion:
    """Fused relative camera motion with its marginal pose covariance."""

    ego: CameraEgoMotion
    posterior_cov6: np.ndarray
    trace_reduction: float
    t: float = 0.0


def symmetrize(p: np.ndarray) -> np.ndarray:
    return 0.5 * (p + p.T)


def check_covariance(p: np.ndarray, tol: float = 1e-9) -> None:
    """Raise FilterNumericsError unless ``p`` is symmetric PSD within tol."""
    if p.shape != (STATE_DIM, STATE_DIM):
        raise FilterNumericsError(f"covariance has shape {p.shape}, expected 18x18")
    asym = np.max(np.abs(p - p.T))
    if asym > tol:
        raise FilterNumericsError(f"covariance asymmetry {asym:.3e} exceeds {tol:.1e}")
    min_eig = float(np.linalg.eigvalsh(p)[0])
    if min_eig < -tol:
        raise FilterNumericsError(f"covariance min eigenvalue {min_eig:.3e} < -{tol:.1e}")


def default_p0() -> np.ndarray:
    """Default initial error covariance (rad^2, m^2, (m/s)^2, (m/s^2)^2, bias^2)."""
    return np.diag(
        np.concatenate(
            [
                np.full(3, 1e-4),
                np.full(3, 1e-4),
                np.full(3, 1e-2),
                np.full(3, 1e-2),
                np.full(3, 1e-6),
                np.full(3, 1e-4),
            ]
        )
    )


def initial_nominal(
    ex: Extrinsics,
    v_ck: np.ndarray,
    g_ck: np.ndarray,
    bias: ImuBias | None = None,
    t: float = 0.0,
) -> NominalState:
    """Anchor state at a camera epoch: body pose equals the extrinsics."""
    bias = bias or ImuBias()
    return NominalState(
        ex.R_cb.copy(), ex.p_cb, np.asarray(v_ck, float), np.asarray(g_ck, float),
        bias.b_w.copy(), bias.b_a.copy(), t,
    )


def build_F(nom: NominalState, sample: ImuSample) -> np.ndarray:
    """Continuous-time error dynamics Jacobian (18x18)."""
    w_bar = sample.w_m - nom.b_w
    r = nom.R_ckbt
    # R^T g + a_bar collapses to the de-biased accelerometer reading.
    a_unbiased = sample.a_m - nom.b_a
    f = np.zeros((STATE_DIM, STATE_DIM))
    f[PHI, PHI] = -so3.hat(w_bar)
    f[PHI, BW] = -_I3
    f[POS, VEL] = _I3
    f[VEL, PHI] = -r @ so3.hat(a_unbiased)
    f[VEL, GRAV] = -_I3
    f[VEL, BA] = -r
    return f


def build_G(nom: NominalState) -> np.ndarray:
    """Noise input Jacobian (18x12); columns ordered (n_g, n_bw, n_a, n_ba)."""
    g = np.zeros((STATE_DIM, NOISE_DIM))
    g[PHI, 0:3] = -_I3
    g[VEL, 6:9] = -nom.R_ckbt
    g[BW, 3:6] = _I3
    g[BA, 9:12] = _I3
    return g


def process_noise(noise: ImuNoiseParams) -> np.ndarray:
    """Continuous process-noise PSD Q (12x12 diagonal)."""
    return np.diag(
        np.concatenate(
            [
                np.full(3, noise.sigma_w**2),
                np.full(3, noise.sigma_bw**2),
                np.full(3, noise.sigma_a**2),
                np.full(3, noise.sigma_ba**2),
            ]
        )
    )


def transition_matrix(f: np.ndarray, dt: float) -> np.ndarray:
    """Second-order transition matrix ``I + F dt + 0.5 F^2 dt^2``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return np.eye(f.shape[0]) + f * dt + 0.5 * (f @ f) * dt * dt


def _advance_nominal(nom: NominalState, sample: ImuSample, dt: float) -> NominalState:
    # The sample carries interval-average measurements; same midpoint rule
    # as imu.integrate_dynamics.
    w_hat = sample.w_m - nom.b_w
    a_hat = sample.a_m - nom.b_a
    r_next = nom.R_ckbt @ so3.exp_so3(w_hat * dt)
    a_ck = 0.5 * (nom.R_ckbt + r_next) @ a_hat - nom.g_ck
    p_next = nom.p_ckbt + nom.v_ck * dt + 0.5 * a_ck * dt * dt
    v_next = nom.v_ck + a_ck * dt
    return replace(nom, R_ckbt=r_next, p_ckbt=p_next, v_ck=v_next, t=nom.t + dt)


def propagate(
    p: np.ndarray,
    nom: NominalState,
    sample: ImuSample,
    dt: float,
    noise: ImuNoiseParams,
) -> tuple[NominalState, np.ndarray]:
    """One propagation step over ``dt`` seconds.

    ``sample`` holds the interval-average gyro/accel measurements. The
    covariance follows ``P <- Phi P Phi^T + Phi G Q G^T Phi^T dt`` and is
    re-symmetrized. Rejects non-PSD input covariance.
    """
    check_covariance(p)
    f = build_F(nom, sample)
    phi = transition_matrix(f, dt)
    g = build_G(nom)
    qd = phi @ (g @ process_noise(noise) @ g.T) @ phi.T * dt
    p_next = symmetrize(phi @ p @ phi.T + qd)
    return _advance_nominal(nom, sample, dt), p_next


def observation_h(nom: NominalState, ex: Extrinsics) -> np.ndarray:
    """Predicted visual observation: relative camera rotation vector and
    translation implied by the current nominal state."""
    r_rel = nom.R_ckbt @ ex.R_bc
    phi_rel = so3.log_so3(r_rel)
    p_rel = nom.R_ckbt @ ex.p_bc + nom.p_ckbt
    return np.concatenate([phi_rel, p_rel])


def observation_H(nom: NominalState, ex: Extrinsics) -> np.ndarray:
    """Observation Jacobian (6x18); only the pose columns are non-zero."""
    phi_rel = so3.log_so3(nom.R_ckbt @ ex.R_bc)
    h = np.zeros((6, STATE_DIM))
    h[0:3, PHI] = so3.left_jacobian_inv(-phi_rel) @ ex.R_cb
    h[3:6, PHI] = -nom.R_ckbt @ so3.hat(ex.p_bc)
    h[3:6, POS] = _I3
    return h


def _pose_cov6(nom: NominalState, ex: Extrinsics, p: np.ndarray) -> np.ndarray:
    h6 = observation_H(nom, ex)[:, 0:6]
    return symmetrize(h6 @ p[0:6, 0:6] @ h6.T)


def _ego_from_nominal(nom: NominalState, ex: Extrinsics) -> CameraEgoMotion:
    return CameraEgoMotion(nom.R_ckbt @ ex.R_bc, nom.R_ckbt @ ex.p_bc + nom.p_ckbt)


def update(
    p: np.ndarray,
    nom: NominalState,
    obs: VisualObservation,
    ex: Extrinsics,
) -> tuple[FusedEgoMotion, NominalState, np.ndarray]:
    """EKF update from a visual ego-motion observation.

    The rotation residual is formed on the manifold,
    ``J_l(-phi_bar)^{-1} log(exp(phi_bar)^{-1} exp(phi_obs))``, which agrees
    with plain subtraction to first order and matches the linearization of
    :func:`observation_H`. The posterior covariance uses the Joseph form
    (equal to ``(I - K H) P`` at the optimal gain).
    """
    gamma = symmetrize(obs.gamma)
    if float(np.linalg.eigvalsh(gamma)[0]) <= 0.0:
        raise ValueError("observation covariance gamma must be positive definite")

    h_pred = observation_h(nom, ex)
    h_mat = observation_H(nom, ex)
    s = symmetrize(h_mat @ p @ h_mat.T + gamma)
    cond = float(np.linalg.cond(s))
    if not np.isfinite(cond) or cond > 1e14:
        raise FilterNumericsError(
            f"singular innovation covariance (condition number {cond:.3e})"
        )
    k_gain = p @ h_mat.T @ np.linalg.inv(s)

    phi_bar = h_pred[:3]
    resid_rot = so3.left_jacobian_inv(-phi_bar) @ so3.log_so3(
        so3.exp_so3(phi_bar).T @ so3.exp_so3(obs.xi[:3])
    )
    resid = np.concatenate([resid_rot, obs.xi[3:] - h_pred[3:]])
    dx = k_gain @ resid

    nom_up = replace(
        nom,
        R_ckbt=nom.R_ckbt @ so3.exp_so3(dx[PHI]),
        p_ckbt=nom.p_ckbt + dx[POS],
        v_ck=nom.v_ck + dx[VEL],
        g_ck=nom.g_ck + dx[GRAV],
        b_w=nom.b_w + dx[BW],
        b_a=nom.b_a + dx[BA],
    )

    ikh = np.eye(STATE_DIM) - k_gain @ h_mat
    p_up = symmetrize(ikh @ p @ ikh.T + k_gain @ gamma @ k_gain.T)

    cov6 = _pose_cov6(nom_up, ex, p_up)
    ego = _ego_from_nominal(nom_up, ex)
    ego.cov = cov6
    fused = FusedEgoMotion(ego, cov6, float(np.trace(p) - np.trace(p_up)), nom_up.t)
    return fused, nom_up, p_up


def _reset_at_epoch(
    nom: NominalState, p: np.ndarray, ego: CameraEgoMotion, ex: Extrinsics
) -> tuple[NominalState, np.ndarray]:
    """Re-anchor the relative state to the new camera frame.

    The body-to-camera transform at the epoch is exactly the extrinsics,
    so the pose error restarts at zero. Velocity and gravity are rotated
    into the new frame; their errors pick up a coupling with the relative
    rotation error, dv_new = R^T dv + hat(R^T v) R_cb dphi, which the
    covariance transform tracks exactly to first order.
    """
    rot = ego.R.T
    v_new = rot @ nom.v_ck
    g_new = rot @ nom.g_ck
    j = np.zeros((STATE_DIM, STATE_DIM))
    j[VEL, VEL] = rot
    j[VEL, PHI] = so3.hat(v_new) @ ex.R_cb
    j[GRAV, GRAV] = rot
    j[GRAV, PHI] = so3.hat(g_new) @ ex.R_cb
    j[BW, BW] = _I3
    j[BA, BA] = _I3
    p_new = symmetrize(j @ p @ j.T)
    nom_new = NominalState(
        ex.R_cb.copy(), ex.p_cb, v_new, g_new, nom.b_w.copy(), nom.b_a.copy(), nom.t
    )
    return nom_new, p_new


def _propagate_interval(
    nom: NominalState,
    p: np.ndarray,
    samples: Sequence[ImuSample],
    noise: ImuNoiseParams,
) -> tuple[NominalState, np.ndarray]:
    """Propagate across consecutive raw samples; covariance recursion runs
    through the compiled kernel."""
    steps = len(samples) - 1
    if steps == 0:
        return nom, p
    q = process_noise(noise)
    phis = np.empty((steps, STATE_DIM, STATE_DIM))
    qds = np.empty((steps, STATE_DIM, STATE_DIM))
    for k in range(steps):
        s0, s1 = samples[k], samples[k + 1]
        dt = s1.t - s0.t
        avg = ImuSample(s0.t, 0.5 * (s0.w_m + s1.w_m), 0.5 * (s0.a_m + s1.a_m))
        f = build_F(nom, avg)
        phi = transition_matrix(f, dt)
        g = build_G(nom)
        phis[k] = phi
        qds[k] = phi @ (g @ q @ g.T) @ phi.T * dt
        nom = _advance_nominal(nom, avg, dt)
    p_new = covariance_chain(phis, qds, p)[-1]
    return nom, p_new


def run_filter(
    imu_samples: Sequence[ImuSample],
    observations: Sequence[VisualObservation | None],
    cam_times: Sequence[float],
    ex: Extrinsics,
    init: NominalState,
    p0: np.ndarray,
    noise: ImuNoiseParams,
) -> list[FusedEgoMotion]:
    """Run the full propagate/update/re-anchor cycle over an episode.

    ``cam_times`` are the camera epochs (must coincide with IMU sample
    times); ``observations[k]`` is consumed at ``cam_times[k+1]`` and may
    be None to skip the update (pure preintegrated ego-motion is emitted).
    Returns one FusedEgoMotion per camera interval.
    """
    if len(imu_samples) == 0 or len(cam_times) < 2:
        raise ValueError("need IMU samples and at least two camera epochs")
    if len(observations) != len(cam_times) - 1:
        raise ValueError(
            f"expected {len(cam_times) - 1} observations for {len(cam_times)} epochs, "
            f"got {len(observations)}"
        )
    imu_t = np.array([s.t for s in imu_samples])
    idx = []
    for tc in cam_times:
        i = int(np.argmin(np.abs(imu_t - tc)))
        if abs(imu_t[i] - tc) > 1e-9:
            raise ValueError(f"camera epoch {tc} does not coincide with any IMU sample")
        idx.append(i)

    check_covariance(p0)
    nom = init
    p = np.array(p0, dtype=float)
    out: list[FusedEgoMotion] = []
    for k in range(len(cam_times) - 1):
        window = imu_samples[idx[k] : idx[k + 1] + 1]
        nom, p = _propagate_interval(nom, p, window, noise)
        obs = observations[k]
        if obs is None:
            ego = _ego_from_nominal(nom, ex)
            cov6 = _pose_cov6(nom, ex, p)
            ego.cov = cov6
            fused = FusedEgoMotion(ego, cov6, 0.0, nom.t)
        else:
            fused, nom, p = update(p, nom, obs, ex)
        out.append(fused)
        nom, p = _reset_at_epoch(nom, p, fused.ego, ex)
    return out


def nees_6dof(fused: FusedEgoMotion, true_ego: CameraEgoMotion) -> float:
    """Normalized estimation error squared of the fused relative pose.

    Uses the same residual convention as the update step, so a consistent
    filter yields E[NEES] = 6.
    """
    phi_hat = so3.log_so3(fused.ego.R)
    e_rot = so3.left_jacobian_inv(-phi_hat) @ so3.log_so3(fused.ego.R.T @ true_ego.R)
    e = np.concatenate([e_rot, true_ego.p - fused.ego.p])
    return float(e @ np.linalg.solve(fused.posterior_cov6, e))


def export_trace_csv(
    path: str | Path,
    results: Sequence[FusedEgoMotion],
    true_egos: Sequence[CameraEgoMotion] | None = None,
) -> None:
    """Write per-epoch rows ``k, phi_xyz, p_xyz, trace_P, nees``.

    ``trace_P`` is the trace of the 6x6 posterior pose covariance; the
    ``nees`` column is empty unless ground-truth ego-motions are given.
    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["k", "phi_x", "phi_y", "phi_z", "p_x", "p_y", "p_z", "trace_P", "nees"]
        )
        for k, fused in enumerate(results):
            phi = so3.log_so3(fused.ego.R)
            nees = "" if true_egos is None else repr(nees_6dof(fused, true_egos[k]))
            writer.writerow(
                [k]
                + [repr(float(x)) for x in phi]
                + [repr(float(x)) for x in fused.ego.p]
                + [repr(float(np.trace(fused.posterior_cov6))), nees]
            )
