"""Rotation-group primitives: skew matrices, exp/log maps, left Jacobian,
and Hamilton quaternions.

Conventions used throughout the package:

* Rotation vectors (so(3) coordinates) are shape-(3,) arrays in radians;
  the canonical representative returned by ``log_so3`` has norm <= pi.
* Rotation matrices are shape-(3,3), world-from-body style: ``R_ab`` maps
  coordinates of a vector from frame ``b`` into frame ``a``.
* Quaternions are shape-(4,) arrays stored ``(w, x, y, z)``, Hamilton
  product, unit norm, hemisphere-canonicalized (w >= 0) after
  normalization.

All functions are pure and allocate their outputs; they are safe to call
concurrently.
"""

from __future__ import annotations

import numpy as np

# Below this angle the closed forms degenerate (0/0) and series expansions
# are used instead.
SMALL_ANGLE = 1e-6

_ORTHONORMAL_TOL = 1e-6


def hat(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix of ``v`` such that ``hat(v) @ u == cross(v, u)``."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`hat` for an antisymmetric matrix."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def exp_so3(phi: np.ndarray) -> np.ndarray:
    """Rodrigues exponential map from a rotation vector to a rotation matrix."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    k = hat(phi)
    if theta < SMALL_ANGLE:
        # 2nd-order series; truncation error ~ theta^3 / 6.
        return np.eye(3) + k + 0.5 * (k @ k)
    s = np.sin(theta) / theta
    c = (1.0 - np.cos(theta)) / theta**2
    return np.eye(3) + s * k + c * (k @ k)


def _check_rotation(r: np.ndarray, what: str) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise ValueError(f"{what}: expected a 3x3 matrix, got shape {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError(f"{what}: matrix has non-finite entries")
    err = np.max(np.abs(r.T @ r - np.eye(3)))
    if err > _ORTHONORMAL_TOL or abs(np.linalg.det(r) - 1.0) > _ORTHONORMAL_TOL:
        raise ValueError(f"{what}: matrix is not a rotation (orthonormality error {err:.2e})")
    return r


def quat_from_rot(r: np.ndarray) -> np.ndarray:
    """Quaternion of a rotation matrix (Shepperd branch selection).

    The branch is chosen from the largest of trace/diagonal entries, which
    keeps the conversion stable at all rotation angles. Rejects
    non-orthonormal input.
    """
    r = _check_rotation(r, "quat_from_rot")
    t = np.trace(r)
    if t > r[0, 0] and t > r[1, 1] and t > r[2, 2]:
        s = np.sqrt(1.0 + t) * 2.0
        q = np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = np.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
        )
    elif r[1, 1] > r[2, 2]:
        s = np.sqrt(1.0 - r[0, 0] + r[1, 1] - r[2, 2]) * 2.0
        q = np.array(
            [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[2, 1] + r[1, 2]) / s]
        )
    else:
        s = np.sqrt(1.0 - r[0, 0] - r[1, 1] + r[2, 2]) * 2.0
        q = np.array(
            [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[2, 1] + r[1, 2]) / s, 0.25 * s]
        )
    return quat_normalize(q)


def rot_from_quat(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion ``(w, x, y, z)``."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def log_so3(r: np.ndarray) -> np.ndarray:
    """Rotation vector of a rotation matrix, canonical branch (norm <= pi).

    Goes through the quaternion form, which is stable both near the
    identity and near half-turn rotations. Non-orthonormal input raises
    ``ValueError``.
    """
    return quat_log(quat_from_rot(r))


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a (x) b``."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Unit-norm, hemisphere-canonical (w >= 0) representative of ``q``."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize a zero or non-finite quaternion")
    q = q / n
    if q[0] < 0.0:
        q = -q
    return q


def quat_exp(phi: np.ndarray) -> np.ndarray:
    """Unit quaternion of the rotation vector ``phi`` (exact exponential)."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    half = 0.5 * theta
    if theta < SMALL_ANGLE:
        gain = 0.5 - theta**2 / 48.0  # sin(t/2)/t series
    else:
        gain = np.sin(half) / theta
    return np.concatenate(([np.cos(half)], gain * phi))


def quat_log(q: np.ndarray) -> np.ndarray:
    """Rotation vector of a unit quaternion, canonical branch (norm <= pi)."""
    q = quat_normalize(q)
    w = q[0]
    vec = q[1:]
    n = np.linalg.norm(vec)
    if n < SMALL_ANGLE:
        # theta/sin(theta/2) ~ 2/w for small angles; 2nd-order correction.
        return vec * (2.0 / w) * (1.0 - n**2 / (3.0 * w**2))
    theta = 2.0 * np.arctan2(n, w)
    return vec * (theta / n)


def quat_integrate(q: np.ndarray, w: np.ndarray, dt: float) -> np.ndarray:
    """Advance ``q`` by a constant body rate ``w`` over ``dt`` seconds.

    Exact exponential update ``q (x) exp(w*dt)`` rather than an Euler step
    of the quaternion derivative; the result is renormalized.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return quat_normalize(quat_mul(q, quat_exp(np.asarray(w, dtype=float) * dt)))


def left_jacobian(phi: np.ndarray) -> np.ndarray:
    """Left Jacobian of SO(3): integral of ``exp(s*hat(phi))`` over s in [0,1]."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    k = hat(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) + 0.5 * k + (k @ k) / 6.0
    a = (1.0 - np.cos(theta)) / theta**2
    b = (theta - np.sin(theta)) / theta**3
    return np.eye(3) + a * k + b * (k @ k)


def left_jacobian_inv(phi: np.ndarray) -> np.ndarray:
    """Closed-form inverse of the SO(3) left Jacobian; valid for norm < 2*pi."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi)
    if theta >= 2.0 * np.pi:
        raise ValueError(f"left_jacobian_inv undefined at |phi| = {theta:.6f} >= 2*pi")
    k = hat(phi)
    if theta < SMALL_ANGLE:
        coeff = 1.0 / 12.0 + theta**2 / 720.0
    else:
        coeff = 1.0 / theta**2 - (1.0 + np.cos(theta)) / (2.0 * theta * np.sin(theta))
    return np.eye(3) - 0.5 * k + coeff * (k @ k)
