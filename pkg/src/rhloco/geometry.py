"""Rotation and SE(2) helpers shared across the library.

Orientation convention: ZYX Euler angles theta = (roll, pitch, yaw) with
R = Rz(yaw) @ Ry(pitch) @ Rx(roll). Angular velocities are world-frame.
The Euler-rate map is singular at pitch = +-pi/2; conversions reject states
within PITCH_SINGULARITY_TOL of it.
"""

import numpy as np

PITCH_SINGULARITY_TOL = 1e-3


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    return np.arctan2(np.sin(a), np.cos(a))


def rot_z(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_rot(theta) -> np.ndarray:
    """Rotation matrix from ZYX Euler angles (roll, pitch, yaw)."""
    r, p, y = theta
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def euler_to_rot_batch(thetas: np.ndarray) -> np.ndarray:
    """Vectorized euler_to_rot for an (N, 3) array; returns (N, 3, 3)."""
    r, p, y = thetas[:, 0], thetas[:, 1], thetas[:, 2]
    cr, sr = np.cos(r), np.sin(r)
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    out = np.empty((thetas.shape[0], 3, 3))
    out[:, 0, 0] = cy * cp
    out[:, 0, 1] = cy * sp * sr - sy * cr
    out[:, 0, 2] = cy * sp * cr + sy * sr
    out[:, 1, 0] = sy * cp
    out[:, 1, 1] = sy * sp * sr + cy * cr
    out[:, 1, 2] = sy * sp * cr - cy * sr
    out[:, 2, 0] = -sp
    out[:, 2, 1] = cp * sr
    out[:, 2, 2] = cp * cr
    return out


def euler_rate_matrix(theta) -> np.ndarray:
    """Matrix C with omega_world = C(theta) @ theta_dot.

    Columns are the world-frame axes about which each Euler rate acts.
    C depends only on pitch and yaw; det(C) = cos(pitch).
    """
    _, p, y = theta
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    return np.array([
        [cy * cp, -sy, 0.0],
        [sy * cp, cy, 0.0],
        [-sp, 0.0, 1.0],
    ])


def euler_rate_matrix_batch(thetas: np.ndarray) -> np.ndarray:
    """Vectorized euler_rate_matrix for (N, 3) angles; returns (N, 3, 3)."""
    p, y = thetas[:, 1], thetas[:, 2]
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    out = np.zeros((thetas.shape[0], 3, 3))
    out[:, 0, 0] = cy * cp
    out[:, 0, 1] = -sy
    out[:, 1, 0] = sy * cp
    out[:, 1, 1] = cy
    out[:, 2, 0] = -sp
    out[:, 2, 2] = 1.0
    return out


def euler_rate_matrix_dot_batch(thetas: np.ndarray, theta_dots: np.ndarray) -> np.ndarray:
    """Time derivative of the Euler-rate matrix along (theta(t), theta_dot(t))."""
    p, y = thetas[:, 1], thetas[:, 2]
    pd, yd = theta_dots[:, 1], theta_dots[:, 2]
    cp, sp = np.cos(p), np.sin(p)
    cy, sy = np.cos(y), np.sin(y)
    out = np.zeros((thetas.shape[0], 3, 3))
    out[:, 0, 0] = -cy * sp * pd - sy * cp * yd
    out[:, 0, 1] = -cy * yd
    out[:, 1, 0] = -sy * sp * pd + cy * cp * yd
    out[:, 1, 1] = -sy * yd
    out[:, 2, 0] = -cp * pd
    return out


def check_pitch_regular(pitch: float) -> None:
    """Reject orientations too close to the Euler-rate singularity."""
    if abs(abs(pitch) - np.pi / 2.0) < PITCH_SINGULARITY_TOL:
        raise ValueError(
            f"pitch {pitch:.6f} rad is within {PITCH_SINGULARITY_TOL} of the "
            "Euler-rate singularity at +-pi/2"
        )


def omega_to_euler_rate(theta, omega) -> np.ndarray:
    """Invert the Euler-rate map: theta_dot from world angular velocity."""
    check_pitch_regular(theta[1])
    return np.linalg.solve(euler_rate_matrix(theta), np.asarray(omega, dtype=float))


def omega_to_euler_rate_batch(thetas: np.ndarray, omegas: np.ndarray) -> np.ndarray:
    p = thetas[:, 1]
    if np.any(np.abs(np.abs(p) - np.pi / 2.0) < PITCH_SINGULARITY_TOL):
        raise ValueError("pitch within tolerance of the Euler-rate singularity")
    return np.linalg.solve(euler_rate_matrix_batch(thetas), omegas[..., None])[..., 0]


def se2_apply(pose, xy):
    """Apply SE(2) pose (x, y, yaw) to 2D point(s)."""
    x, y, yaw = pose
    c, s = np.cos(yaw), np.sin(yaw)
    xy = np.asarray(xy, dtype=float)
    out = np.empty_like(xy)
    out[..., 0] = x + c * xy[..., 0] - s * xy[..., 1]
    out[..., 1] = y + s * xy[..., 0] + c * xy[..., 1]
    return out


def se2_into_frame(pose, xy):
    """Express world 2D point(s) in the frame of SE(2) pose (x, y, yaw)."""
    x, y, yaw = pose
    c, s = np.cos(yaw), np.sin(yaw)
    xy = np.asarray(xy, dtype=float)
    dx = xy[..., 0] - x
    dy = xy[..., 1] - y
    out = np.empty_like(xy)
    out[..., 0] = c * dx + s * dy
    out[..., 1] = -s * dx + c * dy
    return out


def rotate_xy(yaw: float, vec):
    """Rotate 2D or 3D vector(s) about the z axis (z component untouched)."""
    c, s = np.cos(yaw), np.sin(yaw)
    vec = np.asarray(vec, dtype=float)
    out = vec.copy()
    out[..., 0] = c * vec[..., 0] - s * vec[..., 1]
    out[..., 1] = s * vec[..., 0] + c * vec[..., 1]
    return out
