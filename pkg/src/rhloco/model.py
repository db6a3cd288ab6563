"""Robot parameters, single-rigid-body dynamics residual, and foot range-of-motion
geometry.

The robot is modeled as one rigid body with massless legs applying point contact
forces. The foot workspace around each hip is a superquadric
|x/A|^a + |y/B|^b + |z/C|^c <= 1, a rounded-box shape that avoids the yaw-happy
behavior a plain box promotes.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import check_pitch_regular, euler_to_rot

N_FEET = 4
FOOT_NAMES = ("LF", "RF", "LH", "RH")

GRAVITY = 9.81


@dataclass(frozen=True)
class Superquadric:
    """Foot range-of-motion shape in the hip frame.

    exponents (a, b, c) control curvature (>= 2, 2 gives an ellipsoid);
    scalings (A, B, C) are the semi-axes in meters; center_offset is the
    body-frame offset of the shape center from the hip.
    """

    exponents: tuple = (4.0, 4.0, 4.0)
    scalings: tuple = (0.24, 0.18, 0.14)
    center_offset: tuple = (0.0, 0.0, -0.42)

    def __post_init__(self):
        if any(e < 2.0 for e in self.exponents):
            raise ValueError("superquadric exponents must be >= 2")
        if any(s <= 0.0 for s in self.scalings):
            raise ValueError("superquadric scalings must be > 0")


@dataclass(frozen=True)
class RobotModel:
    """Physical parameters of the single-rigid-body quadruped model."""

    mass: float = 50.0
    inertia: np.ndarray = field(
        default_factory=lambda: np.diag([1.4, 1.9, 2.4])
    )
    # body-frame hip positions, order LF, RF, LH, RH
    hip_offsets: np.ndarray = field(
        default_factory=lambda: np.array([
            [0.36, 0.22, 0.0],
            [0.36, -0.22, 0.0],
            [-0.36, 0.22, 0.0],
            [-0.36, -0.22, 0.0],
        ])
    )
    superquadric: Superquadric = field(default_factory=Superquadric)
    friction_coeff: float = 0.6
    max_force_z: float = 700.0
    gravity: float = GRAVITY

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ValueError("mass must be > 0")
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3):
            raise ValueError("inertia must be a 3x3 tensor")
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ValueError("inertia must be symmetric")
        if np.any(np.linalg.eigvalsh(inertia) <= 0.0):
            raise ValueError("inertia must be positive definite")
        if self.friction_coeff <= 0.0:
            raise ValueError("friction coefficient must be > 0")
        hips = np.asarray(self.hip_offsets, dtype=float)
        if hips.shape != (N_FEET, 3):
            raise ValueError(f"expected {N_FEET} hip offsets")
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "hip_offsets", hips)

    @property
    def weight(self) -> float:
        return self.mass * self.gravity

    @property
    def stand_height(self) -> float:
        """Nominal base height: hip-to-foot drop of the workspace center."""
        return -self.superquadric.center_offset[2]

    def nominal_standing_feet(self, base_xy_yaw, terrain=None) -> np.ndarray:
        """World foot positions with each foot under its hip at base pose
        (x, y, yaw), dropped onto the terrain (z=0 if terrain is None)."""
        from .geometry import se2_apply

        feet = np.zeros((N_FEET, 3))
        off = self.hip_offsets.copy()
        off[:, 0] += self.superquadric.center_offset[0]
        off[:, 1] += self.superquadric.center_offset[1]
        feet[:, :2] = se2_apply(base_xy_yaw, off[:, :2])
        if terrain is not None:
            feet[:, 2] = [terrain.height_at(x, y) for x, y in feet[:, :2]]
        return feet


def srbd_residual(r, theta, r_ddot, omega, omega_dot, foot_positions, forces,
                  model: RobotModel) -> np.ndarray:
    """Newton-Euler residual of the single-rigid-body model, world frame.

    Returns [m*r_ddot - sum(f) - m*g ; I_w*omega_dot + omega x (I_w*omega)
    - sum((p_i - r) x f_i)] with I_w = R I R^T. Zero iff the dynamics are
    satisfied. Units: N for the first three rows, N*m for the last three.
    """
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    r_ddot = np.asarray(r_ddot, dtype=float)
    omega = np.asarray(omega, dtype=float)
    omega_dot = np.asarray(omega_dot, dtype=float)
    foot_positions = np.asarray(foot_positions, dtype=float)
    forces = np.asarray(forces, dtype=float)
    inputs = (r, theta, r_ddot, omega, omega_dot, foot_positions, forces)
    if not all(np.all(np.isfinite(x)) for x in inputs):
        raise ValueError("non-finite input to srbd_residual")
    check_pitch_regular(theta[1])

    g_vec = np.array([0.0, 0.0, -model.gravity])
    lin = model.mass * r_ddot - forces.sum(axis=0) - model.mass * g_vec

    rot = euler_to_rot(theta)
    inertia_w = rot @ model.inertia @ rot.T
    torque = np.cross(foot_positions - r, forces).sum(axis=0)
    ang = inertia_w @ omega_dot + np.cross(omega, inertia_w @ omega) - torque
    return np.concatenate([lin, ang])


def superquadric_value(p_rel, sq: Superquadric) -> float:
    """Membership value |px/A|^a + |py/B|^b + |pz/C|^c of a hip-frame point.

    <= 1 means inside the range of motion, 1 exactly on the surface.
    """
    p_rel = np.asarray(p_rel, dtype=float)
    if not np.all(np.isfinite(p_rel)):
        raise ValueError("non-finite input to superquadric_value")
    a, b, c = sq.exponents
    sa, sb, sc = sq.scalings
    return (
        np.abs(p_rel[..., 0] / sa) ** a
        + np.abs(p_rel[..., 1] / sb) ** b
        + np.abs(p_rel[..., 2] / sc) ** c
    )


def friction_cone_residual(f, normal, mu: float) -> float:
    """Margin mu*(f.n) - ||f_tangential||; >= 0 means inside the cone.

    The unilateral condition f.n >= 0 is reported separately by
    normal_force_component.
    """
    f = np.asarray(f, dtype=float)
    normal = np.asarray(normal, dtype=float)
    fn = float(f @ normal)
    f_tan = f - fn * normal
    return mu * fn - float(np.linalg.norm(f_tan))


def normal_force_component(f, normal) -> float:
    """Unilateral contact component f.n (must be >= 0 during stance)."""
    return float(np.asarray(f, dtype=float) @ np.asarray(normal, dtype=float))
