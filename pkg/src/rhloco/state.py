"""Robot state snapshots and the task tuple consumed by the initializers.

Task encodings are expressed in the horizontal frame of the initial base
pose (translated to its x, y, z; rotated by its yaw) so that rigidly
transformed scenes encode identically. The flat-ground encoding has 27
entries, the terrain encoding 35 (two 4-entry edge descriptors appended).

Frozen encoding layout (flat, 27):
  [0:2]    roll, pitch
  [2:5]    base linear velocity, base frame
  [5:8]    base angular velocity, base frame
  [8:20]   foot positions relative to the base, base frame (LF, RF, LH, RH)
  [20:24]  per-foot phase scalar: stance elapsed/duration in [0, 1),
           swing 1 + elapsed/duration in [1, 2)
  [24:27]  goal (dx, dy, dyaw), base frame
Terrain (35) appends two (ahead distance, height change, relative yaw,
extent) edge descriptors.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import rotate_xy, wrap_angle
from .spline import N_FEET, SW, TrajectorySegment, eval_base, eval_foot, \
    foot_phase_codes

X_DIM_FLAT = 27
X_DIM_TERRAIN = 35


@dataclass
class RobotState:
    """Instantaneous snapshot: base pose/twist, feet, and phase clocks."""

    r: np.ndarray          # (3,) base position, world
    v: np.ndarray          # (3,) base linear velocity, world
    theta: np.ndarray      # (3,) Euler roll, pitch, yaw
    omega: np.ndarray      # (3,) angular velocity, world
    foot_pos: np.ndarray   # (4, 3) world foot positions
    contact: np.ndarray    # (4,) bool
    phase_elapsed: np.ndarray = field(
        default_factory=lambda: np.zeros(N_FEET))
    phase_duration: np.ndarray = field(
        default_factory=lambda: np.ones(N_FEET))

    def copy(self) -> "RobotState":
        return RobotState(
            r=self.r.copy(), v=self.v.copy(), theta=self.theta.copy(),
            omega=self.omega.copy(), foot_pos=self.foot_pos.copy(),
            contact=self.contact.copy(),
            phase_elapsed=self.phase_elapsed.copy(),
            phase_duration=self.phase_duration.copy())

    @property
    def pose_se2(self) -> np.ndarray:
        return np.array([self.r[0], self.r[1], self.theta[2]])

    def base_channels(self) -> np.ndarray:
        """Pose+twist stacked as 12 channels (r, theta, v, omega)."""
        return np.concatenate([self.r, self.theta, self.v, self.omega])


def standing_state(model, base_xy_yaw=(0.0, 0.0, 0.0), terrain=None
                   ) -> RobotState:
    """At-rest state with nominal footholds under the hips."""
    feet = model.nominal_standing_feet(base_xy_yaw, terrain)
    ground = feet[:, 2].mean()
    return RobotState(
        r=np.array([base_xy_yaw[0], base_xy_yaw[1],
                    ground + model.stand_height]),
        v=np.zeros(3),
        theta=np.array([0.0, 0.0, base_xy_yaw[2]]),
        omega=np.zeros(3),
        foot_pos=feet,
        contact=np.ones(N_FEET, dtype=bool),
        phase_elapsed=np.zeros(N_FEET),
        phase_duration=np.ones(N_FEET),
    )


def state_from_plan(seg: TrajectorySegment, t: float) -> RobotState:
    """Sample a planned state, including contact flags and phase clocks."""
    r, v, _, th, om, _ = eval_base(seg, t)
    feet = np.zeros((N_FEET, 3))
    contact = np.zeros(N_FEET, dtype=bool)
    elapsed = np.zeros(N_FEET)
    duration = np.ones(N_FEET)
    for i in range(N_FEET):
        feet[i], _, contact[i] = eval_foot(seg, i, t)
        ts, lo, td, te = seg.foot_schedule(i)
        code = foot_phase_codes(seg, i, t)[0]
        if code == SW:
            elapsed[i] = t - lo
            duration[i] = td - lo
        elif code == 0:  # first stance (clamped times count from its start)
            elapsed[i] = max(t - ts, 0.0)
            duration[i] = lo - ts
        else:
            elapsed[i] = t - td
            duration[i] = te - td
    return RobotState(r=r, v=v, theta=th, omega=om, foot_pos=feet,
                      contact=contact, phase_elapsed=elapsed,
                      phase_duration=duration)


@dataclass
class Task:
    """Initializer input: initial state, SE(2) goal, nearby terrain edges."""

    state: RobotState
    goal: np.ndarray                  # (3,) SE(2) world pose
    obstacles: np.ndarray = None      # (2, 4) edge encodings in base frame
    t_plan_start: float = 0.0         # absolute time the plan starts

    @property
    def family(self) -> str:
        return "flat" if self.obstacles is None else "terrain"


def phase_scalar(state: RobotState) -> np.ndarray:
    """Per-foot clock: [0, 1) through stance, [1, 2) through swing."""
    frac = np.clip(state.phase_elapsed / np.maximum(state.phase_duration,
                                                    1e-9), 0.0, 1.0 - 1e-9)
    return np.where(state.contact, frac, 1.0 + frac)


def encode_task(task: Task) -> np.ndarray:
    """Fixed-size task vector (27 flat / 35 terrain), base-frame invariant."""
    st = task.state
    yaw = st.theta[2]
    parts = [
        st.theta[:2],
        rotate_xy(-yaw, st.v),
        rotate_xy(-yaw, st.omega),
        rotate_xy(-yaw, st.foot_pos - st.r).ravel(),
        phase_scalar(st),
    ]
    goal_xy = rotate_xy(-yaw, np.array([task.goal[0] - st.r[0],
                                        task.goal[1] - st.r[1], 0.0]))[:2]
    parts.append(np.array([goal_xy[0], goal_xy[1],
                           wrap_angle(task.goal[2] - yaw)]))
    if task.obstacles is not None:
        obs = np.asarray(task.obstacles, dtype=float)
        if obs.shape != (2, 4):
            raise ValueError("expected two 4-entry obstacle encodings")
        parts.append(obs.ravel())
    x = np.concatenate(parts)
    expected = X_DIM_TERRAIN if task.obstacles is not None else X_DIM_FLAT
    assert x.size == expected
    return x
