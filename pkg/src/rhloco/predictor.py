"""Forward state prediction across the optimization delay.

A new plan starts at a commit instant that lies after the solve begins. The
predicted initial state blends the previous plan's desired state at that
instant with the currently measured tracking error:

    predicted = plan(t_start) + alpha * (measured(t_now) - plan(t_now))

Per-channel scaling alpha is 0 (trust the plan) to 1 (carry the full
measured error). Foot channels are binary: 1 if the foot is in stance now
and the same stance is still active at the plan start, else 0.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import wrap_angle
from .spline import N_FEET, SW, TrajectorySegment, foot_phase_codes
from .state import RobotState, state_from_plan


@dataclass(frozen=True)
class PredictionConfig:
    """Blending factors per base channel group, each in [0, 1]."""

    alpha_position: float = 0.5
    alpha_yaw: float = 0.5
    alpha_roll_pitch: float = 0.3
    alpha_twist: float = 0.8

    def __post_init__(self):
        for name in ("alpha_position", "alpha_yaw", "alpha_roll_pitch",
                     "alpha_twist"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")

    def base_vector(self) -> np.ndarray:
        """Scaling per channel of (r, theta, v, omega)."""
        return np.array([
            self.alpha_position, self.alpha_position, self.alpha_position,
            self.alpha_roll_pitch, self.alpha_roll_pitch, self.alpha_yaw,
            self.alpha_twist, self.alpha_twist, self.alpha_twist,
            self.alpha_twist, self.alpha_twist, self.alpha_twist,
        ])


def foot_alpha(plan: TrajectorySegment, t_now: float, t_start: float
               ) -> np.ndarray:
    """Per-foot scaling: 1 iff in stance at t_now and the same stance phase
    is still active at t_start, else 0."""
    alpha = np.zeros(N_FEET)
    for i in range(N_FEET):
        code_now = int(foot_phase_codes(plan, i, t_now)[0])
        code_start = int(foot_phase_codes(plan, i, t_start)[0])
        if code_now != SW and code_now == code_start:
            alpha[i] = 1.0
    return alpha


def predict(measured: RobotState, plan: TrajectorySegment, t_now: float,
            t_start: float, cfg: PredictionConfig = PredictionConfig()
            ) -> RobotState:
    """Predicted state at the next plan start t_start (> t_now).

    Raises ValueError when the previous plan does not cover t_start; the
    caller must fall back in that case.
    """
    if not t_now < t_start:
        raise ValueError("prediction target must lie after the current time")
    if t_start > plan.tf + 1e-9:
        raise ValueError("previous plan does not cover the next plan start")

    desired_now = state_from_plan(plan, t_now)
    target = state_from_plan(plan, t_start)

    alpha = cfg.base_vector()
    err = np.concatenate([
        measured.r - desired_now.r,
        measured.theta - desired_now.theta,
        measured.v - desired_now.v,
        measured.omega - desired_now.omega,
    ])
    err[3:6] = wrap_angle(err[3:6])
    blended = np.concatenate([
        target.r, target.theta, target.v, target.omega]) + alpha * err

    out = target.copy()
    out.r = blended[0:3]
    out.theta = blended[3:6]
    out.v = blended[6:9]
    out.omega = blended[9:12]

    a_foot = foot_alpha(plan, t_now, t_start)
    foot_err = measured.foot_pos - desired_now.foot_pos
    out.foot_pos = target.foot_pos + a_foot[:, None] * foot_err
    # contact flags and phase clocks follow the previous plan's schedule
    return out


def refresh_initial_constraint(problem, plan: TrajectorySegment,
                               measured_provider, t_now: float,
                               t_start: float,
                               cfg: PredictionConfig = PredictionConfig()
                               ) -> RobotState:
    """Re-predict with the latest measurement and overwrite the problem's
    initial-state equality target. Meant to run from the solver's
    inter-iteration callback."""
    measured = measured_provider() if callable(measured_provider) \
        else measured_provider
    predicted = predict(measured, plan, t_now, t_start, cfg)
    problem.set_initial_state(predicted)
    return predicted
