"""Receding-horizon trajectory optimization for quadruped locomotion.

Library layout:
  model       robot parameters, rigid-body dynamics residual, foot workspace
  spline      Hermite trajectory segments and the decision-vector layout
  terrain     synthetic heightmaps, slope costmap, step-edge extraction
  nlp         constraint/cost assembly over a segment
  solver      augmented-Lagrangian Gauss-Newton solver
  heuristic   previous-plan reuse + goal interpolation initial guesses
  predictor   delay-compensating state prediction
  state       robot state snapshots and task encodings
  expert      bulk expert trajectory generation and segmentation
  lmtr        latent-mode trajectory regression (conditional VAE)
  mpc         closed-loop receding-horizon harness with a nominal simulator
  cli         command-line entry points
"""

from .model import RobotModel, Superquadric, friction_cone_residual, \
    srbd_residual, superquadric_value
from .spline import SegmentConfig, TrajectorySegment, count_variables
from .solver import ACCEPTABLE_THRESHOLD, PREFERRED_THRESHOLD, SolveReport, \
    classify, solve, thresholds
from .heuristic import GaitConfig, gait_timings, heuristic_initialize
from .nlp import NlpConfig, NlpProblem, build_problem
from .predictor import PredictionConfig, predict, refresh_initial_constraint
from .state import RobotState, Task, encode_task, standing_state
from .terrain import EdgeDescriptor, Heightmap, extract_edges, flat_map, \
    make_stairs, nearest_obstacles

__version__ = "0.1.0"

__all__ = [
    "RobotModel", "Superquadric", "srbd_residual", "superquadric_value",
    "friction_cone_residual", "SegmentConfig", "TrajectorySegment",
    "count_variables", "solve", "SolveReport", "thresholds", "classify",
    "PREFERRED_THRESHOLD", "ACCEPTABLE_THRESHOLD", "GaitConfig",
    "gait_timings", "heuristic_initialize", "NlpConfig", "NlpProblem",
    "build_problem", "PredictionConfig", "predict",
    "refresh_initial_constraint", "RobotState", "Task", "encode_task",
    "standing_state", "Heightmap", "EdgeDescriptor", "flat_map",
    "make_stairs", "extract_edges", "nearest_obstacles",
]
