import numpy as np
import pytest

from rhloco.model import RobotModel
from rhloco.spline import N_FEET, SegmentConfig, TrajectorySegment


@pytest.fixture
def model():
    return RobotModel()


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def random_segment(rng, cfg=None, t0=0.0):
    """Admissible random segment: positive durations, covered horizon,
    pinned force nodes zero."""
    cfg = cfg or SegmentConfig()
    n = cfg.n_base_nodes
    foot_start = t0 + rng.uniform(-0.2, 0.15, N_FEET)
    st1 = rng.uniform(0.3, 0.7, N_FEET)
    sw = rng.uniform(0.25, 0.5, N_FEET)
    foot_end = np.maximum(t0 + cfg.horizon + 0.05,
                          foot_start + st1 + sw + rng.uniform(0.3, 0.6, N_FEET))
    f_nodes = rng.normal(0.0, 60.0, (N_FEET, 2, cfg.n_force_nodes, 3))
    fd_nodes = rng.normal(0.0, 120.0, (N_FEET, 2, cfg.n_force_nodes, 3))
    for arr in (f_nodes, fd_nodes):
        arr[:, 0, -1] = 0.0
        arr[:, 1, 0] = 0.0
    return TrajectorySegment(
        config=cfg, t0=t0,
        base_r=rng.normal(0.0, 0.4, (n, 3)) + [0, 0, 0.45],
        base_v=rng.normal(0.0, 0.3, (n, 3)),
        base_th=rng.normal(0.0, 0.15, (n, 3)),
        base_om=rng.normal(0.0, 0.3, (n, 3)),
        foot_start=foot_start, foot_end=foot_end,
        st1_dur=st1, sw_dur=sw,
        p_st1=rng.normal(0.0, 0.3, (N_FEET, 3)),
        p_sw=rng.normal(0.0, 0.3, (N_FEET, 3)),
        v_sw_xy=rng.normal(0.0, 0.5, (N_FEET, 2)),
        p_st2=rng.normal(0.0, 0.3, (N_FEET, 3)),
        f_nodes=f_nodes, fd_nodes=fd_nodes,
    )
