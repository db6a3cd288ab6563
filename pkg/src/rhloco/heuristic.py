"""MPC-style initial guess construction.

Reuses the overlapping part of the previous plan, linearly interpolates the
remainder of the base trajectory toward the goal, places second-stance
footholds at nominal hip projections of the goal-ward pose, and fills forces
with the static weight share. Gait timing is periodic, derived from a duty
factor and a cycle factor; per-foot phase offsets stagger the first liftoffs.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import rotate_xy, se2_apply, wrap_angle
from .model import RobotModel
from .spline import (
    N_FEET, ST1, ST2, SW, SegmentConfig, TrajectorySegment, empty_segment,
    eval_base, foot_phase_codes,
)
from .state import RobotState

WALK_PRESET = dict(duty=0.8, cycle=0.0, offsets=(0.0, 0.5, 0.75, 0.25))
TROT_PRESET = dict(duty=0.55, cycle=0.1, offsets=(0.0, 0.5, 0.5, 0.0))


@dataclass(frozen=True)
class GaitConfig:
    """Periodic gait timing parameters.

    duty: stance fraction of the gait cycle, in (0, 1).
    cycle: fraction of the horizon NOT covered by one cycle, in [0, 1);
      the cycle time is (1 - cycle) * horizon.
    offsets: per-foot phase offset fractions of the horizon, order
      LF, RF, LH, RH.
    """

    duty: float = 0.55
    cycle: float = 0.1
    offsets: tuple = (0.0, 0.5, 0.5, 0.0)

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise ValueError("duty factor must be in (0, 1)")
        if not 0.0 <= self.cycle < 1.0:
            raise ValueError("cycle factor must be in [0, 1)")
        if len(self.offsets) != N_FEET:
            raise ValueError(f"expected {N_FEET} phase offsets")
        if any(not 0.0 <= a < 1.0 for a in self.offsets):
            raise ValueError("phase offsets must be in [0, 1)")

    @classmethod
    def preset(cls, name: str) -> "GaitConfig":
        presets = {"walk": WALK_PRESET, "trot": TROT_PRESET}
        if name not in presets:
            raise ValueError(f"unknown gait preset '{name}'")
        return cls(**presets[name])


def gait_timings(cfg: GaitConfig, horizon: float):
    """Periodic stance/swing durations and per-foot start offsets.

    Solves T_c = (1 - cycle) * horizon, dt_st = duty * T_c,
    dt_sw = (1 - duty) * T_c; both stances share dt_st. Offsets are
    t_i = offsets[i] * horizon.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be > 0")
    t_cycle = (1.0 - cfg.cycle) * horizon
    dt_st = cfg.duty * t_cycle
    dt_sw = (1.0 - cfg.duty) * t_cycle
    t_offsets = np.asarray(cfg.offsets, dtype=float) * horizon
    return dt_st, dt_sw, t_offsets


@dataclass(frozen=True)
class InitOptions:
    """Tuning knobs of the heuristic guess."""

    approach_speed: float = 0.1      # m/s used to pace the goal interpolation
    approach_yaw_rate: float = 0.4   # rad/s
    ramp_time: float = 0.5           # s, speed-up/slow-down of the approach
    swing_height: float = 0.08      # m above the higher foothold
    parked_radius: float = 0.06     # m; closer goals produce a parked plan
    parked_yaw: float = 0.1         # rad
    coverage_margin: float = 0.05   # s of foot coverage past the horizon
    min_duration: float = 0.08      # s, matches the solver's lower bound


def _approach_profile(distance: float, v_seam: float, v_ref: float,
                      accel: float, dt: float, n_steps: int):
    """March toward a goal a given distance away: speed up from the seam
    speed toward the cruise speed, brake in time to stop at the goal.
    Returns arrays (d, v) of length n_steps sampled every dt."""
    d = np.zeros(n_steps)
    v = np.zeros(n_steps)
    u = max(0.0, min(v_seam, 1.5 * v_ref))
    x = 0.0
    for j in range(n_steps):
        remaining = distance - x
        if remaining <= 1e-9:
            u = 0.0
            x = distance
        else:
            brake = u * u / (2.0 * accel)
            if brake >= remaining:
                u = max(0.0, u - accel * dt)
            else:
                u = min(v_ref, u + accel * dt)
            x = min(distance, x + u * dt)
        d[j] = x
        v[j] = u
    return d, v


def _unit(vec):
    n = np.linalg.norm(vec)
    return vec / n if n > 1e-9 else np.zeros_like(vec)


def _parked_st1(cfg: SegmentConfig) -> float:
    # long enough that the zero-pinned liftoff ramp lies beyond the horizon
    nf = cfg.n_force_nodes
    return (cfg.horizon + 0.1) * (nf - 1) / (nf - 2) + 0.05


def _is_parked(state: RobotState, goal, opts: InitOptions) -> bool:
    d = np.hypot(goal[0] - state.r[0], goal[1] - state.r[1])
    return d < opts.parked_radius and \
        abs(wrap_angle(goal[2] - state.theta[2])) < opts.parked_yaw


def heuristic_initialize(prev, state: RobotState, goal, *, t0: float,
                         gait: GaitConfig, seg_cfg: SegmentConfig,
                         model: RobotModel, terrain=None,
                         opts: InitOptions = InitOptions()
                         ) -> TrajectorySegment:
    """Build the heuristic initial guess for a plan starting at t0.

    prev is the previously committed segment (None on a cold start); state
    is the predicted state at t0; goal is the SE(2) target.
    """
    goal = np.asarray(goal, dtype=float)
    seg = empty_segment(seg_cfg, t0)
    _init_base(seg, prev, state, goal, terrain, model, opts)
    inherited = _init_feet(seg, prev, state, goal, terrain, model, gait, opts)
    _init_forces(seg, model, prev, inherited)
    return seg


def _init_base(seg, prev, state, goal, terrain, model, opts):
    cfg = seg.config
    times = seg.base_times
    n = len(times)
    parked = _is_parked(state, goal, opts)

    n_copy = 0
    if prev is not None:
        covered = times <= prev.tf + 1e-9
        n_copy = int(np.sum(covered))
        if n_copy:
            offset = (seg.t0 - prev.t0) / cfg.dt_base
            if abs(offset - round(offset)) < 1e-9 and \
                    cfg.dt_base == prev.config.dt_base:
                k = int(round(offset))
                seg.base_r[:n_copy] = prev.base_r[k:k + n_copy]
                seg.base_v[:n_copy] = prev.base_v[k:k + n_copy]
                seg.base_th[:n_copy] = prev.base_th[k:k + n_copy]
                seg.base_om[:n_copy] = prev.base_om[k:k + n_copy]
            else:
                r, v, _, th, om, _ = eval_base(prev, times[:n_copy])
                seg.base_r[:n_copy] = r
                seg.base_v[:n_copy] = v
                seg.base_th[:n_copy] = th
                seg.base_om[:n_copy] = om

    if n_copy < n:
        if n_copy == 0:
            ref_pose = np.array([state.r[0], state.r[1], state.theta[2]])
            ref_rp = state.theta[:2].copy()
            t_ref = seg.t0
        else:
            ref_pose = np.array([seg.base_r[n_copy - 1, 0],
                                 seg.base_r[n_copy - 1, 1],
                                 seg.base_th[n_copy - 1, 2]])
            ref_rp = seg.base_th[n_copy - 1, :2].copy()
            t_ref = times[n_copy - 1]
        if parked and n_copy == 0:
            seg.base_r[:] = state.r
            seg.base_th[:] = state.theta
            return
        d_xy = np.hypot(goal[0] - ref_pose[0], goal[1] - ref_pose[1])
        d_yaw = wrap_angle(goal[2] - ref_pose[2])
        direction = _unit(goal[:2] - ref_pose[:2])
        perp = np.array([-direction[1], direction[0]])

        # seam kinematics: the interpolated tail must continue the copied
        # (or measured) motion without velocity jumps
        if n_copy == 0:
            seam_v = state.v.copy()
            seam_om = state.omega.copy()
            seam_z = state.r[2]
        else:
            seam_v = seg.base_v[n_copy - 1].copy()
            seam_om = seg.base_om[n_copy - 1].copy()
            seam_z = seg.base_r[n_copy - 1, 2]
        v_along = float(seam_v[:2] @ direction)
        v_perp = float(seam_v[:2] @ perp)
        eq_seam = model.stand_height + (
            float(terrain.height_at(ref_pose[0], ref_pose[1]))
            if terrain is not None else 0.0)
        dz0 = seam_z - eq_seam
        vz0 = float(seam_v[2])
        rp0 = ref_rp
        om_xy0 = seam_om[:2].copy()

        accel = opts.approach_speed / opts.ramp_time
        dt = cfg.dt_base
        n_tail = n - n_copy
        if d_xy > 1e-6:
            dist, speed = _approach_profile(
                d_xy, v_along, opts.approach_speed, accel, dt, n_tail)
            frac = dist / d_xy
            frac_rate = speed / d_xy
        else:
            dist, speed = _approach_profile(
                abs(d_yaw), seam_om[2] * np.sign(d_yaw),
                opts.approach_yaw_rate,
                opts.approach_yaw_rate / opts.ramp_time, dt, n_tail)
            denom = max(abs(d_yaw), 1e-9)
            frac = dist / denom
            frac_rate = speed / denom
        yaw_rate_err = float(seam_om[2]) - \
            (frac_rate[0] if n_tail else 0.0) * d_yaw

        tau_d = max(0.4 * opts.ramp_time, 0.1)
        for jj, j in enumerate(range(n_copy, n)):
            s, ds = frac[jj], frac_rate[jj]
            tau = (jj + 1) * dt
            e = np.exp(-tau / tau_d)
            bump = tau * e                      # value of a decaying carry
            dbump = (1.0 - tau / tau_d) * e     # its time derivative
            xy = ref_pose[:2] + s * (goal[:2] - ref_pose[:2]) \
                + perp * (v_perp * bump)
            yaw = ref_pose[2] + s * d_yaw + yaw_rate_err * bump
            z_eq = model.stand_height
            if terrain is not None:
                z_eq += float(terrain.height_at(xy[0], xy[1]))
            seg.base_r[j] = [xy[0], xy[1], z_eq + dz0 * e + vz0 * bump]
            rp = rp0 * e + om_xy0 * bump
            seg.base_th[j] = [rp[0], rp[1], yaw]
            seg.base_v[j, :2] = ds * (goal[:2] - ref_pose[:2]) \
                + perp * (v_perp * dbump)
            seg.base_v[j, 2] = -dz0 * e / tau_d + vz0 * dbump
            seg.base_om[j, :2] = -rp0 * e / tau_d + om_xy0 * dbump
            seg.base_om[j, 2] = ds * d_yaw + yaw_rate_err * dbump

    # the plan starts exactly at the (predicted) current state
    seg.base_r[0] = state.r
    seg.base_v[0] = state.v
    seg.base_th[0] = state.theta
    seg.base_om[0] = state.omega


def _init_feet(seg, prev, state, goal, terrain, model, gait, opts):
    """Fill phase timing and motion nodes; returns a per-foot map of which
    new stance inherits which previous stance (for force reuse)."""
    cfg = seg.config
    t0 = seg.t0
    parked = _is_parked(state, goal, opts)
    dt_st, dt_sw, t_offsets = gait_timings(gait, cfg.horizon)
    inherited = {}

    for i in range(N_FEET):
        copied_upcoming = False
        code = None
        if prev is not None:
            code = int(foot_phase_codes(prev, i, t0)[0])
        if code == SW:
            # committed swing: carry the previous plan's values; the NLP
            # freezes them so the in-flight swing is not re-optimized
            seg.foot_start[i] = prev.foot_start[i]
            seg.st1_dur[i] = prev.st1_dur[i]
            seg.sw_dur[i] = prev.sw_dur[i]
            seg.p_st1[i] = prev.p_st1[i]
            seg.p_sw[i] = prev.p_sw[i]
            seg.v_sw_xy[i] = prev.v_sw_xy[i]
            seg.p_st2[i] = prev.p_st2[i]
            copied_upcoming = True
            inherited[(i, 0)] = 0
            inherited[(i, 1)] = 1
        elif code == ST1 and not parked:
            # ongoing first stance: keep the committed schedule and reuse the
            # previous swing and touchdown as the starting guess
            seg.foot_start[i] = prev.foot_start[i]
            seg.st1_dur[i] = prev.st1_dur[i]
            seg.sw_dur[i] = prev.sw_dur[i]
            seg.p_st1[i] = prev.p_st1[i]
            seg.p_sw[i] = prev.p_sw[i]
            seg.v_sw_xy[i] = prev.v_sw_xy[i]
            seg.p_st2[i] = prev.p_st2[i]
            copied_upcoming = True
            inherited[(i, 0)] = 0
            inherited[(i, 1)] = 1
        elif code == ST2 and not parked:
            # the previous second stance becomes the new first stance
            ts = prev.foot_schedule(i)[2]
            seg.foot_start[i] = ts
            liftoff = max(ts + dt_st, t0 + 0.35 * dt_st)
            seg.st1_dur[i] = liftoff - ts
            seg.sw_dur[i] = dt_sw
            seg.p_st1[i] = prev.p_st2[i]
            inherited[(i, 0)] = 1
        else:
            # cold start (or parked): stance begins at the plan start
            seg.foot_start[i] = t0
            if parked:
                seg.st1_dur[i] = _parked_st1(cfg)
                seg.sw_dur[i] = dt_sw
            else:
                seg.st1_dur[i] = dt_st + t_offsets[i]
                seg.sw_dur[i] = dt_sw
            seg.p_st1[i] = state.foot_pos[i]

        touchdown = seg.foot_start[i] + seg.st1_dur[i] + seg.sw_dur[i]
        seg.foot_end[i] = max(
            seg.t0 + cfg.horizon + opts.coverage_margin,
            touchdown + max(0.5 * dt_st, 2 * opts.min_duration))

        if not copied_upcoming:
            _nominal_touchdown(seg, i, touchdown, goal, terrain, model, opts)

        # guard rails: keep the guess inside what the solver allows
        seg.st1_dur[i] = max(seg.st1_dur[i], opts.min_duration)
        seg.sw_dur[i] = max(seg.sw_dur[i], opts.min_duration)
    return inherited


def _nominal_touchdown(seg, foot, touchdown, goal, terrain, model, opts):
    """Second-stance foothold at the hip projection of the goal-ward base
    pose expected at touchdown, snapped to the terrain."""
    r, _, _, th, _, _ = eval_base(
        seg, min(max(touchdown, seg.t0), seg.tf))
    pose = np.array([r[0], r[1], th[2]])
    hip = model.hip_offsets[foot, :2] + model.superquadric.center_offset[:2]
    xy = se2_apply(pose, hip)
    z = float(terrain.height_at(xy[0], xy[1])) if terrain is not None else 0.0
    seg.p_st2[foot] = [xy[0], xy[1], z]
    mid = 0.5 * (seg.p_st1[foot] + seg.p_st2[foot])
    apex = max(seg.p_st1[foot, 2], seg.p_st2[foot, 2], mid[2])
    seg.p_sw[foot] = [mid[0], mid[1], apex + opts.swing_height]
    seg.v_sw_xy[foot] = 1.5 * (seg.p_st2[foot, :2] - seg.p_st1[foot, :2]) \
        / max(seg.sw_dur[foot], 1e-6)


def _init_forces(seg, model, prev=None, inherited=None):
    """Forces for stances carried over from the previous plan are reused
    (sampling the previous force spline at the new node times). Fresh
    stances start from the static weight share, then a least-squares
    redistribution of the free vertical components keeps total support and
    roll/pitch moments balanced across the zero-pinned swing transitions."""
    from .spline import eval_force

    cfg = seg.config
    inherited = inherited or {}
    node_times = []
    for i in range(N_FEET):
        ts, lo, td, te = seg.foot_schedule(i)
        node_times.append((np.linspace(ts, lo, cfg.n_force_nodes),
                           np.linspace(td, te, cfg.n_force_nodes)))

    def n_contact(t):
        count = 0
        for i in range(N_FEET):
            ts, lo, td, te = seg.foot_schedule(i)
            if not (lo <= t < td):
                count += 1
        return max(count, 1)

    free = []  # (foot, stance, node) of each freshly initialized z component
    static = []
    for i in range(N_FEET):
        for stance in (0, 1):
            times = node_times[i][stance]
            if (i, stance) in inherited and prev is not None:
                f, fd = eval_force(prev, i, times, with_rate=True)
                seg.f_nodes[i, stance] = f
                seg.fd_nodes[i, stance] = fd
                seg.f_nodes[i, stance, -1 if stance == 0 else 0] = 0.0
                seg.fd_nodes[i, stance, -1 if stance == 0 else 0] = 0.0
                continue
            for k in range(cfg.n_force_nodes):
                pinned = (stance == 0 and k == cfg.n_force_nodes - 1) or \
                         (stance == 1 and k == 0)
                if pinned:
                    continue
                share = model.weight / n_contact(times[k])
                seg.f_nodes[i, stance, k] = [0.0, 0.0, share]
                seg.fd_nodes[i, stance, k] = 0.0
                free.append((i, stance, k))
                static.append(share)
    if free:
        _balance_vertical_forces(seg, model, node_times, free,
                                 np.asarray(static))


def _balance_vertical_forces(seg, model, node_times, free, static):
    """Solve a small regularized least squares over the freshly initialized
    vertical force nodes (values and rates) so that, along the horizon, the
    summed support matches the weight and the roll/pitch moments about the
    base match the base motion. Inherited stances contribute as a fixed
    background."""
    from .geometry import euler_to_rot_batch
    from .spline import ST1, ST2, eval_base, eval_foot, eval_force, \
        foot_phase_codes, hermite_weight_matrices

    cfg = seg.config
    t_grid = np.linspace(seg.t0, seg.tf, 2 * (cfg.n_base_nodes - 1) + 1)
    nt = len(t_grid)
    n_free = len(free)

    # background: forces already placed (inherited stances, pinned zeros)
    for i, stance, k in free:
        seg.f_nodes[i, stance, k, 2] = 0.0
        seg.fd_nodes[i, stance, k, 2] = 0.0
    p_feet = np.zeros((N_FEET, nt, 3))
    f_bg = np.zeros((N_FEET, nt, 3))
    for i in range(N_FEET):
        p_feet[i], _, _ = eval_foot(seg, i, t_grid)
        f_bg[i] = eval_force(seg, i, t_grid)

    # weights of each free vertical value/rate node at each grid time
    a_w = np.zeros((nt, 2 * n_free))
    codes = np.stack([foot_phase_codes(seg, i, t_grid) for i in range(N_FEET)])
    col_w = {}
    for i in range(N_FEET):
        for stance, code in ((0, ST1), (1, ST2)):
            mask = codes[i] == code
            if not np.any(mask):
                continue
            mats = hermite_weight_matrices(
                node_times[i][stance], t_grid[mask])
            col_w[(i, stance)] = (mask, mats[0], mats[1])
    for col, (i, stance, k) in enumerate(free):
        if (i, stance) in col_w:
            mask, wpv, wpd = col_w[(i, stance)]
            a_w[mask, col] = wpv[:, k]
            a_w[mask, n_free + col] = wpd[:, k]

    # rows: total support, then roll/pitch moments about the base
    r, _, ddr, th, om, omd = eval_base(seg, t_grid)
    rot = euler_to_rot_batch(th)
    i_w = rot @ model.inertia @ rot.transpose(0, 2, 1)
    ang_needed = (i_w @ omd[..., None])[..., 0] \
        + np.cross(om, (i_w @ om[..., None])[..., 0])
    lever = p_feet - r[None]
    torque_bg = np.cross(lever, f_bg).sum(axis=0)
    # torque_x = sum lever_y * fz ; torque_y = -sum lever_x * fz
    foot_of_col = np.array([i for (i, _, _) in free] * 2)
    contrib_x = lever[foot_of_col, :, 1].T * a_w
    contrib_y = -lever[foot_of_col, :, 0].T * a_w
    a_mat = np.vstack([a_w, contrib_x, contrib_y])
    b_vec = np.concatenate([
        model.mass * (ddr[:, 2] + model.gravity) - f_bg[:, :, 2].sum(axis=0),
        ang_needed[:, 0] - torque_bg[:, 0],
        ang_needed[:, 1] - torque_bg[:, 1]])

    from scipy.optimize import lsq_linear
    lam_val, lam_rate = 0.5, 1e-4
    reg = np.diag(np.concatenate([np.full(n_free, np.sqrt(lam_val)),
                                  np.full(n_free, np.sqrt(lam_rate))]))
    a_reg = np.vstack([a_mat, reg])
    b_reg = np.concatenate([b_vec, np.sqrt(lam_val) * static,
                            np.zeros(n_free)])
    lb = np.concatenate([np.zeros(n_free), np.full(n_free, -np.inf)])
    ub = np.concatenate([np.full(n_free, 0.9 * model.max_force_z),
                         np.full(n_free, np.inf)])
    sol = lsq_linear(a_reg, b_reg, bounds=(lb, ub), method="bvls")
    for col, (i, stance, k) in enumerate(free):
        seg.f_nodes[i, stance, k, 2] = sol.x[col]
        seg.fd_nodes[i, stance, k, 2] = sol.x[n_free + col]
