"""Constrained problem assembly over a trajectory segment.

Constraints (scaled residuals):
  - rigid-body dynamics equality on a fixed time grid across the base horizon
    (enforced along the polynomials, not only at nodes);
  - per-foot range-of-motion inequality (superquadric membership) on its own
    grid;
  - friction cone, unilateral and maximum normal force at free force nodes;
  - stance footholds pinned to the terrain height;
  - swing clearance above the interpolated terrain at interior swing samples;
  - bounds on the derived second-stance duration (the free durations are
    plain variable bounds);
  - initial-state equality on base pose/twist and in-contact foot positions,
    with an updatable target so a fresher state prediction can be injected
    between solver iterations.

Cost terms: squared SE(2) distance of the final base pose to the goal,
force-rate smoothness, slope-proportional foothold cost from the smoothed
terrain, and base-twist regularization.

Legs already mid-swing at the plan start are not re-optimized: their
committed variables are listed in a frozen mask the solver must respect.

The Jacobian is assembled from central differences with structure-aware
sweeps: base-node columns share finite-difference evaluations by node parity
(their row supports are disjoint in time), and per-foot columns difference
cheap per-foot row evaluations split by what each column can touch (force
values, motion nodes, phase durations).
"""

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import euler_to_rot_batch, wrap_angle
from .model import RobotModel
from .spline import (
    N_FEET, SegmentConfig, TrajectorySegment, duration_indices, eval_base,
    eval_foot, eval_force, foot_variable_indices, hermite_eval,
    hermite_weight_matrices, variable_blocks, _swing_nodes,
)

SLOPE_RESIDUAL_EPS = 1e-12


@dataclass(frozen=True)
class NlpConfig:
    """Discretization steps, weights, and bounds of the assembled problem."""

    dt_dyn: float = 0.05
    dt_rom: float = 0.1
    dt_cost: float = 0.1
    swing_clearance: float = 0.05
    clearance_fractions: tuple = (0.3, 0.5, 0.7)
    w_goal: float = 10.0
    w_force_rate: float = 1e-6
    w_slope: float = 5.0
    w_twist: float = 1e-2
    w_duration: float = 2.0
    duration_min: float = 0.08
    duration_max: float = 1.5
    st1_max_factor: float = 2.5  # first stance may span parked plans
    angle_bound: float = 1.2     # rad, roll/pitch box keeping Euler rates regular
    torque_lever: float = 0.5    # m, scales angular dynamics rows
    fd_step: float = 1e-6


def _grid(t0: float, tf: float, dt: float) -> np.ndarray:
    n = max(1, round((tf - t0) / dt))
    return np.linspace(t0, tf, n + 1)


class NlpProblem:
    """One assembled instance; evaluation at a decision vector is pure."""

    def __init__(self, task, init: TrajectorySegment, terrain,
                 model: RobotModel, cfg: NlpConfig = NlpConfig()):
        self.cfg = cfg
        self.model = model
        self.terrain = terrain
        self.goal = np.asarray(task.goal, dtype=float)
        self.template = init.copy()
        seg_cfg = init.config
        self.n_vars = seg_cfg.n_variables()

        t0, tf = init.t0, init.tf
        self.t_dyn = _grid(t0, tf, cfg.dt_dyn)
        self.t_rom = _grid(t0, tf, cfg.dt_rom)
        self.t_cost = _grid(t0, tf, cfg.dt_cost)
        self.nd, self.nr, self.nc = \
            len(self.t_dyn), len(self.t_rom), len(self.t_cost)
        # one concatenated grid so base splines are evaluated in one pass
        self.t_base_all = np.concatenate([self.t_dyn, self.t_rom, self.t_cost])
        self._sl_dyn = slice(0, self.nd)
        self._sl_rom = slice(self.nd, self.nd + self.nr)
        self._sl_cost = slice(self.nd + self.nr, self.nd + self.nr + self.nc)
        self.t_feet_all = np.concatenate([self.t_dyn, self.t_rom])
        self.t_force_all = np.concatenate([self.t_dyn, self.t_cost])
        self._base_w = hermite_weight_matrices(init.base_times, self.t_base_all)

        state = task.state
        self.contact_feet = [i for i in range(N_FEET) if state.contact[i]]
        self._check_start_state(state)

        # legs mid-swing at the plan start keep their committed swing
        self.frozen = np.zeros(self.n_vars, dtype=bool)
        self.frozen_feet = []
        for i in range(N_FEET):
            ts, lo, td, te = init.foot_schedule(i)
            if lo < t0 - 1e-12 and t0 < td:
                self.frozen_feet.append(i)
                idx = foot_variable_indices(seg_cfg, i)
                for key in ("durations", "p_st1", "swing", "forces_st1"):
                    self.frozen[idx[key]] = True
        self.free_idx = np.flatnonzero(~self.frozen)

        self._nominal_durations = np.stack(
            [init.st1_dur.copy(), init.sw_dur.copy()], axis=1)
        self._build_bounds(seg_cfg)
        self._build_scales(seg_cfg)
        self._build_rows(seg_cfg)
        self.set_initial_state(state)

    # -- construction helpers ------------------------------------------------

    def _check_start_state(self, state):
        if self.terrain is not None:
            hb = float(self.terrain.height_at(state.r[0], state.r[1]))
            if state.r[2] < hb + 0.05:
                raise ValueError("task start state in collision with terrain")
            for i in self.contact_feet:
                hf = float(self.terrain.height_at(*state.foot_pos[i, :2]))
                if state.foot_pos[i, 2] < hf - 0.03:
                    raise ValueError(
                        "task start state has a foot below the terrain")

    def _build_bounds(self, seg_cfg):
        cfg = self.cfg
        nv = self.n_vars
        lb = np.full(nv, -np.inf)
        ub = np.full(nv, np.inf)
        n = seg_cfg.n_base_nodes
        # roll/pitch box away from the Euler-rate singularity
        for j in range(n):
            lb[12 * j + 6:12 * j + 8] = -cfg.angle_bound
            ub[12 * j + 6:12 * j + 8] = cfg.angle_bound
        d_idx = duration_indices(seg_cfg)
        st1_max = max(cfg.duration_max,
                      cfg.st1_max_factor * seg_cfg.horizon + 0.5)
        lb[d_idx] = cfg.duration_min
        ub[d_idx[0::2]] = st1_max
        ub[d_idx[1::2]] = cfg.duration_max
        self.lb, self.ub = lb, ub
        self._st2_bounds = (cfg.duration_min, st1_max)

    def _build_scales(self, seg_cfg):
        kinds = variable_blocks(seg_cfg)["kinds"]
        scale_of = {"pos": 0.3, "vel": 0.5, "ang": 0.3, "angvel": 0.5,
                    "dur": 0.2, "force": 0.25 * self.model.weight,
                    "force_rate": self.model.weight}
        self.var_scale = np.array([scale_of[k] for k in kinds])
        w = self.model.weight
        self._s_lin = 1.0 / w
        self._s_ang = 1.0 / (w * self.cfg.torque_lever)
        self._s_force = 1.0 / w
        sq = self.model.superquadric
        self._sq_exp = np.asarray(sq.exponents, dtype=float)
        self._sq_scale = np.asarray(sq.scalings, dtype=float)
        self._sq_centers = self.model.hip_offsets + \
            np.asarray(sq.center_offset, dtype=float)

    def _build_rows(self, seg_cfg):
        nd, nr, nc = self.nd, self.nr, self.nc
        k_free = seg_cfg.n_free_force_nodes
        ncl = len(self.cfg.clearance_fractions)
        n_contact = len(self.contact_feet)

        eq_blocks = [
            ("dynamics", 6 * nd, np.repeat(self.t_dyn, 6)),
            ("terrain_height", 2 * N_FEET, np.full(2 * N_FEET, np.nan)),
            ("initial_base", 12, np.full(12, self.t_dyn[0])),
            ("initial_feet", 3 * n_contact,
             np.full(3 * n_contact, self.t_dyn[0])),
        ]
        ineq_blocks = [
            ("range_of_motion", N_FEET * nr, np.tile(self.t_rom, N_FEET)),
            ("friction_cone", N_FEET * 2 * k_free * 3,
             np.full(N_FEET * 2 * k_free * 3, np.nan)),
            ("swing_clearance", N_FEET * ncl, np.full(N_FEET * ncl, np.nan)),
            ("stance2_duration", 2 * N_FEET, np.full(2 * N_FEET, np.nan)),
        ]
        cost_blocks = [
            ("goal", 3),
            ("twist", 6 * nc),
            ("force_rate", N_FEET * 3 * nc),
            ("slope", 2 * N_FEET),
            ("duration", 2 * N_FEET),
        ]

        self.eq_slices, self.eq_names, eq_times = {}, [], []
        off = 0
        for name, size, times in eq_blocks:
            self.eq_slices[name] = slice(off, off + size)
            self.eq_names += [name] * size
            eq_times.append(times)
            off += size
        self.n_eq = off
        self.eq_times = np.concatenate(eq_times)

        self.ineq_slices, self.ineq_names, in_times = {}, [], []
        off = 0
        for name, size, times in ineq_blocks:
            self.ineq_slices[name] = slice(off, off + size)
            self.ineq_names += [name] * size
            in_times.append(times)
            off += size
        self.n_ineq = off
        self.ineq_times = np.concatenate(in_times)

        self.cost_slices = {}
        off = 0
        for name, size in cost_blocks:
            self.cost_slices[name] = slice(off, off + size)
            off += size
        self.n_cost = off
        self.n_rows = self.n_eq + self.n_ineq + self.n_cost

        self._build_sweep_maps(seg_cfg, nd, nr, nc, k_free, ncl)

    def _build_sweep_maps(self, seg_cfg, nd, nr, nc, k_free, ncl):
        """Row/column bookkeeping for the finite-difference sweeps."""
        eq0, in0, co0 = 0, self.n_eq, self.n_eq + self.n_ineq

        def eq_rows(name):
            s = self.eq_slices[name]
            return np.arange(eq0 + s.start, eq0 + s.stop)

        def ineq_rows(name):
            s = self.ineq_slices[name]
            return np.arange(in0 + s.start, in0 + s.stop)

        def cost_rows(name):
            s = self.cost_slices[name]
            return np.arange(co0 + s.start, co0 + s.stop)

        dyn_rows = eq_rows("dynamics")
        dyn_ang_rows = dyn_rows.reshape(nd, 6)[:, 3:6].ravel()

        # base sweep: dynamics, range of motion, initial base equality,
        # goal and twist cost rows
        self.base_rows = np.concatenate([
            dyn_rows, ineq_rows("range_of_motion"),
            eq_rows("initial_base"), cost_rows("goal"), cost_rows("twist")])
        times = self.template.base_times
        n_nodes = seg_cfg.n_base_nodes

        def interval_of(t):
            return np.clip(np.searchsorted(times, t, side="right") - 1,
                           0, n_nodes - 2)

        self.base_row_interval = np.concatenate([
            np.repeat(interval_of(self.t_dyn), 6),
            np.tile(interval_of(self.t_rom), N_FEET),
            np.zeros(12, dtype=int),
            np.full(3, n_nodes - 2, dtype=int),
            np.repeat(interval_of(self.t_cost), 6),
        ])

        rom = ineq_rows("range_of_motion").reshape(N_FEET, nr)
        cone = ineq_rows("friction_cone").reshape(N_FEET, 2 * k_free * 3)
        clear = ineq_rows("swing_clearance").reshape(N_FEET, ncl)
        dur = ineq_rows("stance2_duration").reshape(N_FEET, 2)
        terr = eq_rows("terrain_height").reshape(N_FEET, 2)
        feet_eq = eq_rows("initial_feet").reshape(len(self.contact_feet), 3) \
            if self.contact_feet else np.zeros((0, 3), dtype=int)
        frate = cost_rows("force_rate").reshape(N_FEET, 3 * nc)
        slope = cost_rows("slope").reshape(N_FEET, 2)
        durc = cost_rows("duration").reshape(N_FEET, 2)

        # per-foot columns split by what they can touch
        self.foot_force_cols, self.foot_motion_cols, self.foot_dur_cols = \
            [], [], []
        self.foot_motion_rows, self.foot_dur_rows = [], []
        for i in range(N_FEET):
            idx = foot_variable_indices(seg_cfg, i)
            self.foot_force_cols.append(
                np.concatenate([idx["forces_st1"], idx["forces_st2"]]))
            self.foot_motion_cols.append(idx["motion"])
            self.foot_dur_cols.append(idx["durations"])
            motion = [dyn_ang_rows, rom[i], terr[i], clear[i]]
            if i in self.contact_feet:
                motion.append(feet_eq[self.contact_feet.index(i)])
            motion.append(slope[i])
            self.foot_motion_rows.append(np.concatenate(motion))
            self.foot_dur_rows.append(np.concatenate([
                dyn_rows, rom[i], clear[i], dur[i], frate[i], durc[i]]))

    # -- updatable boundary condition ----------------------------------------

    def set_initial_state(self, state) -> None:
        """Overwrite the initial-state equality target (pose, twist, and the
        positions of the feet that are in contact at the plan start)."""
        self._init_base_target = np.concatenate([
            state.r, state.theta, state.v, state.omega]).astype(float)
        self._init_feet_target = np.array(
            [state.foot_pos[i] for i in self.contact_feet], dtype=float
        ).reshape(len(self.contact_feet), 3)

    # -- shared row evaluations ------------------------------------------------

    def _segment(self, v) -> TrajectorySegment:
        return TrajectorySegment.from_vector(self.template, v)

    def _dyn_lin(self, ddr, f_sum):
        lin = self.model.mass * ddr - f_sum
        lin[:, 2] += self.model.mass * self.model.gravity
        return lin * self._s_lin

    def _dyn_ang(self, th, om, omd, torque):
        rot = euler_to_rot_batch(th)
        i_w = rot @ self.model.inertia @ rot.transpose(0, 2, 1)
        ang = (i_w @ omd[..., None])[..., 0] \
            + np.cross(om, (i_w @ om[..., None])[..., 0]) - torque
        return ang * self._s_ang

    def _rom_values(self, r_rom, rot_rom, p_rom, feet=None):
        """1 - membership per foot per time; >= 0 keeps feet reachable.
        p_rom: (F, nr, 3); rot_rom: (nr, 3, 3) world-from-body."""
        centers = self._sq_centers if feet is None else self._sq_centers[feet]
        rel = p_rom - r_rom[None, :, :]
        local = np.einsum("tij,fti->ftj", rot_rom, rel) - centers[:, None, :]
        val = (np.abs(local / self._sq_scale) ** self._sq_exp).sum(axis=2)
        return (1.0 - val).ravel()

    def _cone_rows_foot(self, seg, i):
        """(cone margin, f_z, f_max - f_z) per free force node, scaled."""
        mu = self.model.friction_coeff
        k = seg.config.n_force_nodes
        nodes = np.concatenate([seg.f_nodes[i, 0, :k - 1],
                                seg.f_nodes[i, 1, 1:]])
        fz = nodes[:, 2]
        ft = np.sqrt(nodes[:, 0] ** 2 + nodes[:, 1] ** 2)
        rows = np.stack([mu * fz - ft, fz, self.model.max_force_z - fz],
                        axis=1)
        return (rows * self._s_force).ravel()

    def _terrain_rows_foot(self, seg, i):
        z = np.array([seg.p_st1[i, 2], seg.p_st2[i, 2]])
        if self.terrain is None:
            return z
        x = np.array([seg.p_st1[i, 0], seg.p_st2[i, 0]])
        y = np.array([seg.p_st1[i, 1], seg.p_st2[i, 1]])
        return z - self.terrain.height_at(x, y)

    def _clearance_rows_foot(self, seg, i):
        _, lo, td, _ = seg.foot_schedule(i)
        fr = np.asarray(self.cfg.clearance_fractions)
        t_s = lo + fr * (td - lo)
        times, values, derivs = _swing_nodes(seg, i)
        p, _, _ = hermite_eval(times, values, derivs, t_s)
        h = np.zeros(len(fr)) if self.terrain is None else \
            np.asarray(self.terrain.height_at(p[:, 0], p[:, 1]), dtype=float)
        return p[:, 2] - h - self.cfg.swing_clearance

    def _duration_rows_foot(self, seg, i):
        lo_b, hi_b = self._st2_bounds
        st2 = seg.st2_dur(i)
        return np.array([st2 - lo_b, hi_b - st2])

    def _initial_feet_rows_foot(self, seg, i):
        target = self._init_feet_target[self.contact_feet.index(i)]
        return seg.p_st1[i] - target

    def _slope_rows_foot(self, seg, i):
        if self.terrain is None:
            c = np.zeros(2)
        else:
            x = np.array([seg.p_st1[i, 0], seg.p_st2[i, 0]])
            y = np.array([seg.p_st1[i, 1], seg.p_st2[i, 1]])
            c = self.terrain.slope_cost_at(x, y)
        return np.sqrt(self.cfg.w_slope * c + SLOPE_RESIDUAL_EPS)

    def _force_rate_rows_foot(self, fd_cost):
        w = np.sqrt(self.cfg.w_force_rate * self.cfg.dt_cost)
        return (w * fd_cost).ravel()

    def _duration_cost_rows_foot(self, seg, i):
        w = np.sqrt(self.cfg.w_duration)
        return w * np.array([
            seg.st1_dur[i] - self._nominal_durations[i, 0],
            seg.sw_dur[i] - self._nominal_durations[i, 1]])

    def _initial_base_rows(self, seg):
        vals = np.concatenate([seg.base_r[0], seg.base_th[0],
                               seg.base_v[0], seg.base_om[0]])
        res = vals - self._init_base_target
        res[5] = wrap_angle(res[5])
        return res

    def _goal_rows(self, seg):
        w = np.sqrt(self.cfg.w_goal)
        return w * np.array([
            seg.base_r[-1, 0] - self.goal[0],
            seg.base_r[-1, 1] - self.goal[1],
            wrap_angle(seg.base_th[-1, 2] - self.goal[2]),
        ])

    def _twist_rows(self, dr_cost, om_cost):
        w = np.sqrt(self.cfg.w_twist * self.cfg.dt_cost)
        return (w * np.concatenate([dr_cost, om_cost], axis=1)).ravel()

    # -- full evaluation -------------------------------------------------------

    def _base_eval(self, seg):
        # same math as spline.eval_base, with the Hermite basis on the fixed
        # grid folded into precomputed weight matrices
        from .geometry import (
            euler_rate_matrix_batch, euler_rate_matrix_dot_batch,
            omega_to_euler_rate_batch,
        )
        wpv, wpd, wvv, wvd, wav, wad = self._base_w
        r = wpv @ seg.base_r + wpd @ seg.base_v
        dr = wvv @ seg.base_r + wvd @ seg.base_v
        ddr = wav @ seg.base_r + wad @ seg.base_v
        thd_nodes = omega_to_euler_rate_batch(seg.base_th, seg.base_om)
        th = wpv @ seg.base_th + wpd @ thd_nodes
        thd = wvv @ seg.base_th + wvd @ thd_nodes
        thdd = wav @ seg.base_th + wad @ thd_nodes
        c_mat = euler_rate_matrix_batch(th)
        cd_mat = euler_rate_matrix_dot_batch(th, thd)
        om = (c_mat @ thd[..., None])[..., 0]
        omd = (c_mat @ thdd[..., None])[..., 0] \
            + (cd_mat @ thd[..., None])[..., 0]
        return {
            "r_dyn": r[self._sl_dyn], "ddr_dyn": ddr[self._sl_dyn],
            "th_dyn": th[self._sl_dyn], "om_dyn": om[self._sl_dyn],
            "omd_dyn": omd[self._sl_dyn],
            "r_rom": r[self._sl_rom],
            "rot_rom": euler_to_rot_batch(th[self._sl_rom]),
            "dr_cost": dr[self._sl_cost], "om_cost": om[self._sl_cost],
            "seg": seg,
        }

    def _feet_eval(self, seg):
        nd = self.nd
        p_dyn = np.empty((N_FEET, nd, 3))
        p_rom = np.empty((N_FEET, self.nr, 3))
        f_dyn = np.empty((N_FEET, nd, 3))
        fd_cost = np.empty((N_FEET, self.nc, 3))
        for i in range(N_FEET):
            p, _, _ = eval_foot(seg, i, self.t_feet_all)
            p_dyn[i], p_rom[i] = p[:nd], p[nd:]
            f, fd = eval_force(seg, i, self.t_force_all, with_rate=True)
            f_dyn[i] = f[:nd]
            fd_cost[i] = fd[nd:]
        return p_dyn, p_rom, f_dyn, fd_cost

    def eval_all(self, v):
        """(equality residuals, inequality values, cost residuals), scaled."""
        seg = self._segment(v)
        b = self._base_eval(seg)
        p_dyn, p_rom, f_dyn, fd_cost = self._feet_eval(seg)

        eq = np.empty(self.n_eq)
        torque = np.cross(p_dyn - b["r_dyn"][None], f_dyn).sum(axis=0)
        dyn = np.concatenate([
            self._dyn_lin(b["ddr_dyn"], f_dyn.sum(axis=0)),
            self._dyn_ang(b["th_dyn"], b["om_dyn"], b["omd_dyn"], torque),
        ], axis=1)
        eq[self.eq_slices["dynamics"]] = dyn.ravel()
        eq[self.eq_slices["terrain_height"]] = np.concatenate(
            [self._terrain_rows_foot(seg, i) for i in range(N_FEET)])
        eq[self.eq_slices["initial_base"]] = self._initial_base_rows(seg)
        if self.contact_feet:
            eq[self.eq_slices["initial_feet"]] = np.concatenate(
                [self._initial_feet_rows_foot(seg, i)
                 for i in self.contact_feet])

        ineq = np.empty(self.n_ineq)
        ineq[self.ineq_slices["range_of_motion"]] = self._rom_values(
            b["r_rom"], b["rot_rom"], p_rom)
        ineq[self.ineq_slices["friction_cone"]] = np.concatenate(
            [self._cone_rows_foot(seg, i) for i in range(N_FEET)])
        ineq[self.ineq_slices["swing_clearance"]] = np.concatenate(
            [self._clearance_rows_foot(seg, i) for i in range(N_FEET)])
        ineq[self.ineq_slices["stance2_duration"]] = np.concatenate(
            [self._duration_rows_foot(seg, i) for i in range(N_FEET)])

        cost = np.empty(self.n_cost)
        cost[self.cost_slices["goal"]] = self._goal_rows(seg)
        cost[self.cost_slices["twist"]] = self._twist_rows(
            b["dr_cost"], b["om_cost"])
        cost[self.cost_slices["force_rate"]] = np.concatenate(
            [self._force_rate_rows_foot(fd_cost[i]) for i in range(N_FEET)])
        cost[self.cost_slices["slope"]] = np.concatenate(
            [self._slope_rows_foot(seg, i) for i in range(N_FEET)])
        cost[self.cost_slices["duration"]] = np.concatenate(
            [self._duration_cost_rows_foot(seg, i) for i in range(N_FEET)])
        return eq, ineq, cost

    def eval_constraints(self, v):
        """(stacked residual vector, per-block max violation, inf_pr)."""
        eq, ineq, _ = self.eval_all(v)
        residual = np.concatenate([eq, ineq])
        per_block = {}
        for name, s in self.eq_slices.items():
            per_block[name] = float(np.max(np.abs(eq[s]))) \
                if s.stop > s.start else 0.0
        for name, s in self.ineq_slices.items():
            per_block[name] = float(np.max(np.maximum(0.0, -ineq[s]))) \
                if s.stop > s.start else 0.0
        inf_pr = max(per_block.values()) if per_block else 0.0
        return residual, per_block, inf_pr

    def inf_pr(self, v) -> float:
        return self.eval_constraints(v)[2]

    def eval_cost(self, v) -> float:
        """Weighted sum of the cost terms (exact, not the residual form)."""
        return sum(self.cost_terms(v).values())

    def cost_terms(self, v) -> dict:
        seg = self._segment(v)
        b = self._base_eval(seg)
        _, _, _, fd_cost = self._feet_eval(seg)
        goal = self._goal_rows(seg)
        twist = self._twist_rows(b["dr_cost"], b["om_cost"])
        frate = np.concatenate(
            [self._force_rate_rows_foot(fd_cost[i]) for i in range(N_FEET)])
        slope = 0.0
        if self.terrain is not None:
            for i in range(N_FEET):
                slope += float(self.terrain.slope_cost_at(*seg.p_st1[i, :2]))
                slope += float(self.terrain.slope_cost_at(*seg.p_st2[i, :2]))
        dur = np.concatenate(
            [self._duration_cost_rows_foot(seg, i) for i in range(N_FEET)])
        return {
            "goal": float(goal @ goal),
            "twist": float(twist @ twist),
            "force_rate": float(frate @ frate),
            "slope": float(self.cfg.w_slope * slope),
            "duration": float(dur @ dur),
        }

    # -- sweep evaluations for the Jacobian ------------------------------------

    def _base_sweep(self, seg, ctx):
        b = self._base_eval(seg)
        torque = ctx["pxf_sum"] - np.cross(b["r_dyn"], ctx["f_sum"])
        dyn = np.concatenate([
            self._dyn_lin(b["ddr_dyn"], ctx["f_sum"]),
            self._dyn_ang(b["th_dyn"], b["om_dyn"], b["omd_dyn"], torque),
        ], axis=1)
        rom = self._rom_values(b["r_rom"], b["rot_rom"], ctx["p_rom"])
        return np.concatenate([
            dyn.ravel(), rom, self._initial_base_rows(seg),
            self._goal_rows(seg),
            self._twist_rows(b["dr_cost"], b["om_cost"])])

    def _motion_sweep(self, seg, i, ctx):
        p, _, _ = eval_foot(seg, i, self.t_feet_all)
        p_dyn, p_rom = p[:self.nd], p[self.nd:]
        ang = -np.cross(p_dyn - ctx["r_dyn"], ctx["f_dyn"][i]) * self._s_ang
        rom = self._rom_values(ctx["r_rom"], ctx["rot_rom"], p_rom[None],
                               feet=[i])
        rows = [ang.ravel(), rom, self._terrain_rows_foot(seg, i),
                self._clearance_rows_foot(seg, i)]
        if i in self.contact_feet:
            rows.append(self._initial_feet_rows_foot(seg, i))
        rows.append(self._slope_rows_foot(seg, i))
        return np.concatenate(rows)

    def _dur_sweep(self, seg, i, ctx):
        p, _, _ = eval_foot(seg, i, self.t_feet_all)
        p_dyn, p_rom = p[:self.nd], p[self.nd:]
        f, fd = eval_force(seg, i, self.t_force_all, with_rate=True)
        f_dyn = f[:self.nd]
        lin = -f_dyn * self._s_lin
        ang = -np.cross(p_dyn - ctx["r_dyn"], f_dyn) * self._s_ang
        dyn = np.concatenate([lin, ang], axis=1).ravel()
        rom = self._rom_values(ctx["r_rom"], ctx["rot_rom"], p_rom[None],
                               feet=[i])
        return np.concatenate([
            dyn, rom, self._clearance_rows_foot(seg, i),
            self._duration_rows_foot(seg, i),
            self._force_rate_rows_foot(fd[self.nd:]),
            self._duration_cost_rows_foot(seg, i)])

    def jacobian(self, v) -> np.ndarray:
        """Central-difference Jacobian of the stacked (eq, ineq, cost) rows."""
        v = np.asarray(v, dtype=float)
        seg = self._segment(v)
        b = self._base_eval(seg)
        p_dyn, p_rom, f_dyn, _ = self._feet_eval(seg)
        ctx = {
            "r_dyn": b["r_dyn"],
            "f_sum": f_dyn.sum(axis=0),
            "pxf_sum": np.cross(p_dyn, f_dyn).sum(axis=0),
            "p_dyn": p_dyn, "f_dyn": f_dyn, "p_rom": p_rom,
            "r_rom": b["r_rom"], "rot_rom": b["rot_rom"],
        }
        jac = np.zeros((self.n_rows, self.n_vars))
        self._fill_base_columns(v, ctx, jac)
        self._fill_foot_columns(v, ctx, jac)
        jac[:, self.frozen] = 0.0
        return jac

    def _fill_base_columns(self, v, ctx, jac):
        n_nodes = self.template.config.n_base_nodes
        interval = self.base_row_interval
        rows = self.base_rows
        for parity in (0, 1):
            owner = np.where(interval % 2 == parity, interval, interval + 1)
            cols_of_row = 12 * owner
            nodes = np.arange(parity, n_nodes, 2)
            for c in range(12):
                h = self.cfg.fd_step * max(self.var_scale[c], 1.0)
                cols = 12 * nodes + c
                vp = v.copy()
                vp[cols] += h
                vm = v.copy()
                vm[cols] -= h
                rp = self._base_sweep(self._segment(vp), ctx)
                rm = self._base_sweep(self._segment(vm), ctx)
                jac[rows, cols_of_row + c] = (rp - rm) / (2.0 * h)

    def _fill_foot_columns(self, v, ctx, jac):
        seg = self._segment(v)
        sweeps = (
            (self.foot_motion_cols, self.foot_motion_rows, self._motion_sweep),
            (self.foot_dur_cols, self.foot_dur_rows, self._dur_sweep),
        )
        for i in range(N_FEET):
            self._fill_force_columns(seg, i, ctx, jac)
            for cols_list, rows_list, sweep in sweeps:
                rows = rows_list[i]
                for col in cols_list[i]:
                    if self.frozen[col]:
                        continue
                    h = self.cfg.fd_step * max(self.var_scale[col], 1.0)
                    vp = v.copy()
                    vp[col] += h
                    vm = v.copy()
                    vm[col] -= h
                    rp = sweep(self._segment(vp), i, ctx)
                    rm = sweep(self._segment(vm), i, ctx)
                    jac[rows, col] = (rp - rm) / (2.0 * h)

    def _fill_force_columns(self, seg, i, ctx, jac):
        """Exact derivatives for force node columns: for fixed durations the
        force splines are linear in the node values and rates."""
        from .spline import ST1, ST2, foot_phase_codes, _force_node_times
        cfg = seg.config
        k = cfg.n_force_nodes
        kf = k - 1
        nd, nc = self.nd, self.nc
        codes = foot_phase_codes(seg, i, self.t_force_all)
        cols_all = self.foot_force_cols[i]
        dyn0 = self.eq_slices["dynamics"].start
        frate0 = self.n_eq + self.n_ineq + self.cost_slices["force_rate"].start
        cone0 = self.n_eq + self.ineq_slices["friction_cone"].start
        k_nodes_per_foot = 2 * kf
        w_rate = np.sqrt(self.cfg.w_force_rate * self.cfg.dt_cost)
        mu = self.model.friction_coeff
        pr = ctx["p_dyn"][i] - ctx["r_dyn"]  # (nd, 3)
        eye = np.eye(3)

        # cone rows depend on the node values only, never on the time grids
        for s in (0, 1):
            free_nodes = range(0, k - 1) if s == 0 else range(1, k)
            for local_k, node in enumerate(free_nodes):
                node_flat = s * kf + local_k
                f_node = seg.f_nodes[i, s, node]
                ft = np.hypot(f_node[0], f_node[1])
                row0 = cone0 + (i * k_nodes_per_foot + node_flat) * 3
                for d in range(3):
                    col = cols_all[node_flat * 6 + d]
                    if self.frozen[col]:
                        continue
                    if d < 2:
                        g = -f_node[d] / ft if ft > 1e-12 else 0.0
                        jac[row0, col] = self._s_force * g
                    else:
                        jac[row0, col] = self._s_force * mu
                        jac[row0 + 1, col] = self._s_force
                        jac[row0 + 2, col] = -self._s_force

        for s, code in ((0, ST1), (1, ST2)):
            mask = codes == code
            if not np.any(mask):
                continue
            node_times = _force_node_times(seg, i, s)
            wpv, wpd, wvv, wvd, _, _ = hermite_weight_matrices(
                node_times, self.t_force_all[mask])
            n_dyn_m = int(mask[:nd].sum())
            dyn_t = np.flatnonzero(mask[:nd])
            cost_t = np.flatnonzero(mask[nd:])
            free_nodes = range(0, k - 1) if s == 0 else range(1, k)
            for local_k, node in enumerate(free_nodes):
                node_flat = s * kf + local_k
                for is_rate in (0, 1):
                    w_pos = (wpd if is_rate else wpv)[:, node]
                    w_vel = (wvd if is_rate else wvv)[:, node]
                    for d in range(3):
                        col = cols_all[node_flat * 6 + is_rate * 3 + d]
                        if self.frozen[col]:
                            continue
                        # linear dynamics rows
                        jac[dyn0 + 6 * dyn_t + d, col] = \
                            -self._s_lin * w_pos[:n_dyn_m]
                        # angular rows: d(cross(pr, f))/df_d = cross(pr, e_d)
                        cr = np.cross(pr[dyn_t], eye[d])
                        rows_ang = (dyn0 + 6 * dyn_t)[:, None] + \
                            np.array([3, 4, 5])
                        jac[rows_ang, col] += \
                            -self._s_ang * w_pos[:n_dyn_m, None] * cr
                        # force-rate cost rows
                        jac[frate0 + i * 3 * nc + 3 * cost_t + d, col] = \
                            w_rate * w_vel[n_dyn_m:]

    # -- diagnostics -----------------------------------------------------------

    def dynamics_defect(self, v, times) -> np.ndarray:
        """Scaled dynamics residual magnitude (max over the 6 rows) at
        arbitrary times; used for collocation-fidelity checks."""
        seg = self._segment(v)
        times = np.atleast_1d(np.asarray(times, dtype=float))
        r, _, ddr, th, om, omd = eval_base(seg, times)
        p = np.empty((N_FEET, len(times), 3))
        f = np.empty((N_FEET, len(times), 3))
        for i in range(N_FEET):
            p[i], _, _ = eval_foot(seg, i, times)
            f[i] = eval_force(seg, i, times)
        torque = np.cross(p - r[None], f).sum(axis=0)
        rows = np.concatenate([
            self._dyn_lin(ddr, f.sum(axis=0)),
            self._dyn_ang(th, om, omd, torque)], axis=1)
        return np.abs(rows).max(axis=1)

    def export_violations_csv(self, v, path) -> None:
        """(constraint, time, violation) rows for debugging."""
        eq, ineq, _ = self.eval_all(v)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["constraint", "time", "violation"])
            names = self.eq_names + self.ineq_names
            times = np.concatenate([self.eq_times, self.ineq_times])
            viol = np.concatenate([np.abs(eq), np.maximum(0.0, -ineq)])
            for name, t, g in zip(names, times, viol):
                writer.writerow([name, "" if np.isnan(t) else repr(float(t)),
                                 repr(float(g))])


def build_problem(task, init: TrajectorySegment, terrain, model: RobotModel,
                  cfg: NlpConfig = NlpConfig(),
                  seg_cfg: SegmentConfig = None) -> NlpProblem:
    """Assemble the constrained problem for one planning cycle."""
    if seg_cfg is not None:
        same = (init.config.horizon == seg_cfg.horizon
                and init.config.dt_base == seg_cfg.dt_base
                and init.config.n_force_nodes == seg_cfg.n_force_nodes)
        if not same:
            raise ValueError("initial segment layout does not match the "
                             "requested configuration")
    return NlpProblem(task, init, terrain, model, cfg)
