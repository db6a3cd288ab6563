"""Trajectory segment representation.

A segment bundles, over one planning window:
  - base motion: Hermite-cubic splines through nodes on a uniform grid, 12
    channels per node (linear position/velocity, Euler angles, angular
    velocity);
  - per-foot phase sequences stance-swing-stance with optimizable phase
    durations, constant stance positions and one interior swing node;
  - per-stance contact-force splines with force value/rate nodes, pinned to
    zero where a stance meets a swing.

Base and feet timelines are asynchronous: each foot's sequence has its own
start offset and covers at least the base horizon. The flattened decision
vector has a fixed, deterministic layout so segments of equal configuration
are interchangeable fixed-size vectors.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    euler_rate_matrix_batch,
    euler_rate_matrix_dot_batch,
    omega_to_euler_rate_batch,
    rotate_xy,
)

N_FEET = 4
N_STANCE = 2
N_SWING = 1

# phase codes returned by foot_phase_codes
ST1, SW, ST2 = 0, 1, 2

FORMAT_VERSION = 1


def count_variables(horizon: float, dt_base: float, n_feet: int = N_FEET,
                    n_st: int = N_STANCE, n_sw: int = N_SWING,
                    n_force_nodes: int = 3) -> int:
    """Number of scalar decision variables of a segment configuration.

    Sum of: 12 per base node; per-foot free phase durations (one stance
    duration is derived from the fixed sequence end); per-foot motion nodes
    (3 per stance, 3+2 per swing); and 6 per free force node, where each
    swing pins the adjacent force node of both neighboring stances to zero.
    """
    if min(horizon, dt_base) <= 0.0:
        raise ValueError("horizon and dt_base must be > 0")
    if min(n_feet, n_st, n_sw) < 1 or n_force_nodes < 2:
        raise ValueError("invalid segment configuration counts")
    n_base = 1 + round(horizon / dt_base)
    base = 12 * n_base
    durations = n_feet * (n_st - 1 + n_sw)
    foot_motion = n_feet * (3 * n_st + 5 * n_sw)
    free_force_nodes = n_st * n_force_nodes - 2 * n_sw
    forces = n_feet * 6 * free_force_nodes
    return base + durations + foot_motion + forces


@dataclass(frozen=True)
class SegmentConfig:
    """Structural configuration shared by interchangeable segments."""

    horizon: float = 1.2
    dt_base: float = 0.1
    n_force_nodes: int = 3

    @property
    def n_base_nodes(self) -> int:
        return 1 + round(self.horizon / self.dt_base)

    @property
    def n_free_force_nodes(self) -> int:
        # per stance: one boundary node adjacent to the swing is pinned
        return self.n_force_nodes - 1

    def n_variables(self) -> int:
        return count_variables(self.horizon, self.dt_base,
                               n_force_nodes=self.n_force_nodes)


# ---------------------------------------------------------------------------
# Hermite cubic evaluation


def hermite_eval(node_times, values, derivs, t):
    """Evaluate a piecewise Hermite cubic at times t.

    node_times: (n,) strictly increasing; values, derivs: (n, D).
    Queries are clamped to the spline domain. Returns (pos, vel, acc)
    each of shape (T, D).
    """
    node_times = np.asarray(node_times, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    idx = np.clip(np.searchsorted(node_times, t, side="right") - 1,
                  0, len(node_times) - 2)
    t0 = node_times[idx]
    h = node_times[idx + 1] - t0
    s = np.clip((t - t0) / h, 0.0, 1.0)

    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    d00 = (6 * s2 - 6 * s)
    d10 = 3 * s2 - 4 * s + 1
    d01 = -6 * s2 + 6 * s
    d11 = 3 * s2 - 2 * s
    a00 = 12 * s - 6
    a10 = 6 * s - 4
    a01 = -12 * s + 6
    a11 = 6 * s - 2

    p0, p1 = values[idx], values[idx + 1]
    v0, v1 = derivs[idx], derivs[idx + 1]
    hc = h[:, None]
    pos = h00[:, None] * p0 + h10[:, None] * hc * v0 \
        + h01[:, None] * p1 + h11[:, None] * hc * v1
    vel = (d00[:, None] / hc) * p0 + d10[:, None] * v0 \
        + (d01[:, None] / hc) * p1 + d11[:, None] * v1
    acc = (a00[:, None] / hc ** 2) * p0 + (a10[:, None] / hc) * v0 \
        + (a01[:, None] / hc ** 2) * p1 + (a11[:, None] / hc) * v1
    return pos, vel, acc


def hermite_weight_matrices(node_times, t):
    """Dense weight matrices turning Hermite evaluation on a fixed grid into
    matrix products: pos = Wpv @ values + Wpd @ derivs, and likewise for
    velocity and acceleration. Queries clamp to the spline domain."""
    node_times = np.asarray(node_times, dtype=float)
    n = len(node_times)
    t = np.asarray(t, dtype=float)
    idx = np.clip(np.searchsorted(node_times, t, side="right") - 1, 0, n - 2)
    h = node_times[idx + 1] - node_times[idx]
    s = np.clip((t - node_times[idx]) / h, 0.0, 1.0)
    s2, s3 = s * s, s ** 3
    rows = np.arange(len(t))
    mats = [np.zeros((len(t), n)) for _ in range(6)]
    wpv, wpd, wvv, wvd, wav, wad = mats
    wpv[rows, idx] = 2 * s3 - 3 * s2 + 1
    wpv[rows, idx + 1] = -2 * s3 + 3 * s2
    wpd[rows, idx] = (s3 - 2 * s2 + s) * h
    wpd[rows, idx + 1] = (s3 - s2) * h
    wvv[rows, idx] = (6 * s2 - 6 * s) / h
    wvv[rows, idx + 1] = (-6 * s2 + 6 * s) / h
    wvd[rows, idx] = 3 * s2 - 4 * s + 1
    wvd[rows, idx + 1] = 3 * s2 - 2 * s
    wav[rows, idx] = (12 * s - 6) / h ** 2
    wav[rows, idx + 1] = (-12 * s + 6) / h ** 2
    wad[rows, idx] = (6 * s - 4) / h
    wad[rows, idx + 1] = (6 * s - 2) / h
    return mats


# ---------------------------------------------------------------------------
# Segment


@dataclass
class TrajectorySegment:
    """One receding-horizon plan; immutable by convention after construction."""

    config: SegmentConfig
    t0: float  # base horizon start (absolute time)

    # base nodes, shape (n_base_nodes, 3) each
    base_r: np.ndarray
    base_v: np.ndarray
    base_th: np.ndarray
    base_om: np.ndarray

    # per-foot structural timing (absolute): sequence start and fixed end
    foot_start: np.ndarray  # (4,)
    foot_end: np.ndarray    # (4,)

    # free phase durations
    st1_dur: np.ndarray  # (4,)
    sw_dur: np.ndarray   # (4,)

    # foot motion nodes
    p_st1: np.ndarray    # (4, 3) first stance foothold
    p_sw: np.ndarray     # (4, 3) interior swing node position
    v_sw_xy: np.ndarray  # (4, 2) swing node planar velocity (z velocity 0)
    p_st2: np.ndarray    # (4, 3) second stance foothold

    # force nodes per foot per stance, pinned entries kept at zero
    f_nodes: np.ndarray   # (4, 2, n_force_nodes, 3)
    fd_nodes: np.ndarray  # (4, 2, n_force_nodes, 3)

    @property
    def base_times(self) -> np.ndarray:
        n = self.config.n_base_nodes
        return self.t0 + self.config.dt_base * np.arange(n)

    @property
    def tf(self) -> float:
        """End of the base horizon (last base node time)."""
        return self.t0 + self.config.dt_base * (self.config.n_base_nodes - 1)

    def st2_dur(self, foot=None) -> np.ndarray:
        """Derived second-stance durations closing each sequence at foot_end."""
        d = self.foot_end - (self.foot_start + self.st1_dur + self.sw_dur)
        return d if foot is None else d[foot]

    def foot_schedule(self, foot: int):
        """(sequence start, liftoff, touchdown, sequence end) for one foot."""
        ts = self.foot_start[foot]
        lo = ts + self.st1_dur[foot]
        td = lo + self.sw_dur[foot]
        return ts, lo, td, self.foot_end[foot]

    def copy(self) -> "TrajectorySegment":
        return replace(
            self,
            base_r=self.base_r.copy(), base_v=self.base_v.copy(),
            base_th=self.base_th.copy(), base_om=self.base_om.copy(),
            foot_start=self.foot_start.copy(), foot_end=self.foot_end.copy(),
            st1_dur=self.st1_dur.copy(), sw_dur=self.sw_dur.copy(),
            p_st1=self.p_st1.copy(), p_sw=self.p_sw.copy(),
            v_sw_xy=self.v_sw_xy.copy(), p_st2=self.p_st2.copy(),
            f_nodes=self.f_nodes.copy(), fd_nodes=self.fd_nodes.copy(),
        )

    # -- decision vector ----------------------------------------------------

    def to_vector(self) -> np.ndarray:
        """Flatten to the canonical decision vector (pinned nodes excluded)."""
        cfg = self.config
        parts = [np.concatenate([
            self.base_r, self.base_v, self.base_th, self.base_om], axis=1
        ).ravel()]
        parts.append(np.stack([self.st1_dur, self.sw_dur], axis=1).ravel())
        parts.append(np.concatenate([
            self.p_st1, self.p_sw, self.v_sw_xy, self.p_st2], axis=1).ravel())
        nf = cfg.n_force_nodes
        force = np.concatenate([
            self.f_nodes[:, 0, :nf - 1], self.fd_nodes[:, 0, :nf - 1],
            self.f_nodes[:, 1, 1:], self.fd_nodes[:, 1, 1:],
        ], axis=1)  # (4, 4*(nf-1), 3) grouped per foot
        # interleave value/rate per node, stance-major within each foot
        k = nf - 1
        per_foot = np.concatenate([
            np.stack([force[:, :k], force[:, k:2 * k]], axis=2),
            np.stack([force[:, 2 * k:3 * k], force[:, 3 * k:]], axis=2),
        ], axis=1)  # (4, 2k, 2, 3)
        parts.append(per_foot.reshape(N_FEET, -1).ravel())
        v = np.concatenate(parts)
        assert v.size == cfg.n_variables()
        return v

    @classmethod
    def from_vector(cls, template: "TrajectorySegment",
                    v: np.ndarray) -> "TrajectorySegment":
        """Rebuild a segment from a decision vector, keeping the template's
        structural timing. Pinned force nodes are restored to zero."""
        cfg = template.config
        v = np.asarray(v, dtype=float)
        if v.size != cfg.n_variables():
            raise ValueError(
                f"decision vector length {v.size} != {cfg.n_variables()}")
        n = cfg.n_base_nodes
        base = v[:12 * n].reshape(n, 12)
        off = 12 * n
        dur = v[off:off + 2 * N_FEET].reshape(N_FEET, 2)
        off += 2 * N_FEET
        foot = v[off:off + 11 * N_FEET].reshape(N_FEET, 11)
        off += 11 * N_FEET
        k = cfg.n_force_nodes - 1
        raw = v[off:].reshape(N_FEET, 2, k, 2, 3)
        f_nodes = np.zeros((N_FEET, 2, cfg.n_force_nodes, 3))
        fd_nodes = np.zeros_like(f_nodes)
        f_nodes[:, 0, :k] = raw[:, 0, :, 0]
        fd_nodes[:, 0, :k] = raw[:, 0, :, 1]
        f_nodes[:, 1, 1:] = raw[:, 1, :, 0]
        fd_nodes[:, 1, 1:] = raw[:, 1, :, 1]
        return cls(
            config=cfg, t0=template.t0,
            base_r=base[:, 0:3].copy(), base_v=base[:, 3:6].copy(),
            base_th=base[:, 6:9].copy(), base_om=base[:, 9:12].copy(),
            foot_start=template.foot_start.copy(),
            foot_end=template.foot_end.copy(),
            st1_dur=dur[:, 0].copy(), sw_dur=dur[:, 1].copy(),
            p_st1=foot[:, 0:3].copy(), p_sw=foot[:, 3:6].copy(),
            v_sw_xy=foot[:, 6:8].copy(), p_st2=foot[:, 8:11].copy(),
            f_nodes=f_nodes, fd_nodes=fd_nodes,
        )


def variable_blocks(cfg: SegmentConfig) -> dict:
    """Index ranges of the decision-vector blocks, plus per-kind indices used
    for solver scaling."""
    n = cfg.n_base_nodes
    k = cfg.n_force_nodes - 1
    nb = 12 * n
    nd = 2 * N_FEET
    nm = 11 * N_FEET
    nf = N_FEET * 2 * k * 6
    blocks = {
        "base": (0, nb),
        "durations": (nb, nb + nd),
        "foot_motion": (nb + nd, nb + nd + nm),
        "forces": (nb + nd + nm, nb + nd + nm + nf),
    }
    kinds = np.empty(nb + nd + nm + nf, dtype=object)
    per_node = ["pos"] * 3 + ["vel"] * 3 + ["ang"] * 3 + ["angvel"] * 3
    kinds[:nb] = per_node * n
    kinds[nb:nb + nd] = ["dur"] * nd
    per_foot = ["pos"] * 6 + ["vel"] * 2 + ["pos"] * 3
    kinds[nb + nd:nb + nd + nm] = per_foot * N_FEET
    per_force_node = ["force"] * 3 + ["force_rate"] * 3
    kinds[nb + nd + nm:] = per_force_node * (N_FEET * 2 * k)
    return {"blocks": blocks, "kinds": kinds}


def duration_indices(cfg: SegmentConfig) -> np.ndarray:
    """Decision-vector indices of (st1, sw) durations, foot-major."""
    start = 12 * cfg.n_base_nodes
    return np.arange(start, start + 2 * N_FEET)


def foot_variable_indices(cfg: SegmentConfig, foot: int) -> dict:
    """Decision-vector indices of one foot's blocks (for freezing)."""
    n = cfg.n_base_nodes
    k = cfg.n_force_nodes - 1
    dur0 = 12 * n + 2 * foot
    mot0 = 12 * n + 2 * N_FEET + 11 * foot
    f0 = 12 * n + 2 * N_FEET + 11 * N_FEET + foot * 2 * k * 6
    return {
        "durations": np.arange(dur0, dur0 + 2),
        "motion": np.arange(mot0, mot0 + 11),
        "p_st1": np.arange(mot0, mot0 + 3),
        "swing": np.arange(mot0 + 3, mot0 + 8),
        "p_st2": np.arange(mot0 + 8, mot0 + 11),
        "forces_st1": np.arange(f0, f0 + k * 6),
        "forces_st2": np.arange(f0 + k * 6, f0 + 2 * k * 6),
    }


# ---------------------------------------------------------------------------
# Evaluation


def eval_base(seg: TrajectorySegment, t):
    """Base motion at time(s) t in [t0, tf].

    Returns (r, dr, ddr, theta, omega, omega_dot); rows per query time.
    Node values and derivatives are reproduced exactly at node times; angular
    velocity nodes are converted through the Euler-rate map so orientation
    interpolation happens on Euler angles.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    times = seg.base_times
    if np.any(t_arr < times[0] - 1e-9) or np.any(t_arr > times[-1] + 1e-9):
        raise ValueError("base evaluation time outside the segment horizon")
    r, dr, ddr = hermite_eval(times, seg.base_r, seg.base_v, t_arr)
    th_dot_nodes = omega_to_euler_rate_batch(seg.base_th, seg.base_om)
    th, thd, thdd = hermite_eval(times, seg.base_th, th_dot_nodes, t_arr)
    c_mat = euler_rate_matrix_batch(th)
    cd_mat = euler_rate_matrix_dot_batch(th, thd)
    om = (c_mat @ thd[..., None])[..., 0]
    omd = (c_mat @ thdd[..., None])[..., 0] + (cd_mat @ thd[..., None])[..., 0]
    if np.isscalar(t) or np.ndim(t) == 0:
        return r[0], dr[0], ddr[0], th[0], om[0], omd[0]
    return r, dr, ddr, th, om, omd


def foot_phase_codes(seg: TrajectorySegment, foot: int, t) -> np.ndarray:
    """Phase code per query time: ST1, SW or ST2.

    Intervals are half-open [start, end); times outside the sequence span
    clamp to the nearest stance.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    _, lo, td, _ = seg.foot_schedule(foot)
    codes = np.full(t_arr.shape, ST1, dtype=int)
    codes[t_arr >= lo] = SW
    codes[t_arr >= td] = ST2
    return codes


def _swing_nodes(seg: TrajectorySegment, foot: int):
    _, lo, td, _ = seg.foot_schedule(foot)
    mid = 0.5 * (lo + td)
    times = np.array([lo, mid, td])
    values = np.stack([seg.p_st1[foot], seg.p_sw[foot], seg.p_st2[foot]])
    derivs = np.zeros((3, 3))
    derivs[1, :2] = seg.v_sw_xy[foot]
    return times, values, derivs


def eval_foot(seg: TrajectorySegment, foot: int, t):
    """Foot position/velocity and contact flag at time(s) t.

    Constant position during stance; two-piece Hermite over the swing through
    the interior node. Continuous at phase boundaries by construction.
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    codes = foot_phase_codes(seg, foot, t_arr)
    pos = np.where((codes == ST1)[:, None], seg.p_st1[foot], seg.p_st2[foot])
    vel = np.zeros_like(pos)
    in_swing = codes == SW
    if np.any(in_swing):
        times, values, derivs = _swing_nodes(seg, foot)
        p, v, _ = hermite_eval(times, values, derivs, t_arr[in_swing])
        pos[in_swing] = p
        vel[in_swing] = v
    contact = codes != SW
    if np.isscalar(t) or np.ndim(t) == 0:
        return pos[0], vel[0], bool(contact[0])
    return pos, vel, contact


def _force_node_times(seg: TrajectorySegment, foot: int, stance: int):
    ts, lo, td, te = seg.foot_schedule(foot)
    a, b = (ts, lo) if stance == 0 else (td, te)
    return np.linspace(a, b, seg.config.n_force_nodes)


def eval_force(seg: TrajectorySegment, foot: int, t, with_rate: bool = False):
    """Contact force at time(s) t: Hermite over stance, identically zero in
    swing, continuous (zero) at swing transitions."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    codes = foot_phase_codes(seg, foot, t_arr)
    f = np.zeros((t_arr.size, 3))
    fd = np.zeros((t_arr.size, 3))
    for stance, code in ((0, ST1), (1, ST2)):
        mask = codes == code
        if not np.any(mask):
            continue
        times = _force_node_times(seg, foot, stance)
        vals, rates, _ = hermite_eval(
            times, seg.f_nodes[foot, stance], seg.fd_nodes[foot, stance],
            t_arr[mask])
        f[mask] = vals
        fd[mask] = rates
    if np.isscalar(t) or np.ndim(t) == 0:
        return (f[0], fd[0]) if with_rate else f[0]
    return (f, fd) if with_rate else f


def segment_times(seg: TrajectorySegment):
    """Window summary: (t_first, t_last, t0_base, tf_base, boundaries) where
    t_first/t_last span the earliest first-stance start to the latest
    second-stance end and boundaries is a (4, 4) array of per-foot
    (start, liftoff, touchdown, end)."""
    boundaries = np.array([seg.foot_schedule(i) for i in range(N_FEET)])
    return (boundaries[:, 0].min(), boundaries[:, 3].max(),
            seg.t0, seg.tf, boundaries)


# ---------------------------------------------------------------------------
# Frame transforms and serialization


def transform_segment(seg: TrajectorySegment, dxyz, dyaw: float
                      ) -> TrajectorySegment:
    """Rigid SE(2)+z transform: rotate by dyaw about the world z axis, then
    translate by dxyz. Times are unchanged."""
    out = seg.copy()
    d = np.asarray(dxyz, dtype=float)
    out.base_r = rotate_xy(dyaw, seg.base_r) + d
    out.base_v = rotate_xy(dyaw, seg.base_v)
    out.base_th = seg.base_th.copy()
    out.base_th[:, 2] += dyaw
    out.base_om = rotate_xy(dyaw, seg.base_om)
    for name in ("p_st1", "p_sw", "p_st2"):
        setattr(out, name, rotate_xy(dyaw, getattr(seg, name)) + d)
    out.v_sw_xy = rotate_xy(dyaw, seg.v_sw_xy)
    out.f_nodes = rotate_xy(dyaw, seg.f_nodes)
    out.fd_nodes = rotate_xy(dyaw, seg.fd_nodes)
    return out


def regression_vector(seg: TrajectorySegment) -> np.ndarray:
    """Fixed-size learning target: decision vector plus per-foot structural
    timing (sequence start and end relative to the base start)."""
    return np.concatenate([
        seg.to_vector(),
        seg.foot_start - seg.t0,
        seg.foot_end - seg.t0,
    ])


def regression_size(cfg: SegmentConfig) -> int:
    return cfg.n_variables() + 2 * N_FEET


def segment_from_regression(cfg: SegmentConfig, vec: np.ndarray, t0: float
                            ) -> TrajectorySegment:
    """Inverse of regression_vector, anchoring the segment at time t0."""
    vec = np.asarray(vec, dtype=float)
    nv = cfg.n_variables()
    if vec.size != nv + 2 * N_FEET:
        raise ValueError(f"regression vector length {vec.size} != {nv + 8}")
    template = empty_segment(cfg, t0)
    template.foot_start = t0 + vec[nv:nv + N_FEET]
    template.foot_end = t0 + vec[nv + N_FEET:]
    return TrajectorySegment.from_vector(template, vec[:nv])


def empty_segment(cfg: SegmentConfig, t0: float) -> TrajectorySegment:
    n = cfg.n_base_nodes
    return TrajectorySegment(
        config=cfg, t0=t0,
        base_r=np.zeros((n, 3)), base_v=np.zeros((n, 3)),
        base_th=np.zeros((n, 3)), base_om=np.zeros((n, 3)),
        foot_start=np.full(N_FEET, t0),
        foot_end=np.full(N_FEET, t0 + cfg.horizon + 1.0),
        st1_dur=np.full(N_FEET, 0.5), sw_dur=np.full(N_FEET, 0.4),
        p_st1=np.zeros((N_FEET, 3)), p_sw=np.zeros((N_FEET, 3)),
        v_sw_xy=np.zeros((N_FEET, 2)), p_st2=np.zeros((N_FEET, 3)),
        f_nodes=np.zeros((N_FEET, 2, cfg.n_force_nodes, 3)),
        fd_nodes=np.zeros((N_FEET, 2, cfg.n_force_nodes, 3)),
    )


def segment_to_json(seg: TrajectorySegment) -> dict:
    """Portable record: flat numeric array plus a layout descriptor."""
    return {
        "format_version": FORMAT_VERSION,
        "layout": {
            "horizon": seg.config.horizon,
            "dt_base": seg.config.dt_base,
            "n_force_nodes": seg.config.n_force_nodes,
            "n_feet": N_FEET,
            "n_variables": seg.config.n_variables(),
        },
        "t0": seg.t0,
        "foot_start": seg.foot_start.tolist(),
        "foot_end": seg.foot_end.tolist(),
        "decision": seg.to_vector().tolist(),
    }


def segment_from_json(record: dict) -> TrajectorySegment:
    lay = record["layout"]
    cfg = SegmentConfig(horizon=lay["horizon"], dt_base=lay["dt_base"],
                        n_force_nodes=lay["n_force_nodes"])
    template = empty_segment(cfg, record["t0"])
    template.foot_start = np.asarray(record["foot_start"], dtype=float)
    template.foot_end = np.asarray(record["foot_end"], dtype=float)
    return TrajectorySegment.from_vector(
        template, np.asarray(record["decision"], dtype=float))
