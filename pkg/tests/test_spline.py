import numpy as np
import pytest

from rhloco.geometry import euler_rate_matrix
from rhloco.spline import (
    N_FEET, ST1, ST2, SW, SegmentConfig, TrajectorySegment, count_variables,
    eval_base, eval_foot, eval_force, foot_phase_codes, hermite_eval,
    regression_size, regression_vector, segment_from_json,
    segment_from_regression, segment_times, segment_to_json,
    transform_segment,
)

from conftest import random_segment


def textbook_hermite(t, t0, t1, p0, p1, v0, v1):
    """Independent Hermite-basis evaluation used as an oracle."""
    h = t1 - t0
    s = (t - t0) / h
    b0 = (1 + 2 * s) * (1 - s) ** 2
    b1 = s * (1 - s) ** 2
    b2 = s ** 2 * (3 - 2 * s)
    b3 = s ** 2 * (s - 1)
    return b0 * p0 + b1 * h * v0 + b2 * p1 + b3 * h * v1


class TestCountVariables:
    def test_reference_configuration_terms(self):
        # 1.2 s horizon at 0.1 s: 13 nodes, 12 channels each -> 156;
        # durations 4 x (2 - 1 + 1) = 8; foot motion 4 x (3*2 + 5) = 44;
        # forces 4 x 6 x (2 stances x 3 nodes - 2 pinned) = 96
        n_nodes = 1 + round(1.2 / 0.1)
        assert n_nodes == 13
        assert 12 * n_nodes == 156
        assert 4 * (2 - 1 + 1) == 8
        assert count_variables(1.2, 0.1) == 156 + 8 + 44 + 96

    def test_matches_enumeration_for_random_configs(self, rng):
        for _ in range(50):
            horizon = rng.uniform(0.6, 3.5)
            dt = rng.choice([0.05, 0.1, 0.15, 0.2])
            nf = int(rng.integers(2, 6))
            cfg = SegmentConfig(horizon=horizon, dt_base=dt, n_force_nodes=nf)
            seg = random_segment(rng, cfg)
            enumerated = seg.to_vector().size
            assert enumerated == count_variables(horizon, dt,
                                                 n_force_nodes=nf)

    def test_monotone_in_base_nodes(self):
        counts = [count_variables(1.2, dt) for dt in (0.2, 0.1, 0.05)]
        assert counts[0] < counts[1] < counts[2]

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            count_variables(0.0, 0.1)
        with pytest.raises(ValueError):
            count_variables(1.2, 0.1, n_force_nodes=1)


class TestHermite:
    def test_matches_textbook_basis(self, rng):
        times = np.sort(rng.uniform(0, 2, 5))
        times[0], times[-1] = 0.0, 2.0
        values = rng.normal(0, 1, (5, 2))
        derivs = rng.normal(0, 1, (5, 2))
        for t in rng.uniform(0, 2, 40):
            k = np.searchsorted(times, t, side="right") - 1
            k = min(max(k, 0), 3)
            ref = textbook_hermite(t, times[k], times[k + 1], values[k],
                                   values[k + 1], derivs[k], derivs[k + 1])
            pos, _, _ = hermite_eval(times, values, derivs, t)
            assert np.abs(pos[0] - ref).max() < 1e-12


class TestEvalBase:
    def test_node_values_exact(self, rng):
        seg = random_segment(rng)
        for j in (0, 4, 12):
            t = seg.base_times[j]
            r, dr, _, th, om, _ = eval_base(seg, t)
            assert np.array_equal(r, seg.base_r[j])
            assert np.array_equal(dr, seg.base_v[j])
            assert np.array_equal(th, seg.base_th[j])
            assert np.abs(om - seg.base_om[j]).max() < 1e-12

    def test_reproduces_global_cubic(self, rng):
        seg = random_segment(rng)
        coef_p = rng.normal(0, 0.3, (4, 3))   # position cubic per channel
        coef_a = rng.normal(0, 0.1, (4, 3))   # angle cubic per channel
        times = seg.base_times

        def poly(c, t):
            return c[0] + c[1] * t + c[2] * t ** 2 + c[3] * t ** 3

        def dpoly(c, t):
            return c[1] + 2 * c[2] * t + 3 * c[3] * t ** 2

        for j, t in enumerate(times):
            seg.base_r[j] = poly(coef_p, t)
            seg.base_v[j] = dpoly(coef_p, t)
            seg.base_th[j] = poly(coef_a, t)
            seg.base_om[j] = euler_rate_matrix(seg.base_th[j]) @ \
                dpoly(coef_a, t)
        for t in rng.uniform(times[0], times[-1], 30):
            r, dr, _, th, om, _ = eval_base(seg, t)
            assert np.abs(r - poly(coef_p, t)).max() < 1e-10
            assert np.abs(dr - dpoly(coef_p, t)).max() < 1e-10
            assert np.abs(th - poly(coef_a, t)).max() < 1e-10
            om_ref = euler_rate_matrix(poly(coef_a, t)) @ dpoly(coef_a, t)
            assert np.abs(om - om_ref).max() < 1e-9

    def test_velocity_matches_finite_difference(self, rng):
        seg = random_segment(rng)
        h = 1e-5
        for t in rng.uniform(seg.t0 + 0.05, seg.tf - 0.05, 20):
            r_p = eval_base(seg, t + h)[0]
            r_m = eval_base(seg, t - h)[0]
            dr = eval_base(seg, t)[1]
            assert np.abs((r_p - r_m) / (2 * h) - dr).max() < 1e-6

    def test_out_of_range_raises(self, rng):
        seg = random_segment(rng)
        with pytest.raises(ValueError):
            eval_base(seg, seg.tf + 0.5)


class TestEvalFoot:
    def test_first_stance_constant(self, rng):
        seg = random_segment(rng)
        ts, lo, _, _ = seg.foot_schedule(0)
        for t in np.linspace(ts, lo - 1e-6, 7):
            p, v, contact = eval_foot(seg, 0, t)
            assert np.array_equal(p, seg.p_st1[0])
            assert np.all(v == 0.0)
            assert contact

    def test_swing_midpoint_with_symmetric_node(self, rng):
        # interior node placed on the foothold midpoint (the heuristic's
        # choice): evaluation at the swing midpoint returns exactly that
        seg = random_segment(rng)
        seg.p_sw[1, :2] = 0.5 * (seg.p_st1[1, :2] + seg.p_st2[1, :2])
        _, lo, td, _ = seg.foot_schedule(1)
        p, _, contact = eval_foot(seg, 1, 0.5 * (lo + td))
        assert not contact
        assert np.allclose(
            p[:2], 0.5 * (seg.p_st1[1, :2] + seg.p_st2[1, :2]), atol=1e-14)

    def test_continuity_at_phase_boundaries(self, rng):
        for _ in range(10):
            seg = random_segment(rng)
            for i in range(N_FEET):
                _, lo, td, _ = seg.foot_schedule(i)
                for tb in (lo, td):
                    before = eval_foot(seg, i, tb - 1e-9)[0]
                    after = eval_foot(seg, i, tb + 1e-9)[0]
                    assert np.abs(before - after).max() < 1e-7

    def test_velocity_zero_at_swing_boundaries(self, rng):
        seg = random_segment(rng)
        _, lo, td, _ = seg.foot_schedule(2)
        v_lo = eval_foot(seg, 2, lo)[1]
        assert np.abs(v_lo).max() < 1e-12
        # just before touchdown the swing velocity tends to zero
        v_td = eval_foot(seg, 2, td - 1e-9)[1]
        assert np.abs(v_td).max() < 1e-5


class TestEvalForce:
    def test_zero_in_swing(self, rng):
        seg = random_segment(rng)
        _, lo, td, _ = seg.foot_schedule(0)
        for t in np.linspace(lo, td - 1e-9, 9):
            assert np.all(eval_force(seg, 0, t) == 0.0)

    def test_node_values_reproduced(self, rng):
        seg = random_segment(rng)
        cfg = seg.config
        ts, lo, td, te = seg.foot_schedule(1)
        times0 = np.linspace(ts, lo, cfg.n_force_nodes)
        for k in range(cfg.n_force_nodes - 1):
            f = eval_force(seg, 1, times0[k])
            assert np.abs(f - seg.f_nodes[1, 0, k]).max() < 1e-12

    def test_zero_at_swing_transitions(self, rng):
        seg = random_segment(rng)
        _, lo, td, _ = seg.foot_schedule(3)
        assert np.abs(eval_force(seg, 3, lo - 1e-12)).max() < 1e-9
        assert np.abs(eval_force(seg, 3, td)).max() < 1e-9


class TestSegmentTimes:
    def test_synthetic_boundaries(self, rng):
        seg = random_segment(rng)
        t_first, t_last, t0, tf, bounds = segment_times(seg)
        assert t_first == seg.foot_start.min()
        assert t_last == seg.foot_end.max()
        for i in range(N_FEET):
            assert bounds[i, 0] == seg.foot_start[i]
            assert bounds[i, 1] == pytest.approx(
                seg.foot_start[i] + seg.st1_dur[i])
            assert bounds[i, 2] == pytest.approx(
                seg.foot_start[i] + seg.st1_dur[i] + seg.sw_dur[i])
            assert bounds[i, 3] == seg.foot_end[i]

    def test_covering_property(self, rng):
        for _ in range(20):
            seg = random_segment(rng)
            t_first, t_last, t0, tf, _ = segment_times(seg)
            if t_first <= t0:  # phases cover the base horizon
                assert t_last >= tf


class TestPackUnpack:
    def test_roundtrip_identity(self, rng):
        cfg = SegmentConfig()
        template = random_segment(rng, cfg)
        for _ in range(20):
            v = rng.normal(0, 1, cfg.n_variables())
            seg = TrajectorySegment.from_vector(template, v)
            assert np.array_equal(seg.to_vector(), v)

    def test_pinned_nodes_restored_to_zero(self, rng):
        cfg = SegmentConfig()
        template = random_segment(rng, cfg)
        v = rng.normal(0, 1, cfg.n_variables())
        seg = TrajectorySegment.from_vector(template, v)
        assert np.all(seg.f_nodes[:, 0, -1] == 0.0)
        assert np.all(seg.f_nodes[:, 1, 0] == 0.0)
        assert np.all(seg.fd_nodes[:, 0, -1] == 0.0)
        assert np.all(seg.fd_nodes[:, 1, 0] == 0.0)

    def test_length_mismatch_raises(self, rng):
        template = random_segment(rng)
        with pytest.raises(ValueError):
            TrajectorySegment.from_vector(template, np.zeros(10))


class TestTransforms:
    def test_rigid_transform_roundtrip(self, rng):
        seg = random_segment(rng)
        moved = transform_segment(seg, [0.7, -0.3, 0.2], 0.6)
        back = transform_segment(moved, -np.asarray(
            [0.7, -0.3, 0.2]) @ np.eye(3), 0.0)
        # explicit inverse: rotate back then translate back
        inv = transform_segment(
            transform_segment(moved, [-0.7, 0.3, -0.2], 0.0), [0, 0, 0], -0.6)
        assert np.abs(inv.base_r - seg.base_r).max() < 1e-12
        assert np.abs(inv.p_st2 - seg.p_st2).max() < 1e-12
        assert np.abs(inv.base_th - seg.base_th).max() < 1e-12
        del moved, back

    def test_regression_roundtrip(self, rng):
        cfg = SegmentConfig()
        seg = random_segment(rng, cfg, t0=3.7)
        vec = regression_vector(seg)
        assert vec.size == regression_size(cfg)
        rebuilt = segment_from_regression(cfg, vec, 3.7)
        assert np.abs(rebuilt.to_vector() - seg.to_vector()).max() < 1e-12
        assert np.abs(rebuilt.foot_start - seg.foot_start).max() < 1e-12
        assert np.abs(rebuilt.foot_end - seg.foot_end).max() < 1e-12

    def test_json_roundtrip(self, rng, tmp_path):
        import json
        seg = random_segment(rng)
        record = segment_to_json(seg)
        path = tmp_path / "seg.json"
        path.write_text(json.dumps(record))
        loaded = segment_from_json(json.loads(path.read_text()))
        assert np.array_equal(loaded.to_vector(), seg.to_vector())
        assert loaded.config == seg.config


class TestPhaseCodes:
    def test_codes_and_clamping(self, rng):
        seg = random_segment(rng)
        ts, lo, td, te = seg.foot_schedule(0)
        assert foot_phase_codes(seg, 0, ts - 1.0)[0] == ST1  # clamped
        assert foot_phase_codes(seg, 0, 0.5 * (ts + lo))[0] == ST1
        assert foot_phase_codes(seg, 0, lo)[0] == SW
        assert foot_phase_codes(seg, 0, 0.5 * (lo + td))[0] == SW
        assert foot_phase_codes(seg, 0, td)[0] == ST2
        assert foot_phase_codes(seg, 0, te + 1.0)[0] == ST2  # clamped
