import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from rhloco.model import (
    RobotModel, Superquadric, friction_cone_residual, normal_force_component,
    srbd_residual, superquadric_value,
)


def independent_newton_euler(r, theta, r_ddot, omega, omega_dot,
                             foot_positions, forces, model):
    """Second implementation used as an oracle: scipy rotations, explicit
    loops, moment accumulation about the base."""
    rot = Rotation.from_euler("ZYX", [theta[2], theta[1], theta[0]]).as_matrix()
    lin = model.mass * np.asarray(r_ddot, dtype=float)
    lin[2] += model.mass * model.gravity
    for f in forces:
        lin = lin - np.asarray(f, dtype=float)
    inertia_world = rot @ model.inertia @ rot.T
    ang = inertia_world @ omega_dot + np.cross(omega, inertia_world @ omega)
    for p, f in zip(foot_positions, forces):
        lever = np.asarray(p, dtype=float) - np.asarray(r, dtype=float)
        ang = ang - np.cross(lever, f)
    return np.concatenate([lin, ang])


class TestSrbdResidual:
    def test_free_fall_is_exact(self, model):
        res = srbd_residual(
            r=[0.0, 0.0, 1.0], theta=[0.0, 0.0, 0.0],
            r_ddot=[0.0, 0.0, -model.gravity],
            omega=np.zeros(3), omega_dot=np.zeros(3),
            foot_positions=np.zeros((4, 3)), forces=np.zeros((4, 3)),
            model=model)
        assert np.allclose(res, 0.0, atol=1e-12)

    def test_static_equilibrium_under_hips(self, model):
        feet = model.nominal_standing_feet((0.0, 0.0, 0.0))
        fz = model.weight / 4.0
        res = srbd_residual(
            r=[0.0, 0.0, model.stand_height], theta=np.zeros(3),
            r_ddot=np.zeros(3), omega=np.zeros(3), omega_dot=np.zeros(3),
            foot_positions=feet, forces=np.tile([0.0, 0.0, fz], (4, 1)),
            model=model)
        assert np.allclose(res, 0.0, atol=1e-9)

    def test_matches_independent_implementation(self, model, rng):
        for _ in range(50):
            r = rng.normal(0, 1, 3)
            theta = rng.uniform(-1.0, 1.0, 3)
            args = dict(
                r=r, theta=theta,
                r_ddot=rng.normal(0, 5, 3),
                omega=rng.normal(0, 2, 3), omega_dot=rng.normal(0, 4, 3),
                foot_positions=r + rng.normal(0, 0.5, (4, 3)),
                forces=rng.normal(0, 200, (4, 3)))
            res = srbd_residual(**args, model=model)
            ref = independent_newton_euler(**args, model=model)
            scale = max(1.0, np.abs(ref).max())
            assert np.abs(res - ref).max() / scale < 1e-12

    def test_linear_in_each_force(self, model, rng):
        # superposition: residual(f_a + f_b) - residual(0) equals the sum of
        # the individual deviations, everything else held fixed
        base = dict(
            r=rng.normal(0, 1, 3), theta=rng.uniform(-0.8, 0.8, 3),
            r_ddot=rng.normal(0, 3, 3), omega=rng.normal(0, 1, 3),
            omega_dot=rng.normal(0, 2, 3),
            foot_positions=rng.normal(0, 0.5, (4, 3)))
        f_a = rng.normal(0, 150, (4, 3))
        f_b = rng.normal(0, 150, (4, 3))
        zero = np.zeros((4, 3))
        res = {}
        for name, f in (("a", f_a), ("b", f_b), ("ab", f_a + f_b),
                        ("0", zero)):
            res[name] = srbd_residual(**base, forces=f, model=model)
        lhs = res["ab"] - res["0"]
        rhs = (res["a"] - res["0"]) + (res["b"] - res["0"])
        assert np.abs(lhs - rhs).max() < 1e-10 * max(1.0, np.abs(lhs).max())

    def test_rejects_non_finite(self, model):
        with pytest.raises(ValueError):
            srbd_residual(
                r=[np.nan, 0, 0], theta=np.zeros(3), r_ddot=np.zeros(3),
                omega=np.zeros(3), omega_dot=np.zeros(3),
                foot_positions=np.zeros((4, 3)), forces=np.zeros((4, 3)),
                model=model)

    def test_rejects_near_singular_pitch(self, model):
        with pytest.raises(ValueError):
            srbd_residual(
                r=np.zeros(3), theta=[0.0, np.pi / 2, 0.0],
                r_ddot=np.zeros(3), omega=np.zeros(3), omega_dot=np.zeros(3),
                foot_positions=np.zeros((4, 3)), forces=np.zeros((4, 3)),
                model=model)


class TestSuperquadric:
    def test_center_is_zero(self):
        assert superquadric_value([0.0, 0.0, 0.0], Superquadric()) == 0.0

    def test_on_axis_surface_point(self):
        sq = Superquadric(exponents=(4.0, 6.0, 2.0), scalings=(0.3, 0.2, 0.1))
        assert superquadric_value([0.3, 0.0, 0.0], sq) == pytest.approx(1.0)

    def test_sphere_case_analytic(self):
        sq = Superquadric(exponents=(2.0, 2.0, 2.0), scalings=(0.3, 0.3, 0.3))
        p = np.array([0.3, 0.3, 0.3]) / np.sqrt(3.0)
        assert superquadric_value(p, sq) == pytest.approx(1.0, abs=1e-12)

    def test_even_and_monotone(self, rng):
        sq = Superquadric(exponents=(4.0, 4.0, 4.0), scalings=(0.2, 0.3, 0.4))
        for _ in range(100):
            p = rng.normal(0, 0.3, 3)
            v = superquadric_value(p, sq)
            assert superquadric_value(-p, sq) == pytest.approx(v, rel=1e-14)
            flipped = p * rng.choice([-1.0, 1.0], 3)
            assert superquadric_value(flipped, sq) == pytest.approx(
                v, rel=1e-14)
            grown = p * 1.01
            assert superquadric_value(grown, sq) > v or np.all(p == 0)

    def test_sphere_sublevel_equals_ball(self, rng):
        radius = 0.25
        sq = Superquadric(exponents=(2.0, 2.0, 2.0),
                          scalings=(radius, radius, radius))
        pts = rng.normal(0, 0.25, (1000, 3))
        inside_sq = superquadric_value(pts, sq) <= 1.0
        inside_ball = np.linalg.norm(pts, axis=1) <= radius
        assert np.array_equal(inside_sq, inside_ball)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            Superquadric(exponents=(1.5, 4.0, 4.0))
        with pytest.raises(ValueError):
            Superquadric(scalings=(0.0, 0.1, 0.1))


class TestFrictionCone:
    def test_interior_point(self):
        assert friction_cone_residual([0, 0, 100.0], [0, 0, 1.0], 0.5) == \
            pytest.approx(50.0)

    def test_boundary_point(self):
        assert friction_cone_residual([50.0, 0, 100.0], [0, 0, 1.0], 0.5) == \
            pytest.approx(0.0, abs=1e-12)

    def test_sign_matches_membership_oracle(self, rng):
        # membership by construction: the force is in the cone iff its angle
        # from the normal is at most atan(mu) and it pushes into the surface
        for _ in range(200):
            n = rng.normal(0, 1, 3)
            n /= np.linalg.norm(n)
            f = rng.normal(0, 100, 3)
            mu = rng.uniform(0.2, 1.2)
            fn = f @ n
            inside = fn > 0 and \
                np.arccos(np.clip(fn / np.linalg.norm(f), -1, 1)) <= \
                np.arctan(mu)
            res = friction_cone_residual(f, n, mu)
            if abs(res) > 1e-9 and fn != 0:
                assert (res >= 0 and fn >= 0) == inside
            assert normal_force_component(f, n) == pytest.approx(fn)


class TestRobotModel:
    def test_validation(self):
        with pytest.raises(ValueError):
            RobotModel(mass=-1.0)
        with pytest.raises(ValueError):
            RobotModel(inertia=np.diag([1.0, -1.0, 1.0]))
        with pytest.raises(ValueError):
            RobotModel(inertia=np.array([[1, 0.5, 0], [0, 1, 0], [0, 0, 1.0]]))
        with pytest.raises(ValueError):
            RobotModel(friction_coeff=0.0)

    def test_four_feet(self, model):
        assert model.hip_offsets.shape == (4, 3)
