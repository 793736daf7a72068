import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from tendonsim import models
from tendonsim.errors import GeometryError, JointLimitError, ValidationError
from tendonsim.geometry import random_rigid_transform
from tendonsim.model import (EndEffector, Joint, MuscleRouting, ViaPoint,
                             build_model, end_effector_position,
                             joint_muscle_jacobian, load_model,
                             model_from_dict, model_to_dict, muscle_lengths,
                             pseudo_inverse, task_jacobian,
                             with_base_transform)
from .conftest import finite_difference_jacobian, random_pose

R = models.PULLEY_RADIUS


class TestMuscleLengths:
    def test_zero_pose_returns_rest_length(self, pulley):
        lengths = muscle_lengths(pulley, np.zeros(1))
        rest = np.array([m.rest_length for m in pulley.muscles])
        np.testing.assert_allclose(lengths, rest, rtol=0, atol=1e-15)

    def test_pulley_flexor_tracks_ideal_wrap(self, pulley):
        # ideal capstan: l(theta) = l0 - r*theta on the flexor side
        l0 = muscle_lengths(pulley, np.zeros(1))[0]
        l = muscle_lengths(pulley, np.array([0.5]))[0]
        assert l == pytest.approx(l0 - R * 0.5, abs=1e-4)
        for theta in np.linspace(0.0, 0.5, 21):
            l = muscle_lengths(pulley, np.array([theta]))[0]
            assert l == pytest.approx(l0 - R * theta, abs=1e-4)

    def test_pulley_extensor_tracks_ideal_wrap(self, pulley):
        l0 = muscle_lengths(pulley, np.zeros(1))[1]
        l = muscle_lengths(pulley, np.array([0.5]))[1]
        assert l == pytest.approx(l0 + R * 0.5, abs=1e-4)

    def test_straight_biarticular_zero_pose_distance(self, planar_arm):
        # anchors: base (-0.03, 0.04), fore-local (0.06, 0.02) -> world (0.36, 0.02)
        expected = np.hypot(0.36 - (-0.03), 0.02 - 0.04)
        lengths = muscle_lengths(planar_arm, np.zeros(2))
        assert lengths[2] == pytest.approx(expected, abs=1e-12)

    def test_joint_limit_violation_names_joint(self, planar_arm):
        with pytest.raises(JointLimitError, match="shoulder"):
            muscle_lengths(planar_arm, np.array([3.5, 0.0]))

    def test_degenerate_routing_raises(self):
        joints = [Joint("j", "base", "tip", axis=np.array([0.0, 0.0, 1.0]),
                        origin_xyz=np.zeros(3), origin_rpy=np.zeros(3),
                        lower=-1.0, upper=1.0)]
        muscles = [MuscleRouting("bad", (
            ViaPoint("base", np.array([0.1, 0.0, 0.0])),
            ViaPoint("tip", np.array([0.1, 0.0, 0.0])),  # coincides at zero pose
        ), rest_length=1.0)]
        ee = EndEffector("tip", np.zeros(3), np.zeros(3))
        with pytest.raises((GeometryError, ValidationError)):
            m = build_model("degen", ["base", "tip"], joints, muscles, ee,
                            fill_rest_lengths=True)
            muscle_lengths(m, np.zeros(1))

    def test_rigid_base_transform_invariance(self, desk_arm):
        rng = np.random.default_rng(7)
        theta = random_pose(desk_arm, rng)
        ref = muscle_lengths(desk_arm, theta)
        for _ in range(5):
            q, t = random_rigid_transform(rng)
            # recover rpy is unnecessary: feed the rotation via rpy angles
            yaw = np.arctan2(q[1, 0], q[0, 0])
            pitch = np.arcsin(np.clip(-q[2, 0], -1, 1))
            roll = np.arctan2(q[2, 1], q[2, 2])
            moved = with_base_transform(desk_arm, t, (roll, pitch, yaw))
            np.testing.assert_allclose(muscle_lengths(moved, theta), ref, atol=1e-12)


class TestJointMuscleJacobian:
    def test_pulley_moment_arm_near_constant(self, pulley):
        # the 64-point polyline wrap approximates the ideal +-0.02 m moment
        # arm to about 2.5% across the calibrated range
        for theta in np.linspace(0.0, 0.5, 11):
            g = joint_muscle_jacobian(pulley, np.array([theta]))
            assert g[0, 0] == pytest.approx(-R, abs=5e-4)
            assert g[1, 0] == pytest.approx(+R, abs=5e-4)

    @pytest.mark.parametrize("model_name", ["planar_two_link", "pulley_pair",
                                            "desk_arm", "arm_13dof"])
    def test_matches_finite_differences(self, model_name):
        model = models.BUNDLED_BUILDERS[model_name]()
        rng = np.random.default_rng(3)
        for _ in range(20):
            theta = random_pose(model, rng)
            g = joint_muscle_jacobian(model, theta)
            fd = finite_difference_jacobian(lambda q: muscle_lengths(model, q), theta)
            scale = max(np.abs(fd).max(), 1e-9)
            assert np.abs(g - fd).max() / scale < 1e-5

    def test_proximal_muscle_has_zero_distal_column(self, planar_arm):
        rng = np.random.default_rng(5)
        for _ in range(10):
            theta = random_pose(planar_arm, rng)
            g = joint_muscle_jacobian(planar_arm, theta)
            # shoulder_mono never crosses the elbow
            assert g[0, 1] == 0.0


class TestEndEffector:
    def test_straight_configuration(self, planar_arm):
        np.testing.assert_allclose(end_effector_position(planar_arm, np.zeros(2)),
                                   [0.55, 0.0, 0.0], atol=1e-15)

    def test_quarter_turn(self, planar_arm):
        p = end_effector_position(planar_arm, np.array([np.pi / 2, 0.0]))
        np.testing.assert_allclose(p, [0.0, 0.55, 0.0], atol=1e-12)

    def test_zero_pose_matches_declared_frame(self, desk_arm):
        # zero pose: links stack along x, EE offset 0.25 on the 0.3 fore link
        p = end_effector_position(desk_arm, np.zeros(2))
        np.testing.assert_allclose(p, [0.55, 0.0, 0.0], atol=1e-15)


class TestTaskJacobian:
    def test_matches_finite_differences(self, desk_arm, big_arm):
        rng = np.random.default_rng(11)
        for model in (desk_arm, big_arm):
            for _ in range(20):
                theta = random_pose(model, rng)
                j = task_jacobian(model, theta)
                fd = finite_difference_jacobian(
                    lambda q: end_effector_position(model, q), theta)
                scale = max(np.abs(fd).max(), 1e-9)
                assert np.abs(j - fd).max() / scale < 1e-5

    def test_planar_arm_first_column_at_zero(self, planar_arm):
        j = task_jacobian(planar_arm, np.zeros(2))
        np.testing.assert_allclose(j[:, 0], [0.0, 0.55, 0.0], atol=1e-15)

    def test_axis_through_end_effector_gives_zero_column(self):
        joints = [
            Joint("j1", "base", "mid", axis=np.array([0.0, 0.0, 1.0]),
                  origin_xyz=np.zeros(3), origin_rpy=np.zeros(3), lower=-2, upper=2),
            Joint("j2", "mid", "tip", axis=np.array([0.0, 0.0, 1.0]),
                  origin_xyz=np.array([0.3, 0.0, 0.0]), origin_rpy=np.zeros(3),
                  lower=-2, upper=2),
        ]
        muscles = [MuscleRouting("m", (
            ViaPoint("base", np.array([-0.05, 0.02, 0.0])),
            ViaPoint("tip", np.array([0.1, 0.02, 0.0]))), rest_length=1.0)]
        # end effector sits exactly on the j2 axis
        ee = EndEffector("tip", np.zeros(3), np.zeros(3))
        model = build_model("axis_through_ee", ["base", "mid", "tip"],
                            joints, muscles, ee, fill_rest_lengths=True)
        j = task_jacobian(model, np.array([0.4, -0.3]))
        np.testing.assert_allclose(j[:, 1], 0.0, atol=1e-15)


def penrose_residuals(a, ap):
    return (
        np.abs(a @ ap @ a - a).max(),
        np.abs(ap @ a @ ap - ap).max(),
        np.abs((a @ ap).T - a @ ap).max(),
        np.abs((ap @ a).T - ap @ a).max(),
    )


def random_conditioned_matrix(rng, rows, cols, cond_max=1e6, rank=None):
    """Random matrix with controlled spectrum; unit largest singular value."""
    k = min(rows, cols)
    u, _ = np.linalg.qr(rng.normal(size=(rows, rows)))
    v, _ = np.linalg.qr(rng.normal(size=(cols, cols)))
    sv = np.exp(rng.uniform(np.log(1.0 / cond_max), 0.0, size=k))
    sv[0] = 1.0
    if rank is not None:
        sv[rank:] = 0.0
    s = np.zeros((rows, cols))
    s[:k, :k] = np.diag(sv)
    return u @ s @ v.T


class TestPseudoInverse:
    def test_identity(self):
        np.testing.assert_allclose(pseudo_inverse(np.eye(3)), np.eye(3), atol=1e-14)

    def test_rank_deficient_diagonal(self):
        a = np.diag([2.0, 1.0, 0.0])
        np.testing.assert_allclose(pseudo_inverse(a), np.diag([0.5, 1.0, 0.0]),
                                   atol=1e-14)

    def test_full_rank_rectangular_penrose(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(3, 5))
        ap = pseudo_inverse(a)
        assert np.abs(a @ ap @ a - a).max() < 1e-10

    def test_penrose_conditions_across_shapes(self):
        rng = np.random.default_rng(17)
        for trial in range(100):
            cols = int(rng.integers(2, 14))
            rank = None if trial % 3 else int(rng.integers(1, min(3, cols) + 1))
            a = random_conditioned_matrix(rng, 3, cols, rank=rank)
            for resid in penrose_residuals(a, pseudo_inverse(a)):
                assert resid < 1e-8

    def test_rejects_non_finite(self):
        with pytest.raises(ValidationError):
            pseudo_inverse(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestModelFiles:
    def test_round_trip(self, tmp_path, desk_arm):
        path = tmp_path / "arm.yaml"
        path.write_text(yaml.safe_dump(model_to_dict(desk_arm)))
        loaded = load_model(path)
        assert loaded.muscle_names == desk_arm.muscle_names
        theta = np.array([0.3, 0.6])
        np.testing.assert_allclose(muscle_lengths(loaded, theta),
                                   muscle_lengths(desk_arm, theta), atol=1e-12)

    def test_unknown_keys_rejected(self, desk_arm):
        doc = model_to_dict(desk_arm)
        doc["extra_field"] = 1
        with pytest.raises(ValidationError, match="unknown keys"):
            model_from_dict(doc)
        doc = model_to_dict(desk_arm)
        doc["muscles"][0]["color"] = "red"
        with pytest.raises(ValidationError, match="unknown keys"):
            model_from_dict(doc)

    def test_inconsistent_rest_length_rejected(self, desk_arm):
        doc = model_to_dict(desk_arm)
        doc["muscles"][0]["rest_length"] += 1e-6
        with pytest.raises(ValidationError, match="rest_length"):
            model_from_dict(doc)

    def test_non_unit_axis_rejected(self, desk_arm):
        doc = model_to_dict(desk_arm)
        doc["links"][1]["joint"]["axis"] = [0.0, 0.0, 1.1]
        with pytest.raises(ValidationError, match="unit"):
            model_from_dict(doc)

    def test_bad_limits_rejected(self, desk_arm):
        doc = model_to_dict(desk_arm)
        doc["links"][1]["joint"]["limits"] = [1.0, -1.0]
        with pytest.raises(ValidationError, match="limits"):
            model_from_dict(doc)

    def test_single_via_point_rejected(self, desk_arm):
        doc = model_to_dict(desk_arm)
        doc["muscles"][0]["via_points"] = doc["muscles"][0]["via_points"][:1]
        with pytest.raises(ValidationError, match="via points"):
            model_from_dict(doc)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_property_jacobians_match_finite_differences(seed):
    model = models.desk_arm()
    rng = np.random.default_rng(seed)
    theta = random_pose(model, rng)
    g = joint_muscle_jacobian(model, theta)
    fd = finite_difference_jacobian(lambda q: muscle_lengths(model, q), theta)
    assert np.abs(g - fd).max() / max(np.abs(fd).max(), 1e-9) < 1e-5
