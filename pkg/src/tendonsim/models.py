"""Bundled robot model builders.

All models here are constructed programmatically with exact rest lengths;
``scripts/gen_configs.py`` serializes them into ``configs/`` for the CLI.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import brentq

from .model import (EndEffector, Joint, MuscleRouting, RobotModel, ViaPoint,
                    build_model, muscle_lengths)


def _vp(link, x, y, z=0.0):
    return ViaPoint(link=link, offset=np.array([x, y, z]))


def _muscle(name, via_points):
    # rest_length filled in by _finalize once the full model geometry is known
    return MuscleRouting(name=name, via_points=tuple(via_points), rest_length=1.0)


def _finalize(name, links, joints, muscles, end_effector) -> RobotModel:
    return build_model(name, links, joints, muscles, end_effector,
                       fill_rest_lengths=True)


def planar_two_link() -> RobotModel:
    """Planar 2R arm (0.3 m / 0.25 m links) used by the kinematics tests.

    Carries a shoulder-only muscle, an elbow-only muscle, and a straight-line
    biarticular muscle so Jacobian sparsity is observable.
    """
    joints = [
        Joint("shoulder", "base", "upper", axis=np.array([0.0, 0.0, 1.0]),
              origin_xyz=np.zeros(3), origin_rpy=np.zeros(3), lower=-3.0, upper=3.0),
        Joint("elbow", "upper", "fore", axis=np.array([0.0, 0.0, 1.0]),
              origin_xyz=np.array([0.3, 0.0, 0.0]), origin_rpy=np.zeros(3),
              lower=-3.0, upper=3.0),
    ]
    muscles = [
        _muscle("shoulder_mono", [_vp("base", -0.04, 0.05), _vp("upper", 0.12, 0.035)]),
        _muscle("elbow_mono", [_vp("upper", 0.18, 0.03), _vp("fore", 0.07, 0.022)]),
        _muscle("biarticular_line", [_vp("base", -0.03, 0.04), _vp("fore", 0.06, 0.02)]),
    ]
    ee = EndEffector("fore", offset_xyz=np.array([0.25, 0.0, 0.0]), offset_rpy=np.zeros(3))
    return _finalize("planar_two_link", ["base", "upper", "fore"], joints, muscles, ee)


# --- pulley pair -----------------------------------------------------------

PULLEY_RADIUS = 0.02
_PULLEY_SPAN = 0.5  # rad; the range over which the wrap is calibrated
_PULLEY_TANGENT_REACH = 0.06  # m; tangent-line distance of the moving pin
_PULLEY_LEAD_IN = 0.15  # m; anchor distance of the straight lead-in
_N_WRAP_POINTS = 64


def _rot2(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


def _pulley_muscle(name, sign, pin_radius):
    """Via points for one side of the pulley pair.

    ``sign`` +1 builds the side that shortens with +theta (flexor), -1 the
    mirror that lengthens (extensor). The wire runs from a ground anchor
    along a tangent line, over a raised ground guide pin at ``pin_radius``,
    to a lever-fixed pin placed so the crossing chord is tangent to the
    guide-pin circle at mid-range; 64 lever-fixed points then follow the
    wrap arc (radius ``PULLEY_RADIUS``) to the anchor. A fixed-order
    polyline cannot migrate its contact point like a real capstan, so the
    guide-pin radius is calibrated slightly above the wrap radius to make
    the length change over [0, span] match the ideal l0 -/+ r*theta.
    """
    r = PULLEY_RADIUS
    mid = 0.5 * _PULLEY_SPAN
    # lever pin: on the tangent line y = sign*pin_radius at the mid-range pose
    world_mid = np.array([_PULLEY_TANGENT_REACH, sign * pin_radius])
    local = _rot2(-mid) @ world_mid
    rho = np.linalg.norm(local)
    pin_angle = np.arctan2(local[1], local[0])
    # wrap arc from the chord's tangency point around to the anchor side
    touch = pin_angle - sign * np.arccos(np.clip(r / rho, -1.0, 1.0))
    arc_end = -sign * 1.9
    arc = np.linspace(touch, arc_end, _N_WRAP_POINTS)
    pts = [_vp("ground", -_PULLEY_LEAD_IN, sign * pin_radius),
           _vp("ground", 0.0, sign * pin_radius),
           _vp("lever", local[0], local[1])]
    pts += [_vp("lever", r * np.cos(a), r * np.sin(a)) for a in arc]
    return _muscle(name, pts)


def _pulley_model(pin_flex, pin_ext) -> RobotModel:
    joints = [Joint("hinge", "ground", "lever", axis=np.array([0.0, 0.0, 1.0]),
                    origin_xyz=np.zeros(3), origin_rpy=np.zeros(3),
                    lower=-0.6, upper=0.7)]
    muscles = [_pulley_muscle("flexor", +1, pin_flex),
               _pulley_muscle("extensor", -1, pin_ext)]
    ee = EndEffector("lever", offset_xyz=np.array([0.1, 0.0, 0.0]), offset_rpy=np.zeros(3))
    return _finalize("pulley_pair", ["ground", "lever"], joints, muscles, ee)


def _pulley_span_error(pin_radius, muscle_index, sign):
    model = _pulley_model(pin_radius if muscle_index == 0 else PULLEY_RADIUS,
                          pin_radius if muscle_index == 1 else PULLEY_RADIUS)
    l0 = muscle_lengths(model, np.zeros(1))[muscle_index]
    l1 = muscle_lengths(model, np.array([_PULLEY_SPAN]))[muscle_index]
    return (l1 - l0) - sign * PULLEY_RADIUS * _PULLEY_SPAN


_pulley_cache = None


def pulley_pair() -> RobotModel:
    """1-joint antagonistic pulley pair with wrap radius 0.02 m.

    The flexor tracks l(theta) = l0 - r*theta and the extensor
    l(theta) = l0 + r*theta over [0, 0.5] rad to well under 1e-4 m.
    """
    global _pulley_cache
    if _pulley_cache is None:
        lo, hi = PULLEY_RADIUS, 1.12 * PULLEY_RADIUS
        p_flex = brentq(lambda p: _pulley_span_error(p, 0, -1.0), lo, hi, xtol=1e-15)
        p_ext = brentq(lambda p: _pulley_span_error(p, 1, +1.0), lo, hi, xtol=1e-15)
        _pulley_cache = _pulley_model(p_flex, p_ext)
    return _pulley_cache


# --- desk-scale 2-joint / 6-muscle arm --------------------------------------

def desk_arm() -> RobotModel:
    """Default experiment arm: planar shoulder + elbow, six muscles.

    Two monoarticular muscles per joint plus an antagonistic biarticular
    pair: the smallest routing that shows agonist/antagonist structure,
    redundancy, and biarticular coupling.
    """
    joints = [
        Joint("shoulder", "base", "upper", axis=np.array([0.0, 0.0, 1.0]),
              origin_xyz=np.zeros(3), origin_rpy=np.zeros(3), lower=-1.2, upper=1.6),
        Joint("elbow", "upper", "fore", axis=np.array([0.0, 0.0, 1.0]),
              origin_xyz=np.array([0.3, 0.0, 0.0]), origin_rpy=np.zeros(3),
              lower=-0.8, upper=2.0),
    ]
    muscles = [
        _muscle("shoulder_flexor", [_vp("base", -0.04, 0.05), _vp("upper", 0.12, 0.035)]),
        _muscle("shoulder_extensor", [_vp("base", -0.04, -0.05), _vp("upper", 0.12, -0.035)]),
        _muscle("elbow_flexor", [_vp("upper", 0.18, 0.03), _vp("fore", 0.07, 0.022)]),
        _muscle("elbow_extensor", [_vp("upper", 0.18, -0.03), _vp("fore", 0.07, -0.022)]),
        _muscle("biarticular_flexor",
                [_vp("base", -0.03, 0.045), _vp("upper", 0.16, 0.028), _vp("fore", 0.05, 0.018)]),
        _muscle("biarticular_extensor",
                [_vp("base", -0.03, -0.045), _vp("upper", 0.16, -0.028), _vp("fore", 0.05, -0.018)]),
    ]
    ee = EndEffector("fore", offset_xyz=np.array([0.25, 0.0, 0.0]), offset_rpy=np.zeros(3))
    return _finalize("desk_arm", ["base", "upper", "fore"], joints, muscles, ee)


# --- optional larger chain ---------------------------------------------------

def arm_13dof() -> RobotModel:
    """13-joint serial chain with paired muscles, mirroring the scale of a
    scapula-shoulder-elbow-wrist arm. Not used by the acceptance scenarios;
    bundled so kinematics checks cover a deep, mixed-axis chain."""
    axes = [np.array(a, dtype=float) for a in
            ([0, 0, 1], [0, 1, 0], [1, 0, 0])]
    links = ["base"]
    joints = []
    muscles = []
    for i in range(13):
        parent = links[-1]
        child = f"link{i + 1}"
        links.append(child)
        axis = axes[i % 3]
        offset = np.array([0.05, 0.006 * (-1) ** i, 0.004 * ((i % 3) - 1)])
        joints.append(Joint(f"j{i + 1}", parent, child, axis=axis,
                            origin_xyz=offset, origin_rpy=np.zeros(3),
                            lower=-0.9, upper=0.9))
        for label, s in (("flex", 1.0), ("ext", -1.0)):
            muscles.append(_muscle(
                f"m{i + 1}_{label}",
                [_vp(parent, -0.018, s * 0.016, 0.007),
                 _vp(child, 0.022, s * 0.013, -0.006)]))
    for a in (1, 6, 11):
        muscles.append(_muscle(
            f"bi{a}",
            [_vp(f"link{a}", -0.015, 0.02, 0.009),
             _vp(f"link{a + 1}", 0.02, 0.012, 0.004),
             _vp(f"link{a + 2}", 0.024, 0.01, -0.005)]))
    ee = EndEffector("link13", offset_xyz=np.array([0.06, 0.0, 0.0]), offset_rpy=np.zeros(3))
    return _finalize("arm_13dof", links, joints, muscles, ee)


BUNDLED_BUILDERS = {
    "planar_two_link": planar_two_link,
    "pulley_pair": pulley_pair,
    "desk_arm": desk_arm,
    "arm_13dof": arm_13dof,
}
