"""Kinematic model of a tendon-driven robot.

A robot is a tree of links connected by revolute joints. Muscles are
polylines threaded through link-fixed via points; a muscle's length at a
pose is the Euclidean length of its via-point chain after forward
kinematics. Both Jacobians (muscle lengths and end-effector position with
respect to joint angles) are computed analytically by the chain rule over
the polyline, so the control loop never relies on finite differences.

Units: radians, meters. Tensions elsewhere are kgf.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .errors import GeometryError, JointLimitError, ValidationError
from .geometry import rotation_axis_angle, rotation_rpy

AXIS_UNIT_TOL = 1e-12
REST_LENGTH_TOL = 1e-9
SEGMENT_DEGENERACY_TOL = 1e-12
PINV_RCOND = 1e-8


@dataclass(frozen=True)
class Joint:
    """Revolute joint attaching a child link to its parent.

    ``origin_xyz``/``origin_rpy`` place the joint frame in the parent frame;
    the child link frame rotates about ``axis`` (unit vector, joint frame).
    """

    name: str
    parent_link: str
    child_link: str
    axis: np.ndarray
    origin_xyz: np.ndarray
    origin_rpy: np.ndarray
    lower: float
    upper: float


@dataclass(frozen=True)
class ViaPoint:
    link: str
    offset: np.ndarray  # 3-vector, link frame, meters


@dataclass(frozen=True)
class MuscleRouting:
    name: str
    via_points: tuple[ViaPoint, ...]
    rest_length: float  # polyline length at the zero pose


@dataclass(frozen=True)
class EndEffector:
    link: str
    offset_xyz: np.ndarray
    offset_rpy: np.ndarray


@dataclass(frozen=True)
class RobotModel:
    """Immutable kinematic description; all maps below are pure functions of it."""

    name: str
    link_names: tuple[str, ...]  # topological order, base first
    joints: tuple[Joint, ...]  # order defines the joint-vector layout
    muscles: tuple[MuscleRouting, ...]
    end_effector: EndEffector
    base_xyz: np.ndarray = field(default_factory=lambda: np.zeros(3))
    base_rpy: np.ndarray = field(default_factory=lambda: np.zeros(3))

    # derived, filled in by build_model()
    link_parent: tuple[int, ...] = ()
    link_joint: tuple[int, ...] = ()  # joint index moving each link, -1 for base
    link_depends: np.ndarray = None  # [L, N] bool: link pose depends on joint

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def n_muscles(self) -> int:
        return len(self.muscles)

    @property
    def joint_names(self) -> tuple[str, ...]:
        return tuple(j.name for j in self.joints)

    @property
    def muscle_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.muscles)

    @property
    def joint_lower(self) -> np.ndarray:
        return np.array([j.lower for j in self.joints])

    @property
    def joint_upper(self) -> np.ndarray:
        return np.array([j.upper for j in self.joints])


def _frozen(a) -> np.ndarray:
    out = np.asarray(a, dtype=float).copy()
    out.flags.writeable = False
    return out


def build_model(name, links, joints, muscles, end_effector,
                base_xyz=(0.0, 0.0, 0.0), base_rpy=(0.0, 0.0, 0.0),
                fill_rest_lengths=False) -> RobotModel:
    """Assemble and validate a RobotModel.

    ``links`` is an ordered list of link names, base first, each link's
    parent declared before it. Raises ValidationError on any invariant
    violation (non-unit axes, bad limits, missing links, short routings,
    rest lengths inconsistent with the zero pose). With
    ``fill_rest_lengths`` the declared rest lengths are replaced by the
    zero-pose polyline lengths instead of being checked; file loading never
    does this.
    """
    link_names = tuple(links)
    if len(set(link_names)) != len(link_names):
        raise ValidationError("duplicate link names")
    index = {n: i for i, n in enumerate(link_names)}

    joints = tuple(joints)
    for j in joints:
        norm = np.linalg.norm(j.axis)
        if abs(norm - 1.0) > AXIS_UNIT_TOL:
            raise ValidationError(f"joint '{j.name}' axis is not unit length (|axis| = {norm!r})")
        if not j.lower < j.upper:
            raise ValidationError(f"joint '{j.name}' limits must satisfy lower < upper")
        for ln in (j.parent_link, j.child_link):
            if ln not in index:
                raise ValidationError(f"joint '{j.name}' references unknown link '{ln}'")
        if index[j.parent_link] >= index[j.child_link]:
            raise ValidationError(f"joint '{j.name}': parent link must be declared before child")

    child_joints = {}
    for k, j in enumerate(joints):
        if j.child_link in child_joints:
            raise ValidationError(f"link '{j.child_link}' is moved by more than one joint")
        child_joints[j.child_link] = k

    link_parent = []
    link_joint = []
    for i, ln in enumerate(link_names):
        if i == 0:
            if ln in child_joints:
                raise ValidationError("base link cannot be a joint child")
            link_parent.append(-1)
            link_joint.append(-1)
        else:
            if ln not in child_joints:
                raise ValidationError(f"link '{ln}' has no joint attaching it to the tree")
            k = child_joints[ln]
            link_parent.append(index[joints[k].parent_link])
            link_joint.append(k)

    n_links, n_joints = len(link_names), len(joints)
    depends = np.zeros((n_links, n_joints), dtype=bool)
    for i in range(1, n_links):
        depends[i] = depends[link_parent[i]]
        depends[i, link_joint[i]] = True
    depends.flags.writeable = False

    muscles = tuple(muscles)
    for m in muscles:
        if len(m.via_points) < 2:
            raise ValidationError(f"muscle '{m.name}' needs at least 2 via points")
        for vp in m.via_points:
            if vp.link not in index:
                raise ValidationError(f"muscle '{m.name}' via point references unknown link '{vp.link}'")
        if not m.rest_length > 0:
            raise ValidationError(f"muscle '{m.name}' rest_length must be positive")

    if end_effector.link not in index:
        raise ValidationError(f"end effector references unknown link '{end_effector.link}'")

    model = RobotModel(
        name=name,
        link_names=link_names,
        joints=joints,
        muscles=muscles,
        end_effector=end_effector,
        base_xyz=_frozen(base_xyz),
        base_rpy=_frozen(base_rpy),
        link_parent=tuple(link_parent),
        link_joint=tuple(link_joint),
        link_depends=depends,
    )

    zero = np.zeros(n_joints)
    lengths = muscle_lengths(model, zero, check_limits=False)
    if fill_rest_lengths:
        filled = tuple(MuscleRouting(m.name, m.via_points, float(l))
                       for m, l in zip(muscles, lengths))
        return replace(model, muscles=filled)
    for m, length in zip(muscles, lengths):
        if abs(length - m.rest_length) > REST_LENGTH_TOL:
            raise ValidationError(
                f"muscle '{m.name}' rest_length {m.rest_length!r} does not match "
                f"zero-pose polyline length {length!r}")
    return model


def check_joint_limits(model: RobotModel, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.n_joints,):
        raise ValidationError(
            f"joint vector has shape {theta.shape}, expected ({model.n_joints},)")
    for j, joint in enumerate(model.joints):
        if not (joint.lower <= theta[j] <= joint.upper):
            raise JointLimitError(
                f"joint '{joint.name}' angle {theta[j]:.6g} outside limits "
                f"[{joint.lower:.6g}, {joint.upper:.6g}]")
    return theta


@dataclass
class ForwardKinematics:
    """World pose of every link plus world joint axes/origins at one pose."""

    link_rot: np.ndarray  # [L, 3, 3]
    link_pos: np.ndarray  # [L, 3]
    joint_axis_world: np.ndarray  # [N, 3]
    joint_origin_world: np.ndarray  # [N, 3]


def forward_kinematics(model: RobotModel, theta: np.ndarray) -> ForwardKinematics:
    n_links, n_joints = len(model.link_names), model.n_joints
    rot = np.empty((n_links, 3, 3))
    pos = np.empty((n_links, 3))
    axis_w = np.empty((n_joints, 3))
    origin_w = np.empty((n_joints, 3))
    rot[0] = rotation_rpy(*model.base_rpy)
    pos[0] = model.base_xyz
    for i in range(1, n_links):
        p = model.link_parent[i]
        k = model.link_joint[i]
        joint = model.joints[k]
        r_joint = rot[p] @ rotation_rpy(*joint.origin_rpy)
        p_joint = pos[p] + rot[p] @ joint.origin_xyz
        axis_w[k] = r_joint @ joint.axis
        origin_w[k] = p_joint
        rot[i] = r_joint @ rotation_axis_angle(joint.axis, theta[k])
        pos[i] = p_joint
    return ForwardKinematics(rot, pos, axis_w, origin_w)


def _muscle_world_points(model, fk, muscle):
    pts = np.empty((len(muscle.via_points), 3))
    for a, vp in enumerate(muscle.via_points):
        i = model.link_names.index(vp.link)
        pts[a] = fk.link_rot[i] @ vp.offset + fk.link_pos[i]
    return pts


class _MusclePaths:
    """Cached index arrays for vectorized muscle polyline evaluation."""

    def __init__(self, model: RobotModel):
        link_index = {n: i for i, n in enumerate(model.link_names)}
        links, offsets, slices = [], [], []
        start = 0
        for m in model.muscles:
            for vp in m.via_points:
                links.append(link_index[vp.link])
                offsets.append(vp.offset)
            slices.append((start, start + len(m.via_points)))
            start += len(m.via_points)
        self.links = np.array(links, dtype=int)
        self.offsets = np.array(offsets, dtype=float)
        self.slices = slices
        self.point_depends = model.link_depends[self.links]  # [P, N]

    def world_points(self, fk: ForwardKinematics) -> np.ndarray:
        return (np.einsum("pij,pj->pi", fk.link_rot[self.links], self.offsets)
                + fk.link_pos[self.links])


def _paths(model: RobotModel) -> _MusclePaths:
    cached = getattr(model, "_muscle_paths", None)
    if cached is None:
        cached = _MusclePaths(model)
        object.__setattr__(model, "_muscle_paths", cached)
    return cached


def _segment_lengths(model, pts, slices):
    lengths = np.empty(len(slices))
    for m, (a, b) in enumerate(slices):
        seg = np.diff(pts[a:b], axis=0)
        norms = np.linalg.norm(seg, axis=1)
        if np.any(norms < SEGMENT_DEGENERACY_TOL):
            raise GeometryError(
                f"muscle '{model.muscles[m].name}' has coincident consecutive via points")
        lengths[m] = norms.sum()
    return lengths


def muscle_lengths(model: RobotModel, theta: np.ndarray, check_limits: bool = True) -> np.ndarray:
    """Polyline length of every muscle at pose ``theta`` (meters, [M])."""
    theta = np.asarray(theta, dtype=float)
    if check_limits:
        check_joint_limits(model, theta)
    fk = forward_kinematics(model, theta)
    paths = _paths(model)
    return _segment_lengths(model, paths.world_points(fk), paths.slices)


def joint_muscle_jacobian(model: RobotModel, theta: np.ndarray,
                          check_limits: bool = True) -> np.ndarray:
    """Sensitivity of muscle lengths to joint angles, [M, N].

    Row i column j is d(length of muscle i)/d(theta_j), assembled from the
    analytic derivative of each polyline segment: a via point fixed to a
    link distal to joint j moves at axis x (point - joint origin).
    """
    theta = np.asarray(theta, dtype=float)
    if check_limits:
        check_joint_limits(model, theta)
    fk = forward_kinematics(model, theta)
    paths = _paths(model)
    pts = paths.world_points(fk)

    # dpts[p, j, :] = velocity of point p under unit rate of joint j
    rel = pts[:, None, :] - fk.joint_origin_world[None, :, :]  # [P, N, 3]
    dpts = np.cross(fk.joint_axis_world[None, :, :], rel)
    dpts[~paths.point_depends] = 0.0

    jac = np.empty((model.n_muscles, model.n_joints))
    for m, (a, b) in enumerate(paths.slices):
        seg = np.diff(pts[a:b], axis=0)
        norms = np.linalg.norm(seg, axis=1)
        if np.any(norms < SEGMENT_DEGENERACY_TOL):
            raise GeometryError(
                f"muscle '{model.muscles[m].name}' has coincident consecutive via points")
        unit = seg / norms[:, None]
        dseg = np.diff(dpts[a:b], axis=0)  # [S, N, 3]
        jac[m] = np.einsum("si,sni->n", unit, dseg)
    return jac


def end_effector_position(model: RobotModel, theta: np.ndarray,
                          check_limits: bool = True) -> np.ndarray:
    """World position of the end-effector frame origin (meters, [3])."""
    theta = np.asarray(theta, dtype=float)
    if check_limits:
        check_joint_limits(model, theta)
    fk = forward_kinematics(model, theta)
    i = model.link_names.index(model.end_effector.link)
    return fk.link_rot[i] @ model.end_effector.offset_xyz + fk.link_pos[i]


def task_jacobian(model: RobotModel, theta: np.ndarray, check_limits: bool = True) -> np.ndarray:
    """End-effector position Jacobian, [3, N] (position rows only)."""
    theta = np.asarray(theta, dtype=float)
    if check_limits:
        check_joint_limits(model, theta)
    fk = forward_kinematics(model, theta)
    i = model.link_names.index(model.end_effector.link)
    p = fk.link_rot[i] @ model.end_effector.offset_xyz + fk.link_pos[i]
    jac = np.zeros((3, model.n_joints))
    for k in range(model.n_joints):
        if model.link_depends[i, k]:
            jac[:, k] = np.cross(fk.joint_axis_world[k], p - fk.joint_origin_world[k])
    return jac


def pseudo_inverse(mat: np.ndarray, rcond: float = PINV_RCOND) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``rcond`` times the largest are treated as zero,
    which keeps the inverse bounded near singular poses.
    """
    mat = np.asarray(mat, dtype=float)
    if not np.all(np.isfinite(mat)):
        raise ValidationError("matrix has non-finite entries")
    return np.linalg.pinv(mat, rcond=rcond)


# ---------------------------------------------------------------------------
# Model file loading (strict YAML schema)
# ---------------------------------------------------------------------------

def _expect_mapping(node, context):
    if not isinstance(node, dict):
        raise ValidationError(f"{context}: expected a mapping")
    return node


def _take(node, context, required, optional=()):
    _expect_mapping(node, context)
    unknown = set(node) - set(required) - set(optional)
    if unknown:
        raise ValidationError(f"{context}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in node]
    if missing:
        raise ValidationError(f"{context}: missing keys {missing}")
    return node


def _vec3(node, context):
    try:
        v = np.asarray(node, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{context}: expected 3 numbers") from exc
    if v.shape != (3,):
        raise ValidationError(f"{context}: expected 3 numbers, got shape {v.shape}")
    return v


def model_from_dict(doc: dict) -> RobotModel:
    _take(doc, "model file", ("name", "links", "muscles", "end_effector"), ("base",))
    if not isinstance(doc["links"], list) or not doc["links"]:
        raise ValidationError("model file: 'links' must be a nonempty list")

    link_names, joints = [], []
    for entry in doc["links"]:
        _take(entry, "link", ("name",), ("parent", "joint"))
        link_names.append(entry["name"])
        if "joint" in entry or "parent" in entry:
            if "joint" not in entry or "parent" not in entry:
                raise ValidationError(
                    f"link '{entry['name']}': 'parent' and 'joint' must appear together")
            jn = _take(entry["joint"], f"joint of link '{entry['name']}'",
                       ("name", "axis", "limits"), ("origin",))
            origin = jn.get("origin", {})
            _take(origin, f"joint '{jn['name']}' origin", (), ("xyz", "rpy"))
            limits = jn["limits"]
            if not (isinstance(limits, (list, tuple)) and len(limits) == 2):
                raise ValidationError(f"joint '{jn['name']}': limits must be [lower, upper]")
            joints.append(Joint(
                name=jn["name"],
                parent_link=entry["parent"],
                child_link=entry["name"],
                axis=_frozen(_vec3(jn["axis"], f"joint '{jn['name']}' axis")),
                origin_xyz=_frozen(_vec3(origin.get("xyz", (0, 0, 0)), "origin xyz")),
                origin_rpy=_frozen(_vec3(origin.get("rpy", (0, 0, 0)), "origin rpy")),
                lower=float(limits[0]),
                upper=float(limits[1]),
            ))

    muscles = []
    for entry in doc["muscles"]:
        _take(entry, "muscle", ("name", "rest_length", "via_points"))
        vps = []
        for vp in entry["via_points"]:
            _take(vp, f"via point of muscle '{entry['name']}'", ("link", "xyz"))
            vps.append(ViaPoint(link=vp["link"], offset=_frozen(_vec3(vp["xyz"], "via point xyz"))))
        muscles.append(MuscleRouting(
            name=entry["name"],
            via_points=tuple(vps),
            rest_length=float(entry["rest_length"]),
        ))

    ee = _take(doc["end_effector"], "end_effector", ("link",), ("xyz", "rpy"))
    end_effector = EndEffector(
        link=ee["link"],
        offset_xyz=_frozen(_vec3(ee.get("xyz", (0, 0, 0)), "end_effector xyz")),
        offset_rpy=_frozen(_vec3(ee.get("rpy", (0, 0, 0)), "end_effector rpy")),
    )

    base = doc.get("base", {})
    _take(base, "base", (), ("xyz", "rpy"))
    return build_model(
        name=doc["name"],
        links=link_names,
        joints=joints,
        muscles=muscles,
        end_effector=end_effector,
        base_xyz=_vec3(base.get("xyz", (0, 0, 0)), "base xyz"),
        base_rpy=_vec3(base.get("rpy", (0, 0, 0)), "base rpy"),
    )


def load_model(path) -> RobotModel:
    """Load and validate a robot model YAML file."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: model file must be a mapping")
    return model_from_dict(doc)


def model_to_dict(model: RobotModel) -> dict:
    """Inverse of model_from_dict, used by the bundled config generator."""
    links = []
    for i, name in enumerate(model.link_names):
        entry = {"name": name}
        if model.link_joint[i] >= 0:
            j = model.joints[model.link_joint[i]]
            entry["parent"] = j.parent_link
            entry["joint"] = {
                "name": j.name,
                "axis": [float(x) for x in j.axis],
                "origin": {"xyz": [float(x) for x in j.origin_xyz],
                           "rpy": [float(x) for x in j.origin_rpy]},
                "limits": [j.lower, j.upper],
            }
        links.append(entry)
    muscles = [{
        "name": m.name,
        "rest_length": float(m.rest_length),
        "via_points": [{"link": vp.link, "xyz": [float(x) for x in vp.offset]}
                       for vp in m.via_points],
    } for m in model.muscles]
    return {
        "name": model.name,
        "links": links,
        "muscles": muscles,
        "end_effector": {
            "link": model.end_effector.link,
            "xyz": [float(x) for x in model.end_effector.offset_xyz],
            "rpy": [float(x) for x in model.end_effector.offset_rpy],
        },
        "base": {"xyz": [float(x) for x in model.base_xyz],
                 "rpy": [float(x) for x in model.base_rpy]},
    }


def with_base_transform(model: RobotModel, xyz, rpy) -> RobotModel:
    """Copy of the model with a different world pose of the base link."""
    return replace(model, base_xyz=_frozen(xyz), base_rpy=_frozen(rpy))
