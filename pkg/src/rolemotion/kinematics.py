"""Kinematic chains: joints, links, arms, forward kinematics.

A robot is a tree of links connected by single-axis joints (revolute or
prismatic).  Mobile bases are modelled with leading virtual joints
(x translation, y translation, yaw), so one configuration vector covers
base pose and body articulation together.

Robot descriptions are JSON files; see data/robots/ for the two shipped
models and data/schemas/robot.md for the format.  The loader is strict:
unknown fields are errors, not extensions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (ConfigurationShapeError, DegenerateDirectionError,
                     RobotFormatError)
from .geometry import Transform

REVOLUTE = "revolute"
PRISMATIC = "prismatic"
SEGMENT_TAGS = ("upper_arm", "forearm", "wrist_to_hand", "trunk", "base", "other")

_DATA_DIR = Path(__file__).resolve().parent / "data" / "robots"


@dataclass(frozen=True)
class Capsule:
    p0: np.ndarray
    p1: np.ndarray
    radius: float


@dataclass(frozen=True)
class Joint:
    id: str
    kind: str
    axis: np.ndarray
    origin_rot: np.ndarray
    origin_pos: np.ndarray
    lo: float
    hi: float
    virtual_base: bool
    parent_link: str
    child_link: str


@dataclass(frozen=True)
class Link:
    id: str
    geometry: tuple
    segment: str


@dataclass(frozen=True)
class ArmSpec:
    """One manipulating arm and how its hand is oriented.

    side: which human arm this one mimics.  palm_offset is the grasp
    point in the end-effector link frame; palm_vector and normal_vector
    are the two hand-fixed unit directions used by orientation goals
    (palm_vector points along the approach, normal_vector across it).
    """

    name: str
    side: str
    joints: tuple
    wrist: tuple
    gripper: str
    end_effector: str
    upper_arm_link: str
    forearm_link: str
    palm_offset: np.ndarray
    palm_vector: np.ndarray
    normal_vector: np.ndarray


class FKResult:
    """World frames for every joint of one configuration."""

    def __init__(self, chain: "KinematicChain", rot: np.ndarray, pos: np.ndarray):
        self.chain = chain
        self.rot = rot
        self.pos = pos

    def joint_transform(self, joint_id: str) -> Transform:
        i = self.chain.index(joint_id)
        return Transform(self.rot[i].reshape(3, 3).copy(), self.pos[i].copy())

    def link_transform(self, link_id: str) -> Transform:
        f = self.chain.frame_index(link_id)
        if f < 0:
            return Transform.identity()
        return Transform(self.rot[f].reshape(3, 3).copy(), self.pos[f].copy())

    def joint_anchor(self, joint_id: str) -> np.ndarray:
        """Static mount point of the joint (unaffected by its own motion)."""
        j = self.chain.joint(joint_id)
        return self.link_transform(j.parent_link).apply(j.origin_pos)

    def world_point(self, link_id: str, offset) -> np.ndarray:
        return self.link_transform(link_id).apply(offset)

    def world_vector(self, link_id: str, v) -> np.ndarray:
        return self.link_transform(link_id).apply_vector(v)


class KinematicChain:
    def __init__(self, name: str, root_link: str, joints, links, arms,
                 positional, connection_subset, camera=None, defaults=None):
        self.name = name
        self.root_link = root_link
        self.joints = tuple(joints)
        self.links = tuple(links)
        self.arms = dict(arms)
        self.positional_ids = tuple(positional)
        self.connection_ids = tuple(connection_subset)
        self.camera = camera  # (link_id, offset) or None
        self._index = {j.id: i for i, j in enumerate(self.joints)}
        self._links = {l.id: l for l in self.links}
        self._defining_joint = {}
        self._child_joints = {}
        for i, j in enumerate(self.joints):
            self._defining_joint[j.child_link] = i
            self._child_joints.setdefault(j.parent_link, []).append(j.id)
        self._validate()
        self.limits_lo = np.array([j.lo for j in self.joints])
        self.limits_hi = np.array([j.hi for j in self.joints])
        self.defaults = np.zeros(len(self.joints))
        for jid, val in (defaults or {}).items():
            self.defaults[self.index(jid)] = val
        self.arrays = kernels.ChainArrays(
            parent=np.array([self.frame_index(j.parent_link) for j in self.joints],
                            dtype=np.int32),
            kind=np.array([0 if j.kind == REVOLUTE else 1 for j in self.joints],
                          dtype=np.int32),
            axis=np.stack([j.axis for j in self.joints]),
            org_rot=np.stack([j.origin_rot.reshape(9) for j in self.joints]),
            org_pos=np.stack([j.origin_pos for j in self.joints]),
        )
        self._probe_cache = {}

    # -- structure ---------------------------------------------------------

    def _validate(self):
        if len(self._index) != len(self.joints):
            raise RobotFormatError("duplicate joint ids")
        if len(self._links) != len(self.links):
            raise RobotFormatError("duplicate link ids")
        if self.root_link not in self._links:
            raise RobotFormatError(f"root link {self.root_link!r} not declared")
        if self.root_link in self._defining_joint:
            raise RobotFormatError("root link must not be a joint's child")
        seen_children = set()
        for i, j in enumerate(self.joints):
            if j.kind not in (REVOLUTE, PRISMATIC):
                raise RobotFormatError(f"{j.id}: unknown kind {j.kind!r}")
            if abs(float(np.linalg.norm(j.axis)) - 1.0) > 1e-9:
                raise RobotFormatError(f"{j.id}: axis must be a unit vector")
            if not (j.lo <= j.hi):
                raise RobotFormatError(f"{j.id}: empty limit range")
            if j.parent_link not in self._links:
                raise RobotFormatError(f"{j.id}: unknown parent link {j.parent_link!r}")
            if j.child_link not in self._links:
                raise RobotFormatError(f"{j.id}: unknown child link {j.child_link!r}")
            if j.child_link in seen_children:
                raise RobotFormatError(f"link {j.child_link!r} has two parent joints")
            seen_children.add(j.child_link)
            if j.parent_link != self.root_link:
                p = self._defining_joint.get(j.parent_link)
                if p is None:
                    raise RobotFormatError(
                        f"{j.id}: parent link {j.parent_link!r} is unreachable")
                if p >= i:
                    raise RobotFormatError(
                        f"{j.id}: joints must be listed parents-first")
        for l in self.links:
            if l.id != self.root_link and l.id not in self._defining_joint:
                raise RobotFormatError(f"link {l.id!r} is not connected")
            if l.segment not in SEGMENT_TAGS:
                raise RobotFormatError(f"link {l.id!r}: bad segment {l.segment!r}")
            for c in l.geometry:
                if c.radius <= 0:
                    raise RobotFormatError(f"link {l.id!r}: capsule radius <= 0")
        for jid in self.positional_ids + self.connection_ids:
            if jid not in self._index:
                raise RobotFormatError(f"unknown joint {jid!r} in role groups")
        if not set(self.connection_ids) <= set(self.positional_ids):
            raise RobotFormatError("connection subset must lie inside the "
                                   "positional group")
        for arm in self.arms.values():
            for jid in arm.joints:
                if jid not in self._index:
                    raise RobotFormatError(f"arm {arm.name}: unknown joint {jid!r}")
                if jid in self.positional_ids:
                    raise RobotFormatError(
                        f"arm {arm.name}: joint {jid!r} is also positional")
            if not set(arm.wrist) <= set(arm.joints):
                raise RobotFormatError(f"arm {arm.name}: wrist outside arm joints")
            if arm.end_effector not in self._links:
                raise RobotFormatError(f"arm {arm.name}: unknown end effector link")
            if arm.forearm_link is not None and arm.forearm_link not in self._links:
                raise RobotFormatError(f"arm {arm.name}: unknown forearm link")
            if arm.upper_arm_link is not None and arm.upper_arm_link not in self._links:
                raise RobotFormatError(f"arm {arm.name}: unknown upper arm link")
            if arm.gripper is not None and arm.gripper not in self._index:
                raise RobotFormatError(f"arm {arm.name}: unknown gripper joint")
            if arm.side not in ("left", "right"):
                raise RobotFormatError(f"arm {arm.name}: side must be left or right")
            if abs(float(np.linalg.norm(arm.palm_vector)) - 1.0) > 1e-9:
                raise RobotFormatError(f"arm {arm.name}: palm vector not unit")
            if abs(float(np.linalg.norm(arm.normal_vector)) - 1.0) > 1e-9:
                raise RobotFormatError(f"arm {arm.name}: normal vector not unit")
            if abs(float(arm.palm_vector @ arm.normal_vector)) > 1e-6:
                raise RobotFormatError(
                    f"arm {arm.name}: palm and normal vectors must be orthogonal")
        if self.camera is not None and self.camera[0] not in self._links:
            raise RobotFormatError(f"camera on unknown link {self.camera[0]!r}")

    @property
    def n(self) -> int:
        return len(self.joints)

    @property
    def joint_ids(self):
        return tuple(j.id for j in self.joints)

    @property
    def virtual_ids(self):
        return tuple(j.id for j in self.joints if j.virtual_base)

    def joint(self, joint_id: str) -> Joint:
        return self.joints[self.index(joint_id)]

    def link(self, link_id: str) -> Link:
        return self._links[link_id]

    def index(self, joint_id: str) -> int:
        try:
            return self._index[joint_id]
        except KeyError:
            raise KeyError(f"no joint named {joint_id!r} in {self.name}") from None

    def frame_index(self, link_id: str) -> int:
        """Kernel frame index of a link (-1 for the root)."""
        if link_id == self.root_link:
            return -1
        try:
            return self._defining_joint[link_id]
        except KeyError:
            raise KeyError(f"no link named {link_id!r} in {self.name}") from None

    def indices(self, joint_ids) -> np.ndarray:
        return np.array([self.index(j) for j in joint_ids], dtype=np.intp)

    # -- kinematics --------------------------------------------------------

    def check_shape(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=np.float64)
        if q.shape != (self.n,):
            raise ConfigurationShapeError(
                f"{self.name} expects {self.n} values, got shape {q.shape}")
        return q

    def forward_kinematics(self, q) -> FKResult:
        q = self.check_shape(q)
        rot, pos = kernels.fk_frames(self.arrays, q)
        return FKResult(self, rot, pos)

    def ee_transform(self, fk, arm_name: str) -> Transform:
        """Grasp frame of an arm: end-effector frame moved to the palm."""
        if not isinstance(fk, FKResult):
            fk = self.forward_kinematics(fk)
        arm = self.arms[arm_name]
        t = fk.link_transform(arm.end_effector)
        return Transform(t.rot, t.apply(arm.palm_offset))

    def link_direction(self, fk, link_id: str) -> np.ndarray:
        """World unit vector along a link, proximal to distal.

        Distal is the anchor of the link's single child joint, or the
        farthest geometry endpoint for terminal links.
        """
        if not isinstance(fk, FKResult):
            fk = self.forward_kinematics(fk)
        t = fk.link_transform(link_id)
        children = self._child_joints.get(link_id, ())
        if len(children) == 1:
            distal = fk.joint_anchor(children[0])
        else:
            link = self._links[link_id]
            best = None
            best_d = 0.0
            for c in link.geometry:
                for p in (c.p0, c.p1):
                    d = float(np.linalg.norm(p))
                    if d > best_d:
                        best_d = d
                        best = p
            if best is None:
                raise DegenerateDirectionError(
                    f"link {link_id!r} has no child joint and no geometry")
            distal = t.apply(best)
        v = distal - t.pos
        n = float(np.linalg.norm(v))
        if n < 1e-9:
            raise DegenerateDirectionError(f"link {link_id!r} has zero length")
        return v / n

    def collision_segments(self, fk):
        """World capsule segments for all link geometry.

        Returns (segments (ns, 6), radii (ns,), owner link ids).
        """
        if not isinstance(fk, FKResult):
            fk = self.forward_kinematics(fk)
        segs = []
        radii = []
        owners = []
        for l in self.links:
            if not l.geometry:
                continue
            t = fk.link_transform(l.id)
            for c in l.geometry:
                a = t.apply(c.p0)
                b = t.apply(c.p1)
                segs.append(np.concatenate([a, b]))
                radii.append(c.radius)
                owners.append(l.id)
        if not segs:
            return (np.zeros((0, 6)), np.zeros(0), [])
        return np.stack(segs), np.array(radii), owners

    def collision_probes(self, samples: int = 4):
        """Fixed body points for batched clearance queries.

        Each capsule contributes `samples` points spaced along its axis in
        the owning link's frame; transforming them with FK gives exact
        on-segment world positions.  Returns (frame indices (p,),
        offsets (p, 3), radii (p,)), cached per sample count.
        """
        cached = self._probe_cache.get(samples)
        if cached is not None:
            return cached
        frames, offs, radii = [], [], []
        fracs = np.linspace(0.0, 1.0, samples)
        for l in self.links:
            if not l.geometry:
                continue
            fi = self.frame_index(l.id)
            for c in l.geometry:
                for f in fracs:
                    frames.append(fi)
                    offs.append(c.p0 + f * (c.p1 - c.p0))
                    radii.append(c.radius)
        out = (np.array(frames, dtype=np.int32),
               np.array(offs, dtype=np.float64).reshape(len(frames), 3),
               np.array(radii, dtype=np.float64))
        self._probe_cache[samples] = out
        return out

    def default_configuration(self) -> np.ndarray:
        return self.defaults.copy()


def interpolate_configs(qa, qb, t: float) -> np.ndarray:
    """Componentwise interpolation between two configurations, t in [0, 1]."""
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"interpolation parameter {t} outside [0, 1]")
    qa = np.asarray(qa, dtype=np.float64)
    qb = np.asarray(qb, dtype=np.float64)
    if qa.shape != qb.shape:
        raise ConfigurationShapeError("interpolation endpoints differ in shape")
    return (1.0 - t) * qa + t * qb


def clamp_to_limits(chain: KinematicChain, q) -> np.ndarray:
    q = chain.check_shape(q)
    return np.minimum(np.maximum(q, chain.limits_lo), chain.limits_hi)


# -- loading ----------------------------------------------------------------


def _rpy_matrix(rpy) -> np.ndarray:
    r, p, y = (float(v) for v in rpy)
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return rz @ ry @ rx


def _vec3(value, what: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != 3:
        raise RobotFormatError(f"{what} must be a 3-element list")
    return np.array([float(v) for v in value])


class _Fields:
    """Dict wrapper that tracks consumption so leftovers can be rejected."""

    def __init__(self, data, where: str):
        if not isinstance(data, dict):
            raise RobotFormatError(f"{where} must be an object")
        self.data = dict(data)
        self.where = where

    def take(self, key, default=None, required=False):
        if key in self.data:
            return self.data.pop(key)
        if required:
            raise RobotFormatError(f"{self.where}: missing field {key!r}")
        return default

    def finish(self):
        if self.data:
            raise RobotFormatError(
                f"{self.where}: unknown fields {sorted(self.data)}")


def _parse_joint(obj) -> Joint:
    f = _Fields(obj, "joint")
    jid = f.take("id", required=True)
    kind = f.take("kind", required=True)
    axis = _vec3(f.take("axis", required=True), f"joint {jid} axis")
    origin = f.take("origin", default={})
    of = _Fields(origin, f"joint {jid} origin")
    xyz = _vec3(of.take("xyz", default=[0.0, 0.0, 0.0]), f"joint {jid} origin xyz")
    rpy = of.take("rpy", default=[0.0, 0.0, 0.0])
    of.finish()
    limits = f.take("limits", required=True)
    if not isinstance(limits, list) or len(limits) != 2:
        raise RobotFormatError(f"joint {jid}: limits must be [lo, hi]")
    j = Joint(
        id=jid,
        kind=kind,
        axis=axis,
        origin_rot=_rpy_matrix(rpy),
        origin_pos=xyz,
        lo=float(limits[0]),
        hi=float(limits[1]),
        virtual_base=bool(f.take("virtual_base", default=False)),
        parent_link=f.take("parent", required=True),
        child_link=f.take("child", required=True),
    )
    f.finish()
    return j


def _parse_link(obj) -> Link:
    f = _Fields(obj, "link")
    lid = f.take("id", required=True)
    segment = f.take("segment", default="other")
    caps = []
    for c in f.take("capsules", default=[]):
        cf = _Fields(c, f"link {lid} capsule")
        caps.append(Capsule(
            p0=_vec3(cf.take("p0", required=True), f"link {lid} capsule p0"),
            p1=_vec3(cf.take("p1", required=True), f"link {lid} capsule p1"),
            radius=float(cf.take("radius", required=True)),
        ))
        cf.finish()
    f.finish()
    return Link(id=lid, geometry=tuple(caps), segment=segment)


def _parse_arm(name, obj) -> ArmSpec:
    f = _Fields(obj, f"arm {name}")
    arm = ArmSpec(
        name=name,
        side=f.take("side", required=True),
        joints=tuple(f.take("joints", required=True)),
        wrist=tuple(f.take("wrist", required=True)),
        gripper=f.take("gripper", default=None),
        end_effector=f.take("end_effector", required=True),
        upper_arm_link=f.take("upper_arm_link", default=None),
        forearm_link=f.take("forearm_link", default=None),
        palm_offset=_vec3(f.take("palm_offset", required=True),
                          f"arm {name} palm_offset"),
        palm_vector=_vec3(f.take("palm_vector", required=True),
                          f"arm {name} palm_vector"),
        normal_vector=_vec3(f.take("normal_vector", required=True),
                            f"arm {name} normal_vector"),
    )
    f.finish()
    return arm


def load_robot(source) -> KinematicChain:
    """Load a robot description from a packaged name or a file path."""
    path = Path(source)
    if not path.suffix:
        candidate = _DATA_DIR / f"{source}.json"
        if candidate.exists():
            path = candidate
    if not path.exists():
        raise RobotFormatError(
            f"no robot file at {source!r} (packaged: {', '.join(robot_names())})")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise RobotFormatError(f"{path}: invalid JSON ({e})") from e
    f = _Fields(raw, str(path))
    name = f.take("name", required=True)
    f.take("notes", default=None)
    root_link = f.take("root_link", required=True)
    joints = [_parse_joint(j) for j in f.take("joints", required=True)]
    links = [_parse_link(l) for l in f.take("links", required=True)]
    arms_raw = f.take("arms", required=True)
    if not isinstance(arms_raw, dict) or not arms_raw:
        raise RobotFormatError("arms must be a non-empty object")
    arms = {k: _parse_arm(k, v) for k, v in arms_raw.items()}
    positional = f.take("positional", required=True)
    connection = f.take("connection_subset", required=True)
    camera = None
    cam_raw = f.take("camera", default=None)
    if cam_raw is not None:
        cf = _Fields(cam_raw, "camera")
        camera = (cf.take("link", required=True),
                  _vec3(cf.take("point", required=True), "camera point"))
        cf.finish()
    defaults = f.take("defaults", default={})
    f.finish()
    return KinematicChain(name=name, root_link=root_link, joints=joints,
                          links=links, arms=arms, positional=positional,
                          connection_subset=connection, camera=camera,
                          defaults=defaults)


def robot_names():
    return sorted(p.stem for p in _DATA_DIR.glob("*.json"))
