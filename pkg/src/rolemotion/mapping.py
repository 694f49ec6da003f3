"""Posture-to-configuration mapping and joint role groups.

Each robot arm gets a table translating every catalog posture into values
for its configurational joints.  Tables are generated once (see
generate_table) and shipped as JSON so they can be inspected and edited;
a test regenerates them to confirm the files match the code.

Equal-topology arms solve shoulder yaw/pitch from the upper-arm direction
in closed form, hold the shoulder twist at a fixed per-vertical-level
value, and pick the elbow angle that best reaches the forearm direction
inside the flexion plane that twist allows.  When that plane cannot reach
the forearm within tolerance, or a joint limit clips a value, the entry is
marked limit_constrained: the twist rule wins and the residual error is
recorded instead of hidden.

Reduced arms ignore the upper arm and map the forearm direction straight
onto base yaw (azimuth) and arm pitch (elevation).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RoleMotionError, UnmappedPostureError
from .geometry import azimuth_deg, elevation_deg
from .kinematics import KinematicChain
from .posture import (NamedDirection, Posture, PostureCatalog, PostureGoal,
                      canonical_vector, load_catalog)

_MAPS_DIR = Path(__file__).resolve().parent / "data" / "maps"
FIDELITY_DEG = 5.0


@dataclass(frozen=True)
class RoleDivision:
    """Index sets splitting one arm's solve over the whole chain.

    configurational joints copy the demonstrated arm; positional joints
    place the body; orientational joints (the wrist, a subset of
    configurational) aim the hand; connection joints (a subset of
    positional) rotate configurational links when they move, so their
    travel is budgeted.  Everything else is locked for the task.
    """

    arm: str
    configurational: tuple
    positional: tuple
    orientational: tuple
    connection: tuple
    locked: tuple
    config_budget: float
    connection_budget: float

    @staticmethod
    def for_arm(chain: KinematicChain, arm_name: str,
                config_factor: float = 0.04,
                connection_factor: float = 0.04) -> "RoleDivision":
        arm = chain.arms[arm_name]
        configurational = tuple(arm.joints)
        positional = tuple(chain.positional_ids)
        connection = tuple(chain.connection_ids)
        taken = set(configurational) | set(positional)
        locked = tuple(j for j in chain.joint_ids if j not in taken)
        return RoleDivision(
            arm=arm_name,
            configurational=configurational,
            positional=positional,
            orientational=tuple(arm.wrist),
            connection=connection,
            locked=locked,
            config_budget=config_factor * len(configurational),
            connection_budget=connection_factor * len(connection),
        )


@dataclass(frozen=True)
class MapEntry:
    values: np.ndarray
    limit_constrained: bool
    upper_error_deg: float
    forearm_error_deg: float


class MappingTable:
    def __init__(self, robot: str, arm: str, joint_order, entries,
                 twist_by_level=None):
        self.robot = robot
        self.arm = arm
        self.joint_order = tuple(joint_order)
        self.entries = dict(entries)
        self.twist_by_level = dict(twist_by_level or {})

    def entry(self, posture: Posture) -> MapEntry:
        key = "|".join(posture.as_right().key)
        try:
            return self.entries[key]
        except KeyError:
            raise UnmappedPostureError(
                f"posture {key} has no entry in the {self.robot}/{self.arm} "
                "table") from None

    def map_posture(self, posture: Posture) -> np.ndarray:
        """Configurational joint values for a catalog posture."""
        return self.entry(posture).values.copy()

    def map_goal(self, goal: PostureGoal) -> np.ndarray:
        """Values for a blended goal: joint-linear between the endpoints."""
        qa = self.map_posture(goal.start)
        if goal.t == 0.0 and goal.end == goal.start:
            return qa
        qb = self.map_posture(goal.end)
        return (1.0 - goal.t) * qa + goal.t * qb

    def to_json(self) -> dict:
        out = {
            "robot": self.robot,
            "arm": self.arm,
            "joint_order": list(self.joint_order),
            "entries": {},
        }
        if self.twist_by_level:
            out["twist_by_level"] = {k: self.twist_by_level[k]
                                     for k in sorted(self.twist_by_level)}
        for key in sorted(self.entries):
            e = self.entries[key]
            out["entries"][key] = {
                "values": [float(v) for v in e.values],
                "limit_constrained": e.limit_constrained,
                "upper_error_deg": round(e.upper_error_deg, 6),
                "forearm_error_deg": round(e.forearm_error_deg, 6),
            }
        return out


def save_table(table: MappingTable, path) -> None:
    Path(path).write_text(json.dumps(table.to_json(), indent=2,
                                     sort_keys=True) + "\n")


def load_table(robot: str, arm: str, path=None) -> MappingTable:
    p = Path(path) if path else _MAPS_DIR / f"{robot}.{arm}.map.json"
    if not p.exists():
        raise RoleMotionError(f"no mapping table at {p}")
    raw = json.loads(p.read_text())
    if raw["robot"] != robot or raw["arm"] != arm:
        raise RoleMotionError(f"{p} is the table for {raw['robot']}/{raw['arm']}")
    entries = {}
    for key, e in raw["entries"].items():
        entries[key] = MapEntry(
            values=np.array(e["values"], dtype=np.float64),
            limit_constrained=bool(e["limit_constrained"]),
            upper_error_deg=float(e["upper_error_deg"]),
            forearm_error_deg=float(e["forearm_error_deg"]),
        )
    return MappingTable(robot, arm, raw["joint_order"], entries,
                        raw.get("twist_by_level"))


# -- generation ---------------------------------------------------------------


def _clamp(value, lo, hi):
    clipped = min(max(value, lo), hi)
    return clipped, abs(clipped - value) > 1e-9


def _wrap_pi(a: float) -> float:
    while a > math.pi:
        a -= 2.0 * math.pi
    while a < -math.pi:
        a += 2.0 * math.pi
    return a


def _upper_level(upper: NamedDirection) -> str:
    return upper.level


def _side_vector(d: NamedDirection, side: str) -> np.ndarray:
    v = canonical_vector(d)
    if side == "left":
        v = v * np.array([1.0, -1.0, 1.0])
    return v


def _equal_entry(chain, arm, posture, twist, catalog_vectors):
    """Shoulder yaw/pitch/twist + elbow for one posture; wrists zero.

    Upper-arm direction u fixes yaw (azimuth) and pitch (polar angle);
    at the poles the yaw is free, so it aligns with the forearm azimuth
    to point the flexion plane the right way.  With the twist pinned per
    level, the elbow angle maximizes alignment with the forearm target
    inside the reachable flexion circle.
    """
    u_vec, f_vec = catalog_vectors
    jyaw, jpitch, jtwist, jelbow = (chain.joint(arm.joints[i]) for i in range(4))

    polar_up = math.radians(90.0 - elevation_deg(u_vec))
    if abs(u_vec[0]) < 1e-12 and abs(u_vec[1]) < 1e-12:
        if abs(f_vec[0]) < 1e-12 and abs(f_vec[1]) < 1e-12:
            alpha = 0.0
        else:
            alpha = math.radians(azimuth_deg(f_vec))
    else:
        alpha = math.radians(azimuth_deg(u_vec))
    psi = polar_up - math.pi

    alpha, c1 = _clamp(alpha, jyaw.lo, jyaw.hi)
    psi, c2 = _clamp(psi, jpitch.lo, jpitch.hi)
    tau, c3 = _clamp(twist, jtwist.lo, jtwist.hi)

    # Forearm target in the post-pitch shoulder frame.
    ca, sa = math.cos(alpha), math.sin(alpha)
    cp, sp = math.cos(psi), math.sin(psi)
    # (Rz(alpha) @ Ry(psi))^T @ f_vec
    wx = cp * (ca * f_vec[0] + sa * f_vec[1]) - sp * f_vec[2]
    wy = -sa * f_vec[0] + ca * f_vec[1]
    wz = sp * (ca * f_vec[0] + sa * f_vec[1]) + cp * f_vec[2]

    a_coef = math.cos(tau) * wx + math.sin(tau) * wy
    b_coef = -wz
    if abs(a_coef) < 1e-12 and abs(b_coef) < 1e-12:
        elbow = 0.0
    else:
        elbow = math.atan2(a_coef, b_coef)
    elbow, c4 = _clamp(elbow, jelbow.lo, jelbow.hi)

    values = np.zeros(len(arm.joints))
    values[0] = alpha
    values[1] = psi
    values[2] = tau
    values[3] = elbow
    return values, (c1 or c2 or c3 or c4)


def _fewer_entry(chain, arm, posture, catalog_vectors):
    """Base yaw from forearm azimuth, arm pitch from its elevation."""
    u_vec, f_vec = catalog_vectors
    jyaw, jpitch = chain.joint(arm.joints[0]), chain.joint(arm.joints[1])
    if abs(f_vec[0]) < 1e-12 and abs(f_vec[1]) < 1e-12:
        if abs(u_vec[0]) < 1e-12 and abs(u_vec[1]) < 1e-12:
            yaw = 0.0
        else:
            yaw = math.radians(azimuth_deg(u_vec))
    else:
        yaw = math.radians(azimuth_deg(f_vec))
    pitch = math.radians(elevation_deg(f_vec))
    yaw, c1 = _clamp(yaw, jyaw.lo, jyaw.hi)
    pitch, c2 = _clamp(pitch, jpitch.lo, jpitch.hi)
    values = np.zeros(len(arm.joints))
    values[0] = yaw
    values[1] = pitch
    return values, (c1 or c2)


def _measured_errors(chain, arm, posture, values, side):
    """FK-checked angular errors of both link directions, degrees."""
    q = chain.default_configuration()
    q[chain.indices(arm.joints)] = values
    fk = chain.forward_kinematics(q)
    f_target = _side_vector(posture.forearm, side)
    fore = chain.link_direction(fk, arm.forearm_link)
    fore_err = math.degrees(math.acos(float(np.clip(fore @ f_target, -1, 1))))
    if arm.upper_arm_link is None:
        return 0.0, fore_err
    u_target = _side_vector(posture.upper, side)
    upper = chain.link_direction(fk, arm.upper_arm_link)
    upper_err = math.degrees(math.acos(float(np.clip(upper @ u_target, -1, 1))))
    return upper_err, fore_err


def _twist_candidates(lo: float, hi: float):
    """Grid of twist values, ordered by magnitude (positive first)."""
    step = math.pi / 12.0
    grid = [0.0]
    k = 1
    while k * step <= hi + 1e-9 or -k * step >= lo - 1e-9:
        if k * step <= hi + 1e-9:
            grid.append(k * step)
        if -k * step >= lo - 1e-9:
            grid.append(-k * step)
        k += 1
    return grid


def generate_table(chain: KinematicChain, arm_name: str,
                   catalog: PostureCatalog = None) -> MappingTable:
    catalog = catalog or load_catalog()
    arm = chain.arms[arm_name]
    side = arm.side

    def build_all(twist_by_level):
        entries = {}
        for u_name, f_name in catalog.valid:
            p = Posture(NamedDirection.parse(u_name),
                        NamedDirection.parse(f_name), "right")
            vectors = (_side_vector(p.upper, side), _side_vector(p.forearm, side))
            if arm.upper_arm_link is not None:
                twist = twist_by_level[_upper_level(p.upper)]
                values, clamped = _equal_entry(chain, arm, p, twist, vectors)
            else:
                values, clamped = _fewer_entry(chain, arm, p, vectors)
            u_err, f_err = _measured_errors(chain, arm, p, values, side)
            limit_constrained = clamped or f_err > FIDELITY_DEG or \
                u_err > FIDELITY_DEG
            entries["|".join((u_name, f_name))] = MapEntry(
                values=values, limit_constrained=limit_constrained,
                upper_error_deg=u_err, forearm_error_deg=f_err)
        return entries

    twist_by_level = {}
    if arm.upper_arm_link is not None:
        jtwist = chain.joint(arm.joints[2])
        by_level = {}
        for u_name, f_name in catalog.valid:
            lvl = NamedDirection.parse(u_name).level
            by_level.setdefault(lvl, []).append((u_name, f_name))
        for lvl, pairs in by_level.items():
            best_t = 0.0
            best_cost = None
            for t in _twist_candidates(jtwist.lo, jtwist.hi):
                misses = 0
                total = 0.0
                for u_name, f_name in pairs:
                    p = Posture(NamedDirection.parse(u_name),
                                NamedDirection.parse(f_name), "right")
                    vectors = (_side_vector(p.upper, side),
                               _side_vector(p.forearm, side))
                    values, _ = _equal_entry(chain, arm, p, t, vectors)
                    _, f_err = _measured_errors(chain, arm, p, values, side)
                    total += f_err
                    if f_err > FIDELITY_DEG:
                        misses += 1
                # Fewest entries breaching tolerance wins; the summed error
                # breaks ties, and the grid order prefers small twists.
                cost = (misses, round(total, 6))
                if best_cost is None or cost < best_cost:
                    best_cost = cost
                    best_t = t
            twist_by_level[lvl] = best_t

    entries = build_all(twist_by_level)
    return MappingTable(chain.name, arm_name, arm.joints, entries,
                        twist_by_level or None)
