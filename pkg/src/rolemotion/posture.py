"""Discretized arm directions and the posture validity catalog.

A direction is named by one of eight horizontal headings crossed with three
vertical levels, plus the two poles: 26 names total.  An arm posture is the
pair (upper arm direction, forearm direction) for one side of the body.

Quantization bins are fixed-width: vertical boundaries at polar angles
22.5 / 67.5 / 112.5 / 157.5 degrees from straight up, horizontal sector
boundaries every 45 degrees starting at 22.5.  Boundary values are resolved
toward the middle level vertically and toward the forward-most sector
horizontally; the boundary angles are exactly representable in binary, so
these ties are exact, not epsilon games.

The catalog lists which postures a human arm actually takes during in-front
manipulation, and flags the subset where the upper arm is elevated 45
degrees or more (those get special twist handling downstream).  It is
stored canonically for the right arm; left postures are checked mirrored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RoleMotionError
from .geometry import azimuth_deg, elevation_deg, spherical_unit

HORIZONTAL_NAMES = (
    "forward", "left_forward", "left", "left_backward",
    "backward", "right_backward", "right", "right_forward",
)
LEVELS = ("low", "middle", "high")
POLES = ("south_pole", "north_pole")

_CATALOG_PATH = Path(__file__).resolve().parent / "data" / "postures" / "catalog.json"

_MIRROR_H = {
    "forward": "forward", "backward": "backward",
    "left": "right", "right": "left",
    "left_forward": "right_forward", "right_forward": "left_forward",
    "left_backward": "right_backward", "right_backward": "left_backward",
}


@dataclass(frozen=True, order=True)
class NamedDirection:
    """One of the 26 direction names."""

    horizontal: str
    level: str

    def __post_init__(self):
        if self.level in POLES:
            if self.horizontal is not None:
                raise ValueError("poles carry no horizontal name")
        elif self.level not in LEVELS:
            raise ValueError(f"bad level {self.level!r}")
        elif self.horizontal not in HORIZONTAL_NAMES:
            raise ValueError(f"bad horizontal {self.horizontal!r}")

    @property
    def is_pole(self) -> bool:
        return self.level in POLES

    @property
    def name(self) -> str:
        if self.is_pole:
            return self.level
        return f"{self.horizontal}_{self.level}"

    def __str__(self) -> str:
        return self.name

    @staticmethod
    def parse(name: str) -> "NamedDirection":
        if name in POLES:
            return NamedDirection(None, name)
        head, _, lvl = name.rpartition("_")
        if lvl in LEVELS and head in HORIZONTAL_NAMES:
            return NamedDirection(head, lvl)
        raise ValueError(f"unknown direction name {name!r}")


def all_directions():
    """All 26 named directions in a fixed, documented order."""
    out = [NamedDirection(None, "north_pole")]
    for lvl in ("high", "middle", "low"):
        for h in HORIZONTAL_NAMES:
            out.append(NamedDirection(h, lvl))
    out.append(NamedDirection(None, "south_pole"))
    return out


def quantize_direction(v) -> NamedDirection:
    """Nearest named direction for a nonzero vector."""
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n < 1e-12:
        raise ValueError("cannot quantize a zero vector")
    elev = elevation_deg(v)
    polar = 90.0 - elev  # angle from straight up
    if polar < 22.5:
        return NamedDirection(None, "north_pole")
    if polar > 157.5:
        return NamedDirection(None, "south_pole")
    if polar < 67.5:
        level = "high"
    elif polar <= 112.5:
        level = "middle"
    else:
        level = "low"
    a = azimuth_deg(v)
    x = a / 45.0
    # Sector index with boundary ties resolved toward forward (k of
    # smaller magnitude).
    if a >= 0.0:
        k = math.ceil(x - 0.5)
    else:
        k = math.floor(x + 0.5)
    k = ((k + 4) % 8) - 4
    if k == -4:
        k = 4
    return NamedDirection(HORIZONTAL_NAMES[k % 8], level)


_ELEV = {"low": -45.0, "middle": 0.0, "high": 45.0}


def canonical_vector(d: NamedDirection) -> np.ndarray:
    """Unit vector at the center of a direction's bin."""
    if d.level == "north_pole":
        return np.array([0.0, 0.0, 1.0])
    if d.level == "south_pole":
        return np.array([0.0, 0.0, -1.0])
    azim = 45.0 * HORIZONTAL_NAMES.index(d.horizontal)
    if azim > 180.0:
        azim -= 360.0
    return spherical_unit(azim, _ELEV[d.level])


def direction_angle_deg(a: NamedDirection, b: NamedDirection) -> float:
    """Angle between two canonical direction vectors, degrees."""
    dot = float(np.clip(canonical_vector(a) @ canonical_vector(b), -1.0, 1.0))
    return math.degrees(math.acos(dot))


def mirror_direction(d: NamedDirection) -> NamedDirection:
    if d.is_pole:
        return d
    return NamedDirection(_MIRROR_H[d.horizontal], d.level)


@dataclass(frozen=True)
class Posture:
    """Upper arm and forearm directions of one human arm."""

    upper: NamedDirection
    forearm: NamedDirection
    side: str

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be left or right, got {self.side!r}")

    @property
    def key(self):
        return (self.upper.name, self.forearm.name)

    def mirrored(self) -> "Posture":
        return Posture(mirror_direction(self.upper),
                       mirror_direction(self.forearm),
                       "left" if self.side == "right" else "right")

    def as_right(self) -> "Posture":
        return self if self.side == "right" else self.mirrored()


@dataclass(frozen=True)
class PostureGoal:
    """Posture target, possibly between two catalog postures.

    t = 0 means exactly `start`; dense trajectory tasks sweep t toward 1 to
    blend into `end`.  Both postures must be for the same side.
    """

    start: Posture
    end: Posture
    t: float = 0.0

    def __post_init__(self):
        if self.start.side != self.end.side:
            raise ValueError("posture goal mixes sides")
        if not (0.0 <= self.t <= 1.0):
            raise ValueError(f"blend parameter {self.t} outside [0, 1]")

    @staticmethod
    def fixed(posture: Posture) -> "PostureGoal":
        return PostureGoal(posture, posture, 0.0)


class PostureCatalog:
    """Valid posture pairs (right-arm canonical) and the elevated subset."""

    def __init__(self, valid_pairs, exceptional_pairs):
        self.valid = tuple(valid_pairs)
        self._valid_set = frozenset(self.valid)
        self._exceptional_set = frozenset(exceptional_pairs)
        if not self._exceptional_set <= self._valid_set:
            raise RoleMotionError("exceptional postures must be valid postures")
        for u, f in self.valid:
            NamedDirection.parse(u)
            NamedDirection.parse(f)

    def __len__(self):
        return len(self.valid)

    @property
    def exceptional(self):
        return tuple(p for p in self.valid if p in self._exceptional_set)

    def is_valid(self, posture: Posture) -> bool:
        return posture.as_right().key in self._valid_set

    def is_exceptional(self, posture: Posture) -> bool:
        return posture.as_right().key in self._exceptional_set

    def nearest_valid(self, posture: Posture) -> Posture:
        """The valid posture angularly closest to the given one.

        Distance is the summed canonical-vector angle over both segments;
        ties break by catalog order, so replacement is deterministic.
        """
        if self.is_valid(posture):
            return posture
        probe = posture.as_right()
        best = None
        best_d = math.inf
        for u_name, f_name in self.valid:
            d = (direction_angle_deg(probe.upper, NamedDirection.parse(u_name))
                 + direction_angle_deg(probe.forearm, NamedDirection.parse(f_name)))
            if d < best_d - 1e-9:
                best_d = d
                best = (u_name, f_name)
        fixed = Posture(NamedDirection.parse(best[0]),
                        NamedDirection.parse(best[1]), "right")
        return fixed if posture.side == "right" else fixed.mirrored()

    def to_json(self) -> dict:
        return {
            "side": "right",
            "valid": [list(p) for p in self.valid],
            "exceptional": [list(p) for p in self.exceptional],
        }


def load_catalog(path=None) -> PostureCatalog:
    raw = json.loads(Path(path or _CATALOG_PATH).read_text())
    if raw.get("side") != "right":
        raise RoleMotionError("catalog must be stored right-arm canonical")
    return PostureCatalog([tuple(p) for p in raw["valid"]],
                          [tuple(p) for p in raw["exceptional"]])


# -- generation ---------------------------------------------------------------
#
# The catalog ships as data; this table is how that data was produced and
# stays here so a test can confirm the file matches it.  Entries are
# curated for the right arm working in front of the body: per upper-arm
# direction, the forearm directions an elbow (flexion only, limited
# humeral twist) actually produces there.  Cross-body forearms appear only
# under centered or forward upper arms; nothing points behind the back.

_FOREARMS_BY_UPPER = {
    "south_pole": (
        "south_pole",
        "forward_low", "left_forward_low", "right_forward_low",
        "left_low", "right_low",
        "forward_middle", "left_forward_middle", "right_forward_middle",
        "left_middle", "right_middle",
        "forward_high",
    ),
    "forward_low": (
        "south_pole",
        "forward_low", "left_forward_low", "right_forward_low",
        "left_low", "right_low",
        "forward_middle", "left_forward_middle", "right_forward_middle",
        "left_middle", "right_middle",
        "forward_high",
    ),
    "right_forward_low": (
        "south_pole",
        "right_forward_low", "right_forward_middle",
        "forward_low", "forward_middle", "forward_high",
        "right_low", "right_middle",
        "left_forward_low", "left_forward_middle",
    ),
    "left_forward_low": (
        "south_pole",
        "left_forward_low", "left_forward_middle",
        "forward_low", "forward_middle",
        "left_low", "left_middle",
    ),
    "right_low": (
        "south_pole",
        "right_low", "right_middle",
        "right_forward_low", "right_forward_middle",
        "forward_low", "forward_middle",
    ),
    "forward_middle": (
        "forward_low", "forward_middle", "forward_high",
        "left_forward_middle", "right_forward_middle",
        "left_middle",
        "north_pole",
    ),
    "right_forward_middle": (
        "right_forward_low", "right_forward_middle", "right_forward_high",
        "forward_middle", "forward_high",
        "right_middle",
    ),
    "left_forward_middle": (
        "left_forward_middle", "left_forward_high",
        "left_middle",
        "forward_middle",
    ),
    "right_middle": (
        "right_middle",
        "right_forward_middle",
    ),
    # Elevated upper arm (the downstream twist handling treats these
    # specially): forearm stays in the lifting plane or points up.
    "forward_high": (
        "forward_high", "forward_middle", "north_pole",
    ),
    "right_forward_high": (
        "right_forward_high", "right_forward_middle", "north_pole",
    ),
    "right_high": (
        "right_high", "right_middle", "north_pole",
    ),
    "north_pole": (
        "north_pole", "forward_high", "right_forward_high",
    ),
}

_ELEVATED_UPPERS = ("forward_high", "right_forward_high", "right_high",
                    "north_pole")


def generate_catalog() -> PostureCatalog:
    valid = []
    exceptional = []
    for u_name, forearms in _FOREARMS_BY_UPPER.items():
        for f_name in forearms:
            pair = (u_name, f_name)
            valid.append(pair)
            if u_name in _ELEVATED_UPPERS:
                exceptional.append(pair)
    return PostureCatalog(valid, exceptional)
