"""Demonstration recordings: loading, synthesis, and posture timelines.

A recording is a JSONL file of skeleton frames, one arm per frame: time,
side, and the shoulder / elbow / wrist / hand points in the task frame.
From a recording we extract a posture timeline (which named posture the arm
held, when) and answer alignment queries (when did the hand first visit a
task point).

There is also a synthesizer that renders a small script of hand moves into
frames with a two-segment arm model.  It exists so scenarios ship with
reproducible recordings and so the extractor can be tested against known
ground truth.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AlignmentError, ExtractionError, RoleMotionError
from .posture import (NamedDirection, Posture, PostureCatalog, PostureGoal,
                      canonical_vector, mirror_direction, quantize_direction)

_DEMOS_DIR = Path(__file__).resolve().parent / "data" / "demos"


@dataclass(frozen=True)
class DemoFrame:
    t: float
    side: str
    shoulder: np.ndarray
    elbow: np.ndarray
    wrist: np.ndarray
    hand: np.ndarray


@dataclass(frozen=True)
class TimelineEntry:
    t0: float
    t1: float
    posture: Posture
    replaced: bool  # original quantized pair was off-catalog

    @property
    def duration(self) -> float:
        return self.t1 - self.t0


def load_demo(path) -> list:
    """Read a JSONL recording; packaged name or path."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        p = _DEMOS_DIR / f"{path}.jsonl"
    if not p.exists():
        raise RoleMotionError(f"no recording at {path!r}")
    frames = []
    last_t = -math.inf
    for ln, line in enumerate(p.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        extra = set(obj) - {"t", "side", "shoulder", "elbow", "wrist", "hand"}
        if extra:
            raise RoleMotionError(f"{p}:{ln}: unknown fields {sorted(extra)}")
        try:
            frame = DemoFrame(
                t=float(obj["t"]),
                side=obj["side"],
                shoulder=np.array(obj["shoulder"], dtype=np.float64),
                elbow=np.array(obj["elbow"], dtype=np.float64),
                wrist=np.array(obj["wrist"], dtype=np.float64),
                hand=np.array(obj["hand"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise RoleMotionError(f"{p}:{ln}: bad frame ({e})") from e
        if frame.side not in ("left", "right"):
            raise RoleMotionError(f"{p}:{ln}: side must be left or right")
        for part in (frame.shoulder, frame.elbow, frame.wrist, frame.hand):
            if part.shape != (3,):
                raise RoleMotionError(f"{p}:{ln}: points must be 3-vectors")
        if frame.t < last_t:
            raise RoleMotionError(f"{p}:{ln}: time must not decrease")
        last_t = frame.t
        frames.append(frame)
    if not frames:
        raise RoleMotionError(f"{p}: empty recording")
    return frames


def save_demo(frames, path) -> None:
    lines = []
    for f in frames:
        lines.append(json.dumps({
            "t": round(f.t, 6),
            "side": f.side,
            "shoulder": [round(v, 6) for v in f.shoulder],
            "elbow": [round(v, 6) for v in f.elbow],
            "wrist": [round(v, 6) for v in f.wrist],
            "hand": [round(v, 6) for v in f.hand],
        }, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


# -- timeline -----------------------------------------------------------------


def frame_posture(frame: DemoFrame) -> Posture:
    """Quantized posture of one frame (may be off-catalog)."""
    upper = frame.elbow - frame.shoulder
    fore = frame.wrist - frame.elbow
    return Posture(quantize_direction(upper), quantize_direction(fore),
                   frame.side)


def extract_timeline(frames, catalog: PostureCatalog, side: str,
                     debounce_s: float = 0.2) -> list:
    """Posture runs for one arm, debounced and catalog-repaired.

    Frames of the other side are ignored.  Off-catalog quantizations are
    replaced with the nearest valid posture before merging.  Runs shorter
    than debounce_s are absorbed into their left neighbor (right neighbor
    for a short first run) until every run is long enough.
    """
    picked = [f for f in frames if f.side == side]
    if not picked:
        raise ExtractionError(f"recording holds no {side}-side frames")
    runs = []
    for f in picked:
        raw = frame_posture(f)
        fixed = catalog.nearest_valid(raw)
        replaced = fixed is not raw
        if runs and runs[-1][2].key == fixed.key:
            prev = runs[-1]
            runs[-1] = (prev[0], f.t, prev[2], prev[3] or replaced)
        else:
            runs.append((f.t, f.t, fixed, replaced))
    # Close each run at the start of the next one so spans tile the tape.
    closed = []
    for i, (t0, t1, p, rep) in enumerate(runs):
        end = runs[i + 1][0] if i + 1 < len(runs) else t1
        closed.append([t0, max(end, t1), p, rep])
    runs = closed

    def merge_equal(rs):
        out = []
        for r in rs:
            if out and out[-1][2].key == r[2].key:
                out[-1][1] = r[1]
                out[-1][3] = out[-1][3] or r[3]
            else:
                out.append(list(r))
        return out

    runs = merge_equal(runs)
    while len(runs) > 1:
        short = None
        for i, r in enumerate(runs):
            if r[1] - r[0] < debounce_s:
                short = i
                break
        if short is None:
            break
        r = runs.pop(short)
        if short > 0:
            runs[short - 1][1] = r[1]
            runs[short - 1][3] = runs[short - 1][3] or r[3]
        else:
            runs[0][0] = r[0]
            runs[0][3] = runs[0][3] or r[3]
        runs = merge_equal(runs)
    return [TimelineEntry(t0, t1, p, rep) for t0, t1, p, rep in runs]


def posture_at(timeline, t: float) -> Posture:
    """Posture held at time t (clamped to the timeline span)."""
    if not timeline:
        raise ExtractionError("empty timeline")
    for e in timeline:
        if t < e.t1:
            return e.posture
    return timeline[-1].posture


def posture_goal_at(timeline, t: float) -> PostureGoal:
    """Blended goal at time t: current posture fading into the next run.

    Progress is normalized inside the current run, so the blend reaches
    the next posture exactly when its run begins.
    """
    if not timeline:
        raise ExtractionError("empty timeline")
    for i, e in enumerate(timeline):
        if t < e.t1 or i == len(timeline) - 1:
            if i == len(timeline) - 1:
                return PostureGoal.fixed(e.posture)
            span = e.duration
            frac = 0.0 if span <= 0 else min(max((t - e.t0) / span, 0.0), 1.0)
            return PostureGoal(e.posture, timeline[i + 1].posture, frac)
    raise AssertionError("unreachable")


# -- alignment ----------------------------------------------------------------


def visit_time(frames, point, radius: float, t_min: float, side: str):
    """First time after t_min the side's hand is within radius of point.

    Returns None when the hand never gets there.
    """
    p = np.asarray(point, dtype=np.float64)
    for f in frames:
        if f.side != side or f.t < t_min:
            continue
        if float(np.linalg.norm(f.hand - p)) <= radius:
            return f.t
    return None


def nearest_approach(frames, point, t_min: float, side: str):
    """(time, distance) of the hand's closest pass after t_min."""
    p = np.asarray(point, dtype=np.float64)
    best = None
    for f in frames:
        if f.side != side or f.t < t_min:
            continue
        d = float(np.linalg.norm(f.hand - p))
        if best is None or d < best[1]:
            best = (f.t, d)
    if best is None:
        raise AlignmentError(f"no {side}-side frames after t={t_min}")
    return best


def shoulder_at(frames, t: float, side: str):
    """Demonstrator shoulder position at the frame nearest to time t."""
    best = None
    best_d = None
    for f in frames:
        if f.side != side:
            continue
        d = abs(f.t - t)
        if best_d is None or d < best_d:
            best_d, best = d, f
    return None if best is None else best.shoulder.copy()


def approach_direction(frames, t: float, side: str, window: float = 0.25):
    """Mean hand velocity direction around time t, or None if still."""
    pts = [(f.t, f.hand) for f in frames
           if f.side == side and t - window <= f.t <= t + window]
    if len(pts) < 2:
        return None
    delta = pts[-1][1] - pts[0][1]
    n = float(np.linalg.norm(delta))
    if n < 1e-6:
        return None
    return delta / n


# -- synthesis ----------------------------------------------------------------


def _side_canonical(d: NamedDirection, side: str) -> np.ndarray:
    if side == "left":
        return canonical_vector(mirror_direction(d))
    return canonical_vector(d)


class _ArmModel:
    """Two-segment arm with a short hand extension along the forearm."""

    def __init__(self, shoulder, side, upper_len, fore_len, hand_len):
        self.shoulder = np.asarray(shoulder, dtype=np.float64)
        self.side = side
        self.upper_len = upper_len
        self.fore_len = fore_len
        self.hand_len = hand_len
        down = self.shoulder + np.array([0.0, 0.0, -(upper_len + fore_len)])
        self.elbow = self.shoulder + np.array([0.0, 0.0, -upper_len])
        self.wrist = down
        self.hand = down + np.array([0.0, 0.0, -hand_len])

    def _elbow_for(self, wrist):
        s = self.shoulder
        d = wrist - s
        dist = float(np.linalg.norm(d))
        reach = self.upper_len + self.fore_len
        if dist < 1e-9:
            return s + np.array([0.0, 0.0, -self.upper_len])
        u = d / dist
        if dist >= reach:
            return s + self.upper_len * u
        a = (self.upper_len ** 2 - self.fore_len ** 2 + dist ** 2) / (2 * dist)
        h2 = self.upper_len ** 2 - a ** 2
        h = math.sqrt(h2) if h2 > 0 else 0.0
        # Elbows hang low and flare slightly outward.
        outward = np.array([0.0, -1.0, 0.0] if self.side == "right"
                           else [0.0, 1.0, 0.0])
        pref = np.array([0.0, 0.0, -1.0]) + 0.4 * outward
        perp = pref - (pref @ u) * u
        n = float(np.linalg.norm(perp))
        if n < 1e-9:
            pref = outward
            perp = pref - (pref @ u) * u
            n = float(np.linalg.norm(perp))
            if n < 1e-9:
                perp = np.array([-1.0, 0.0, 0.0])
                n = 1.0
        return s + a * u + h * (perp / n)

    def reach_hand(self, target):
        """Place the hand exactly on target (when physically reachable).

        Alternates solving the elbow and re-deriving the wrist so the
        hand extension stays collinear with the forearm; the fixed point
        makes hand == target bit-exact because the last step sets
        hand = target - L*u and then adds L*u back.
        """
        target = np.asarray(target, dtype=np.float64)
        u = target - self.shoulder
        n = float(np.linalg.norm(u))
        u = u / n if n > 1e-9 else np.array([0.0, 0.0, -1.0])
        elbow = self.elbow
        for _ in range(6):
            wrist = target - self.hand_len * u
            elbow = self._elbow_for(wrist)
            v = target - elbow
            n = float(np.linalg.norm(v))
            if n < 1e-9:
                break
            u = v / n
        self.wrist = target - self.hand_len * u
        self.elbow = elbow
        self.hand = self.wrist + self.hand_len * u
        self.hand = target.copy() if n > 1e-9 else self.hand

    def move_shoulder(self, shoulder):
        """Relocate the shoulder, keeping the hand planted where it is."""
        hand = self.hand.copy()
        self.shoulder = np.asarray(shoulder, dtype=np.float64)
        self.reach_hand(hand)

    def set_posture(self, upper: NamedDirection, fore: NamedDirection):
        """Exact skeleton from canonical direction vectors."""
        uv = _side_canonical(upper, self.side)
        fv = _side_canonical(fore, self.side)
        self.elbow = self.shoulder + self.upper_len * uv
        self.wrist = self.elbow + self.fore_len * fv
        self.hand = self.wrist + self.hand_len * fv

    def frame(self, t: float, noise=None) -> DemoFrame:
        def jitter(p):
            if noise is None:
                return p.copy()
            return p + noise()
        return DemoFrame(t=t, side=self.side,
                         shoulder=jitter(self.shoulder),
                         elbow=jitter(self.elbow),
                         wrist=jitter(self.wrist),
                         hand=jitter(self.hand))


_SCRIPT_KEYS = {"stance", "shoulder_height", "shoulder_lateral", "upper_len",
                "fore_len", "hand_len", "rate_hz", "noise_sigma", "moves"}
_MOVE_KEYS = {"side", "to", "arc", "posture", "step", "duration", "dwell"}


def synth_demo(script: dict, seed: int = 0) -> list:
    """Render a move script into skeleton frames.

    Moves run in sequence on a shared clock.  Each move addresses one
    side; the other arm keeps its last pose.  Move kinds:

    - "to": [x, y, z] — hand travels straight to the point.
    - "arc": {"center": [x, y, z], "axis": [...], "start": p, "sweep": a}
      — hand follows the circle through p about the axis line.
    - "posture": [upper, forearm] — skeleton snaps along a straight blend
      to the exact canonical posture.
    - "step": [x, y] — the whole body glides to a new stance while both
      hands stay planted; needs no side and records both arms.

    duration is travel time, dwell holds the end point.  noise_sigma adds
    Gaussian jitter to every recorded point (seeded, reproducible).
    """
    extra = set(script) - _SCRIPT_KEYS
    if extra:
        raise RoleMotionError(f"unknown script fields {sorted(extra)}")
    stance = np.asarray(script.get("stance", [0.0, 0.0]), dtype=np.float64)
    sh_h = float(script.get("shoulder_height", 1.35))
    sh_lat = float(script.get("shoulder_lateral", 0.18))
    upper_len = float(script.get("upper_len", 0.3))
    fore_len = float(script.get("fore_len", 0.3))
    hand_len = float(script.get("hand_len", 0.1))
    rate = float(script.get("rate_hz", 50.0))
    sigma = float(script.get("noise_sigma", 0.0))
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5eed)))
    noise = (lambda: rng.normal(0.0, sigma, 3)) if sigma > 0 else None

    arms = {
        "right": _ArmModel([stance[0], stance[1] - sh_lat, sh_h], "right",
                           upper_len, fore_len, hand_len),
        "left": _ArmModel([stance[0], stance[1] + sh_lat, sh_h], "left",
                          upper_len, fore_len, hand_len),
    }
    frames = []
    t = 0.0
    dt = 1.0 / rate
    for mi, move in enumerate(script["moves"]):
        extra = set(move) - _MOVE_KEYS
        if extra:
            raise RoleMotionError(f"move {mi}: unknown fields {sorted(extra)}")
        duration = float(move.get("duration", 1.0))
        dwell = float(move.get("dwell", 0.0))
        steps = max(int(round(duration * rate)), 1)

        if "step" in move:
            tgt = np.asarray(move["step"], dtype=np.float64)
            goal = {"right": np.array([tgt[0], tgt[1] - sh_lat]),
                    "left": np.array([tgt[0], tgt[1] + sh_lat])}
            start_sh = {k: a.shoulder.copy() for k, a in arms.items()}
            for s in range(1, steps + 1):
                frac = s / steps
                t += dt
                for k, a in arms.items():
                    sh = start_sh[k].copy()
                    sh[:2] += frac * (goal[k] - start_sh[k][:2])
                    a.move_shoulder(sh)
                    frames.append(a.frame(t, noise))
            for _ in range(int(round(dwell * rate))):
                t += dt
                for a in arms.values():
                    frames.append(a.frame(t, noise))
            continue

        side = move["side"]
        arm = arms[side]
        if "to" in move:
            start = arm.hand.copy()
            end = np.asarray(move["to"], dtype=np.float64)
            for s in range(1, steps + 1):
                frac = s / steps
                arm.reach_hand(start + frac * (end - start))
                t += dt
                frames.append(arm.frame(t, noise))
        elif "arc" in move:
            spec = move["arc"]
            center = np.asarray(spec["center"], dtype=np.float64)
            axis = np.asarray(spec["axis"], dtype=np.float64)
            axis = axis / float(np.linalg.norm(axis))
            start_pt = np.asarray(spec["start"], dtype=np.float64)
            sweep = float(spec["sweep"])
            rel = start_pt - center
            for s in range(1, steps + 1):
                ang = sweep * s / steps
                c, sn = math.cos(ang), math.sin(ang)
                rot = (c * rel + sn * np.cross(axis, rel)
                       + (1 - c) * (axis @ rel) * axis)
                arm.reach_hand(center + rot)
                t += dt
                frames.append(arm.frame(t, noise))
        elif "posture" in move:
            upper = NamedDirection.parse(move["posture"][0])
            fore = NamedDirection.parse(move["posture"][1])
            before = (arm.elbow.copy(), arm.wrist.copy(), arm.hand.copy())
            arm.set_posture(upper, fore)
            after = (arm.elbow.copy(), arm.wrist.copy(), arm.hand.copy())
            for s in range(1, steps + 1):
                frac = s / steps
                arm.elbow = before[0] + frac * (after[0] - before[0])
                arm.wrist = before[1] + frac * (after[1] - before[1])
                arm.hand = before[2] + frac * (after[2] - before[2])
                t += dt
                frames.append(arm.frame(t, noise))
            arm.elbow, arm.wrist, arm.hand = after
        else:
            raise RoleMotionError(f"move {mi}: needs one of to/arc/posture")

        dwell_steps = int(round(dwell * rate))
        for _ in range(dwell_steps):
            t += dt
            frames.append(arm.frame(t, noise))
    return frames
