"""Kernel dispatch: compiled extension when available, pure Python otherwise.

The two implementations are bit-compatible by construction (same arithmetic
in the same order; see _pure.py).  Selection happens at import time and can
be forced with the ROLEMOTION_BACKEND environment variable ("native" or
"pure").  Forcing "native" raises if the extension is missing.

All public functions take and return numpy arrays so callers never see the
backend difference.  `workers` parallelises batch evaluation over rows with
threads; chunks write to disjoint slices of preallocated outputs, so results
are identical to a serial run.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _pure

_native = None
_requested = os.environ.get("ROLEMOTION_BACKEND", "").strip().lower()
if _requested not in ("", "pure", "native"):
    raise RuntimeError(
        f"ROLEMOTION_BACKEND must be 'pure' or 'native', got {_requested!r}"
    )
if _requested != "pure":
    try:
        from . import _native as _native_mod
        _native = _native_mod
    except ImportError:
        if _requested == "native":
            raise RuntimeError(
                "ROLEMOTION_BACKEND=native but the compiled extension is not "
                "built; run pip install -e . --no-build-isolation"
            )

BACKEND = "native" if _native is not None else "pure"


def available_backends():
    out = ["pure"]
    if _native is not None:
        out.append("native")
    return out


@dataclass
class ChainArrays:
    """Flat chain description shared by both backends.

    parent[i] is the index of the joint whose child link carries joint i,
    or -1 when that link is the root.  Joints are topologically ordered.
    kind: 0 revolute, 1 prismatic.  org_rot rows are row-major 3x3.
    """

    parent: np.ndarray
    kind: np.ndarray
    axis: np.ndarray
    org_rot: np.ndarray
    org_pos: np.ndarray
    _pure_cache: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.parent = np.ascontiguousarray(self.parent, dtype=np.int32)
        self.kind = np.ascontiguousarray(self.kind, dtype=np.int32)
        self.axis = np.ascontiguousarray(self.axis, dtype=np.float64)
        self.org_rot = np.ascontiguousarray(self.org_rot, dtype=np.float64)
        self.org_pos = np.ascontiguousarray(self.org_pos, dtype=np.float64)

    def __len__(self):
        return len(self.parent)

    @property
    def pure(self):
        if self._pure_cache is None:
            self._pure_cache = (
                tuple(int(v) for v in self.parent),
                tuple(int(v) for v in self.kind),
                tuple(tuple(row) for row in self.axis.tolist()),
                tuple(tuple(row) for row in self.org_rot.tolist()),
                tuple(tuple(row) for row in self.org_pos.tolist()),
            )
        return self._pure_cache


def fk_frames(chain: ChainArrays, q) -> tuple[np.ndarray, np.ndarray]:
    """World frames of all joints: rotations (n, 9) and positions (n, 3)."""
    n = len(chain)
    q = np.ascontiguousarray(q, dtype=np.float64)
    if q.shape != (n,):
        raise ValueError(f"configuration has shape {q.shape}, chain has {n} joints")
    out_rot = np.empty((n, 9), dtype=np.float64)
    out_pos = np.empty((n, 3), dtype=np.float64)
    if _native is not None:
        _native.fk_frames(chain.parent, chain.kind, chain.axis,
                          chain.org_rot, chain.org_pos, q, out_rot, out_pos)
    else:
        parent, kind, axis, org_rot, org_pos = chain.pure
        rots, poss = _pure.fk_frames(parent, kind, axis, org_rot, org_pos,
                                     q.tolist())
        for i in range(n):
            out_rot[i] = rots[i]
            out_pos[i] = poss[i]
    return out_rot, out_pos


def eval_batch(chain: ChainArrays, configs, pt_frame, pt_off,
               vec_frame, vec_off, workers: int = 1):
    """Point and vector queries for a batch of configurations.

    configs: (m, n).  pt_frame: (k,) int frame indices (-1 = world),
    pt_off: (k, 3) offsets in that frame.  vec_frame / vec_off likewise
    for free vectors.  Returns (points (m, k, 3), vectors (m, j, 3)).
    """
    configs = np.ascontiguousarray(configs, dtype=np.float64)
    if configs.ndim != 2 or configs.shape[1] != len(chain):
        raise ValueError(f"bad batch shape {configs.shape}")
    m = configs.shape[0]
    pt_frame = np.ascontiguousarray(pt_frame, dtype=np.int32)
    pt_off = np.ascontiguousarray(pt_off, dtype=np.float64).reshape(len(pt_frame), 3)
    vec_frame = np.ascontiguousarray(vec_frame, dtype=np.int32)
    vec_off = np.ascontiguousarray(vec_off, dtype=np.float64).reshape(len(vec_frame), 3)
    out_pts = np.empty((m, len(pt_frame), 3), dtype=np.float64)
    out_vecs = np.empty((m, len(vec_frame), 3), dtype=np.float64)

    def run_rows(lo, hi):
        if _native is not None:
            _native.eval_batch(chain.parent, chain.kind, chain.axis,
                               chain.org_rot, chain.org_pos, configs,
                               pt_frame, pt_off, vec_frame, vec_off,
                               out_pts, out_vecs, lo, hi)
        else:
            parent, kind, axis, org_rot, org_pos = chain.pure
            ptf = pt_frame.tolist()
            pto = [tuple(r) for r in pt_off.tolist()]
            vcf = vec_frame.tolist()
            vco = [tuple(r) for r in vec_off.tolist()]
            for r in range(lo, hi):
                pts, vecs = _pure.eval_queries(parent, kind, axis, org_rot,
                                               org_pos, configs[r].tolist(),
                                               ptf, pto, vcf, vco)
                for k in range(len(pts)):
                    out_pts[r, k] = pts[k]
                for j in range(len(vecs)):
                    out_vecs[r, j] = vecs[j]

    _run_chunked(run_rows, m, workers)
    return out_pts, out_vecs


def seg_box_distance(p0, p1, rot, center, half) -> float:
    """Distance from segment p0-p1 to a solid oriented box (0 on contact).

    rot may be (3, 3) or a flat 9-vector, world-from-box, row-major.
    """
    rot = np.asarray(rot, dtype=np.float64).reshape(9)
    if _native is not None:
        return _native.seg_box_distance(
            float(p0[0]), float(p0[1]), float(p0[2]),
            float(p1[0]), float(p1[1]), float(p1[2]),
            np.ascontiguousarray(rot),
            float(center[0]), float(center[1]), float(center[2]),
            float(half[0]), float(half[1]), float(half[2]))
    return _pure.seg_box_distance(
        float(p0[0]), float(p0[1]), float(p0[2]),
        float(p1[0]), float(p1[1]), float(p1[2]),
        tuple(rot.tolist()),
        float(center[0]), float(center[1]), float(center[2]),
        float(half[0]), float(half[1]), float(half[2]))


def seg_box_distance_batch(segs, boxes, workers: int = 1) -> np.ndarray:
    """Pairwise segment-to-box distances.

    segs: (ns, 6) endpoint pairs.  boxes: (nb, 15) rows of rotation (9),
    center (3), half-extents (3).  Returns (ns, nb).
    """
    segs = np.ascontiguousarray(segs, dtype=np.float64).reshape(-1, 6)
    boxes = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 15)
    ns = segs.shape[0]
    out = np.empty((ns, boxes.shape[0]), dtype=np.float64)

    def run_rows(lo, hi):
        if _native is not None:
            _native.seg_box_distance_batch(segs, boxes, out, lo, hi)
        else:
            seg_rows = [tuple(r) for r in segs[lo:hi].tolist()]
            box_rows = [tuple(r) for r in boxes.tolist()]
            lists = [[0.0] * boxes.shape[0] for _ in range(hi - lo)]
            _pure.seg_box_distance_batch(seg_rows, box_rows, lists)
            for i in range(hi - lo):
                out[lo + i] = lists[i]

    _run_chunked(run_rows, ns, workers)
    return out


def _run_chunked(fn, total, workers):
    if total == 0:
        return
    if workers <= 1 or total == 1:
        fn(0, total)
        return
    workers = min(workers, total)
    bounds = np.linspace(0, total, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, int(bounds[w]), int(bounds[w + 1]))
                   for w in range(workers)]
        for f in futures:
            f.result()
