"""Pure-Python reference kernels.

This module is the semantics of record for the compiled extension:
``_native.pyx`` mirrors every function here operation for operation, in the
same order, using the same libm calls, so both backends produce bit-identical
IEEE-754 results.  Keep the two files in lockstep when editing either one.

Rotations are 9-tuples in row-major order (r00, r01, r02, r10, ...).
Chains are flat parallel tuples; see ``kinematics.ChainData``.
"""

from math import cos, sin, sqrt

KIND_REVOLUTE = 0
KIND_PRISMATIC = 1


def rot_axis(ax, ay, az, angle):
    """Rotation about a unit axis, row-major 9-tuple (Rodrigues form)."""
    c = cos(angle)
    s = sin(angle)
    t = 1.0 - c
    return (
        t * ax * ax + c, t * ax * ay - s * az, t * ax * az + s * ay,
        t * ax * ay + s * az, t * ay * ay + c, t * ay * az - s * ax,
        t * ax * az - s * ay, t * ay * az + s * ax, t * az * az + c,
    )


def mat_mul(a, b):
    """Row-major 3x3 product a @ b."""
    return (
        a[0] * b[0] + a[1] * b[3] + a[2] * b[6],
        a[0] * b[1] + a[1] * b[4] + a[2] * b[7],
        a[0] * b[2] + a[1] * b[5] + a[2] * b[8],
        a[3] * b[0] + a[4] * b[3] + a[5] * b[6],
        a[3] * b[1] + a[4] * b[4] + a[5] * b[7],
        a[3] * b[2] + a[4] * b[5] + a[5] * b[8],
        a[6] * b[0] + a[7] * b[3] + a[8] * b[6],
        a[6] * b[1] + a[7] * b[4] + a[8] * b[7],
        a[6] * b[2] + a[7] * b[5] + a[8] * b[8],
    )


def mat_vec(a, vx, vy, vz):
    return (
        a[0] * vx + a[1] * vy + a[2] * vz,
        a[3] * vx + a[4] * vy + a[5] * vz,
        a[6] * vx + a[7] * vy + a[8] * vz,
    )


def fk_frames(parent, kind, axis, org_rot, org_pos, q):
    """World frame of every joint, in chain order.

    parent[i] indexes an earlier joint or is -1 for children of the root
    link.  Each frame is (parent world) * (fixed origin) * (motion), where
    motion is a rotation about, or translation along, the local axis.

    Returns two lists: 9-tuples and 3-tuples.
    """
    n = len(parent)
    out_rot = [None] * n
    out_pos = [None] * n
    for i in range(n):
        orot = org_rot[i]
        opos = org_pos[i]
        pi = parent[i]
        if pi < 0:
            brot = orot
            bx = opos[0]
            by = opos[1]
            bz = opos[2]
        else:
            prot = out_rot[pi]
            ppos = out_pos[pi]
            brot = mat_mul(prot, orot)
            ox, oy, oz = mat_vec(prot, opos[0], opos[1], opos[2])
            bx = ppos[0] + ox
            by = ppos[1] + oy
            bz = ppos[2] + oz
        qi = q[i]
        ax = axis[i]
        if kind[i] == KIND_REVOLUTE:
            jrot = rot_axis(ax[0], ax[1], ax[2], qi)
            out_rot[i] = mat_mul(brot, jrot)
            out_pos[i] = (bx, by, bz)
        else:
            dx, dy, dz = mat_vec(brot, ax[0], ax[1], ax[2])
            out_rot[i] = brot
            out_pos[i] = (bx + dx * qi, by + dy * qi, bz + dz * qi)
    return out_rot, out_pos


def eval_queries(parent, kind, axis, org_rot, org_pos, q,
                 pt_frame, pt_off, vec_frame, vec_off):
    """One FK pass plus point/vector queries against the resulting frames.

    Point query k: world position of offset pt_off[k] expressed in frame
    pt_frame[k].  Vector query j: world direction of vec_off[j].  Frame
    index -1 means the root (identity) frame.

    Returns (points, vectors) as lists of 3-tuples.
    """
    out_rot, out_pos = fk_frames(parent, kind, axis, org_rot, org_pos, q)
    pts = []
    for k in range(len(pt_frame)):
        f = pt_frame[k]
        off = pt_off[k]
        if f < 0:
            pts.append((off[0], off[1], off[2]))
        else:
            rot = out_rot[f]
            pos = out_pos[f]
            wx, wy, wz = mat_vec(rot, off[0], off[1], off[2])
            pts.append((pos[0] + wx, pos[1] + wy, pos[2] + wz))
    vecs = []
    for j in range(len(vec_frame)):
        f = vec_frame[j]
        off = vec_off[j]
        if f < 0:
            vecs.append((off[0], off[1], off[2]))
        else:
            vecs.append(mat_vec(out_rot[f], off[0], off[1], off[2]))
    return pts, vecs


def seg_box_distance(px, py, pz, qx, qy, qz, rot, cx, cy, cz, hx, hy, hz):
    """Exact distance between segment pq and a solid oriented box.

    rot is the box orientation (row-major 9-tuple), c its center, h its
    half-extents.  Returns 0.0 when the segment touches or enters the box.

    Works in the box frame.  The squared distance from a point to the box
    is a sum, over axes where the point lies outside the slab, of squared
    slab excesses.  Along the segment each excess is affine in t, and the
    set of active axes only changes where a coordinate crosses a slab
    face, so the squared distance is piecewise quadratic in t.  We collect
    the crossing parameters, then minimise the quadratic on each piece.
    """
    # Segment endpoints in box coordinates (rot is world-from-box, so
    # apply the transpose: columns of rot).
    dxw = px - cx
    dyw = py - cy
    dzw = pz - cz
    a0 = rot[0] * dxw + rot[3] * dyw + rot[6] * dzw
    a1 = rot[1] * dxw + rot[4] * dyw + rot[7] * dzw
    a2 = rot[2] * dxw + rot[5] * dyw + rot[8] * dzw
    dxw = qx - cx
    dyw = qy - cy
    dzw = qz - cz
    b0 = rot[0] * dxw + rot[3] * dyw + rot[6] * dzw
    b1 = rot[1] * dxw + rot[4] * dyw + rot[7] * dzw
    b2 = rot[2] * dxw + rot[5] * dyw + rot[8] * dzw
    a = (a0, a1, a2)
    d = (b0 - a0, b1 - a1, b2 - a2)
    h = (hx, hy, hz)

    # Breakpoints where some coordinate crosses +/-h, clipped to [0, 1].
    ts = [0.0, 1.0]
    for i in range(3):
        di = d[i]
        if di != 0.0:
            t = (h[i] - a[i]) / di
            if 0.0 < t < 1.0:
                ts.append(t)
            t = (-h[i] - a[i]) / di
            if 0.0 < t < 1.0:
                ts.append(t)
    ts.sort()

    best = -1.0
    for k in range(len(ts) - 1):
        t0 = ts[k]
        t1 = ts[k + 1]
        if t1 - t0 <= 0.0:
            continue
        tm = 0.5 * (t0 + t1)
        # Quadratic A t^2 + B t + C: squared excess over the active axes,
        # whose membership (and sign) is constant inside this piece.
        qa = 0.0
        qb = 0.0
        qc = 0.0
        for i in range(3):
            ci = a[i] + tm * d[i]
            if ci > h[i]:
                g0 = a[i] - h[i]
                g1 = d[i]
            elif ci < -h[i]:
                g0 = -a[i] - h[i]
                g1 = -d[i]
            else:
                continue
            qa = qa + g1 * g1
            qb = qb + 2.0 * (g0 * g1)
            qc = qc + g0 * g0
        if qa > 0.0:
            tstar = -qb / (2.0 * qa)
            if tstar < t0:
                tstar = t0
            elif tstar > t1:
                tstar = t1
        else:
            tstar = t0
        val = (qa * tstar + qb) * tstar + qc
        if val < best or best < 0.0:
            best = val
        if best == 0.0:
            return 0.0
    if best <= 0.0:
        return 0.0
    return sqrt(best)


def seg_box_distance_batch(segs, boxes, out):
    """Fill out[i][j] with seg_box_distance(segs[i], boxes[j]).

    segs rows: (px, py, pz, qx, qy, qz).  boxes rows: 9 rotation entries,
    then center, then half-extents (15 values).  out is a preallocated
    list of lists.
    """
    for i in range(len(segs)):
        s = segs[i]
        row = out[i]
        for j in range(len(boxes)):
            b = boxes[j]
            row[j] = seg_box_distance(
                s[0], s[1], s[2], s[3], s[4], s[5],
                (b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7], b[8]),
                b[9], b[10], b[11], b[12], b[13], b[14],
            )
