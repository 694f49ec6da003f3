"""Constraint goals, honest checks, and the search that satisfies them.

The proposed method runs three steps per waypoint:

1. map the demonstrated posture goal onto the configurational joints;
2. if there is an orientation goal, search the wrist joints only until the
   hand-fixed palm/normal vectors enter their cones;
3. search the positional joints plus a budgeted window of the
   configurational joints until the grasp point reaches the position goal,
   keeping the configurational group near step 2's output (travel budget
   d_c) and the connection joints near step 1's start (budget d_p).

Baselines search all free joints against the position/orientation goals
directly.  Retargeting copies mapped values without any search.

Every returned result re-measures its own constraint flags from the final
configuration with the same public check functions tests use; nothing is
carried over from the optimizer's bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import RoleMotionError
from .kinematics import PRISMATIC, KinematicChain, clamp_to_limits
from .mapping import MappingTable, RoleDivision
from .posture import PostureGoal

_HINGE_WEIGHT = 10.0
_HINGE_MARGIN = 0.9  # hinges engage inside the budget so strict '<' holds
_PROJECT_FRACTION = 0.9
_STEP_WEIGHT = 0.05


@dataclass(frozen=True)
class PositionGoal:
    point: np.ndarray
    tol: float
    per_axis: bool = False


@dataclass(frozen=True)
class OrientationGoal:
    """Cone goals for the two hand-fixed vectors.

    Tolerances are on the residual 1 - goal . actual, so a 45 degree cone
    is tol = 1 - cos(45deg).
    """

    palm: np.ndarray
    normal: np.ndarray
    palm_tol: float
    normal_tol: float


@dataclass(frozen=True)
class HoldSpec:
    """Keep another arm's grasp point pinned while this arm works.

    Residual under `tol` is free; beyond it the fitness pays `weight`
    per meter.  A zero tol pins the grasp exactly.
    """

    arm: str
    point: np.ndarray
    weight: float = 2.0
    tol: float = 0.0


@dataclass(eq=False)
class ClearanceSpec:
    """Soft keep-away from environment boxes.

    Body probe points (sampled along the collision capsules) pay a hinge
    penalty when their box clearance drops under `margin`.  This steers
    the search; it is not the collision check, which stays exact and
    lives with the caller.
    """

    boxes: np.ndarray  # (b, 15) rows as produced by boxes_as_rows
    margin: float = 0.015
    weight: float = 5.0
    samples: int = 4


@dataclass(frozen=True)
class TaskGoals:
    """Everything one waypoint asks of the body besides the start posture.

    stance, when given, is a world point the task arm's first joint should
    hover near; it only seeds body placement and is never a constraint.
    """

    position: PositionGoal = None
    orientation: OrientationGoal = None
    hold: HoldSpec = None
    clearance: ClearanceSpec = None
    stance: np.ndarray = None


@dataclass
class GAParams:
    population: int = 64
    generations: int = 200
    elites: int = 2
    crossover_rate: float = 0.5
    mutation_sigma: float = 0.10
    sigma_decay: float = 0.99
    tournament: int = 3
    refine_every: int = 25
    refine_passes: int = 2
    workers: int = 1

    def scaled(self, population: int, generations: int) -> "GAParams":
        return replace(self, population=population, generations=generations)


@dataclass(frozen=True)
class SolveReport:
    q: np.ndarray
    method: str
    satisfied: dict
    residuals: dict
    fitness: float
    warnings: tuple = ()
    history: tuple = ()  # one monotone best-fitness trace per search stage


@dataclass(eq=False)
class _QuerySet:
    """Point/vector queries for eval_batch, with probe bookkeeping.

    Fixed points (end effector, held grasp) come first; clearance probe
    points occupy pts[:, n_fixed:] and carry capsule radii.
    """

    pt_frame: np.ndarray
    pt_off: np.ndarray
    vec_frame: np.ndarray
    vec_off: np.ndarray
    n_fixed: int
    probe_radii: np.ndarray


def _clearance_penalty(pts, qs: _QuerySet, spec: ClearanceSpec):
    """Hinged keep-away cost, summed over probe points and boxes."""
    probes = pts[:, qs.n_fixed:, :]
    rot = spec.boxes[:, :9].reshape(-1, 3, 3)
    center = spec.boxes[:, 9:12]
    half = spec.boxes[:, 12:15]
    rel = probes[:, :, None, :] - center[None, None, :, :]
    local = np.einsum('bwa,mpbw->mpba', rot, rel)
    outside = np.maximum(np.abs(local) - half[None, None], 0.0)
    d = np.sqrt(np.sum(outside * outside, axis=3))
    gap = d - qs.probe_radii[None, :, None]
    pen = np.maximum(spec.margin - gap, 0.0)
    return spec.weight * np.sum(pen, axis=(1, 2))


# -- checks -------------------------------------------------------------------
#
# These are the definitions of record for "satisfied".  solve_* functions
# call them on their final configuration; tests call them on reported
# configurations and must get identical answers.


def position_residual(chain, arm_name, q, goal: PositionGoal) -> float:
    ee = chain.ee_transform(chain.forward_kinematics(q), arm_name)
    delta = ee.pos - np.asarray(goal.point, dtype=np.float64)
    if goal.per_axis:
        return float(np.max(np.abs(delta)))
    return float(np.linalg.norm(delta))


def check_position(chain, arm_name, q, goal: PositionGoal):
    r = position_residual(chain, arm_name, q, goal)
    return r < goal.tol, r


def orientation_residuals(chain, arm_name, q, goal: OrientationGoal):
    arm = chain.arms[arm_name]
    fk = chain.forward_kinematics(q)
    t = fk.link_transform(arm.end_effector)
    rp = 1.0 - float(np.asarray(goal.palm) @ t.apply_vector(arm.palm_vector))
    rn = 1.0 - float(np.asarray(goal.normal) @ t.apply_vector(arm.normal_vector))
    return rp, rn


def check_orientation(chain, arm_name, q, goal: OrientationGoal):
    rp, rn = orientation_residuals(chain, arm_name, q, goal)
    return (rp < goal.palm_tol and rn < goal.normal_tol), (rp, rn)


def check_configuration(chain, roles: RoleDivision, q, q_oriented):
    """Eq-style travel budget of the configurational group vs. step 2."""
    idx = chain.indices(roles.configurational)
    resid = float(np.sum(np.abs(np.asarray(q)[idx] - np.asarray(q_oriented)[idx])))
    return resid < roles.config_budget, resid


def check_connection(chain, roles: RoleDivision, q, q_mapped):
    """Travel budget of the connection joints vs. step 1's start."""
    if not roles.connection:
        return True, 0.0
    idx = chain.indices(roles.connection)
    resid = float(np.sum(np.abs(np.asarray(q)[idx] - np.asarray(q_mapped)[idx])))
    return resid < roles.connection_budget, resid


# -- GA engine ----------------------------------------------------------------


class _GA:
    """Seeded genetic minimizer with periodic coordinate refinement.

    Breeding is serial in slot order with one RNG stream per slot, so the
    result is a pure function of the seed sequence no matter how fitness
    evaluation is parallelised.
    """

    def __init__(self, fitness_batch, lo, hi, params: GAParams, seed_seq):
        self.fitness_batch = fitness_batch
        self.lo = np.asarray(lo, dtype=np.float64)
        self.hi = np.asarray(hi, dtype=np.float64)
        self.p = params
        self.dim = len(self.lo)
        children = seed_seq.spawn(params.population + 1)
        self.rngs = [np.random.default_rng(c) for c in children[:-1]]
        self.init_rng = np.random.default_rng(children[-1])

    def run(self, exact_rows, sampler):
        p = self.p
        pop = np.empty((p.population, self.dim))
        k = min(len(exact_rows), p.population)
        for i in range(k):
            pop[i] = np.clip(exact_rows[i], self.lo, self.hi)
        for i in range(k, p.population):
            pop[i] = np.clip(sampler(self.init_rng), self.lo, self.hi)
        sigma = p.mutation_sigma * (self.hi - self.lo)
        fits = self.fitness_batch(pop)
        order = np.lexsort((np.arange(p.population), fits))
        best_x = pop[order[0]].copy()
        best_f = float(fits[order[0]])
        history = [best_f]
        for gen in range(p.generations):
            nxt = np.empty_like(pop)
            n_el = min(p.elites, p.population)
            nxt[:n_el] = pop[order[:n_el]]
            for slot in range(n_el, p.population):
                r = self.rngs[slot]
                pa = self._tournament(r, fits)
                pb = self._tournament(r, fits)
                mask = r.random(self.dim) < p.crossover_rate
                child = np.where(mask, pop[pb], pop[pa])
                child = child + r.normal(0.0, 1.0, self.dim) * sigma
                nxt[slot] = np.clip(child, self.lo, self.hi)
            sigma = sigma * p.sigma_decay
            pop = nxt
            fits = self.fitness_batch(pop)
            order = np.lexsort((np.arange(p.population), fits))
            if float(fits[order[0]]) < best_f:
                best_f = float(fits[order[0]])
                best_x = pop[order[0]].copy()
            if p.refine_every and (gen + 1) % p.refine_every == 0:
                best_x, best_f = self._refine(best_x, best_f, sigma,
                                              p.refine_passes)
                pop[order[0]] = best_x
                fits[order[0]] = best_f
                order = np.lexsort((np.arange(p.population), fits))
            history.append(best_f)
        best_x, best_f = self._refine(best_x, best_f, sigma,
                                      p.refine_passes + 2)
        history.append(best_f)
        return best_x, best_f, tuple(history)

    def _tournament(self, rng, fits):
        idx = rng.integers(0, len(fits), self.p.tournament)
        best = idx[0]
        for i in idx[1:]:
            if fits[i] < fits[best]:
                best = i
        return best

    def _refine(self, x, fx, step_vec, passes):
        x = x.copy()
        span = np.maximum(self.hi - self.lo, 1e-12)
        for p in range(passes):
            for g in range(self.dim):
                step = step_vec[g] * (0.5 ** p)
                floor = 1e-5 * span[g]
                while step >= floor:
                    moved = False
                    for delta in (step, -step):
                        while True:
                            cand = x.copy()
                            cand[g] = min(max(cand[g] + delta, self.lo[g]),
                                          self.hi[g])
                            if cand[g] == x[g]:
                                break
                            f = float(self.fitness_batch(cand[None, :])[0])
                            if f < fx:
                                x, fx = cand, f
                                moved = True
                            else:
                                break
                        if moved:
                            break
                    if not moved:
                        step *= 0.25
        return x, fx


# -- solver -------------------------------------------------------------------


class Solver:
    def __init__(self, chain: KinematicChain, roles: RoleDivision,
                 table: MappingTable, ga: GAParams = None):
        self.chain = chain
        self.roles = roles
        self.table = table
        self.ga = ga or GAParams()
        self.arm = chain.arms[roles.arm]
        self._conf_idx = chain.indices(roles.configurational)
        self._pos_idx = chain.indices(roles.positional)
        self._wrist_idx = chain.indices(roles.orientational)
        self._conn_idx = chain.indices(roles.connection)
        self._ee_frame = chain.frame_index(self.arm.end_effector)

    # query plumbing shared by all fitness functions

    def _queries(self, goals: TaskGoals) -> "_QuerySet":
        pt_frames = [self._ee_frame]
        pt_offs = [self.arm.palm_offset]
        if goals.hold is not None:
            other = self.chain.arms[goals.hold.arm]
            pt_frames.append(self.chain.frame_index(other.end_effector))
            pt_offs.append(other.palm_offset)
        n_fixed = len(pt_frames)
        radii = np.zeros(0)
        if goals.clearance is not None:
            pf, po, radii = self.chain.collision_probes(goals.clearance.samples)
            pt_frames = pt_frames + list(pf)
            pt_offs = pt_offs + list(po)
        vec_frames = []
        vec_offs = []
        if goals.orientation is not None:
            vec_frames = [self._ee_frame, self._ee_frame]
            vec_offs = [self.arm.palm_vector, self.arm.normal_vector]
        return _QuerySet(
            pt_frame=np.array(pt_frames, dtype=np.int32),
            pt_off=np.array(pt_offs, dtype=np.float64).reshape(len(pt_frames), 3),
            vec_frame=np.array(vec_frames, dtype=np.int32),
            vec_off=np.array(vec_offs, dtype=np.float64).reshape(len(vec_frames), 3),
            n_fixed=n_fixed,
            probe_radii=radii,
        )

    def _expand(self, base, genome_idx, genomes):
        full = np.tile(base, (genomes.shape[0], 1))
        full[:, genome_idx] = genomes
        return full

    def map_start(self, q_prev, goal: PostureGoal) -> np.ndarray:
        """Step 1: previous configuration with the arm set to the goal."""
        if goal.start.side != self.arm.side:
            raise RoleMotionError(
                f"arm {self.arm.name} mimics the {self.arm.side} side but the "
                f"goal posture is {goal.start.side}-sided")
        q0 = self.chain.check_shape(q_prev).copy()
        q0[self._conf_idx] = self.table.map_goal(goal)
        return clamp_to_limits(self.chain, q0)

    def orient(self, q0, goals: TaskGoals, seed_seq):
        """Step 2: wrist-only search; q0 is returned untouched if already in
        the cones.  Only orientational joints may differ from q0."""
        if goals.orientation is None:
            return q0.copy(), (), ()
        ok, _ = check_orientation(self.chain, self.roles.arm, q0,
                                  goals.orientation)
        if ok:
            return q0.copy(), (), ()
        og = goals.orientation
        qs = self._queries(TaskGoals(orientation=og))
        lo = self.chain.limits_lo[self._wrist_idx]
        hi = self.chain.limits_hi[self._wrist_idx]

        def fitness(genomes):
            full = self._expand(q0, self._wrist_idx, genomes)
            _, vecs = kernels.eval_batch(self.chain.arrays, full, qs.pt_frame,
                                         qs.pt_off, qs.vec_frame, qs.vec_off,
                                         workers=self.ga.workers)
            rp = 1.0 - vecs[:, 0] @ np.asarray(og.palm, dtype=np.float64)
            rn = 1.0 - vecs[:, 1] @ np.asarray(og.normal, dtype=np.float64)
            return rp + rn

        ga = _GA(fitness, lo, hi, self.ga.scaled(32, 60), seed_seq)
        span = hi - lo
        best, _, hist = ga.run(
            [q0[self._wrist_idx]],
            lambda rng: lo + rng.random(len(lo)) * span)
        q1 = q0.copy()
        q1[self._wrist_idx] = best
        warn = ()
        if not check_orientation(self.chain, self.roles.arm, q1, og)[0]:
            warn = ("orientation goal unreachable for this posture",)
        return q1, warn, hist

    def _holder_ids(self, goals: TaskGoals):
        """Joints of the arm keeping a hold, when that arm is not ours.

        Those joints are normally locked during step 3; a hold unfreezes
        them so the body can relocate without tearing the grasp off.
        """
        if goals.hold is None or goals.hold.arm == self.roles.arm:
            return ()
        taken = set(self.roles.configurational) | set(self.roles.positional)
        return tuple(j for j in self.chain.arms[goals.hold.arm].joints
                     if j not in taken)

    def place(self, q_prev, q0, q1, goals: TaskGoals, seed_seq):
        """Step 3: positional joints plus budgeted configurational window."""
        holder_ids = self._holder_ids(goals)
        holder_idx = self.chain.indices(holder_ids)
        genome_idx = np.concatenate([self._conf_idx, self._pos_idx, holder_idx])
        nc = len(self._conf_idx)
        lo = self.chain.limits_lo[genome_idx].copy()
        hi = self.chain.limits_hi[genome_idx].copy()
        # Configurational genes live in a +-d_c window around step 2.
        lo[:nc] = np.maximum(lo[:nc], q1[self._conf_idx] - self.roles.config_budget)
        hi[:nc] = np.minimum(hi[:nc], q1[self._conf_idx] + self.roles.config_budget)
        # Connection genes likewise around step 1's start.
        conn_in_pos = [i for i, j in enumerate(self.roles.positional)
                       if j in self.roles.connection]
        for i in conn_in_pos:
            g = nc + i
            j = self._pos_idx[i]
            lo[g] = max(lo[g], q0[j] - self.roles.connection_budget)
            hi[g] = min(hi[g], q0[j] + self.roles.connection_budget)
        bad = lo > hi
        lo[bad] = hi[bad] = (lo[bad] + hi[bad]) * 0.5

        prev_free = q_prev[genome_idx[nc:]]
        fitness = self._place_fitness(q1, q0, goals, genome_idx, nc, prev_free)
        ga = _GA(fitness, lo, hi, self.ga, seed_seq)
        row0 = np.concatenate([q1[self._conf_idx], prev_free])
        rows = [row0]
        bimanual = goals.hold is not None and len(holder_idx)
        if goals.position is not None and not bimanual:
            shift = self._base_shift_row(row0, q1, genome_idx, nc,
                                         goals.position, lo, hi)
            rows.append(shift)
            rows.append(np.clip(row0 + 0.5 * (shift - row0), lo, hi))
            if goals.stance is not None:
                rows.append(self._stance_row(row0, q1, genome_idx, nc,
                                             goals.stance, lo, hi))
        elif goals.position is not None:
            # A held point plus a task target squeeze the stance into a
            # narrow strip; a single constructed seed lands on a penalty
            # wall too often.  Fan out candidate stances, re-fold the
            # holding arm on each, keep the best few by true fitness, and
            # walk those downhill before the population sees them.
            shift = self._base_shift_row(row0, q1, genome_idx, nc,
                                         goals.position, lo, hi)
            cands = [np.clip(row0 + f * (shift - row0), lo, hi)
                     for f in (0.25, 0.5, 0.75, 1.0)]
            cands.append(self._two_point_row(row0, q1, genome_idx, nc,
                                             goals.position, goals.hold,
                                             lo, hi))
            if goals.stance is not None:
                st = self._stance_row(row0, q1, genome_idx, nc,
                                      goals.stance, lo, hi)
                cands.append(st)
                iyaw = self._yaw_gene(nc)
                if iyaw is not None:
                    # The demonstrated stance often works only with a
                    # small turn of the body; pin the yaw at both window
                    # edges and let the repair and polish pick sides.
                    for edge in (lo[iyaw], hi[iyaw]):
                        turned = st.copy()
                        turned[iyaw] = edge
                        cands.append(turned)
            cands = [self._restore_hold(c, fitness, len(holder_idx), lo, hi)
                     for c in cands]
            cand_fits = fitness(np.vstack(cands))
            step0 = self.ga.mutation_sigma * (hi - lo)
            # Walk every candidate downhill before ranking: a stance that
            # needs a small torso turn to work scores badly raw and would
            # be cut before anything could turn the torso.
            polished = [ga._refine(c, float(f), step0, 1)
                        for c, f in zip(cands, cand_fits)]
            # Rank by total task-space error, not fitness.  A broken hold
            # is repairable (the holding arm and the base are both free);
            # an out-of-reach target is not.  Fitness weights would keep
            # hold-preserving retreats that can never reach the target.
            errs = [self._task_errors(r, q1, genome_idx, goals)
                    for r, _ in polished]
            order = np.argsort(errs, kind="stable")
            for i in order[:3]:
                rows.append(polished[i][0])
        span = hi - lo
        npos = len(self._pos_idx)
        free_sigma = np.full(len(prev_free), 0.25)
        free_sigma[npos:] = 0.1  # holding arm stays calm

        def sampler(rng):
            g = lo + rng.random(len(lo)) * span
            # Most rows stay near the previous body placement.
            if rng.random() < 0.7:
                g[nc:] = np.clip(prev_free + rng.normal(0.0, 1.0,
                                                        len(prev_free))
                                 * free_sigma, lo[nc:], hi[nc:])
            return g

        best, fit, hist = ga.run(rows, sampler)
        q = q1.copy()
        q[genome_idx] = best
        q, warn = self._project_budgets(q, q0, q1, goals, lo, hi, genome_idx,
                                        nc, prev_free)
        return q, fit, warn, hist

    def _base_shift_row(self, row0, q1, genome_idx, nc, pg: PositionGoal,
                        lo, hi):
        """Seed row that moves virtual translation joints onto the target.

        On a mobile base, translating the base shifts the end effector
        one-for-one, so a row with the position error rolled into those
        genes lands near-feasible even when the previous stance is far
        away.
        """
        full = q1.copy()
        full[genome_idx] = row0
        fk = self.chain.forward_kinematics(full)
        ee = self.chain.ee_transform(fk, self.roles.arm)
        delta = np.asarray(pg.point, dtype=np.float64) - ee.pos
        return np.clip(self._roll_translation(row0, fk, delta, nc), lo, hi)

    def _two_point_row(self, row0, q1, genome_idx, nc, pg: PositionGoal,
                       hold: HoldSpec, lo, hi):
        """Stance seed for bimanual work: shoulders centered between goals.

        With one arm pinned on a held point and the other chasing the
        task target, a stance that serves only one of them strands the
        other out of reach.  Putting the shoulder midpoint over the goal
        midpoint gives both arms comparable slack.
        """
        full = q1.copy()
        full[genome_idx] = row0
        fk = self.chain.forward_kinematics(full)
        roots = (self.chain.arms[self.roles.arm].joints[0],
                 self.chain.arms[hold.arm].joints[0])
        sh_mid = 0.5 * (fk.joint_transform(roots[0]).pos
                        + fk.joint_transform(roots[1]).pos)
        goal_mid = 0.5 * (np.asarray(pg.point, dtype=np.float64)
                          + np.asarray(hold.point, dtype=np.float64))
        return np.clip(self._roll_translation(row0, fk, goal_mid - sh_mid, nc),
                       lo, hi)

    def _stance_row(self, row0, q1, genome_idx, nc, stance, lo, hi):
        """Seed row that parks the task arm's shoulder over a given point."""
        full = q1.copy()
        full[genome_idx] = row0
        fk = self.chain.forward_kinematics(full)
        root = self.chain.arms[self.roles.arm].joints[0]
        delta = np.asarray(stance, dtype=np.float64) - \
            fk.joint_transform(root).pos
        return np.clip(self._roll_translation(row0, fk, delta, nc), lo, hi)

    def _roll_translation(self, row, fk, delta, nc):
        """Push a world-space offset into virtual translation genes."""
        row = row.copy()
        virtual = set(self.chain.virtual_ids)
        for i, j in enumerate(self.roles.positional):
            joint = self.chain.joint(j)
            if j not in virtual or joint.kind != PRISMATIC:
                continue
            axis = fk.joint_transform(j).rot @ joint.axis
            row[nc + i] += float(axis @ delta)
        return row

    def _yaw_gene(self, nc):
        """Genome index of the virtual base rotation, if the robot has one."""
        virtual = set(self.chain.virtual_ids)
        for i, j in enumerate(self.roles.positional):
            if j in virtual and self.chain.joint(j).kind != PRISMATIC:
                return nc + i
        return None

    def _task_errors(self, row, q1, genome_idx, goals: TaskGoals):
        """Reach error plus hold error for a genome row, in plain meters."""
        q = q1.copy()
        q[genome_idx] = row
        fk = self.chain.forward_kinematics(q)
        err = 0.0
        if goals.position is not None:
            ee = self.chain.ee_transform(fk, self.roles.arm)
            err += float(np.linalg.norm(
                ee.pos - np.asarray(goals.position.point)))
        if goals.hold is not None:
            ee = self.chain.ee_transform(fk, goals.hold.arm)
            d = float(np.linalg.norm(ee.pos - np.asarray(goals.hold.point)))
            err += max(0.0, d - goals.hold.tol)
        return err

    def _restore_hold(self, row, fitness, nh, lo, hi):
        """Re-fold the holding arm after the base genes have been moved.

        Deterministic coordinate descent over the holder genes against the
        full fitness, so the repaired arm keeps the held point without
        buying it back through a clearance wall.
        """
        row = row.copy()
        best = float(fitness(row[None, :])[0])
        first = len(row) - nh
        step = 0.3
        while step > 1e-3:
            improved = False
            for g in range(first, len(row)):
                for s in (step, -step):
                    cand = row.copy()
                    cand[g] = min(max(cand[g] + s, lo[g]), hi[g])
                    if cand[g] == row[g]:
                        continue
                    d = float(fitness(cand[None, :])[0])
                    if d < best - 1e-12:
                        row, best = cand, d
                        improved = True
            if not improved:
                step *= 0.5
        return row

    def _place_fitness(self, q1, q0, goals: TaskGoals, genome_idx=None,
                       nc=None, prev_free=None):
        qs = self._queries(goals)
        if genome_idx is None:
            genome_idx = np.concatenate([self._conf_idx, self._pos_idx])
            nc = len(self._conf_idx)
        base = q1.copy()
        conf_ref = q1[self._conf_idx]
        conn_ref = q0[self._conn_idx]
        conn_gene = np.array([nc + i for i, j in enumerate(self.roles.positional)
                              if j in self.roles.connection], dtype=np.intp)
        og = goals.orientation
        pg = goals.position
        hold = goals.hold
        clear = goals.clearance

        def fitness(genomes):
            full = self._expand(base, genome_idx, genomes)
            pts, vecs = kernels.eval_batch(self.chain.arrays, full,
                                           qs.pt_frame, qs.pt_off,
                                           qs.vec_frame, qs.vec_off,
                                           workers=self.ga.workers)
            total = np.zeros(genomes.shape[0])
            if pg is not None:
                # The optimizer always works on the euclidean error even
                # when the goal is checked per axis: the max norm has flat
                # corners where coordinate moves stall.
                delta = pts[:, 0] - np.asarray(pg.point, dtype=np.float64)
                total += np.sqrt(np.sum(delta * delta, axis=1))
            if og is not None:
                # Orientation only needs to stay inside the cone; a deadzone
                # at half tolerance keeps the wrist from burning mimicry
                # budget on polish the check never asks for.
                total += np.maximum(
                    0.0, (1.0 - vecs[:, 0] @ np.asarray(og.palm))
                    - 0.5 * og.palm_tol)
                total += np.maximum(
                    0.0, (1.0 - vecs[:, 1] @ np.asarray(og.normal))
                    - 0.5 * og.normal_tol)
            ec = np.sum(np.abs(genomes[:, :nc] - conf_ref), axis=1)
            total += _HINGE_WEIGHT * np.maximum(
                0.0, ec - _HINGE_MARGIN * self.roles.config_budget)
            if len(conn_gene):
                el = np.sum(np.abs(genomes[:, conn_gene] - conn_ref), axis=1)
                total += _HINGE_WEIGHT * np.maximum(
                    0.0, el - _HINGE_MARGIN * self.roles.connection_budget)
            if hold is not None:
                hd = pts[:, 1] - np.asarray(hold.point, dtype=np.float64)
                slack = np.sqrt(np.sum(hd * hd, axis=1)) - hold.tol
                total += hold.weight * np.maximum(0.0, slack)
            if clear is not None and len(qs.probe_radii):
                total += _clearance_penalty(pts, qs, clear)
            if prev_free is not None:
                # Mild drag toward the previous body placement so chained
                # waypoints move the base smoothly instead of re-deciding
                # where to stand each time.
                total += _STEP_WEIGHT * np.sum(
                    np.abs(genomes[:, nc:] - prev_free), axis=1)
            return total

        return fitness

    def _project_budgets(self, q, q0, q1, goals, lo, hi, genome_idx,
                         nc=None, prev_free=None):
        """Force strict budget satisfaction, then re-tune free position genes.

        The optimizer's hinges keep residuals inside the budgets in
        practice; this projection is the guarantee.  Configurational
        deltas shrink toward step 2, connection deltas toward step 1, and
        the remaining positional genes get a short refinement pass so the
        position goal does not drift.
        """
        warns = []
        ok_c, _ = check_configuration(self.chain, self.roles, q, q1)
        if not ok_c:
            delta = q[self._conf_idx] - q1[self._conf_idx]
            scale = _PROJECT_FRACTION * self.roles.config_budget / \
                float(np.sum(np.abs(delta)))
            q = q.copy()
            q[self._conf_idx] = q1[self._conf_idx] + delta * scale
            warns.append("configurational travel clipped to budget")
        ok_l, _ = check_connection(self.chain, self.roles, q, q0)
        if not ok_l:
            idx = self._conn_idx
            delta = q[idx] - q0[idx]
            scale = _PROJECT_FRACTION * self.roles.connection_budget / \
                float(np.sum(np.abs(delta)))
            q = q.copy()
            q[idx] = q0[idx] + delta * scale
            warns.append("connection travel clipped to budget")
        if warns:
            if nc is None:
                nc = len(self._conf_idx)
            free = [nc + i for i, j in enumerate(self.roles.positional)
                    if j not in self.roles.connection]
            free += list(range(nc + len(self._pos_idx), len(genome_idx)))
            if free:
                fitness = self._place_fitness(q1, q0, goals, genome_idx, nc,
                                              prev_free)
                genome = q[genome_idx].copy()
                fx = float(fitness(genome[None, :])[0])
                for _ in range(3):
                    for g in free:
                        for step in (0.08, 0.02, 0.005):
                            improved = True
                            while improved:
                                improved = False
                                for sgn in (1.0, -1.0):
                                    cand = genome.copy()
                                    cand[g] = min(max(cand[g] + sgn * step,
                                                      lo[g]), hi[g])
                                    f = float(fitness(cand[None, :])[0])
                                    if f < fx:
                                        genome, fx = cand, f
                                        improved = True
                q = q.copy()
                q[genome_idx] = genome
        return q, tuple(warns)

    # -- public solves ----------------------------------------------------

    def solve(self, q_prev, posture_goal: PostureGoal, goals: TaskGoals,
              seed) -> SolveReport:
        """Three-step solve of one waypoint (the proposed method)."""
        seed_seq = np.random.SeedSequence(seed)
        s_orient, s_place = seed_seq.spawn(2)
        warnings = []
        entry = self.table.entry(posture_goal.start)
        if entry.limit_constrained:
            warnings.append("start posture is limit-constrained in the table")
        q0 = self.map_start(q_prev, posture_goal)
        q1, warn2, hist2 = self.orient(q0, goals, s_orient)
        warnings.extend(warn2)
        if goals.position is None:
            q = q1
            fit = 0.0
            hist3 = ()
        else:
            q, fit, warn3, hist3 = self.place(q_prev, q0, q1, goals, s_place)
            warnings.extend(warn3)
        history = tuple(h for h in (hist2, hist3) if h)
        return self._report(q, "proposed", goals, q0=q0, q1=q1, fitness=fit,
                            warnings=tuple(warnings), history=history)

    def solve_baseline(self, q_prev, goals: TaskGoals, seed,
                       seed_config=None, deviation_weight: float = 0.0,
                       tag: str = "baseline") -> SolveReport:
        """Whole-body goal search from a seed configuration.

        seed_config defaults to q_prev.  deviation_weight > 0 adds a pull
        toward the seed on non-virtual genes (stay-close behavior).
        """
        seed_seq = np.random.SeedSequence(seed)
        base = self.chain.check_shape(
            seed_config if seed_config is not None else q_prev).copy()
        base = clamp_to_limits(self.chain, base)
        holder_ids = self._holder_ids(goals)
        genome_idx = np.concatenate([self._conf_idx, self._pos_idx,
                                     self.chain.indices(holder_ids)])
        lo = self.chain.limits_lo[genome_idx]
        hi = self.chain.limits_hi[genome_idx]
        qs = self._queries(goals)
        og, pg, hold = goals.orientation, goals.position, goals.hold
        clear = goals.clearance
        seed_genome = base[genome_idx].copy()
        virtual = set(self.chain.virtual_ids)
        gene_ids = (self.roles.configurational + self.roles.positional
                    + holder_ids)
        dev_mask = np.array([0.0 if gene_ids[i] in virtual else 1.0
                             for i in range(len(genome_idx))])

        def fitness(genomes):
            full = self._expand(base, genome_idx, genomes)
            pts, vecs = kernels.eval_batch(self.chain.arrays, full,
                                           qs.pt_frame, qs.pt_off,
                                           qs.vec_frame, qs.vec_off,
                                           workers=self.ga.workers)
            total = np.zeros(genomes.shape[0])
            if pg is not None:
                delta = pts[:, 0] - np.asarray(pg.point)
                total += np.sqrt(np.sum(delta * delta, axis=1))
            if og is not None:
                total += np.maximum(
                    0.0, (1.0 - vecs[:, 0] @ np.asarray(og.palm))
                    - 0.5 * og.palm_tol)
                total += np.maximum(
                    0.0, (1.0 - vecs[:, 1] @ np.asarray(og.normal))
                    - 0.5 * og.normal_tol)
            if hold is not None:
                hd = pts[:, 1] - np.asarray(hold.point)
                slack = np.sqrt(np.sum(hd * hd, axis=1)) - hold.tol
                total += hold.weight * np.maximum(0.0, slack)
            if clear is not None and len(qs.probe_radii):
                total += _clearance_penalty(pts, qs, clear)
            if deviation_weight > 0.0:
                total += deviation_weight * np.sum(
                    np.abs(genomes - seed_genome) * dev_mask, axis=1)
            return total

        ga = _GA(fitness, lo, hi, self.ga, seed_seq)
        span = hi - lo
        prev_genome = self.chain.check_shape(q_prev)[genome_idx]

        def sampler(rng):
            g = lo + rng.random(len(lo)) * span
            if rng.random() < 0.5:
                g = np.clip(seed_genome + rng.normal(0.0, 0.4, len(g)), lo, hi)
            return g

        best, fit, hist = ga.run([seed_genome, np.clip(prev_genome, lo, hi)],
                                 sampler)
        q = base.copy()
        q[genome_idx] = best
        return self._report(q, tag, goals, fitness=fit, history=(hist,))

    def solve_retarget(self, q_prev, posture_goal: PostureGoal,
                       goals: TaskGoals) -> SolveReport:
        """Copy mapped values onto the arm; no search at all."""
        q = self.map_start(q_prev, posture_goal)
        return self._report(q, "retarget", goals, q0=q, q1=q, fitness=0.0)

    def _report(self, q, method, goals: TaskGoals, q0=None, q1=None,
                fitness=0.0, warnings=(), history=()):
        satisfied = {}
        residuals = {}
        if goals.position is not None:
            ok, r = check_position(self.chain, self.roles.arm, q, goals.position)
            satisfied["position"] = ok
            residuals["position"] = r
        if goals.orientation is not None:
            ok, (rp, rn) = check_orientation(self.chain, self.roles.arm, q,
                                             goals.orientation)
            satisfied["orientation"] = ok
            residuals["palm"] = rp
            residuals["normal"] = rn
        if q1 is not None:
            ok, r = check_configuration(self.chain, self.roles, q, q1)
            satisfied["configuration"] = ok
            residuals["configuration"] = r
        if q0 is not None:
            ok, r = check_connection(self.chain, self.roles, q, q0)
            satisfied["connection"] = ok
            residuals["connection"] = r
        if goals.hold is not None:
            ee = self.chain.ee_transform(self.chain.forward_kinematics(q),
                                         goals.hold.arm)
            residuals["hold"] = float(np.linalg.norm(
                ee.pos - np.asarray(goals.hold.point)))
        return SolveReport(q=q, method=method, satisfied=satisfied,
                           residuals=residuals, fitness=float(fitness),
                           warnings=tuple(warnings), history=tuple(history))
