"""Greedy subgoal planning over the six standard probe movements.

Two planners live here:

* ``plan_subgoals`` searches pose space one movement at a time: it samples
  candidate views along every movement axis, scores them against the target
  view, and greedily adopts the best candidate until the combined similarity
  clears the convergence threshold. Search ranges, sample counts, and score
  weights switch from a coarse phase (composition only, wide ranges) to a
  fine phase (composition + IoU, tight ranges) once every target structure is
  visible. Candidates landing close to a known "familiar" view (e.g. a PSAX
  plane) may be adopted as waypoints.

* ``plan_naive`` is the 6-DoF baseline: a fixed Fan/Rock/Rotate/Slide/Sweep/
  Press decomposition of the start-to-end transform, one axis per step.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    MovementType,
    ProbePose,
    apply_movement,
    quat_about_axis,
    quat_multiply,
    quat_normalize,
    relative_movement_components,
)
from .similarity import COARSE_WEIGHTS, FULL_WEIGHTS, SimilarityWeights, similarity
from .slicer import DEFAULT_GEOMETRY, SegMap, SliceGeometry, slice_volume
from .volume import LabeledVolume

DEFAULT_EPS_AREA = 20  # pixels; "present" threshold for a structure in a view


class PlannerError(Exception):
    pass


class EmptyTargetError(PlannerError):
    """Target view contains no clinical structure."""


class NonConvergenceError(PlannerError):
    """Planner stopped before reaching the similarity threshold."""

    def __init__(self, message: str, plan: "SubgoalPlan"):
        super().__init__(message)
        self.plan = plan


@dataclass(frozen=True)
class PhaseConfig:
    pos_range: float          # translations sampled over [-pos_range, pos_range]
    rot_range: float          # rotations sampled over [-rot_range, rot_range], radians
    samples_per_direction: int
    weights: SimilarityWeights

    def __post_init__(self):
        if self.samples_per_direction < 2 or self.samples_per_direction % 2:
            raise ValueError("samples_per_direction must be an even number >= 2")
        if self.pos_range <= 0 or self.rot_range <= 0:
            raise ValueError("sample ranges must be positive")

    def amounts(self, m: MovementType) -> np.ndarray:
        """Symmetric nonzero amounts, uniformly spaced over the range."""
        limit = self.rot_range if m.is_rotation else self.pos_range
        half = self.samples_per_direction // 2
        mags = limit * np.arange(1, half + 1) / half
        return np.concatenate([-mags[::-1], mags])


COARSE_PHASE = PhaseConfig(
    pos_range=1.0, rot_range=math.radians(90.0), samples_per_direction=10, weights=COARSE_WEIGHTS
)
FINE_PHASE = PhaseConfig(
    pos_range=0.2, rot_range=math.radians(30.0), samples_per_direction=20, weights=FULL_WEIGHTS
)


@dataclass(frozen=True)
class PlannerConfig:
    eps_a: float = 10.0              # convergence threshold on the full-weight score
    coarse: PhaseConfig = COARSE_PHASE
    fine: PhaseConfig = FINE_PHASE
    full_weights: SimilarityWeights = FULL_WEIGHTS
    eps_f: float = 9.0               # familiar-view match threshold
    eps_area: int = DEFAULT_EPS_AREA
    max_steps: int = 20
    stall_expand_factor: float = 2.0
    familiar_rule: str = "prose"     # "prose" or "literal"; see plan_subgoals
    parallel: bool = False

    def __post_init__(self):
        if self.eps_a >= self.full_weights.max_total:
            raise ValueError("eps_a must be below the maximum attainable similarity")
        if self.familiar_rule not in ("prose", "literal"):
            raise ValueError("familiar_rule must be 'prose' or 'literal'")


@dataclass(frozen=True)
class FamiliarView:
    """A well-known waypoint view (name, pose, and its slice of the volume)."""

    name: str
    pose: ProbePose
    segmap: SegMap


@dataclass(frozen=True)
class PlanStep:
    pose: ProbePose
    movement: MovementType
    amount: float
    segmap: SegMap | None
    similarity_to_target: float | None  # under the phase weights that picked this step
    full_similarity: float | None = None  # under the full (fine) weights
    phase: str | None = None            # "coarse" or "fine" for optimized plans
    via_familiar: str | None = None


@dataclass(frozen=True)
class SubgoalPlan:
    """Ordered single-movement steps from a start pose toward a target pose."""

    kind: str                         # "optimized" or "naive"
    start_pose: ProbePose
    target_pose: ProbePose
    steps: tuple[PlanStep, ...]
    converged: bool
    start_similarity: float | None = None   # full-weight similarity of the start view
    final_similarity: float | None = None   # full-weight similarity of the last pose
    gimbal_warning: bool = False

    def __len__(self) -> int:
        return len(self.steps)

    def similarity_curve(self) -> list[float]:
        """Per-step recorded similarities (non-decreasing for optimized plans)."""
        return [s.similarity_to_target for s in self.steps if s.similarity_to_target is not None]


def all_target_structures_present(current: SegMap, target: SegMap, eps_area: int = DEFAULT_EPS_AREA) -> bool:
    """True iff every category visible in the target is visible in the current view.

    Visibility means at least ``eps_area`` pixels (inclusive), checked over all
    non-background categories.
    """
    t = target.areas[1:] >= eps_area
    c = current.areas[1:] >= eps_area
    return bool(np.all(c[t]))


@dataclass(frozen=True)
class Candidate:
    movement: MovementType
    amount: float
    pose: ProbePose
    segmap: SegMap


def sample_views(
    vol: LabeledVolume,
    pose: ProbePose,
    phase: PhaseConfig,
    geom: SliceGeometry = DEFAULT_GEOMETRY,
    parallel: bool = False,
) -> list[Candidate]:
    """Slice one candidate view per movement/amount pair around the pose.

    Yields 6 * samples_per_direction candidates in deterministic order
    (movement enum order, amounts ascending); the slicer is pure so candidate
    slicing may fan out to worker threads and be merged back by index.
    """
    moves: list[tuple[MovementType, float, ProbePose]] = []
    for m in MovementType:
        for amount in phase.amounts(m):
            moves.append((m, float(amount), apply_movement(pose, m, float(amount))))
    if parallel:
        with ThreadPoolExecutor(max_workers=4) as pool:
            maps = list(pool.map(lambda p: slice_volume(vol, p, geom), [p for _, _, p in moves]))
    else:
        maps = [slice_volume(vol, p, geom) for _, _, p in moves]
    return [Candidate(m, a, p, sm) for (m, a, p), sm in zip(moves, maps)]


def _candidate_order_key(c: Candidate) -> tuple:
    # deterministic tie-break: smallest magnitude, then movement order, then
    # negative before positive
    return (abs(c.amount), int(c.movement), c.amount)


def plan_subgoals(
    vol: LabeledVolume,
    start: ProbePose,
    target: ProbePose,
    familiar: list[FamiliarView] | None = None,
    cfg: PlannerConfig = PlannerConfig(),
    geom: SliceGeometry = DEFAULT_GEOMETRY,
    strict: bool = False,
) -> SubgoalPlan:
    """Greedy subgoal search from start toward the target view.

    Each iteration picks the sampled candidate with the highest phase-weighted
    similarity to the target (ties: smallest amount, then movement order). A
    candidate whose view matches a familiar view at eps_f or better is adopted
    instead when the current view is further from the target than that
    candidate is from the familiar view ("prose" rule) or than the familiar
    view is from the current one ("literal" rule).

    Stops converged once the full-weight similarity reaches eps_a; stops
    unconverged on max_steps or when no candidate improves on the current view
    even after one range re-expansion. With ``strict`` a non-converged search
    raises NonConvergenceError carrying the partial plan.
    """
    familiar = familiar or []
    target_map = slice_volume(vol, target, geom)
    if int(target_map.areas[1:9].sum()) == 0:
        raise EmptyTargetError("target view contains no clinical structure")

    full = cfg.full_weights
    cur_pose, cur_map = start, slice_volume(vol, start, geom)
    start_sim = similarity(cur_map, target_map, full).total
    cur_full = start_sim
    steps: list[PlanStep] = []
    converged = cur_full >= cfg.eps_a

    while not converged and len(steps) < cfg.max_steps:
        fine_phase = all_target_structures_present(cur_map, target_map, cfg.eps_area)
        phase = cfg.fine if fine_phase else cfg.coarse
        cur_phase_score = similarity(cur_map, target_map, phase.weights).total

        chosen: Candidate | None = None
        chosen_score = cur_phase_score
        via: str | None = None
        expanded = False
        while True:
            cands = sample_views(vol, cur_pose, phase, geom, parallel=cfg.parallel)
            phase_scores = [similarity(c.segmap, target_map, phase.weights).total for c in cands]

            # familiar-view switch: a candidate that lands on a familiar view is
            # adopted as a waypoint. Only worth scanning while still far from
            # the target, and a lateral move (no phase-score regression) at most.
            best_fam: tuple[tuple, Candidate, str, float] | None = None
            for f in familiar:
                fam_cur = similarity(cur_map, f.segmap, full).total
                if fam_cur >= cfg.eps_f:
                    continue  # already at this familiar view
                if cfg.familiar_rule == "literal" and cur_full >= fam_cur:
                    continue
                if cfg.familiar_rule == "prose" and cur_full >= full.max_total:
                    continue
                for c, ps in zip(cands, phase_scores):
                    if ps < cur_phase_score - 1e-9:
                        continue
                    if fine_phase and not all_target_structures_present(c.segmap, target_map, cfg.eps_area):
                        continue
                    cand_fam = similarity(c.segmap, f.segmap, full).total
                    if cand_fam < cfg.eps_f:
                        continue
                    if cfg.familiar_rule == "prose" and cur_full >= cand_fam:
                        continue
                    key = (-cand_fam, _candidate_order_key(c))
                    if best_fam is None or key < best_fam[0]:
                        best_fam = (key, c, f.name, ps)
            if best_fam is not None:
                _, chosen, via, chosen_score = best_fam
                break

            best: Candidate | None = None
            best_key: tuple | None = None
            for c, ps in zip(cands, phase_scores):
                if fine_phase and not all_target_structures_present(c.segmap, target_map, cfg.eps_area):
                    continue  # fine phase must not lose an achieved structure
                key = (-ps, _candidate_order_key(c))
                if best_key is None or key < best_key:
                    best, best_key = c, key
            if best is not None and -best_key[0] > cur_phase_score + 1e-9:
                chosen, chosen_score = best, -best_key[0]
                break
            if expanded:
                break  # stalled even after re-expansion
            phase = replace(
                phase,
                pos_range=phase.pos_range * cfg.stall_expand_factor,
                rot_range=min(math.pi, phase.rot_range * cfg.stall_expand_factor),
            )
            expanded = True

        if chosen is None:
            break
        chosen_full = (
            chosen_score if fine_phase else similarity(chosen.segmap, target_map, full).total
        )
        steps.append(
            PlanStep(
                pose=chosen.pose,
                movement=chosen.movement,
                amount=chosen.amount,
                segmap=chosen.segmap,
                similarity_to_target=chosen_score,
                full_similarity=chosen_full,
                phase="fine" if fine_phase else "coarse",
                via_familiar=via,
            )
        )
        cur_pose, cur_map, cur_full = chosen.pose, chosen.segmap, chosen_full
        converged = cur_full >= cfg.eps_a

    plan = SubgoalPlan(
        kind="optimized",
        start_pose=start,
        target_pose=target,
        steps=tuple(steps),
        converged=converged,
        start_similarity=start_sim,
        final_similarity=cur_full,
    )
    if strict and not converged:
        raise NonConvergenceError(
            f"no convergence after {len(steps)} steps (similarity {cur_full:.3f} < {cfg.eps_a})", plan
        )
    return plan


NAIVE_ORDER = (
    MovementType.FAN,
    MovementType.ROCK,
    MovementType.ROTATE,
    MovementType.SLIDE,
    MovementType.SWEEP,
    MovementType.PRESS,
)


def plan_naive(start: ProbePose, end: ProbePose) -> SubgoalPlan:
    """Fixed six-step decomposition of the start-to-end rigid transform.

    Rotation amounts come from the intrinsic X-Y-Z decomposition of the
    relative orientation; translation amounts are the position delta expressed
    in the end frame's local axes. Steps are applied in the fixed order
    Fan, Rock, Rotate, Slide, Sweep, Press; zero-amount steps are kept.
    Composing all six steps reproduces the end pose to 1e-6 / 1e-4 rad.
    """
    _, rot_xyz, gimbal = relative_movement_components(start, end)
    # translations are re-expressed in the end frame (rotations happen first)
    r_end = end.local_axes()
    t_end = r_end.T @ (end.position - start.position)

    amounts = {
        MovementType.FAN: rot_xyz[0],
        MovementType.ROCK: rot_xyz[1],
        MovementType.ROTATE: rot_xyz[2],
        MovementType.SLIDE: t_end[0],
        MovementType.SWEEP: t_end[1],
        MovementType.PRESS: t_end[2],
    }
    steps = []
    pose = start
    for m in NAIVE_ORDER:
        pose = apply_movement(pose, m, float(amounts[m]))
        steps.append(
            PlanStep(pose=pose, movement=m, amount=float(amounts[m]), segmap=None, similarity_to_target=None)
        )
    return SubgoalPlan(
        kind="naive",
        start_pose=start,
        target_pose=end,
        steps=tuple(steps),
        converged=True,
        gimbal_warning=gimbal,
    )


def validate_plan(vol: LabeledVolume, plan: SubgoalPlan, geom: SliceGeometry = DEFAULT_GEOMETRY) -> bool:
    """Re-simulate the recorded movements and check poses (and views) match."""
    pose = plan.start_pose
    for step in plan.steps:
        pose = apply_movement(pose, step.movement, step.amount)
        if not np.array_equal(pose.position, step.pose.position) or not np.array_equal(
            pose.orientation, step.pose.orientation
        ):
            return False
        if step.segmap is not None and not slice_volume(vol, pose, geom).equals(step.segmap):
            return False
    return True
