"""Troubleshooting question cases: random starts, plans, and case-file I/O.

A case pairs a randomly perturbed start pose with the target view, plus the
optimized subgoal plan and the naive 6-DoF decomposition for it. Generation
is rejection sampling: draw a start, keep it only if the start view shows at
least one clinical structure, is not already a passing submission, and the
planner converges on it. Everything is deterministic given the seed.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import MovementType, ProbePose, apply_movement
from .planner import (
    FamiliarView,
    PlannerConfig,
    PlanStep,
    SubgoalPlan,
    plan_naive,
    plan_subgoals,
    validate_plan,
)
from .session import EvalConfig, evaluate_submission
from .slicer import DEFAULT_GEOMETRY, SegMap, SliceGeometry, slice_volume
from .volume import LabeledVolume
from .wire import rle_decode, rle_encode

CASE_SCHEMA = "echotutor/cases-v1"


class SamplingExhaustedError(Exception):
    """Case generation could not satisfy the constraints within the attempt budget."""


# Default target: the long-axis plane y=0.5 through all chambers and valves.
DEFAULT_TARGET_POSE = ProbePose(np.array([0.5, 0.5, 0.0]))

# Short-axis planes orthogonal to the target, used as familiar waypoints.
_PSAX_QUAT = np.array([math.cos(-math.pi / 4), 0.0, 0.0, math.sin(-math.pi / 4)])  # -90 deg about Z
DEFAULT_FAMILIAR_POSES = {
    "PSAX-mitral": ProbePose(np.array([0.65, 0.5, 0.0]), _PSAX_QUAT),
    "PSAX-papillary": ProbePose(np.array([0.5, 0.5, 0.0]), _PSAX_QUAT),
    "PSAX-apex": ProbePose(np.array([0.35, 0.5, 0.0]), _PSAX_QUAT),
}


def default_familiar_views(vol: LabeledVolume, geom: SliceGeometry = DEFAULT_GEOMETRY) -> list[FamiliarView]:
    return [
        FamiliarView(name, pose, slice_volume(vol, pose, geom))
        for name, pose in DEFAULT_FAMILIAR_POSES.items()
    ]


@dataclass(frozen=True)
class CaseConstraints:
    """Sampling recipe and acceptance constraints for generated cases.

    Starts are built by perturbing the target pose with 1..max_perturb_moves
    random movements drawn from the planner's own sample lattices (plus at
    most one wide coarse-lattice move), then requiring the start position to
    stay inside the configured band above the volume.
    """

    max_perturb_moves: int = 3
    fine_rot_pool_deg: tuple[float, ...] = (3.0, 6.0, 9.0, 12.0, 15.0, 18.0)
    fine_pos_pool: tuple[float, ...] = (0.02, 0.04, 0.06, 0.08, 0.10, 0.12, 0.14)
    coarse_rot_pool_deg: tuple[float, ...] = (18.0, 36.0)
    coarse_pos_pool: tuple[float, ...] = (0.2,)
    coarse_move_probability: float = 0.5
    position_band: tuple[tuple[float, float], ...] = ((0.1, 0.9), (0.25, 0.75), (-0.1, 0.2))
    max_movements_from_target: int | None = None
    require_converged: bool = True
    min_plan_steps: int = 1
    max_attempts_per_case: int = 120
    min_start_structure_area: int = 20


@dataclass(frozen=True)
class QuestionCase:
    id: str
    volume_ref: str
    start_pose: ProbePose
    target_pose: ProbePose
    plan: SubgoalPlan
    naive_plan: SubgoalPlan
    seed: int


def _perturb_start(rng: np.random.Generator, target: ProbePose, constraints: CaseConstraints) -> ProbePose:
    pose = target
    if constraints.max_movements_from_target is not None:
        n_moves = constraints.max_movements_from_target
        use_coarse_extra = False
    else:
        n_moves = int(rng.integers(1, constraints.max_perturb_moves + 1))
        use_coarse_extra = rng.random() < constraints.coarse_move_probability
    for _ in range(n_moves):
        m = MovementType(int(rng.integers(0, 6)))
        if m.is_rotation:
            amount = math.radians(float(rng.choice(constraints.fine_rot_pool_deg)))
        else:
            amount = float(rng.choice(constraints.fine_pos_pool))
        pose = apply_movement(pose, m, amount if rng.random() < 0.5 else -amount)
    if use_coarse_extra:
        m = MovementType(int(rng.integers(0, 6)))
        if m.is_rotation:
            amount = math.radians(float(rng.choice(constraints.coarse_rot_pool_deg)))
        else:
            amount = float(rng.choice(constraints.coarse_pos_pool))
        pose = apply_movement(pose, m, amount if rng.random() < 0.5 else -amount)
    return pose


def _in_band(pose: ProbePose, band: tuple[tuple[float, float], ...]) -> bool:
    return all(lo <= c <= hi for c, (lo, hi) in zip(pose.position, band))


def gen_cases(
    vol: LabeledVolume,
    n: int,
    seed: int,
    constraints: CaseConstraints = CaseConstraints(),
    target: ProbePose = DEFAULT_TARGET_POSE,
    familiar: list[FamiliarView] | None = None,
    planner_cfg: PlannerConfig = PlannerConfig(),
    geom: SliceGeometry = DEFAULT_GEOMETRY,
    eval_cfg: EvalConfig = EvalConfig(),
) -> list[QuestionCase]:
    """Generate n validated troubleshooting cases, deterministically from seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if familiar is None:
        familiar = default_familiar_views(vol, geom)
    rng = np.random.default_rng(seed)
    cases: list[QuestionCase] = []
    for k in range(n):
        accepted = None
        for _ in range(constraints.max_attempts_per_case):
            start = _perturb_start(rng, target, constraints)
            if not _in_band(start, constraints.position_band):
                continue
            start_map = slice_volume(vol, start, geom)
            if int((start_map.areas[1:9] >= constraints.min_start_structure_area).sum()) == 0:
                continue
            verdict = evaluate_submission(start, target, eval_cfg, geom)
            if verdict.correct:
                continue
            plan = plan_subgoals(vol, start, target, familiar, planner_cfg, geom)
            if constraints.require_converged and not plan.converged:
                continue
            if len(plan.steps) < constraints.min_plan_steps:
                continue
            if (
                constraints.max_movements_from_target is not None
                and len(plan.steps) > constraints.max_movements_from_target
            ):
                continue
            if not validate_plan(vol, plan, geom):
                continue
            accepted = plan
            break
        if accepted is None:
            raise SamplingExhaustedError(
                f"case {k}: no valid start within {constraints.max_attempts_per_case} attempts"
            )
        naive = plan_naive(start, target)
        cases.append(
            QuestionCase(
                id=f"case-{seed}-{k}",
                volume_ref=vol.provenance,
                start_pose=start,
                target_pose=target,
                plan=accepted,
                naive_plan=naive,
                seed=seed,
            )
        )
    return cases


def _segmap_to_json(sm: SegMap | None) -> dict | None:
    if sm is None:
        return None
    return {
        "w": sm.geometry.width_px,
        "h": sm.geometry.depth_px,
        "plane_side": sm.geometry.plane_side,
        "rle": base64.b64encode(rle_encode(sm.labels)).decode("ascii"),
        "areas": {str(i): int(a) for i, a in enumerate(sm.areas) if a},
    }


def _segmap_from_json(d: dict | None) -> SegMap | None:
    if d is None:
        return None
    geom = SliceGeometry(int(d["w"]), int(d["h"]), float(d["plane_side"]))
    labels = rle_decode(base64.b64decode(d["rle"]))
    return SegMap(labels, None, geom)


def _step_to_json(step: PlanStep) -> dict:
    return {
        "pose": step.pose.to_dict(),
        "movement": step.movement.name,
        "amount": step.amount,
        "similarity_to_target": step.similarity_to_target,
        "full_similarity": step.full_similarity,
        "phase": step.phase,
        "via_familiar": step.via_familiar,
        "segmap": _segmap_to_json(step.segmap),
    }


def _step_from_json(d: dict) -> PlanStep:
    return PlanStep(
        pose=ProbePose.from_dict(d["pose"]),
        movement=MovementType[d["movement"]],
        amount=float(d["amount"]),
        segmap=_segmap_from_json(d.get("segmap")),
        similarity_to_target=d.get("similarity_to_target"),
        full_similarity=d.get("full_similarity"),
        phase=d.get("phase"),
        via_familiar=d.get("via_familiar"),
    )


def plan_to_json(plan: SubgoalPlan) -> dict:
    return {
        "kind": plan.kind,
        "start_pose": plan.start_pose.to_dict(),
        "target_pose": plan.target_pose.to_dict(),
        "steps": [_step_to_json(s) for s in plan.steps],
        "converged": plan.converged,
        "start_similarity": plan.start_similarity,
        "final_similarity": plan.final_similarity,
        "gimbal_warning": plan.gimbal_warning,
    }


def plan_from_json(d: dict) -> SubgoalPlan:
    return SubgoalPlan(
        kind=d["kind"],
        start_pose=ProbePose.from_dict(d["start_pose"]),
        target_pose=ProbePose.from_dict(d["target_pose"]),
        steps=tuple(_step_from_json(s) for s in d["steps"]),
        converged=bool(d["converged"]),
        start_similarity=d.get("start_similarity"),
        final_similarity=d.get("final_similarity"),
        gimbal_warning=bool(d.get("gimbal_warning", False)),
    )


def case_to_json(case: QuestionCase) -> dict:
    return {
        "id": case.id,
        "volume_ref": case.volume_ref,
        "seed": case.seed,
        "start_pose": case.start_pose.to_dict(),
        "target_pose": case.target_pose.to_dict(),
        "plan": plan_to_json(case.plan),
        "naive_plan": plan_to_json(case.naive_plan),
    }


def case_from_json(d: dict) -> QuestionCase:
    return QuestionCase(
        id=d["id"],
        volume_ref=d["volume_ref"],
        seed=int(d["seed"]),
        start_pose=ProbePose.from_dict(d["start_pose"]),
        target_pose=ProbePose.from_dict(d["target_pose"]),
        plan=plan_from_json(d["plan"]),
        naive_plan=plan_from_json(d["naive_plan"]),
    )


def save_cases(cases: list[QuestionCase], path: str | Path) -> None:
    doc = {"schema": CASE_SCHEMA, "cases": [case_to_json(c) for c in cases]}
    Path(path).write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")


def load_cases(path: str | Path, vol: LabeledVolume | None = None) -> list[QuestionCase]:
    """Load a case file; with a volume supplied, every plan is re-validated."""
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != CASE_SCHEMA:
        raise ValueError(f"unsupported case schema {doc.get('schema')!r}")
    cases = [case_from_json(d) for d in doc["cases"]]
    if vol is not None:
        for case in cases:
            if not validate_plan(vol, case.plan):
                raise ValueError(f"case {case.id}: plan fails re-simulation against the volume")
    return cases
