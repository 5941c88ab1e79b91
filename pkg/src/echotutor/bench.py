"""Performance benchmarks against the interactive budgets.

Budgets: a single 256x256 slice of a 256^3 volume in <= 10 ms, the full
slice+diff+annotate frame loop at p99 <= 16 ms (the 60 fps budget), and a
complete subgoal plan in <= 5 s single-threaded. For context, the original
pipeline this replaces needed roughly 1 s per sampled view and about 90 s
per start-to-end subgoal group.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .explain import annotate, diff_views
from .geometry import MovementType, ProbePose, apply_movement
from .planner import PlannerConfig, plan_subgoals
from .slicer import DEFAULT_GEOMETRY, SliceGeometry, slice_volume
from .volume import LabeledVolume

PAPER_SAMPLE_SECONDS = 1.0
PAPER_PLAN_SECONDS = 90.0

SLICE_BUDGET_MS = 10.0
FRAME_BUDGET_MS = 16.0
PLAN_BUDGET_S = 5.0


@dataclass(frozen=True)
class BenchResult:
    slice_ms: dict[str, float]
    frame_ms: dict[str, float]
    plan_s: float
    plan_parallel_s: float
    plan_steps: int
    within_budget: bool

    def to_dict(self) -> dict:
        return {
            "slice_ms": self.slice_ms,
            "frame_ms": self.frame_ms,
            "plan_s": self.plan_s,
            "plan_parallel_s": self.plan_parallel_s,
            "plan_steps": self.plan_steps,
            "budgets": {
                "slice_ms": SLICE_BUDGET_MS,
                "frame_p99_ms": FRAME_BUDGET_MS,
                "plan_s": PLAN_BUDGET_S,
            },
            "paper_baseline": {
                "seconds_per_sample": PAPER_SAMPLE_SECONDS,
                "seconds_per_plan": PAPER_PLAN_SECONDS,
            },
            "within_budget": self.within_budget,
        }


def _stats(samples_ms: list[float]) -> dict[str, float]:
    arr = np.asarray(samples_ms)
    return {
        "mean": float(arr.mean()),
        "p50": float(np.percentile(arr, 50)),
        "p99": float(np.percentile(arr, 99)),
        "max": float(arr.max()),
    }


def _bench_poses(target: ProbePose, n: int) -> list[ProbePose]:
    """Deterministic pose sweep around the target for frame-loop timing."""
    poses = []
    rng = np.random.default_rng(1234)
    for _ in range(n):
        pose = target
        for _ in range(2):
            m = MovementType(int(rng.integers(0, 6)))
            amount = math.radians(rng.uniform(-20, 20)) if m.is_rotation else rng.uniform(-0.12, 0.12)
            pose = apply_movement(pose, m, float(amount))
        poses.append(pose)
    return poses


def run_bench(
    vol: LabeledVolume,
    target: ProbePose | None = None,
    geom: SliceGeometry = DEFAULT_GEOMETRY,
    slice_iters: int = 200,
    frame_iters: int = 200,
) -> BenchResult:
    if target is None:
        target = ProbePose(np.array([0.5, 0.5, 0.0]))
    target_map = slice_volume(vol, target, geom)

    poses = _bench_poses(target, max(slice_iters, frame_iters))
    # warmup
    for pose in poses[:5]:
        slice_volume(vol, pose, geom)

    slice_ms = []
    for pose in poses[:slice_iters]:
        t0 = time.perf_counter()
        slice_volume(vol, pose, geom)
        slice_ms.append((time.perf_counter() - t0) * 1000)

    frame_ms = []
    for pose in poses[:frame_iters]:
        t0 = time.perf_counter()
        sm = slice_volume(vol, pose, geom)
        diff = diff_views(sm, target_map)
        annotate(sm, target_map, diff)
        frame_ms.append((time.perf_counter() - t0) * 1000)

    # a representative two-movement troubleshooting case
    start = apply_movement(apply_movement(target, MovementType.ROTATE, math.radians(24)), MovementType.SWEEP, 0.08)
    t0 = time.perf_counter()
    plan = plan_subgoals(vol, start, target)
    plan_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    plan_subgoals(vol, start, target, cfg=PlannerConfig(parallel=True))
    plan_parallel_s = time.perf_counter() - t0

    sstats, fstats = _stats(slice_ms), _stats(frame_ms)
    ok = (
        sstats["p50"] <= SLICE_BUDGET_MS
        and fstats["p99"] <= FRAME_BUDGET_MS
        and plan_s <= PLAN_BUDGET_S
    )
    return BenchResult(
        slice_ms=sstats,
        frame_ms=fstats,
        plan_s=plan_s,
        plan_parallel_s=plan_parallel_s,
        plan_steps=len(plan.steps),
        within_budget=ok,
    )


def format_bench(result: BenchResult) -> str:
    lines = [
        "echotutor bench",
        f"  slice:  mean {result.slice_ms['mean']:.2f} ms, p50 {result.slice_ms['p50']:.2f} ms, "
        f"p99 {result.slice_ms['p99']:.2f} ms (budget {SLICE_BUDGET_MS:.0f} ms)",
        f"  frame:  mean {result.frame_ms['mean']:.2f} ms, p99 {result.frame_ms['p99']:.2f} ms "
        f"(budget {FRAME_BUDGET_MS:.0f} ms at 60 fps)",
        f"  plan:   {result.plan_s:.2f} s single-threaded over {result.plan_steps} steps "
        f"(budget {PLAN_BUDGET_S:.0f} s), {result.plan_parallel_s:.2f} s with parallel slicing",
        f"  baseline pipeline for comparison: ~{PAPER_SAMPLE_SECONDS:.0f} s per sampled view, "
        f"~{PAPER_PLAN_SECONDS:.0f} s per plan",
        f"  within budget: {result.within_budget}",
    ]
    return "\n".join(lines)
