"""Explanations for a subgoal: text, image annotations, and 3D cue scripts.

Everything is generated from the difference between the current view and the
target view plus the 3D layout of the volume:

* problem text lists structures to obtain / avoid / re-slice,
* anatomy text locates the most important structure against the heart center
  and its two largest shared neighbors, using medical direction terms,
* image annotations mark incorrect structures with an "x" on the current view
  and missing ones with a "?" on the target view,
* cue scripts describe a three-stage animation sweeping the slicing plane
  from the start pose (red) to the target pose (green).

All strings are instantiated from fixed templates; there is no free text.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import MovementType, ProbePose, quat_slerp
from .planner import DEFAULT_EPS_AREA, PlanStep
from .similarity import DEFAULT_SHAPE_THRESHOLD, shape_discrepancy
from .slicer import SegMap
from .volume import CHAMBERS, CLINICAL_STRUCTURES, LabeledVolume, Structure, heart_centroid, structure_centroid

DEFAULT_EPS_AXIS = 0.05

SUBTASK_TEXT = "Try to get the view shown above"

# the five text templates, as regexes, for conformance checks
TEMPLATE_PATTERNS = (
    r"^Try to obtain \[[A-Z, ]+\]$",
    r"^Try to avoid \[[A-Z, ]+\]$",
    r"^Try to slice \[[A-Z]+\] from another direction$",
    r"^The \[[A-Z]+\] is located (towards the \[[a-z/, ]+\] side|near the center) of the heart$",
    r"^It is positioned \[[a-z/, ]+\] the \[[A-Z]+\] and \[[a-z/, ]+\] \[[A-Z]+\]$",
)


class NothingToExplainError(Exception):
    """Views already match; there is no problem to describe."""


@dataclass(frozen=True)
class ViewDiff:
    """Structure-level difference between a current and a target view.

    ``missing``: in target, not current; ``incorrect``: in current, not
    target; ``misshapen``: in both but with shape discrepancy above the
    threshold. Presence means area >= eps_area. Lists are ordered by
    descending relevant area (target area for missing, current for incorrect).
    """

    missing: tuple[Structure, ...]
    incorrect: tuple[Structure, ...]
    misshapen: tuple[tuple[Structure, float], ...]
    shared: tuple[Structure, ...]

    @property
    def empty(self) -> bool:
        return not (self.missing or self.incorrect or self.misshapen)


@dataclass(frozen=True)
class AnnotationSet:
    """Mark placements in pixel coordinates (row, col)."""

    cross_marks: tuple[tuple[Structure, tuple[float, float]], ...]  # on the current view
    question_marks: tuple[tuple[Structure, tuple[float, float]], ...]  # on the target view


@dataclass(frozen=True)
class CueKeyframe:
    t: float
    pose: ProbePose


@dataclass(frozen=True)
class CueScript:
    """Three-stage 3D animation: whole heart, labeled semi-focus, focused."""

    stages: tuple[str, str, str]
    plane_track: tuple[CueKeyframe, ...]
    start_color: str
    target_color: str
    labels: tuple[tuple[Structure, tuple[float, float, float]], ...]
    focus: Structure
    loop_count: int = 3


CUE_STAGES = ("WholeHeart", "SemiFocused", "Focused")


@dataclass(frozen=True)
class ExplanationBundle:
    problem_lines: tuple[str, ...]
    anatomy_lines: tuple[str, ...]
    important: Structure | None
    annotations: AnnotationSet
    cue: CueScript | None = None


@dataclass(frozen=True)
class BaselineGuidance:
    """Shadow/arrow guidance data for the no-explanations baseline UI."""

    shadow_pose: ProbePose
    arrow_movement: MovementType
    arrow_sign: int
    subtask_text: str = SUBTASK_TEXT


def _present(segmap: SegMap, eps_area: int) -> set[Structure]:
    return {s for s in CLINICAL_STRUCTURES if segmap.area(s) >= eps_area}


def diff_views(
    current: SegMap,
    target: SegMap,
    eps_area: int = DEFAULT_EPS_AREA,
    eps_shape: float = DEFAULT_SHAPE_THRESHOLD,
) -> ViewDiff:
    """Partition clinical structures into missing / incorrect / misshapen."""
    if not current.same_geometry(target):
        raise ValueError("views must share geometry")
    cur = _present(current, eps_area)
    tgt = _present(target, eps_area)
    missing = sorted(tgt - cur, key=lambda s: (-target.area(s), int(s)))
    incorrect = sorted(cur - tgt, key=lambda s: (-current.area(s), int(s)))
    shared = sorted(cur & tgt, key=lambda s: (-target.area(s), int(s)))
    misshapen = []
    for s in shared:
        d = shape_discrepancy(current.mask(s), target.mask(s))
        if d > eps_shape:
            misshapen.append((s, d))
    misshapen.sort(key=lambda sd: (-target.area(sd[0]), int(sd[0])))
    return ViewDiff(
        missing=tuple(missing),
        incorrect=tuple(incorrect),
        misshapen=tuple(misshapen),
        shared=tuple(shared),
    )


def most_important(diff: ViewDiff, current: SegMap, target: SegMap) -> Structure:
    """The structure the trainee should chase first.

    Largest area among missing (measured on the target view) and incorrect
    (measured on the current view); ties prefer chambers over valves, then
    enum order. With nothing missing or incorrect, the largest shape
    discrepancy wins.
    """
    candidates: list[tuple[int, int, int, Structure]] = []
    for s in diff.missing:
        candidates.append((-target.area(s), 0 if s in CHAMBERS else 1, int(s), s))
    for s in diff.incorrect:
        candidates.append((-current.area(s), 0 if s in CHAMBERS else 1, int(s), s))
    if candidates:
        return min(candidates)[3]
    if diff.misshapen:
        return min(diff.misshapen, key=lambda sd: (-sd[1], 0 if sd[0] in CHAMBERS else 1, int(sd[0])))[0]
    raise NothingToExplainError("current view already matches the target view")


_DIRECTION_TERMS = (
    ("left", "right"),
    ("posterior/below", "anterior/above"),
    ("superior", "inferior"),
)


def direction_words(delta: np.ndarray, eps_axis: float = DEFAULT_EPS_AXIS) -> list[str]:
    """Medical direction terms for a displacement vector, in X, Y, Z order.

    Axes with |delta| <= eps_axis are omitted; an empty result means the
    caller should render "near".
    """
    words = []
    for axis in range(3):
        d = float(delta[axis])
        if abs(d) > eps_axis:
            words.append(_DIRECTION_TERMS[axis][0 if d < 0 else 1])
    return words


def _names(structures) -> str:
    return ", ".join(Structure(s).name for s in structures)


def render_text(
    diff: ViewDiff,
    important: Structure | None,
    vol: LabeledVolume,
    current: SegMap,
    target: SegMap,
    eps_axis: float = DEFAULT_EPS_AXIS,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Instantiate the problem and anatomy text templates for one subgoal."""
    problem: list[str] = []
    if diff.missing:
        problem.append(f"Try to obtain [{_names(diff.missing)}]")
    if diff.incorrect:
        problem.append(f"Try to avoid [{_names(diff.incorrect)}]")
    for s, _ in diff.misshapen:
        problem.append(f"Try to slice [{s.name}] from another direction")

    anatomy: list[str] = []
    if important is not None:
        center = heart_centroid(vol)
        pos = structure_centroid(vol, important)
        words = direction_words(pos - center, eps_axis)
        if words:
            anatomy.append(
                f"The [{important.name}] is located towards the [{', '.join(words)}] side of the heart"
            )
        else:
            anatomy.append(f"The [{important.name}] is located near the center of the heart")
        neighbors = [s for s in diff.shared if s != important]
        neighbors.sort(key=lambda s: (-target.area(s), int(s)))
        if len(neighbors) >= 2:
            a, b = neighbors[0], neighbors[1]
            da = direction_words(pos - structure_centroid(vol, a), eps_axis)
            db = direction_words(pos - structure_centroid(vol, b), eps_axis)
            wa = ", ".join(da) if da else "near"
            wb = ", ".join(db) if db else "near"
            anatomy.append(f"It is positioned [{wa}] the [{a.name}] and [{wb}] [{b.name}]")
    return tuple(problem), tuple(anatomy)


def _mark_point(mask: np.ndarray) -> tuple[float, float]:
    """Pixel centroid (row, col); for disconnected masks, centroid of the
    largest connected component so the mark lands on the structure."""
    labeled, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
    if n > 1:
        sizes = ndimage.sum_labels(np.ones_like(mask, dtype=np.int64), labeled, index=range(1, n + 1))
        mask = labeled == (int(np.argmax(sizes)) + 1)
    rows, cols = np.nonzero(mask)
    return float(rows.mean()), float(cols.mean())


def annotate(current: SegMap, target: SegMap, diff: ViewDiff) -> AnnotationSet:
    """Place x marks on incorrect structures and ? marks on missing ones."""
    crosses = tuple((s, _mark_point(current.mask(s))) for s in diff.incorrect)
    questions = tuple((s, _mark_point(target.mask(s))) for s in diff.missing)
    return AnnotationSet(cross_marks=crosses, question_marks=questions)


def build_cue(
    start: ProbePose,
    target: ProbePose,
    important: Structure,
    vol: LabeledVolume,
    target_view: SegMap,
    keyframes: int = 60,
    loop_count: int = 3,
    eps_area: int = DEFAULT_EPS_AREA,
) -> CueScript:
    """Three-stage cue with a start->target plane sweep.

    The track interpolates position linearly and orientation along the
    constant-speed geodesic; the first and last keyframes are exactly the
    start and target poses. SemiFocused labels anchor the names of the target
    view's structures (except the focused one) at their 3D centroids.
    """
    if keyframes < 2:
        raise ValueError("need at least 2 keyframes")
    track = []
    for i in range(keyframes):
        t = i / (keyframes - 1)
        if i == 0:
            pose = start
        elif i == keyframes - 1:
            pose = target
        else:
            pos = (1.0 - t) * start.position + t * target.position
            q = quat_slerp(start.orientation, target.orientation, t)
            pose = ProbePose(pos, q)
        track.append(CueKeyframe(t=t, pose=pose))
    labels = tuple(
        (s, tuple(structure_centroid(vol, s)))
        for s in _present(target_view, eps_area)
        if s != important
    )
    labels = tuple(sorted(labels, key=lambda kv: int(kv[0])))
    return CueScript(
        stages=CUE_STAGES,
        plane_track=tuple(track),
        start_color="start/red",
        target_color="target/green",
        labels=labels,
        focus=important,
        loop_count=loop_count,
    )


def baseline_guidance(step: PlanStep) -> BaselineGuidance:
    """Shadow/arrow data for one plan step (the no-explanations baseline)."""
    return BaselineGuidance(
        shadow_pose=step.pose,
        arrow_movement=step.movement,
        arrow_sign=1 if step.amount >= 0 else -1,
    )


def explain_subgoal(
    vol: LabeledVolume,
    current: SegMap,
    target: SegMap,
    eps_area: int = DEFAULT_EPS_AREA,
    eps_shape: float = DEFAULT_SHAPE_THRESHOLD,
) -> ExplanationBundle:
    """Full text + annotation bundle for a current/target view pair."""
    diff = diff_views(current, target, eps_area, eps_shape)
    try:
        important = most_important(diff, current, target)
    except NothingToExplainError:
        important = None
    problem, anatomy = render_text(diff, important, vol, current, target)
    marks = annotate(current, target, diff)
    return ExplanationBundle(
        problem_lines=problem,
        anatomy_lines=anatomy,
        important=important,
        annotations=marks,
    )
