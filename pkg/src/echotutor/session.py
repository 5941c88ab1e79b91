"""Interactive tutoring state machine.

One session walks a trainee through the subgoals of a question case. Four
modes cycle per subgoal:

* FreeExploration: probe moves freely while the grip is held,
* MovementSelection: the probe's transformation away from the anchor is
  classified into one of the six standard movements,
* AmountSpecification: pose updates are projected onto the selected movement's
  axis only,
* CuePlayback: after an incorrect submission, a 3D cue script explains the
  required movement, after which the trainee retries from the anchor.

``step`` is a pure function of (state, event): replaying an event log
reproduces the final state and every emitted frame exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .explain import (
    AnnotationSet,
    CueScript,
    NothingToExplainError,
    annotate,
    build_cue,
    diff_views,
    explain_subgoal,
    most_important,
)
from .geometry import MovementType, ProbePose, apply_movement, quat_angle, relative_movement_components
from .planner import SubgoalPlan
from .slicer import DEFAULT_GEOMETRY, SegMap, SliceGeometry, plane_center, slice_volume
from .volume import CLINICAL_STRUCTURES, LabeledVolume, Structure


class SessionError(Exception):
    pass


class BelowDeadZoneError(SessionError):
    """Pose delta too small to classify a movement."""


class ProtocolViolationError(SessionError):
    """Event not legal in the current mode; session state is unchanged."""

    def __init__(self, event_kind: str, mode: "SessionMode", detail: str = ""):
        msg = f"event {event_kind} not allowed in mode {mode.name}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.event_kind = event_kind
        self.mode = mode


class SessionMode(Enum):
    FREE_EXPLORATION = "A"
    MOVEMENT_SELECTION = "B"
    AMOUNT_SPECIFICATION = "C"
    CUE_PLAYBACK = "D"


class EventKind(Enum):
    POSE_UPDATE = "PoseUpdate"
    GRIP_DOWN = "GripDown"
    GRIP_UP = "GripUp"
    ADVANCE = "Advance"


@dataclass(frozen=True)
class InputEvent:
    kind: EventKind
    pose: ProbePose | None = None
    timestamp: float = 0.0


@dataclass(frozen=True)
class EvalConfig:
    """Submission thresholds: plane-center distance and geodesic rotation."""

    pos_threshold_px: float = 25.0
    rot_threshold_deg: float = 5.0
    dead_zone_pos: float = 0.005
    dead_zone_rot_deg: float = 0.5

    def __post_init__(self):
        if self.pos_threshold_px <= 0 or self.rot_threshold_deg <= 0:
            raise ValueError("thresholds must be positive")


@dataclass(frozen=True)
class SubmissionResult:
    correct: bool
    pos_err_px: float
    rot_err_deg: float
    subgoal_index: int
    attempts: int
    complete: bool


@dataclass(frozen=True)
class OutputFrame:
    """One rendered update: the current view plus live feedback."""

    mode: SessionMode
    subgoal_index: int
    pose: ProbePose
    segmap: SegMap
    annotations: AnnotationSet
    problem_lines: tuple[str, ...]
    anatomy_lines: tuple[str, ...]
    selected_movement: MovementType | None
    complete: bool


@dataclass(frozen=True)
class CuePlaybackOutput:
    cue: CueScript
    subgoal_index: int


SessionOutput = OutputFrame | SubmissionResult | CuePlaybackOutput


@dataclass(frozen=True)
class SessionState:
    mode: SessionMode
    subgoal_index: int
    current_pose: ProbePose
    anchor_pose: ProbePose
    selected_movement: MovementType | None
    attempts: tuple[int, ...]
    grip_held: bool
    problem_lines: tuple[str, ...] = ()
    anatomy_lines: tuple[str, ...] = ()

    @property
    def total_attempts(self) -> int:
        return int(sum(self.attempts))


class Session:
    """Binds a volume + plan to the state machine and evaluates events.

    The session object itself is immutable configuration; all mutable state
    lives in SessionState values so event logs replay deterministically.
    """

    def __init__(
        self,
        vol: LabeledVolume,
        plan: SubgoalPlan,
        geom: SliceGeometry = DEFAULT_GEOMETRY,
        eval_cfg: EvalConfig = EvalConfig(),
    ):
        if plan.kind != "optimized":
            raise ValueError("sessions run on optimized subgoal plans")
        if not plan.steps:
            raise ValueError("plan has no subgoals to practice")
        self.vol = vol
        self.plan = plan
        self.geom = geom
        self.eval_cfg = eval_cfg
        self.target_maps = [
            step.segmap if step.segmap is not None else slice_volume(vol, step.pose, geom)
            for step in plan.steps
        ]

    def subgoal_target(self, index: int) -> ProbePose:
        return self.plan.steps[index].pose

    def _subgoal_texts(self, anchor: ProbePose, index: int) -> tuple[tuple[str, ...], tuple[str, ...]]:
        anchor_map = slice_volume(self.vol, anchor, self.geom)
        bundle = explain_subgoal(self.vol, anchor_map, self.target_maps[index])
        return bundle.problem_lines, bundle.anatomy_lines

    def initial_state(self) -> SessionState:
        start = self.plan.start_pose
        problem, anatomy = self._subgoal_texts(start, 0)
        return SessionState(
            mode=SessionMode.FREE_EXPLORATION,
            subgoal_index=0,
            current_pose=start,
            anchor_pose=start,
            selected_movement=None,
            attempts=tuple(0 for _ in self.plan.steps),
            grip_held=False,
            problem_lines=problem,
            anatomy_lines=anatomy,
        )

    def _frame(self, state: SessionState) -> OutputFrame:
        segmap = slice_volume(self.vol, state.current_pose, self.geom)
        complete = state.subgoal_index >= len(self.plan.steps)
        if complete:
            annotations = AnnotationSet(cross_marks=(), question_marks=())
        else:
            diff = diff_views(segmap, self.target_maps[state.subgoal_index])
            annotations = annotate(segmap, self.target_maps[state.subgoal_index], diff)
        return OutputFrame(
            mode=state.mode,
            subgoal_index=state.subgoal_index,
            pose=state.current_pose,
            segmap=segmap,
            annotations=annotations,
            problem_lines=state.problem_lines,
            anatomy_lines=state.anatomy_lines,
            selected_movement=state.selected_movement,
            complete=complete,
        )

    def step(self, state: SessionState, ev: InputEvent) -> tuple[SessionState, list[SessionOutput]]:
        """Apply one input event; returns the new state and emitted outputs.

        Raises ProtocolViolationError (state unchanged) for events that are
        not legal in the current mode.
        """
        mode = state.mode
        complete = state.subgoal_index >= len(self.plan.steps)
        if complete:
            raise ProtocolViolationError(ev.kind.value, mode, "session already complete")

        if ev.kind == EventKind.GRIP_DOWN:
            if mode == SessionMode.FREE_EXPLORATION:
                return replace(state, grip_held=True), []
            if mode == SessionMode.MOVEMENT_SELECTION:
                # re-anchor and drop any classification
                return (
                    replace(state, grip_held=True, anchor_pose=state.current_pose, selected_movement=None),
                    [],
                )
            raise ProtocolViolationError(ev.kind.value, mode)

        if ev.kind == EventKind.GRIP_UP:
            if mode in (SessionMode.FREE_EXPLORATION, SessionMode.MOVEMENT_SELECTION):
                return replace(state, grip_held=False), []
            raise ProtocolViolationError(ev.kind.value, mode)

        if ev.kind == EventKind.POSE_UPDATE:
            if ev.pose is None:
                raise ProtocolViolationError(ev.kind.value, mode, "PoseUpdate carries no pose")
            if mode == SessionMode.FREE_EXPLORATION:
                if not state.grip_held:
                    raise ProtocolViolationError(ev.kind.value, mode, "grip not held")
                new = replace(state, current_pose=ev.pose)
                return new, [self._frame(new)]
            if mode == SessionMode.MOVEMENT_SELECTION:
                if not state.grip_held:
                    raise ProtocolViolationError(ev.kind.value, mode, "grip not held")
                try:
                    selected = classify_movement(state.anchor_pose, ev.pose, self.eval_cfg)
                except BelowDeadZoneError:
                    selected = state.selected_movement
                new = replace(state, current_pose=ev.pose, selected_movement=selected)
                return new, [self._frame(new)]
            if mode == SessionMode.AMOUNT_SPECIFICATION:
                assert state.selected_movement is not None
                projected = project_to_axis(state.anchor_pose, ev.pose, state.selected_movement)
                new = replace(state, current_pose=projected)
                return new, [self._frame(new)]
            raise ProtocolViolationError(ev.kind.value, mode)

        if ev.kind == EventKind.ADVANCE:
            if mode == SessionMode.FREE_EXPLORATION:
                new = replace(
                    state,
                    mode=SessionMode.MOVEMENT_SELECTION,
                    anchor_pose=state.current_pose,
                    selected_movement=None,
                )
                return new, [self._frame(new)]
            if mode == SessionMode.MOVEMENT_SELECTION:
                if state.selected_movement is None:
                    raise ProtocolViolationError(ev.kind.value, mode, "no movement classified yet")
                # the wiggle in B was only for classification; C starts back
                # at the anchor with amount zero
                new = replace(
                    state,
                    mode=SessionMode.AMOUNT_SPECIFICATION,
                    current_pose=state.anchor_pose,
                )
                return new, [self._frame(new)]
            if mode == SessionMode.AMOUNT_SPECIFICATION:
                return self._submit(state)
            if mode == SessionMode.CUE_PLAYBACK:
                new = replace(state, mode=SessionMode.FREE_EXPLORATION, selected_movement=None)
                return new, [self._frame(new)]
            raise ProtocolViolationError(ev.kind.value, mode)

        raise ProtocolViolationError(ev.kind.value, mode)

    def _submit(self, state: SessionState) -> tuple[SessionState, list[SessionOutput]]:
        idx = state.subgoal_index
        target = self.subgoal_target(idx)
        verdict = evaluate_submission(state.current_pose, target, self.eval_cfg, self.geom)
        outputs: list[SessionOutput] = []
        if verdict.correct:
            next_idx = idx + 1
            complete = next_idx >= len(self.plan.steps)
            if complete:
                problem, anatomy = (), ()
            else:
                problem, anatomy = self._subgoal_texts(state.current_pose, next_idx)
            new = replace(
                state,
                mode=SessionMode.FREE_EXPLORATION,
                subgoal_index=next_idx,
                anchor_pose=state.current_pose,
                selected_movement=None,
                problem_lines=problem,
                anatomy_lines=anatomy,
            )
            outputs.append(
                SubmissionResult(
                    correct=True,
                    pos_err_px=verdict.pos_err_px,
                    rot_err_deg=verdict.rot_err_deg,
                    subgoal_index=idx,
                    attempts=new.attempts[idx],
                    complete=complete,
                )
            )
            if not complete:
                outputs.append(self._frame(new))
            return new, outputs

        attempts = list(state.attempts)
        attempts[idx] += 1
        cue = self._cue_for(state.anchor_pose, idx)
        new = replace(
            state,
            mode=SessionMode.CUE_PLAYBACK,
            current_pose=state.anchor_pose,
            attempts=tuple(attempts),
            selected_movement=None,
        )
        outputs.append(
            SubmissionResult(
                correct=False,
                pos_err_px=verdict.pos_err_px,
                rot_err_deg=verdict.rot_err_deg,
                subgoal_index=idx,
                attempts=new.attempts[idx],
                complete=False,
            )
        )
        outputs.append(CuePlaybackOutput(cue=cue, subgoal_index=idx))
        return new, outputs

    def _cue_for(self, anchor: ProbePose, index: int) -> CueScript:
        anchor_map = slice_volume(self.vol, anchor, self.geom)
        target_map = self.target_maps[index]
        diff = diff_views(anchor_map, target_map)
        try:
            important = most_important(diff, anchor_map, target_map)
        except NothingToExplainError:
            # views match but the pose is still off; focus the largest target structure
            important = max(
                CLINICAL_STRUCTURES,
                key=lambda s: (target_map.area(s), -int(s)),
            )
        return build_cue(anchor, self.subgoal_target(index), important, self.vol, target_map)


@dataclass(frozen=True)
class SubmissionVerdict:
    correct: bool
    pos_err_px: float
    rot_err_deg: float


def evaluate_submission(
    submitted: ProbePose,
    target: ProbePose,
    cfg: EvalConfig = EvalConfig(),
    geom: SliceGeometry = DEFAULT_GEOMETRY,
) -> SubmissionVerdict:
    """Compare plane centers (in pixels) and orientations (geodesic degrees).

    Correct iff both the position error is within pos_threshold_px and the
    rotation error within rot_threshold_deg (inclusive). Symmetric in its
    two pose arguments.
    """
    d = float(np.linalg.norm(plane_center(submitted, geom) - plane_center(target, geom)))
    pos_err_px = d / geom.pitch
    rot_err_deg = math.degrees(quat_angle(submitted.orientation, target.orientation))
    return SubmissionVerdict(
        correct=pos_err_px <= cfg.pos_threshold_px and rot_err_deg <= cfg.rot_threshold_deg,
        pos_err_px=pos_err_px,
        rot_err_deg=rot_err_deg,
    )


def classify_movement(anchor: ProbePose, current: ProbePose, cfg: EvalConfig = EvalConfig()) -> MovementType:
    """Name the movement that best explains the anchor->current transform.

    Components are normalized to make rotations and translations
    commensurable: rotations in units of 90 degrees, translations in units of
    one plane side. Ties pick rotations before translations, then enum order.
    """
    t_local, rot_xyz, _ = relative_movement_components(anchor, current)
    dead_rot = math.radians(cfg.dead_zone_rot_deg)
    if np.all(np.abs(t_local) < cfg.dead_zone_pos) and np.all(np.abs(rot_xyz) < dead_rot):
        raise BelowDeadZoneError("pose delta below the classification dead-zone")
    normalized = [
        abs(rot_xyz[0]) / (math.pi / 2),
        abs(rot_xyz[1]) / (math.pi / 2),
        abs(rot_xyz[2]) / (math.pi / 2),
        abs(t_local[0]),
        abs(t_local[1]),
        abs(t_local[2]),
    ]
    return MovementType(int(np.argmax(normalized)))


def project_to_axis(anchor: ProbePose, proposed: ProbePose, m: MovementType) -> ProbePose:
    """Constrain a proposed pose to movement m's axis relative to the anchor.

    The delta's component along the selected axis is kept and everything else
    discarded; idempotent, and proposed == anchor maps to the anchor itself.
    """
    t_local, rot_xyz, _ = relative_movement_components(anchor, proposed)
    amount = rot_xyz[m.axis] if m.is_rotation else t_local[m.axis]
    return apply_movement(anchor, m, float(amount))
