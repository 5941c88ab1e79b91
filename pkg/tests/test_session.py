import math

import numpy as np
import pytest

from echotutor.explain import CueScript
from echotutor.geometry import (
    MovementType,
    ProbePose,
    apply_movement,
    quat_angle,
    quat_normalize,
    relative_movement_components,
)
from echotutor.session import (
    BelowDeadZoneError,
    CuePlaybackOutput,
    EvalConfig,
    EventKind,
    InputEvent,
    OutputFrame,
    ProtocolViolationError,
    Session,
    SessionMode,
    SubmissionResult,
    classify_movement,
    evaluate_submission,
    project_to_axis,
)
from echotutor.slicer import DEFAULT_GEOMETRY


@pytest.fixture(scope="module")
def case128(vol128, target_pose):
    from echotutor.cases import gen_cases

    return gen_cases(vol128, 1, seed=77)[0]


@pytest.fixture()
def session(vol128, case128):
    return Session(vol128, case128.plan)


def ev_pose(pose):
    return InputEvent(EventKind.POSE_UPDATE, pose)


EV_GRIP_DOWN = InputEvent(EventKind.GRIP_DOWN)
EV_GRIP_UP = InputEvent(EventKind.GRIP_UP)
EV_ADVANCE = InputEvent(EventKind.ADVANCE)


class TestClassifyMovement:
    def test_pure_rotation(self):
        anchor = ProbePose.identity()
        current = apply_movement(anchor, MovementType.ROTATE, math.radians(20))
        assert classify_movement(anchor, current) == MovementType.ROTATE

    def test_pure_translation(self):
        anchor = ProbePose.identity()
        current = apply_movement(anchor, MovementType.SLIDE, 0.3)
        assert classify_movement(anchor, current) == MovementType.SLIDE

    def test_normalization_rule(self):
        # 30 deg about X (0.333 of a quarter turn) beats 0.10 plane-sides of X
        anchor = ProbePose.identity()
        current = apply_movement(
            apply_movement(anchor, MovementType.SLIDE, 0.10), MovementType.FAN, math.radians(30)
        )
        t, r, _ = relative_movement_components(anchor, current)
        assert abs(r[0]) / (math.pi / 2) > abs(t[0])  # the rule the classifier applies
        assert classify_movement(anchor, current) == MovementType.FAN

    def test_translation_can_beat_small_rotation(self):
        anchor = ProbePose.identity()
        current = apply_movement(
            apply_movement(anchor, MovementType.SWEEP, 0.4), MovementType.FAN, math.radians(9)
        )
        assert classify_movement(anchor, current) == MovementType.SWEEP

    def test_dead_zone(self):
        anchor = ProbePose.identity()
        nudged = apply_movement(anchor, MovementType.PRESS, 0.004)
        with pytest.raises(BelowDeadZoneError):
            classify_movement(anchor, nudged)

    def test_works_from_rotated_anchor(self):
        rng = np.random.default_rng(8)
        anchor = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
        current = apply_movement(anchor, MovementType.ROCK, math.radians(15))
        assert classify_movement(anchor, current) == MovementType.ROCK


class TestProjectToAxis:
    def test_on_axis_unchanged(self):
        anchor = ProbePose.identity()
        proposed = apply_movement(anchor, MovementType.PRESS, 0.17)
        out = project_to_axis(anchor, proposed, MovementType.PRESS)
        assert out.approx_equal(proposed, 1e-12, 1e-12)

    def test_anchor_maps_to_anchor(self):
        anchor = ProbePose.identity()
        out = project_to_axis(anchor, anchor, MovementType.FAN)
        assert out.approx_equal(anchor, 1e-12, 1e-12)

    @pytest.mark.parametrize("m", list(MovementType))
    def test_off_axis_discarded(self, m):
        rng = np.random.default_rng(20 + int(m))
        anchor = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
        proposed = anchor
        for other in MovementType:
            amount = 0.1 if not other.is_rotation else math.radians(12)
            proposed = apply_movement(proposed, other, amount)
        out = project_to_axis(anchor, proposed, m)
        t, r, _ = relative_movement_components(anchor, out)
        for axis in range(3):
            if not (m.is_rotation and axis == m.axis):
                assert abs(r[axis]) < 1e-9
            if not (not m.is_rotation and axis == m.axis):
                assert abs(t[axis]) < 1e-9

    def test_idempotent(self):
        rng = np.random.default_rng(31)
        anchor = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
        proposed = apply_movement(
            apply_movement(anchor, MovementType.ROCK, 0.3), MovementType.SWEEP, 0.2
        )
        once = project_to_axis(anchor, proposed, MovementType.ROCK)
        twice = project_to_axis(anchor, once, MovementType.ROCK)
        assert once.approx_equal(twice, 1e-12, 1e-12)


class TestEvaluateSubmission:
    def test_exact_match(self, target_pose):
        v = evaluate_submission(target_pose, target_pose)
        assert v.correct and v.pos_err_px == 0.0 and v.rot_err_deg == 0.0

    @pytest.mark.parametrize(
        "px,expected", [(24.9, True), (25.0, True), (25.1, False)]
    )
    def test_position_boundary(self, target_pose, px, expected):
        submitted = apply_movement(target_pose, MovementType.SLIDE, px * DEFAULT_GEOMETRY.pitch)
        v = evaluate_submission(submitted, target_pose)
        assert v.pos_err_px == pytest.approx(px, abs=1e-9)
        assert v.correct is expected

    @pytest.mark.parametrize(
        "deg,expected", [(4.9, True), (5.0, True), (5.1, False)]
    )
    def test_rotation_boundary(self, target_pose, deg, expected):
        submitted = apply_movement(target_pose, MovementType.ROTATE, math.radians(deg))
        v = evaluate_submission(submitted, target_pose)
        assert v.rot_err_deg == pytest.approx(deg, abs=1e-9)
        assert v.correct is expected

    def test_symmetry(self, target_pose):
        rng = np.random.default_rng(5)
        other = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
        a = evaluate_submission(target_pose, other)
        b = evaluate_submission(other, target_pose)
        assert a.pos_err_px == pytest.approx(b.pos_err_px, abs=1e-9)
        assert a.rot_err_deg == pytest.approx(b.rot_err_deg, abs=1e-9)


def wrong_amount(step):
    """An on-axis amount far enough from the step's own to fail submission."""
    return math.radians(45.0) if step.movement.is_rotation else 0.45


def walk_subgoal(session, state, step, wrong_first=False):
    """Drive one subgoal A->B->C->submit; optionally submit a wrong pose once."""
    outputs = []
    state, out = session.step(state, EV_GRIP_DOWN)
    state, out = session.step(state, EV_ADVANCE)  # A -> B
    outputs += out
    nudge = apply_movement(state.anchor_pose, step.movement, step.amount * 0.5)
    state, out = session.step(state, ev_pose(nudge))
    outputs += out
    state, out = session.step(state, EV_ADVANCE)  # B -> C
    outputs += out
    if wrong_first:
        wrong = apply_movement(state.anchor_pose, step.movement, wrong_amount(step))
        state, out = session.step(state, ev_pose(wrong))
        outputs += out
        state, out = session.step(state, EV_ADVANCE)  # incorrect submit
        outputs += out
        assert state.mode == SessionMode.CUE_PLAYBACK
        state, out = session.step(state, EV_ADVANCE)  # skip cue
        outputs += out
        # retry: B again
        state, out = session.step(state, EV_GRIP_DOWN)
        state, out = session.step(state, EV_ADVANCE)
        outputs += out
        state, out = session.step(state, ev_pose(nudge))
        outputs += out
        state, out = session.step(state, EV_ADVANCE)
        outputs += out
    exact = apply_movement(state.anchor_pose, step.movement, step.amount)
    state, out = session.step(state, ev_pose(exact))
    outputs += out
    state, out = session.step(state, EV_ADVANCE)  # submit
    outputs += out
    return state, outputs


class TestSessionStateMachine:
    def test_advance_in_a_enters_b(self, session):
        state = session.initial_state()
        state, out = session.step(state, EV_ADVANCE)
        assert state.mode == SessionMode.MOVEMENT_SELECTION
        assert np.array_equal(state.anchor_pose.position, session.plan.start_pose.position)

    def test_pose_update_requires_grip_in_a(self, session):
        state = session.initial_state()
        with pytest.raises(ProtocolViolationError):
            session.step(state, ev_pose(ProbePose.identity()))

    def test_grip_freeze_cycle(self, session):
        state = session.initial_state()
        state, _ = session.step(state, EV_GRIP_DOWN)
        moved = apply_movement(state.current_pose, MovementType.SLIDE, 0.05)
        state, out = session.step(state, ev_pose(moved))
        assert len(out) == 1 and isinstance(out[0], OutputFrame)
        state, _ = session.step(state, EV_GRIP_UP)
        with pytest.raises(ProtocolViolationError):
            session.step(state, ev_pose(ProbePose.identity()))

    def test_advance_in_b_requires_classification(self, session):
        state = session.initial_state()
        state, _ = session.step(state, EV_ADVANCE)
        with pytest.raises(ProtocolViolationError):
            session.step(state, EV_ADVANCE)

    def test_b_to_c_snaps_back_to_anchor(self, session):
        state = session.initial_state()
        state, _ = session.step(state, EV_GRIP_DOWN)
        state, _ = session.step(state, EV_ADVANCE)
        anchor = state.anchor_pose
        nudge = apply_movement(anchor, MovementType.ROTATE, 0.4)
        state, _ = session.step(state, ev_pose(nudge))
        state, _ = session.step(state, EV_ADVANCE)
        assert state.mode == SessionMode.AMOUNT_SPECIFICATION
        assert state.current_pose.approx_equal(anchor, 1e-12, 1e-12)

    def test_mode_c_axis_purity_under_fuzz(self, session):
        rng = np.random.default_rng(44)
        state = session.initial_state()
        state, _ = session.step(state, EV_GRIP_DOWN)
        state, _ = session.step(state, EV_ADVANCE)
        step0 = session.plan.steps[0]
        state, _ = session.step(state, ev_pose(apply_movement(state.anchor_pose, step0.movement, 0.3)))
        state, _ = session.step(state, EV_ADVANCE)
        assert state.mode == SessionMode.AMOUNT_SPECIFICATION
        for _ in range(25):
            wild = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
            state, out = session.step(state, ev_pose(wild))
            t, r, _ = relative_movement_components(state.anchor_pose, state.current_pose)
            m = state.selected_movement
            for axis in range(3):
                if not (m.is_rotation and axis == m.axis):
                    assert abs(r[axis]) < 1e-9
                if not (not m.is_rotation and axis == m.axis):
                    assert abs(t[axis]) < 1e-9

    def test_every_accepted_pose_update_yields_one_frame(self, session):
        rng = np.random.default_rng(9)
        state = session.initial_state()
        state, _ = session.step(state, EV_GRIP_DOWN)
        for _ in range(10):
            pose = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
            state, out = session.step(state, ev_pose(pose))
            frames = [o for o in out if isinstance(o, OutputFrame)]
            assert len(frames) == 1

    def test_full_walk_to_completion(self, vol128, case128):
        session = Session(vol128, case128.plan)
        state = session.initial_state()
        for step in case128.plan.steps:
            state, _ = walk_subgoal(session, state, step)
        assert state.subgoal_index == len(case128.plan.steps)
        with pytest.raises(ProtocolViolationError):
            session.step(state, EV_ADVANCE)

    def test_incorrect_submission_triggers_cue_and_attempt(self, vol128, case128):
        session = Session(vol128, case128.plan)
        state = session.initial_state()
        step = case128.plan.steps[0]
        anchor_before = state.anchor_pose
        state, outputs = walk_subgoal(session, state, step, wrong_first=True)
        results = [o for o in outputs if isinstance(o, SubmissionResult)]
        cues = [o for o in outputs if isinstance(o, CuePlaybackOutput)]
        assert [r.correct for r in results] == [False, True]
        assert len(cues) == 1
        assert isinstance(cues[0].cue, CueScript)
        # cue sweeps from the retry anchor to the subgoal pose
        track = cues[0].cue.plane_track
        assert np.array_equal(track[0].pose.position, anchor_before.position)
        assert np.array_equal(track[-1].pose.position, step.pose.position)
        assert state.attempts[0] == 1

    def test_replay_determinism(self, vol128, case128):
        session = Session(vol128, case128.plan)
        rng = np.random.default_rng(12)
        events = [EV_GRIP_DOWN]
        pose = case128.plan.start_pose
        for _ in range(8):
            m = MovementType(int(rng.integers(0, 6)))
            pose = apply_movement(pose, m, 0.05 if not m.is_rotation else 0.2)
            events.append(ev_pose(pose))
        events += [EV_ADVANCE, ev_pose(apply_movement(pose, MovementType.FAN, 0.3)), EV_ADVANCE]

        def run():
            state = session.initial_state()
            collected = []
            for ev in events:
                state, out = session.step(state, ev)
                collected.append((state, out))
            return collected

        a, b = run(), run()
        assert len(a) == len(b)
        for (sa, oa), (sb, ob) in zip(a, b):
            assert sa.mode == sb.mode
            assert np.array_equal(sa.current_pose.position, sb.current_pose.position)
            for fa, fb in zip(oa, ob):
                if isinstance(fa, OutputFrame):
                    assert np.array_equal(fa.segmap.labels, fb.segmap.labels)
                    assert fa.problem_lines == fb.problem_lines

    def test_grip_down_in_b_reanchors(self, session):
        state = session.initial_state()
        state, _ = session.step(state, EV_GRIP_DOWN)
        state, _ = session.step(state, EV_ADVANCE)
        moved = apply_movement(state.anchor_pose, MovementType.SLIDE, 0.1)
        state, _ = session.step(state, ev_pose(moved))
        assert state.selected_movement == MovementType.SLIDE
        state, _ = session.step(state, EV_GRIP_DOWN)
        assert state.selected_movement is None
        assert state.anchor_pose.approx_equal(moved, 1e-12, 1e-12)

    def test_illegal_events_in_cue_playback(self, vol128, case128):
        session = Session(vol128, case128.plan)
        state = session.initial_state()
        step = case128.plan.steps[0]
        state, _ = session.step(state, EV_GRIP_DOWN)
        state, _ = session.step(state, EV_ADVANCE)
        state, _ = session.step(state, ev_pose(apply_movement(state.anchor_pose, step.movement, step.amount * 0.5)))
        state, _ = session.step(state, EV_ADVANCE)
        wrong = apply_movement(state.anchor_pose, step.movement, wrong_amount(step))
        state, _ = session.step(state, ev_pose(wrong))
        state, _ = session.step(state, EV_ADVANCE)  # wrong submit
        assert state.mode == SessionMode.CUE_PLAYBACK
        for bad in (EV_GRIP_DOWN, EV_GRIP_UP, ev_pose(ProbePose.identity())):
            with pytest.raises(ProtocolViolationError):
                session.step(state, bad)
