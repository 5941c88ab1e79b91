import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from echotutor.geometry import MovementType, ProbePose, apply_movement, quat_angle, quat_normalize
from echotutor.planner import (
    COARSE_PHASE,
    FINE_PHASE,
    EmptyTargetError,
    FamiliarView,
    NonConvergenceError,
    PhaseConfig,
    PlannerConfig,
    all_target_structures_present,
    plan_naive,
    plan_subgoals,
    sample_views,
    validate_plan,
)
from echotutor.similarity import COARSE_WEIGHTS
from echotutor.slicer import SegMap, SliceGeometry, slice_volume
from echotutor.volume import Structure

GEOM16 = SliceGeometry(16, 16, 1.0)


def seg16(area_by_cat):
    labels = np.zeros(256, dtype=np.uint8)
    pos = 0
    for cat, area in area_by_cat.items():
        labels[pos : pos + area] = cat
        pos += area
    return SegMap(labels.reshape(16, 16), None, GEOM16)


class TestSampleViews:
    def test_coarse_yields_60_candidates(self, vol64, target_pose):
        cands = sample_views(vol64, target_pose, COARSE_PHASE)
        assert len(cands) == 60

    def test_fine_yields_120_candidates(self, vol64, target_pose):
        cands = sample_views(vol64, target_pose, FINE_PHASE)
        assert len(cands) == 120

    def test_amounts_symmetric_without_zero(self):
        amounts = COARSE_PHASE.amounts(MovementType.SLIDE)
        assert len(amounts) == 10
        assert 0.0 not in amounts
        assert np.allclose(sorted(amounts), sorted(-amounts))
        assert np.allclose(np.diff(sorted(amounts[amounts > 0])), 0.2)

    def test_candidates_single_movement_reachable(self, vol64, target_pose):
        for c in sample_views(vol64, target_pose, COARSE_PHASE)[:12]:
            expected = apply_movement(target_pose, c.movement, c.amount)
            assert np.array_equal(expected.position, c.pose.position)
            assert np.array_equal(expected.orientation, c.pose.orientation)

    def test_parallel_matches_serial(self, vol64, target_pose):
        serial = sample_views(vol64, target_pose, COARSE_PHASE, parallel=False)
        parallel = sample_views(vol64, target_pose, COARSE_PHASE, parallel=True)
        for a, b in zip(serial, parallel):
            assert a.movement == b.movement and a.amount == b.amount
            assert np.array_equal(a.segmap.labels, b.segmap.labels)

    def test_odd_sample_count_rejected(self):
        with pytest.raises(ValueError):
            PhaseConfig(1.0, 1.0, 9, COARSE_WEIGHTS)


class TestStructurePresence:
    def test_identical_views(self, vol64, target_pose):
        sm = slice_volume(vol64, target_pose)
        assert all_target_structures_present(sm, sm)

    def test_missing_structure(self):
        target = seg16({int(Structure.LV): 40, int(Structure.RA): 30})
        current = seg16({int(Structure.RA): 30})
        assert not all_target_structures_present(current, target)

    def test_boundary_area_inclusive(self):
        target = seg16({int(Structure.LV): 40})
        current = seg16({int(Structure.LV): 20})
        assert all_target_structures_present(current, target, eps_area=20)
        current19 = seg16({int(Structure.LV): 19})
        assert not all_target_structures_present(current19, target, eps_area=20)


class TestPlanSubgoals:
    def test_start_equals_target_empty_plan(self, vol128, target_pose):
        plan = plan_subgoals(vol128, target_pose, target_pose)
        assert plan.converged
        assert len(plan.steps) == 0
        assert plan.final_similarity == pytest.approx(12.0)

    def test_single_rotation_inverted(self, vol128, target_pose):
        start = apply_movement(target_pose, MovementType.ROTATE, math.radians(30))
        plan = plan_subgoals(vol128, start, target_pose)
        assert plan.converged
        assert len(plan.steps) == 1
        assert plan.steps[0].movement == MovementType.ROTATE
        assert plan.steps[0].amount < 0

    def test_empty_target_raises(self, vol128):
        outside = ProbePose(np.array([5.0, 5.0, 5.0]))
        with pytest.raises(EmptyTargetError):
            plan_subgoals(vol128, ProbePose.identity(), outside)

    def test_plan_revalidates(self, vol128, target_pose):
        start = apply_movement(
            apply_movement(target_pose, MovementType.FAN, math.radians(18)),
            MovementType.PRESS,
            0.06,
        )
        plan = plan_subgoals(vol128, start, target_pose)
        assert plan.converged
        assert validate_plan(vol128, plan)

    def test_similarity_curve_monotone_and_strict(self, vol128, target_pose):
        start = apply_movement(
            apply_movement(target_pose, MovementType.ROTATE, math.radians(24)),
            MovementType.SWEEP,
            0.08,
        )
        plan = plan_subgoals(vol128, start, target_pose)
        curve = plan.similarity_curve()
        for prev, nxt, step in zip(curve, curve[1:], plan.steps[1:]):
            assert nxt >= prev - 1e-9
            if step.via_familiar is None:
                assert nxt > prev

    def test_phase_correctness(self, vol128, target_pose):
        start = apply_movement(
            apply_movement(target_pose, MovementType.SWEEP, 0.2),
            MovementType.ROCK,
            math.radians(12),
        )
        plan = plan_subgoals(vol128, start, target_pose)
        target_map = slice_volume(vol128, target_pose)
        pose = start
        for step in plan.steps:
            current_map = slice_volume(vol128, pose)
            expected_phase = "fine" if all_target_structures_present(current_map, target_map) else "coarse"
            assert step.phase == expected_phase
            pose = apply_movement(pose, step.movement, step.amount)

    def test_determinism(self, vol128, target_pose):
        start = apply_movement(target_pose, MovementType.SLIDE, 0.13)
        a = plan_subgoals(vol128, start, target_pose)
        b = plan_subgoals(vol128, start, target_pose)
        assert len(a.steps) == len(b.steps)
        for sa, sb in zip(a.steps, b.steps):
            assert sa.movement == sb.movement
            assert sa.amount == sb.amount
            assert np.array_equal(sa.pose.position, sb.pose.position)

    def test_strict_raises_with_partial_plan(self, vol128, target_pose):
        # a start that greedy search cannot rescue: the view shares almost
        # nothing with the target
        start = ProbePose(np.array([0.5, 0.95, 0.0]))
        cfg = PlannerConfig(max_steps=3)
        try:
            plan_subgoals(vol128, start, target_pose, cfg=cfg, strict=True)
        except NonConvergenceError as e:
            assert not e.plan.converged
            assert len(e.plan.steps) <= 3
        else:
            # greedy got lucky; nothing to assert beyond convergence
            pass

    def test_familiar_view_switch(self, vol128, target_pose):
        from echotutor.cases import default_familiar_views

        familiar = default_familiar_views(vol128)
        psax = familiar[1]  # PSAX-papillary
        # one small movement away from the PSAX plane and far from the target
        start = apply_movement(psax.pose, MovementType.SWEEP, 0.06)
        plan = plan_subgoals(vol128, start, target_pose, familiar=familiar)
        via = [s.via_familiar for s in plan.steps if s.via_familiar]
        assert via and set(via) <= {f.name for f in familiar}
        curve = plan.similarity_curve()
        assert all(b >= a - 1e-9 for a, b in zip(curve, curve[1:]))


class TestPlanNaive:
    def test_start_equals_end_all_zero(self):
        pose = ProbePose(np.array([0.3, 0.4, 0.1]))
        plan = plan_naive(pose, pose)
        assert len(plan.steps) == 6
        assert [s.movement.name for s in plan.steps] == [
            "FAN",
            "ROCK",
            "ROTATE",
            "SLIDE",
            "SWEEP",
            "PRESS",
        ]
        assert all(s.amount == 0 for s in plan.steps)

    def test_pure_translation_single_nonzero_step(self):
        start = ProbePose.identity()
        end = ProbePose(np.array([0.2, 0.0, 0.0]))
        plan = plan_naive(start, end)
        nonzero = [s for s in plan.steps if abs(s.amount) > 1e-12]
        assert len(nonzero) == 1
        assert nonzero[0].movement == MovementType.SLIDE
        assert nonzero[0].amount == pytest.approx(0.2)

    @pytest.mark.parametrize("m", list(MovementType))
    def test_pure_single_axis_from_random_pose(self, m):
        rng = np.random.default_rng(10 + int(m))
        start = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
        end = apply_movement(start, m, 0.21)
        plan = plan_naive(start, end)
        nonzero = [s for s in plan.steps if abs(s.amount) > 1e-9]
        assert [s.movement for s in nonzero] == [m]
        assert nonzero[0].amount == pytest.approx(0.21, abs=1e-9)

    def test_roundtrip_1000_random_pairs(self):
        rng = np.random.default_rng(99)
        for _ in range(1000):
            start = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
            end = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
            plan = plan_naive(start, end)
            final = plan.steps[-1].pose
            assert np.linalg.norm(final.position - end.position) < 1e-6
            assert quat_angle(final.orientation, end.orientation) < 1e-4

    def test_rotation_amounts_match_scipy_euler(self):
        rng = np.random.default_rng(100)
        for _ in range(50):
            start = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
            end = ProbePose(rng.random(3), quat_normalize(rng.normal(size=4)))
            plan = plan_naive(start, end)
            qs, qe = start.orientation, end.orientation
            rs = Rotation.from_quat([qs[1], qs[2], qs[3], qs[0]])
            re = Rotation.from_quat([qe[1], qe[2], qe[3], qe[0]])
            expected = (rs.inv() * re).as_euler("XYZ")
            got = [plan.steps[i].amount for i in range(3)]
            if not plan.gimbal_warning:
                assert np.allclose(got, expected, atol=1e-6)

    def test_gimbal_warning(self):
        start = ProbePose.identity()
        end = apply_movement(start, MovementType.ROCK, math.pi / 2)
        plan = plan_naive(start, end)
        assert plan.gimbal_warning
        final = plan.steps[-1].pose
        assert quat_angle(final.orientation, end.orientation) < 1e-6
