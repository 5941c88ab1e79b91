import time

import numpy as np

from echotutor.bench import format_bench, run_bench
from echotutor.slicer import slice_volume


class TestBench:
    def test_small_volume_within_budget(self, vol64):
        result = run_bench(vol64, slice_iters=40, frame_iters=40)
        assert result.within_budget
        assert result.plan_steps >= 1

    def test_report_mentions_baseline_context(self, vol64):
        result = run_bench(vol64, slice_iters=20, frame_iters=20)
        text = format_bench(result)
        assert "~90 s per plan" in text
        assert "60 fps" in text
        doc = result.to_dict()
        assert doc["paper_baseline"]["seconds_per_plan"] == 90.0

    def test_smaller_volume_slices_faster(self, vol64, vol256, target_pose):
        # interleave the two measurements so load drift affects both alike
        slice_volume(vol64, target_pose)
        slice_volume(vol256, target_pose)
        small, large = [], []
        for _ in range(80):
            t0 = time.perf_counter()
            slice_volume(vol64, target_pose)
            t1 = time.perf_counter()
            slice_volume(vol256, target_pose)
            t2 = time.perf_counter()
            small.append(t1 - t0)
            large.append(t2 - t1)
        assert float(np.median(small)) < float(np.median(large))
