"""Produce the e2e fixture: a 64^3 volume, one 2-subgoal case, and the raw
label arrays the client's decoded frames must match byte for byte.

Usage: python3 fixture.py OUT_DIR
"""

import base64
import json
import sys
from pathlib import Path

from echotutor.cases import CaseConstraints, gen_cases, save_cases
from echotutor.explain import diff_views
from echotutor.slicer import slice_volume
from echotutor.volume import PhantomSpec, generate_phantom, save_volume


def main(out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    vol = generate_phantom(PhantomSpec(resolution=(64, 64, 64)))
    save_volume(vol, out / "vol.spvl")

    constraints = CaseConstraints(min_plan_steps=2)
    case = None
    for seed in range(200):
        candidate = gen_cases(vol, 1, seed=seed, constraints=constraints)[0]
        if len(candidate.plan.steps) != 2:
            continue
        start_map = slice_volume(vol, candidate.start_pose)
        diff = diff_views(start_map, slice_volume(vol, candidate.plan.steps[0].pose))
        if diff.missing or diff.incorrect:
            case = candidate
            break
    assert case is not None, "no 2-subgoal case with a visible start mismatch found"
    save_cases([case], out / "cases.json")

    def raw_b64(segmap):
        return base64.b64encode(segmap.labels.tobytes()).decode("ascii")

    expected = {
        "case_id": case.id,
        "start_pose": case.start_pose.to_dict(),
        "start_labels": raw_b64(start_map),
        "steps": [
            {
                "pose": step.pose.to_dict(),
                "movement": step.movement.name,
                "amount": step.amount,
                "labels": raw_b64(slice_volume(vol, step.pose)),
            }
            for step in case.plan.steps
        ],
    }
    (out / "expected.json").write_text(json.dumps(expected))
    print(f"fixture ready: case {case.id} with {len(case.plan.steps)} subgoals")


if __name__ == "__main__":
    main(sys.argv[1])
