"""Command-line interface.

Subcommands: phantom, gen, plan, naive-plan, report, bench, serve.
Exit codes: 0 success, 2 validation failure, 3 performance budget failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3


def _cmd_phantom(args) -> int:
    from .volume import PhantomSpec, generate_phantom, save_volume

    spec = PhantomSpec(resolution=(args.resolution,) * 3, seed=args.seed)
    vol = generate_phantom(spec)
    save_volume(vol, args.out)
    print(f"wrote {args.out}: {vol.dims} voxels, provenance {vol.provenance}")
    return EXIT_OK


def _load_vol(path: str):
    from .volume import load_volume

    return load_volume(path)


def _cmd_gen(args) -> int:
    from .cases import CaseConstraints, SamplingExhaustedError, gen_cases, save_cases

    vol = _load_vol(args.volume)
    constraints = CaseConstraints(max_movements_from_target=args.max_movements)
    try:
        cases = gen_cases(vol, args.cases, args.seed, constraints)
    except SamplingExhaustedError as e:
        print(f"generation failed: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    save_cases(cases, args.out)
    steps = [len(c.plan.steps) for c in cases]
    print(f"wrote {args.out}: {len(cases)} cases, plan lengths {steps}")
    return EXIT_OK


def _case_for_args(args, vol):
    from .cases import load_cases

    cases = load_cases(args.cases, vol)
    by_id = {c.id: c for c in cases}
    if args.id is None:
        return cases[0]
    if args.id not in by_id:
        print(f"case {args.id!r} not in {sorted(by_id)}", file=sys.stderr)
        return None
    return by_id[args.id]


def _cmd_plan(args) -> int:
    from .cases import plan_to_json

    vol = _load_vol(args.volume)
    case = _case_for_args(args, vol)
    if case is None:
        return EXIT_VALIDATION
    doc = plan_to_json(case.plan)
    Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    print(f"wrote {args.out}: {len(case.plan.steps)} steps, converged {case.plan.converged}")
    return EXIT_OK if case.plan.converged else EXIT_VALIDATION


def _cmd_naive_plan(args) -> int:
    from .cases import plan_to_json

    vol = _load_vol(args.volume)
    case = _case_for_args(args, vol)
    if case is None:
        return EXIT_VALIDATION
    doc = plan_to_json(case.naive_plan)
    Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    if case.naive_plan.gimbal_warning:
        print("warning: Euler decomposition near gimbal lock", file=sys.stderr)
    print(f"wrote {args.out}: 6 fixed steps")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import write_report

    vol = _load_vol(args.volume)
    case = _case_for_args(args, vol)
    if case is None:
        return EXIT_VALIDATION
    write_report(case, vol, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    from .bench import format_bench, run_bench

    vol = _load_vol(args.volume)
    result = run_bench(vol)
    print(format_bench(result))
    if args.out:
        Path(args.out).write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    return EXIT_OK if result.within_budget else EXIT_BUDGET


def _cmd_serve(args) -> int:
    from .server import serve

    serve(
        args.volume,
        args.cases,
        port=args.port,
        host=args.host,
        log_dir=args.log_dir,
        static_dir=args.static_dir,
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="echotutor", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("phantom", help="generate the synthetic heart volume")
    sp.add_argument("--out", required=True)
    sp.add_argument("--resolution", type=int, default=128)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=_cmd_phantom)

    sp = sub.add_parser("gen", help="generate troubleshooting cases")
    sp.add_argument("--volume", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cases", type=int, default=10)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-movements", type=int, default=None, dest="max_movements")
    sp.set_defaults(func=_cmd_gen)

    for name, fn, help_text in (
        ("plan", _cmd_plan, "export a case's optimized subgoal plan"),
        ("naive-plan", _cmd_naive_plan, "export a case's naive 6-DoF decomposition"),
        ("report", _cmd_report, "render a case report (HTML)"),
    ):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--volume", required=True)
        sp.add_argument("--cases", required=True)
        sp.add_argument("--id", default=None)
        sp.add_argument("--out", required=True)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("bench", help="run performance benchmarks")
    sp.add_argument("--volume", required=True)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=_cmd_bench)

    sp = sub.add_parser("serve", help="run the session service")
    sp.add_argument("--volume", required=True)
    sp.add_argument("--cases", required=True)
    sp.add_argument("--port", type=int, default=8999)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--log-dir", default=None, dest="log_dir")
    sp.add_argument("--static-dir", default=None, dest="static_dir")
    sp.set_defaults(func=_cmd_serve)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
