"""Command-line entry point.

    rtbatch profile synth --model rn50 --shape 3x224x224 --base-us 2000 \\
        --per-frame-us 1000 --max-batch 32 -o prof.jsonl
    rtbatch profile validate prof.jsonl
    rtbatch trace gen --seed 42 --requests 25 --mean-period-ms 50 \\
        --mean-deadline-ms 50 -o trace.json
    rtbatch admit --profile prof.jsonl --trace trace.json
    rtbatch run --policy deeprt --trace trace.json --out out/
    rtbatch compare --policies deeprt,aimd,batch,batch-delay --trace trace.json --out cmp/
"""

from __future__ import annotations

import argparse
import csv
import json
import secrets
import sys
from pathlib import Path

from .core import Shape
from .errors import SchedError
from .harness.engine import (SEDF, DeepRT, SimOptions, admitted_ids, policy_from_name,
                             run_simulation)
from .harness.execmodel import exact_model, inject_overruns, jitter_model, parse_inject
from .harness.metrics import write_outputs
from .harness.trace import (DESKTOP_POOL, DESKTOP_SHAPES, TraceConfig, load_trace,
                            save_trace, gen_trace)
from .profile import (ExecutionProfile, SynthRow, load_profile, reference_profile,
                      save_profile, synth_profile)


class CliError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbelow(2**31)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _profile(args) -> ExecutionProfile:
    if args.profile:
        return load_profile(args.profile)
    return reference_profile(DESKTOP_SHAPES)


def _broadcast(name: str, values: list, n: int) -> list:
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise CliError(f"--{name} given {len(values)} times for {n} models")
    return values


# -- profile ----------------------------------------------------------------

def cmd_profile_synth(args) -> int:
    if args.reference:
        shapes = [Shape.parse(s) for s in (args.shape or [])] or list(DESKTOP_SHAPES)
        prof = reference_profile(shapes, models=args.model or None, max_batch=args.max_batch[0]
                                 if args.max_batch else 32)
    else:
        if not args.model or not args.shape:
            raise CliError("profile synth needs --model and --shape (or --reference)")
        n = len(args.model)
        shapes = _broadcast("shape", args.shape, n)
        if args.base_us is None or args.per_frame_us is None:
            raise CliError("profile synth needs --base-us and --per-frame-us")
        base = _broadcast("base-us", args.base_us, n)
        per = _broadcast("per-frame-us", args.per_frame_us, n)
        mb = _broadcast("max-batch", args.max_batch or [32], n)
        rows = [SynthRow(m, Shape.parse(s), b, p, x)
                for m, s, b, p, x in zip(args.model, shapes, base, per, mb)]
        prof = synth_profile(rows, downgraded=not args.no_downgraded)
    if args.output:
        save_profile(prof, args.output)
    else:
        for model, shape, b, w in prof.entries():
            print(json.dumps({"model": model, "shape": shape.as_list(),
                              "batch_size": b, "wcet_us": w}))
    print(f"{sum(1 for _ in prof.entries())} entries", file=sys.stderr)
    return 0


def cmd_profile_validate(args) -> int:
    prof = load_profile(args.path)
    for model, shape in prof.keys():
        print(f"{model}\t{shape}\tmax_batch={prof.max_batch(model, shape)}")
    return 0


# -- trace ------------------------------------------------------------------

def cmd_trace_gen(args) -> int:
    if args.frames_max is not None:
        frames = (args.frames, args.frames_max)
    else:
        frames = args.frames
    cfg = TraceConfig(
        seed=_seed(args), num_requests=args.requests,
        mean_period_us=round(args.mean_period_ms * 1000),
        mean_deadline_us=round(args.mean_deadline_ms * 1000),
        arrival=args.arrival, arrival_interval_us=round(args.interval_ms * 1000),
        frames_per_request=frames, nonrt_fraction=args.nonrt_fraction,
        categories=DESKTOP_POOL)
    reqs = gen_trace(cfg)
    if args.output:
        save_trace(reqs, args.output)
    else:
        from .harness.trace import request_to_dict
        print(json.dumps({"requests": [request_to_dict(r) for r in reqs]}, indent=1))
    return 0


# -- admit / run / compare ---------------------------------------------------

def _options(args, *, replay=None) -> SimOptions:
    return SimOptions(early_dispatch=not args.no_early_dispatch,
                      adaptation=not args.no_adaptation, replay_admitted=replay)


def _exec_model(args, policy):
    model = exact_model
    if args.jitter:
        model = jitter_model(_seed(args), args.jitter)
    if args.inject:
        if not isinstance(policy, (DeepRT, SEDF)):
            raise CliError(f"--inject needs a policy that runs the worker (deeprt, sedf), "
                           f"not {policy.name}")
        start, count, extra = parse_inject(args.inject)
        model = inject_overruns(model, start, count, extra)
    return model


def _read_replay(path: str) -> frozenset[str]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("admitted", [])
    if not isinstance(data, list):
        raise CliError(f"{path}: expected a list of request ids")
    return frozenset(str(x) for x in data)


def cmd_admit(args) -> int:
    policy = policy_from_name(args.policy)
    if not isinstance(policy, (DeepRT, SEDF)):
        raise CliError("admission applies to deeprt and sedf only")
    m = run_simulation(load_trace(args.trace), policy, _profile(args),
                       options=SimOptions(early_dispatch=False, adaptation=False))
    w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    w.writerow(("request_id", "decision", "phase", "utilization", "predicted_max_latency_us",
                "reason"))
    for a in m.admissions:
        u = "" if a.utilization is None else f"{float(a.utilization):.4f}"
        lat = "" if a.predicted_max_latency_us is None else a.predicted_max_latency_us
        w.writerow((a.request_id, a.decision, a.phase, u, lat, a.reason))
    return 0


def _run_one(args, policy_name: str, trace, profile, outdir: Path, replay=None):
    policy = policy_from_name(policy_name)
    m = run_simulation(trace, policy, profile, _exec_model(args, policy),
                       _options(args, replay=replay))
    write_outputs(m, outdir)
    if isinstance(policy, (DeepRT, SEDF)) and replay is None:
        (outdir / "admitted.json").write_text(
            json.dumps(sorted(admitted_ids(m))) + "\n", encoding="utf-8")
    return m


def cmd_run(args) -> int:
    if args.jitter or args.seed is not None:
        _seed(args)
    replay = _read_replay(args.replay_admitted) if args.replay_admitted else None
    m = _run_one(args, args.policy, load_trace(args.trace), _profile(args), Path(args.out), replay)
    print(json.dumps(m.summary(), sort_keys=True))
    return 0


def cmd_compare(args) -> int:
    if args.jitter or args.seed is not None:
        _seed(args)
    names = [p.strip().lower() for p in args.policies.split(",") if p.strip()]
    if not names:
        raise CliError("no policies given")
    for n in names:
        policy_from_name(n)
    trace = load_trace(args.trace)
    profile = _profile(args)
    out = Path(args.out)
    if args.replay_admitted:
        replay = _read_replay(args.replay_admitted)
    else:
        # admitted set of the admission-controlled policy, shared by everyone
        ref = next((n for n in names if n in ("deeprt", "sedf")), "deeprt")
        ref_m = run_simulation(trace, policy_from_name(ref), profile,
                               _exec_model(args, policy_from_name(ref)), _options(args))
        replay = admitted_ids(ref_m)
    out.mkdir(parents=True, exist_ok=True)
    (out / "admitted.json").write_text(json.dumps(sorted(replay)) + "\n", encoding="utf-8")
    rows = []
    for name in sorted(names):
        m = _run_one(args, name, trace, profile, out / name, replay)
        rows.append(m.summary())
    cols = ("policy", "miss_rate", "throughput_fps", "frames", "missed", "overdue_p50_us",
            "overdue_p90_us", "overdue_p99_us")
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            w.writerow([r[c] for c in cols])
    w = csv.writer(sys.stdout, delimiter="\t", lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([f"{r[c]:.6g}" if isinstance(r[c], float) else r[c] for c in cols])
    return 0


# -- parser ------------------------------------------------------------------

def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", help="profile file (default: built-in reference profile)")
    p.add_argument("--trace", required=True, help="trace file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--no-early-dispatch", action="store_true")
    p.add_argument("--no-adaptation", action="store_true")
    p.add_argument("--replay-admitted", metavar="PATH",
                   help="JSON list of request ids to serve without admission")
    p.add_argument("--seed", type=int)
    p.add_argument("--jitter", type=float, default=0.0,
                   help="max fractional speed-up of actual over profiled time")
    p.add_argument("--inject", metavar="START:COUNT:EXTRA_US",
                   help="add EXTRA_US to COUNT consecutive jobs from job START")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtbatch", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    prof = sub.add_parser("profile", help="execution profiles").add_subparsers(
        dest="profile_command", required=True)
    ps = prof.add_parser("synth", help="write an affine synthetic profile")
    ps.add_argument("--model", action="append")
    ps.add_argument("--shape", action="append", help="CxHxW")
    ps.add_argument("--base-us", type=int, action="append")
    ps.add_argument("--per-frame-us", type=int, action="append")
    ps.add_argument("--max-batch", type=int, action="append")
    ps.add_argument("--no-downgraded", action="store_true",
                    help="omit the half-resolution entries")
    ps.add_argument("--reference", action="store_true",
                    help="use the built-in per-model timings instead of --base-us/--per-frame-us")
    ps.add_argument("-o", "--output")
    ps.set_defaults(func=cmd_profile_synth)
    pv = prof.add_parser("validate", help="parse and check a profile file")
    pv.add_argument("path")
    pv.set_defaults(func=cmd_profile_validate)

    tr = sub.add_parser("trace", help="request traces").add_subparsers(
        dest="trace_command", required=True)
    tg = tr.add_parser("gen", help="synthesize a trace")
    tg.add_argument("--seed", type=int)
    tg.add_argument("--requests", type=int, default=25)
    tg.add_argument("--mean-period-ms", type=float, default=50.0)
    tg.add_argument("--mean-deadline-ms", type=float, default=50.0)
    tg.add_argument("--arrival", choices=("fixed", "exponential"), default="exponential")
    tg.add_argument("--interval-ms", type=float, default=200.0)
    tg.add_argument("--frames", type=int, default=40)
    tg.add_argument("--frames-max", type=int, help="draw frame counts from [--frames, this]")
    tg.add_argument("--nonrt-fraction", type=float, default=0.0)
    tg.add_argument("-o", "--output")
    tg.set_defaults(func=cmd_trace_gen)

    ad = sub.add_parser("admit", help="admission decisions for a trace")
    ad.add_argument("--profile")
    ad.add_argument("--trace", required=True)
    ad.add_argument("--policy", default="deeprt", choices=("deeprt", "sedf"))
    ad.set_defaults(func=cmd_admit)

    rn = sub.add_parser("run", help="simulate one policy")
    rn.add_argument("--policy", default="deeprt")
    _sim_flags(rn)
    rn.set_defaults(func=cmd_run)

    cp = sub.add_parser("compare", help="simulate several policies on one admitted set")
    cp.add_argument("--policies", default="deeprt,aimd,batch,batch-delay")
    _sim_flags(cp)
    cp.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchedError, CliError, OSError, ValueError) as exc:
        print(f"rtbatch: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
