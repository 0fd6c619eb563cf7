"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from . import io as eio
from .core import Method, ProfileError
from .elections import (
    ElectionError,
    TieBreakMode,
    TieBreakPolicy,
    TransferMode,
    TransferPolicy,
    reference_stv,
    run_method,
    stv,
    trace_mismatches,
)
from .inference import ImplicitFeedback, InferenceError, RatingMatrix, affinity_profile, infer_profile, train_nmf
from .metrics import MetricError
from .pipeline import (
    PipelineError,
    RunConfig,
    affinity_from_files,
    compare_methods,
    load_demographics,
    run_pipeline,
    write_comparison,
)
from .simulation import (
    CycleSpec,
    ElectorateSpec,
    SimulationError,
    adversarial_spec,
    generate_electorate,
    generate_reading_log,
    random_election,
    table1_fixture,
    table1_spec,
    window_events,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InvariantViolation(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _policies(args: argparse.Namespace) -> tuple[TransferPolicy, TieBreakPolicy]:
    return (TransferPolicy(TransferMode(args.transfer), args.seed),
            TieBreakPolicy(TieBreakMode(args.tiebreak), args.seed))


def _events_as_records(events) -> list[dict]:
    return [{"ts": 0.0, "voter": e.voter, "item": e.candidate, "count": e.multiplicity} for e in events]


def cmd_elect(args: argparse.Namespace) -> int:
    method = Method.parse(args.method)
    transfer, ties = _policies(args)
    if method is Method.EXTERNAL:
        if not args.winners:
            raise UsageError("external needs --winners")
        inputs = eio.read_winner_list(args.winners)
    elif method in (Method.STV, Method.PLVSTAR):
        if not args.profile:
            raise UsageError(f"{args.method} needs --profile")
        inputs = eio.read_profile(args.profile, eio.read_pool(args.pool) if args.pool else None)
    else:
        if not args.events:
            raise UsageError(f"{args.method} needs --events")
        inputs = eio.read_votes(args.events)
    result = run_method(method, inputs, args.k, transfer, ties, workers=args.workers)
    if args.out:
        eio.write_result(args.out, result)
    print("winners: " + ", ".join(result.winners))
    return EXIT_OK


def cmd_infer(args: argparse.Namespace) -> int:
    if args.kind == "nmf":
        fb = ImplicitFeedback(tuple(eio.read_feedback(args.feedback)))
        ratings = RatingMatrix.from_feedback(fb)
        model = train_nmf(ratings, args.z, args.lam, args.learning_rate, args.epochs, args.seed)
        model.save(args.out)
        print(f"trained {len(ratings)} ratings, objective {model.objective[0]:.6g} -> {model.objective[-1]:.6g}")
        if args.profile_out:
            eio.write_profile(args.profile_out, infer_profile(ratings, model, seed=args.seed))
        return EXIT_OK
    if not (args.h or args.postings):
        raise UsageError("affinity needs --h or --postings")
    users, items, aff, _ = affinity_from_files(args.u, args.experts, args.h, args.postings)
    votes = eio.read_votes(args.votes) if args.votes else []
    profile = affinity_profile(aff, users, items, votes, args.seed)
    eio.write_profile(args.out, profile)
    print(f"wrote {profile.n} ballots over {profile.m} items")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.feedback_out:
        log = generate_reading_log(args.users, args.items, seed=args.seed if args.seed is not None else 0)
        Path(args.feedback_out).write_text(
            "user_id,item_id,duration_seconds\n" + "".join(f"{u},{i},{v!r}\n" for u, i, v in log.entries),
            encoding="utf-8")
        print(f"wrote {len(log.entries)} feedback rows")
        return EXIT_OK
    if args.preset == "table1-fixture":
        profile, events = table1_fixture(), []
    else:
        if args.preset == "table1":
            spec = table1_spec(args.seed or 0)
        elif args.preset == "adversarial":
            spec = adversarial_spec(args.seed or 0)
        elif args.spec:
            spec = ElectorateSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
        else:
            raise UsageError("give --spec, --preset or --feedback-out")
        if args.seed is not None:
            spec = ElectorateSpec.from_dict({**spec.to_dict(), "seed": args.seed})
        profile, events = generate_electorate(spec)
    if args.out_profile:
        eio.write_profile(args.out_profile, profile)
    if args.out_events:
        eio.write_event_log(args.out_events, _events_as_records(events))
    print(f"{profile.n} ballots, {profile.m} candidates, {len(events)} vote events")
    return EXIT_OK


def cmd_cycles(args: argparse.Namespace) -> int:
    cycles = window_events(eio.read_event_log(args.events), CycleSpec(args.window, args.pool_size, args.jump))
    out = []
    for c in cycles:
        pool = list(c.pool.candidates) if c.pool is not None else []
        out.append({"index": c.index, "start": c.start, "end": c.end, "events": len(c.records), "pool": pool})
        print(f"cycle {c.index} [{c.start}, {c.end}): {len(c.records)} events, pool {len(pool)}")
    if args.out:
        eio.write_json(args.out, out)
    return EXIT_OK


def cmd_metrics(args: argparse.Namespace) -> int:
    profile = eio.read_profile(args.profile, eio.read_pool(args.pool) if args.pool else None)
    results = [eio.read_result(p) for p in args.result]
    results += [run_method(Method.EXTERNAL, eio.read_winner_list(p)) for p in args.winners]
    if not results:
        raise UsageError("give at least one --result or --winners file")
    events = eio.read_votes(args.events) if args.events else None
    demo = None
    if args.demographics:
        demo = load_demographics(args.demographics, profile)
    comp = compare_methods(results, profile, events=events, demographics=demo,
                           t=args.t, x=args.x, threshold=args.threshold, bins=args.bins)
    for rep in comp.reports:
        print(f"{rep.method}: usi={rep.usi:.4f} anti_plurality={rep.anti_plurality:.4f}")
    if args.out_dir:
        write_comparison(Path(args.out_dir), comp, {})
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = RunConfig.load(args.config)
    if args.workers is not None:
        cfg.workers = args.workers
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    manifest = run_pipeline(cfg)
    for name in sorted(manifest.outputs):
        print(f"{name}  {manifest.outputs[name][:16]}")
    return EXIT_OK


def cmd_oracle_check(args: argparse.Namespace) -> int:
    mismatches = 0
    for r in range(args.runs):
        seed = args.seed + r
        profile, k = random_election(seed, args.max_n, args.max_m, args.max_k)
        for mode in TransferMode:
            transfer = TransferPolicy(mode, seed)
            ties = TieBreakPolicy(TieBreakMode.SEEDED_RANDOM if r % 2 else TieBreakMode.LEXICOGRAPHIC, seed)
            diff = trace_mismatches(stv(profile, k, transfer, ties), reference_stv(profile, k, transfer, ties))
            if diff:
                mismatches += 1
                print(f"seed {seed} {mode.value}: {diff[0]}")
    print(f"{args.runs} instances x {len(TransferMode)} transfer modes, {mismatches} mismatches")
    if mismatches:
        raise InvariantViolation(f"{mismatches} oracle mismatches")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="equivoice", description="Fair top-K selection with multi-winner elections.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    e = sub.add_parser("elect", help="run one counting method")
    e.add_argument("--method", required=True, choices=["wv", "plv", "plvstar", "stv", "external"])
    e.add_argument("--k", type=int)
    e.add_argument("--profile")
    e.add_argument("--pool")
    e.add_argument("--events")
    e.add_argument("--winners")
    e.add_argument("--transfer", default="fractional", choices=[m.value for m in TransferMode])
    e.add_argument("--tiebreak", default="lex", choices=[m.value for m in TieBreakMode])
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--out")
    e.set_defaults(func=cmd_elect)

    inf = sub.add_parser("infer", help="complete rankings from feedback or affinities")
    isub = inf.add_subparsers(dest="kind", required=True, parser_class=_Parser)
    n = isub.add_parser("nmf")
    n.add_argument("--feedback", required=True)
    n.add_argument("--z", type=int, default=20)
    n.add_argument("--lambda", dest="lam", type=float, default=0.05)
    n.add_argument("--learning-rate", type=float, default=0.005)
    n.add_argument("--epochs", type=int, default=50)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out", required=True, help="model checkpoint (JSON)")
    n.add_argument("--profile-out")
    a = isub.add_parser("affinity")
    a.add_argument("--u", required=True)
    a.add_argument("--experts", required=True)
    a.add_argument("--h")
    a.add_argument("--postings")
    a.add_argument("--votes")
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", required=True)
    inf.set_defaults(func=cmd_infer)

    s = sub.add_parser("simulate", help="generate synthetic electorates")
    s.add_argument("--spec")
    s.add_argument("--preset", choices=["table1", "table1-fixture", "adversarial"])
    s.add_argument("--seed", type=int)
    s.add_argument("--out-profile")
    s.add_argument("--out-events")
    s.add_argument("--feedback-out", help="write a synthetic dwell-time CSV instead")
    s.add_argument("--users", type=int, default=100)
    s.add_argument("--items", type=int, default=50)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("cycles", help="window an event log into election cycles")
    c.add_argument("--events", required=True)
    c.add_argument("--window", type=float, default=900)
    c.add_argument("--pool-size", type=int, default=1000)
    c.add_argument("--jump", choices=["absolute", "relative"], default="absolute")
    c.add_argument("--out")
    c.set_defaults(func=cmd_cycles)

    m = sub.add_parser("metrics", help="score winner sets against a profile")
    m.add_argument("--profile", required=True)
    m.add_argument("--pool")
    m.add_argument("--result", action="append", default=[])
    m.add_argument("--winners", action="append", default=[])
    m.add_argument("--events")
    m.add_argument("--demographics")
    m.add_argument("--t", type=int, default=10)
    m.add_argument("--x", type=float, default=10)
    m.add_argument("--threshold", type=float, default=0.8)
    m.add_argument("--bins", type=int, default=10)
    m.add_argument("--out-dir")
    m.set_defaults(func=cmd_metrics)

    pl = sub.add_parser("pipeline", help="run a JSON RunConfig end to end")
    pl.add_argument("--config", required=True)
    pl.add_argument("--workers", type=int)
    pl.add_argument("--output-dir")
    pl.set_defaults(func=cmd_pipeline)

    o = sub.add_parser("oracle-check", help="compare stv against the naive reference count")
    o.add_argument("--runs", type=int, default=1000)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--max-n", type=int, default=50)
    o.add_argument("--max-m", type=int, default=8)
    o.add_argument("--max-k", type=int, default=3)
    o.set_defaults(func=cmd_oracle_check)
    return p


_DATA_ERRORS = (eio.DataFormatError, ProfileError, FileNotFoundError, ElectionError, MetricError,
                InferenceError, SimulationError, json.JSONDecodeError, ValueError, KeyError)


def _code_for(exc: BaseException) -> int:
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, (InvariantViolation, AssertionError)):
        return EXIT_INVARIANT
    if isinstance(exc, _DATA_ERRORS):
        return EXIT_DATA
    return EXIT_INVARIANT


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _code_for(exc.cause)
    except Exception as exc:
        code = _code_for(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
