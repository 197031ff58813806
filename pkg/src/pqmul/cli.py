"""Command-line entry point.

Subcommands: multiply, count-check, bench, calibrate, select, simulate.

Exit codes: 0 success, 2 invalid input/plan/file, 3 self-check failure
(methods disagree), 4 capacity or environment error, 5 calibration/coverage
error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .bench import (
    BenchmarkSpec,
    aggregate,
    export_records,
    format_aggregate_table,
    import_records,
    run_benchmark,
    write_metadata_sidecar,
)
from .errors import (
    CalibrationError,
    CapacityError,
    CoverageError,
    InvalidInputError,
    PqmulError,
    ResourceError,
    TimerResolutionError,
)
from .multipliers import (
    DEFAULT_BASE_CUTOFF,
    MethodPlan,
    multiply,
    predicted_mult_count,
)
from .parallel import ParallelConfig, parallel_mul
from .policy import TimeModel, calibrate, load_rules, save_rules, select_method
from .policy import SystemState
from .poly import OperationCounter, Polynomial, schoolbook_mul
from .simulator import load_scenario, render_report, run_simulation

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SELF_CHECK = 3
EXIT_CAPACITY = 4
EXIT_COVERAGE = 5


def _parse_poly(text: str, modulus: int | None) -> Polynomial:
    """Inline "3,10,8" (lowest degree first) or @file with one value per line."""
    if text.startswith("@"):
        with open(text[1:], encoding="utf-8") as fh:
            values = [line.strip() for line in fh if line.strip()]
    else:
        values = text.split(",")
    try:
        coeffs = [int(v) for v in values]
    except ValueError as exc:
        raise InvalidInputError(f"bad coefficient in {text!r}: {exc}") from exc
    return Polynomial(coeffs, modulus)


def _parse_int_list(text: str) -> list[int]:
    """"0:90:5" inclusive range or "0,5,25" comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise InvalidInputError(f"range must be start:stop:step, got {text!r}")
        start, stop, step = (int(p) for p in parts)
        if step < 1:
            raise InvalidInputError("range step must be >= 1")
        return list(range(start, stop + 1, step))
    return [int(v) for v in text.split(",")]


def _parse_plan(token: str, default_cutoff: int) -> MethodPlan:
    """Plan tokens: schoolbook | karatsuba | toom3 | toom4 [:wN] [:cN]."""
    parts = token.split(":")
    name = parts[0]
    workers, cutoff = 1, default_cutoff
    for extra in parts[1:]:
        if extra.startswith("w"):
            workers = int(extra[1:])
        elif extra.startswith("c"):
            cutoff = int(extra[1:])
        else:
            raise InvalidInputError(f"bad plan modifier {extra!r} in {token!r}")
    if name == "schoolbook":
        return MethodPlan.schoolbook(workers=workers)
    if name == "karatsuba":
        return MethodPlan.karatsuba(workers=workers, base_cutoff=cutoff)
    if name in ("toom3", "toom4"):
        return MethodPlan.toom(k=int(name[-1]), workers=workers,
                               base_cutoff=cutoff)
    raise InvalidInputError(f"unknown plan {name!r}")


def _plan_from_flags(args) -> MethodPlan:
    if args.method == "schoolbook":
        return MethodPlan.schoolbook(workers=args.workers)
    if args.method == "karatsuba":
        return MethodPlan.karatsuba(workers=args.workers,
                                    base_cutoff=args.cutoff)
    return MethodPlan.toom(k=args.k, workers=args.workers,
                           base_cutoff=args.cutoff)


def _parse_bands(text: str) -> list[tuple[int, int]]:
    bands = []
    for token in text.split(","):
        lo, sep, hi = token.partition("-")
        if not sep:
            raise InvalidInputError(f"band must be min-max, got {token!r}")
        bands.append((int(lo), int(hi)))
    return bands


class LiveTimer:
    """predict() look-alike that actually multiplies and times it."""

    def __init__(self, seed: int = 0, modulus: int | None = 4096):
        self._seed = seed
        self._modulus = modulus
        self._calls = 0

    def predict(self, plan: MethodPlan, degree: int, load_pct: float) -> float:
        bound = self._modulus if self._modulus is not None else 4096
        self._calls += 1
        a = Polynomial.random(degree, bound, self._seed * 2 + self._calls * 7919,
                              self._modulus)
        b = Polynomial.random(degree, bound, self._seed * 2 + self._calls * 7919 + 1,
                              self._modulus)
        t0 = time.perf_counter_ns()
        parallel_mul(a, b, plan, ParallelConfig(workers=plan.workers))
        return float(time.perf_counter_ns() - t0)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_multiply(args) -> int:
    plan = _plan_from_flags(args)
    a = _parse_poly(args.a, args.modulus)
    b = _parse_poly(args.b, args.modulus)
    counter = OperationCounter()
    if plan.workers > 1:
        result, counter = parallel_mul(a, b, plan)
    else:
        result = multiply(a, b, plan, counter)
    reference = schoolbook_mul(a, b)
    if result != reference:
        print(f"self-check failure: {plan.label} disagrees with schoolbook",
              file=sys.stderr)
        return EXIT_SELF_CHECK
    if args.format == "json":
        print(json.dumps({
            "coeffs": list(result.coeffs),
            "fundamental_mults": counter.fundamental_mults,
            "fundamental_adds": counter.fundamental_adds,
            "plan": plan.as_dict()}))
    else:
        print(",".join(str(c) for c in result.coeffs))
        print(f"fundamental_mults={counter.fundamental_mults} "
              f"fundamental_adds={counter.fundamental_adds}")
    return EXIT_OK


def cmd_count_check(args) -> int:
    """Verify measured base-case multiplication counts against the formulas."""
    failures = 0
    for n in _parse_int_list(args.lengths):
        if args.method == "schoolbook":
            plan = MethodPlan.schoolbook()
        elif args.method == "karatsuba":
            plan = MethodPlan.karatsuba(base_cutoff=1)
        else:
            plan = MethodPlan.toom(k=args.k, base_cutoff=1)
        a = Polynomial.random(n, 64, args.seed * 2 + n, args.modulus) \
            if n > 1 else Polynomial([1], args.modulus)
        b = Polynomial.random(n, 64, args.seed * 2 + n + 1, args.modulus) \
            if n > 1 else Polynomial([1], args.modulus)
        counter = OperationCounter()
        multiply(a, b, plan, counter)
        predicted = predicted_mult_count(plan, n)
        ok = counter.fundamental_mults == predicted
        failures += 0 if ok else 1
        print(f"N={n} measured={counter.fundamental_mults} "
              f"predicted={predicted} {'ok' if ok else 'MISMATCH'}")
    return EXIT_OK if failures == 0 else EXIT_SELF_CHECK


def cmd_bench(args) -> int:
    plans = tuple(_parse_plan(tok, args.cutoff) for tok in args.plans.split(","))
    spec = BenchmarkSpec(
        degrees=tuple(_parse_int_list(args.degrees)),
        plans=plans,
        load_levels_pct=tuple(_parse_int_list(args.loads)),
        loaded_workers=args.loaded_workers,
        runs=args.runs,
        seed=args.seed,
        modulus=args.modulus)
    records = run_benchmark(spec)
    export_records(records, args.format, args.out)
    meta = write_metadata_sidecar(args.out)
    print(format_aggregate_table(aggregate(records)))
    print(f"wrote {len(records)} records to {args.out} (metadata: {meta})")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    records = import_records(args.records)
    if args.bands:
        bands = _parse_bands(args.bands)
    else:
        bands = [(d, d) for d in sorted({r.degree for r in records})]
    table = calibrate(records, bands)
    save_rules(table, args.out)
    for e in table.entries:
        print(f"band [{e.degree_min}, {e.degree_max}]: "
              f"parallel_vs_karatsuba={e.threshold_parallel_vs_karatsuba_pct:.1f}% "
              f"parallel_vs_sequential={e.threshold_parallel_vs_sequential_pct:.1f}%")
    print(f"wrote rules to {args.out}")
    return EXIT_OK


def cmd_select(args) -> int:
    table = load_rules(args.rules)
    plan = select_method(table, SystemState(
        degree=args.degree, load_pct=args.load,
        available_cores=args.cores))
    print(json.dumps(plan.as_dict()))
    return EXIT_OK


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        from dataclasses import replace
        scenario = replace(scenario, seed=args.seed)
    table = load_rules(args.rules) if args.rules else None
    if args.live:
        model = LiveTimer(seed=scenario.seed, modulus=args.modulus)
    elif args.records:
        model = TimeModel.from_records(import_records(args.records))
    else:
        raise InvalidInputError("simulate needs --records or --live")
    report = run_simulation(scenario, table, model)
    render_report(report, args.format, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sub, *, modulus_default=None):
    sub.add_argument("--seed", type=int, default=0,
                     help="base RNG seed (default 0)")
    sub.add_argument("--modulus", type=int, default=modulus_default,
                     help="coefficient modulus q; omit for signed integers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pqmul",
        description="Polynomial multiplication back ends, benchmarks under "
                    "synthetic CPU load, and load-aware method selection.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("multiply", help="multiply two polynomials")
    p.add_argument("--method", choices=["schoolbook", "karatsuba", "toom"],
                   required=True)
    p.add_argument("--k", type=int, default=3, help="Toom splitting factor")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--cutoff", type=int, default=DEFAULT_BASE_CUTOFF)
    p.add_argument("--a", required=True,
                   help="coefficients '3,4' (lowest first) or @file")
    p.add_argument("--b", required=True)
    p.add_argument("--format", choices=["text", "json"], default="text")
    _add_common(p)
    p.set_defaults(func=cmd_multiply)

    p = subs.add_parser("count-check",
                        help="verify operation counts against the formulas "
                             "(base cutoff forced to 1)")
    p.add_argument("--method", choices=["schoolbook", "karatsuba", "toom"],
                   required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--lengths", required=True,
                   help="lengths to check, e.g. '4,64,512' or '1:64:1'")
    _add_common(p)
    p.set_defaults(func=cmd_count_check)

    p = subs.add_parser("bench", help="run the Monte Carlo benchmark grid")
    p.add_argument("--degrees", default="512")
    p.add_argument("--loads", default="0:90:5")
    p.add_argument("--loaded-workers", type=int, default=4, dest="loaded_workers")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--plans", default="karatsuba:w1,toom3:w1,toom3:w5")
    p.add_argument("--cutoff", type=int, default=DEFAULT_BASE_CUTOFF,
                   help="base cutoff for plans without :cN")
    p.add_argument("--out", required=True, help="records file to write")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    _add_common(p, modulus_default=4096)
    p.set_defaults(func=cmd_bench)

    p = subs.add_parser("calibrate", help="build a rule table from records")
    p.add_argument("--records", required=True)
    p.add_argument("--bands", default=None,
                   help="degree bands 'min-max,min-max'; default: one band "
                        "per distinct degree")
    p.add_argument("--out", required=True, help="rules file to write")
    p.set_defaults(func=cmd_calibrate)

    p = subs.add_parser("select", help="pick a plan for a system state")
    p.add_argument("--rules", required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--load", type=float, required=True)
    p.add_argument("--cores", type=int, required=True)
    p.set_defaults(func=cmd_select)

    p = subs.add_parser("simulate", help="run the handover simulator")
    p.add_argument("--scenario", required=True)
    p.add_argument("--rules", default=None)
    p.add_argument("--records", default=None,
                   help="benchmark records for the time model")
    p.add_argument("--live", action="store_true",
                   help="time real multiplications instead of the model")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--output", default=None, help="write report here")
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario seed")
    p.add_argument("--modulus", type=int, default=4096)
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CapacityError, ResourceError, TimerResolutionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (CalibrationError, CoverageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COVERAGE
    except (PqmulError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
