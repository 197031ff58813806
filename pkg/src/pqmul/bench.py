"""Monte Carlo timing harness: (method, degree, load) grid under live load.

For each cell the harness starts the load profile, does two untimed warm-up
multiplications, then times `runs` multiplications of freshly sampled
operands on the monotonic clock.  Cells run strictly sequentially; fresh
operands per run are derived deterministically from the spec seed and the
cell indices, so two runs of the same spec produce identical operands and
identical mult_count columns (only the timings differ).
"""

from __future__ import annotations

import csv
import json
import platform
import statistics
import time
from dataclasses import dataclass

from .errors import CapacityError, InvalidInputError, TimerResolutionError
from .loadgen import DEFAULT_PERIOD_MS, LoadProfile, start_load, usable_cpu_count
from .multipliers import MethodPlan
from .parallel import ParallelConfig, parallel_mul
from .poly import Polynomial

#: Coefficient bound for generated operands when no modulus is given
#: (matches the CLI's default modulus).
DEFAULT_COEFF_BOUND = 4096

#: Untimed multiplications per cell before the timed runs.
WARMUP_RUNS = 2

CSV_COLUMNS = ("method", "k", "workers", "base_cutoff", "degree",
               "load_pct", "run_index", "elapsed_ns", "mult_count")


@dataclass(frozen=True)
class BenchmarkSpec:
    """One benchmark campaign: the full grid plus sampling parameters."""

    degrees: tuple[int, ...]
    plans: tuple[MethodPlan, ...]
    load_levels_pct: tuple[int, ...]
    loaded_workers: int = 4
    runs: int = 10
    seed: int = 0
    modulus: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(self.degrees))
        object.__setattr__(self, "plans", tuple(self.plans))
        object.__setattr__(self, "load_levels_pct", tuple(self.load_levels_pct))
        if not self.degrees or not self.plans or not self.load_levels_pct:
            raise InvalidInputError(
                "degrees, plans and load_levels_pct must all be non-empty")
        if any(d < 1 for d in self.degrees):
            raise InvalidInputError("degrees must be >= 1")
        if any(not 0 <= l <= 100 for l in self.load_levels_pct):
            raise InvalidInputError("load levels must be in [0, 100]")
        if self.loaded_workers < 0:
            raise InvalidInputError("loaded_workers must be >= 0")
        if self.runs < 1:
            raise InvalidInputError("runs must be >= 1")


@dataclass(frozen=True)
class BenchmarkRecord:
    """One timed multiplication."""

    method: str
    k: int
    workers: int
    base_cutoff: int
    degree: int
    load_pct: int
    run_index: int
    elapsed_ns: int
    mult_count: int

    @property
    def plan(self) -> MethodPlan:
        return MethodPlan(method=self.method, k=self.k, workers=self.workers,
                          base_cutoff=self.base_cutoff)


@dataclass(frozen=True)
class CellStats:
    """Aggregate statistics for one (plan, degree, load) cell."""

    method: str
    k: int
    workers: int
    base_cutoff: int
    degree: int
    load_pct: int
    runs: int
    mean_ns: float
    std_ns: float
    min_ns: int
    max_ns: int
    mult_count: int


def _derive_seed(base: int, *indices: int) -> int:
    # splitmix-style mixing; must not depend on Python's salted hash()
    h = base & 0xFFFFFFFFFFFFFFFF
    for i in indices:
        h = (h ^ (i + 0x9E3779B97F4A7C15)) & 0xFFFFFFFFFFFFFFFF
        h = (h * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        h ^= h >> 31
    return h


def _check_timer() -> None:
    info = time.get_clock_info("perf_counter")
    if info.resolution > 1e-6:
        raise TimerResolutionError(
            f"perf_counter resolution {info.resolution}s is coarser than 1 us")


def run_benchmark(spec: BenchmarkSpec) -> list[BenchmarkRecord]:
    """Execute the whole grid and return one record per timed run.

    Record order is deterministic: degrees x loads x plans x runs, nested in
    that order.  The load profile is started before and stopped after each
    cell; only the multiplication call itself is timed.
    """
    _check_timer()
    if usable_cpu_count() < spec.loaded_workers + 1:
        raise CapacityError(
            f"host has {usable_cpu_count()} usable cores; "
            f"{spec.loaded_workers} loaded workers + 1 free core needed")
    bound = spec.modulus if spec.modulus is not None else DEFAULT_COEFF_BOUND
    records = []
    for di, degree in enumerate(spec.degrees):
        for li, load in enumerate(spec.load_levels_pct):
            for pi, plan in enumerate(spec.plans):
                handle = start_load(LoadProfile(
                    spec.loaded_workers, load, DEFAULT_PERIOD_MS))
                try:
                    cfg = ParallelConfig(workers=plan.workers)
                    for warm in range(WARMUP_RUNS):
                        a = Polynomial.random(degree, bound, _derive_seed(
                            spec.seed, di, li, pi, 10_000 + warm, 0), spec.modulus)
                        b = Polynomial.random(degree, bound, _derive_seed(
                            spec.seed, di, li, pi, 10_000 + warm, 1), spec.modulus)
                        parallel_mul(a, b, plan, cfg)
                    for run in range(spec.runs):
                        a = Polynomial.random(degree, bound, _derive_seed(
                            spec.seed, di, li, pi, run, 0), spec.modulus)
                        b = Polynomial.random(degree, bound, _derive_seed(
                            spec.seed, di, li, pi, run, 1), spec.modulus)
                        t0 = time.perf_counter_ns()
                        _, counter = parallel_mul(a, b, plan, cfg)
                        elapsed = time.perf_counter_ns() - t0
                        records.append(BenchmarkRecord(
                            method=plan.method, k=plan.k, workers=plan.workers,
                            base_cutoff=plan.base_cutoff, degree=degree,
                            load_pct=load, run_index=run,
                            elapsed_ns=max(elapsed, 1),
                            mult_count=counter.fundamental_mults))
                finally:
                    handle.stop()
    return records


def aggregate(records: list[BenchmarkRecord]) -> list[CellStats]:
    """Per-cell mean/std/min/max of elapsed_ns, in first-appearance order."""
    if not records:
        raise InvalidInputError("no records to aggregate")
    cells: dict[tuple, list[BenchmarkRecord]] = {}
    for r in records:
        key = (r.method, r.k, r.workers, r.base_cutoff, r.degree, r.load_pct)
        cells.setdefault(key, []).append(r)
    out = []
    for key, rs in cells.items():
        times = [r.elapsed_ns for r in rs]
        out.append(CellStats(
            method=key[0], k=key[1], workers=key[2], base_cutoff=key[3],
            degree=key[4], load_pct=key[5], runs=len(rs),
            mean_ns=statistics.fmean(times),
            std_ns=statistics.pstdev(times),
            min_ns=min(times), max_ns=max(times),
            mult_count=rs[0].mult_count))
    return out


def format_aggregate_table(stats: list[CellStats]) -> str:
    header = (f"{'method':<12} {'k':>2} {'w':>2} {'cut':>4} {'degree':>6} "
              f"{'load%':>5} {'runs':>4} {'mean_ms':>10} {'std_ms':>9} "
              f"{'min_ms':>9} {'max_ms':>9} {'mults':>10}")
    lines = [header, "-" * len(header)]
    for s in stats:
        lines.append(
            f"{s.method:<12} {s.k:>2} {s.workers:>2} {s.base_cutoff:>4} "
            f"{s.degree:>6} {s.load_pct:>5} {s.runs:>4} "
            f"{s.mean_ns / 1e6:>10.3f} {s.std_ns / 1e6:>9.3f} "
            f"{s.min_ns / 1e6:>9.3f} {s.max_ns / 1e6:>9.3f} {s.mult_count:>10}")
    return "\n".join(lines)


def export_records(records: list[BenchmarkRecord], fmt: str, path) -> None:
    """Write records as CSV (fixed column order, LF endings) or JSON."""
    if fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in records:
                writer.writerow([r.method, r.k, r.workers, r.base_cutoff,
                                 r.degree, r.load_pct, r.run_index,
                                 r.elapsed_ns, r.mult_count])
    elif fmt == "json":
        rows = [{col: getattr(r, col) for col in CSV_COLUMNS} for r in records]
        with open(path, "w", encoding="utf-8", newline="") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    else:
        raise InvalidInputError(f"unknown record format {fmt!r}")


def import_records(path, fmt: str | None = None) -> list[BenchmarkRecord]:
    """Read records written by export_records; fmt inferred from the suffix."""
    if fmt is None:
        fmt = "json" if str(path).endswith(".json") else "csv"
    records = []
    if fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != list(CSV_COLUMNS):
                raise InvalidInputError(
                    f"{path}: unexpected CSV header {reader.fieldnames}")
            for row in reader:
                records.append(_record_from_row(row, path))
    elif fmt == "json":
        with open(path, encoding="utf-8") as fh:
            rows = json.load(fh)
        if not isinstance(rows, list):
            raise InvalidInputError(f"{path}: expected a JSON array of records")
        for row in rows:
            records.append(_record_from_row(row, path))
    else:
        raise InvalidInputError(f"unknown record format {fmt!r}")
    return records


def _record_from_row(row: dict, path) -> BenchmarkRecord:
    try:
        return BenchmarkRecord(
            method=str(row["method"]), k=int(row["k"]),
            workers=int(row["workers"]), base_cutoff=int(row["base_cutoff"]),
            degree=int(row["degree"]), load_pct=int(row["load_pct"]),
            run_index=int(row["run_index"]), elapsed_ns=int(row["elapsed_ns"]),
            mult_count=int(row["mult_count"]))
    except (KeyError, ValueError) as exc:
        raise InvalidInputError(f"{path}: bad record row {row!r}: {exc}") from exc


def host_metadata() -> dict:
    """Host facts recorded next to benchmark results (cannot enforce idleness)."""
    return {
        "cpu_count": usable_cpu_count(),
        "platform": platform.platform(),
        "python": platform.python_version(),
    }


def write_metadata_sidecar(records_path) -> str:
    path = f"{records_path}.meta.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(host_metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
