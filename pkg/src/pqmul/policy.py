"""Load-aware method selection: calibrated rule table + time model.

Calibration turns benchmark records into per-degree-band load thresholds:
the load at which sequential Karatsuba's mean time first beats parallel
Toom-Cook's (linear interpolation between sampled loads), and likewise for
sequential Toom-Cook vs its parallel variant.  Selection is then a pure
table lookup: parallel Toom-Cook below the first threshold, Karatsuba above
it, and Karatsuba unconditionally on a single core.  Sequential Toom-Cook is
calibrated and reported but never selected - at one worker it is dominated
by Karatsuba.

The rule file is JSON (schema in save_rules) and survives save -> load ->
save byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .bench import BenchmarkRecord
from .errors import (
    CalibrationError,
    CoverageError,
    InvalidInputError,
    InvalidPlanError,
    RuleTableError,
)
from .multipliers import KARATSUBA, TOOMCOOK, MethodPlan

RULE_FILE_VERSION = 1


@dataclass(frozen=True)
class SystemState:
    """What the selector sees about a node at decision time."""

    degree: int
    load_pct: float
    available_cores: int

    def __post_init__(self):
        if self.degree < 1:
            raise InvalidInputError(f"degree must be >= 1, got {self.degree}")
        if not 0 <= self.load_pct <= 100:
            raise InvalidInputError(
                f"load_pct must be in [0, 100], got {self.load_pct}")
        if self.available_cores < 1:
            raise InvalidInputError(
                f"available_cores must be >= 1, got {self.available_cores}")


@dataclass(frozen=True)
class RuleEntry:
    """Thresholds and candidate plans for one degree band (inclusive)."""

    degree_min: int
    degree_max: int
    min_cores: int
    threshold_parallel_vs_karatsuba_pct: float
    threshold_parallel_vs_sequential_pct: float
    parallel_plan: MethodPlan
    karatsuba_plan: MethodPlan
    sequential_plan: MethodPlan

    def covers(self, degree: int) -> bool:
        return self.degree_min <= degree <= self.degree_max


@dataclass(frozen=True)
class RuleTable:
    """The persisted decision table: ordered disjoint degree bands."""

    entries: tuple[RuleEntry, ...]
    default_plan: MethodPlan
    version: int = RULE_FILE_VERSION

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        self.validate()

    def validate(self) -> None:
        if self.default_plan.method != KARATSUBA or self.default_plan.workers != 1:
            raise RuleTableError(
                f"default_plan must be sequential Karatsuba, got "
                f"{self.default_plan.label}")
        prev = None
        for i, e in enumerate(self.entries):
            where = f"entries[{i}]"
            if e.degree_min > e.degree_max:
                raise RuleTableError(
                    f"{where}.degree_band: min {e.degree_min} > max {e.degree_max}")
            if prev is not None and e.degree_min <= prev.degree_max:
                raise RuleTableError(
                    f"{where}.degree_band: band [{e.degree_min}, {e.degree_max}] "
                    f"overlaps or is out of order with "
                    f"[{prev.degree_min}, {prev.degree_max}]")
            for name, thr in (
                    ("parallel_vs_karatsuba_pct",
                     e.threshold_parallel_vs_karatsuba_pct),
                    ("parallel_vs_sequential_pct",
                     e.threshold_parallel_vs_sequential_pct)):
                if not 0 <= thr <= 100:
                    raise RuleTableError(
                        f"{where}.thresholds.{name}: {thr} outside [0, 100]")
            pk = e.threshold_parallel_vs_karatsuba_pct
            ps = e.threshold_parallel_vs_sequential_pct
            if 0 < pk < 100 and 0 < ps < 100 and pk > ps:
                raise RuleTableError(
                    f"{where}.thresholds: parallel loses to Karatsuba at {pk} "
                    f"but to sequential Toom-Cook already at {ps}")
            if e.min_cores < 1:
                raise RuleTableError(f"{where}.min_cores: must be >= 1")
            if e.parallel_plan.workers < 2:
                raise RuleTableError(
                    f"{where}.plans.parallel: needs workers >= 2")
            if e.karatsuba_plan.method != KARATSUBA or e.karatsuba_plan.workers != 1:
                raise RuleTableError(
                    f"{where}.plans.karatsuba: must be sequential Karatsuba")
            if e.sequential_plan.method != TOOMCOOK or e.sequential_plan.workers != 1:
                raise RuleTableError(
                    f"{where}.plans.sequential: must be sequential Toom-Cook")
            prev = e

    def entry_for(self, degree: int) -> RuleEntry | None:
        for e in self.entries:
            if e.covers(degree):
                return e
        return None


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def _mean_curve(records: list[BenchmarkRecord]) -> dict[int, float]:
    sums: dict[int, list] = {}
    for r in records:
        acc = sums.setdefault(r.load_pct, [0, 0])
        acc[0] += r.elapsed_ns
        acc[1] += 1
    return {load: s / n for load, (s, n) in sums.items()}


def _first_crossover(loads: list[int], parallel: dict[int, float],
                     rival: dict[int, float]) -> float:
    """First load at which the rival's mean time beats the parallel plan's.

    Linear interpolation between the adjacent sampled loads; 100 if the
    parallel plan wins everywhere in the sweep, 0 if it never wins.
    """
    diffs = [rival[l] - parallel[l] for l in loads]  # > 0: parallel wins
    if diffs[0] < 0:
        return 0.0
    for i in range(1, len(loads)):
        if diffs[i] < 0:
            lo, hi = loads[i - 1], loads[i]
            frac = diffs[i - 1] / (diffs[i - 1] - diffs[i])
            return lo + frac * (hi - lo)
    return 100.0


def calibrate(records: list[BenchmarkRecord],
              degree_bands: list[tuple[int, int]]) -> RuleTable:
    """Build a rule table from benchmark records.

    Each band needs all three candidate plans (sequential Karatsuba,
    sequential Toom-Cook, parallel Toom-Cook) measured at three or more
    common load levels including 0.
    """
    if not records:
        raise CalibrationError("no benchmark records supplied")
    if not degree_bands:
        raise CalibrationError("no degree bands supplied")
    entries = []
    karatsuba_plan_global = None
    for band in sorted(degree_bands):
        lo, hi = band
        in_band = [r for r in records if lo <= r.degree <= hi]
        roles: dict[str, dict] = {}
        for r in in_band:
            if r.method == KARATSUBA and r.workers == 1:
                role = "karatsuba"
            elif r.method == TOOMCOOK and r.workers > 1:
                role = "parallel"
            elif r.method == TOOMCOOK and r.workers == 1:
                role = "sequential"
            else:
                continue
            plan = r.plan
            slot = roles.setdefault(role, {"plan": plan, "records": []})
            if slot["plan"] != plan:
                raise CalibrationError(
                    f"band [{lo}, {hi}]: two distinct {role} plans in the "
                    f"records ({slot['plan'].label} and {plan.label})")
            slot["records"].append(r)

        missing = [role for role in ("karatsuba", "parallel", "sequential")
                   if role not in roles]
        if missing:
            raise CalibrationError(
                f"band [{lo}, {hi}]: no records for plan(s) {missing}")
        curves = {role: _mean_curve(slot["records"])
                  for role, slot in roles.items()}
        common = sorted(set(curves["karatsuba"])
                        & set(curves["parallel"])
                        & set(curves["sequential"]))
        if len(common) < 3 or 0 not in common:
            gaps = []
            for role in ("karatsuba", "parallel", "sequential"):
                have = set(curves[role])
                want = set().union(*(set(c) for c in curves.values())) | {0}
                for load in sorted(want - have):
                    gaps.append(f"([{lo}, {hi}], {roles[role]['plan'].label}, "
                                f"load {load})")
            raise CalibrationError(
                f"band [{lo}, {hi}]: need >= 3 common load levels including 0, "
                f"got {common}; missing cells: {', '.join(gaps) or 'none'}")

        entries.append(RuleEntry(
            degree_min=lo, degree_max=hi,
            min_cores=roles["parallel"]["plan"].workers,
            threshold_parallel_vs_karatsuba_pct=_first_crossover(
                common, curves["parallel"], curves["karatsuba"]),
            threshold_parallel_vs_sequential_pct=_first_crossover(
                common, curves["parallel"], curves["sequential"]),
            parallel_plan=roles["parallel"]["plan"],
            karatsuba_plan=roles["karatsuba"]["plan"],
            sequential_plan=roles["sequential"]["plan"]))
        karatsuba_plan_global = karatsuba_plan_global or roles["karatsuba"]["plan"]
    try:
        return RuleTable(entries=tuple(entries),
                         default_plan=karatsuba_plan_global)
    except RuleTableError as exc:
        raise CalibrationError(f"records produce an invalid table: {exc}") from exc


# ---------------------------------------------------------------------------
# selection
# ---------------------------------------------------------------------------

def select_method(table: RuleTable, state: SystemState,
                  previous: MethodPlan | None = None,
                  hysteresis_pct: float = 5.0,
                  time_model: "TimeModel | None" = None,
                  tie_margin_pct: float = 5.0) -> MethodPlan:
    """Pick the plan for the given system state (total, deterministic).

    One available core always means sequential Karatsuba.  Otherwise, within
    the matching degree band: parallel Toom-Cook below the
    parallel-vs-Karatsuba threshold, Karatsuba at or above it.  Sequential
    Toom-Cook is never selected.  Passing the previously selected plan
    widens the threshold by hysteresis_pct in its favor so a load hovering
    at the boundary does not flap; passing a time model prefers the
    fewer-worker plan whenever the predicted times are within
    tie_margin_pct of each other.
    """
    if state.available_cores == 1:
        return table.default_plan
    entry = table.entry_for(state.degree)
    if entry is None:
        return table.default_plan
    if state.available_cores < entry.min_cores:
        return entry.karatsuba_plan

    threshold = entry.threshold_parallel_vs_karatsuba_pct
    if previous is not None:
        if previous == entry.parallel_plan:
            threshold += hysteresis_pct
        elif previous == entry.karatsuba_plan:
            threshold -= hysteresis_pct
    if state.load_pct >= threshold:
        return entry.karatsuba_plan
    if time_model is not None:
        t_par = time_model.predict(entry.parallel_plan, state.degree,
                                   state.load_pct)
        t_kar = time_model.predict(entry.karatsuba_plan, state.degree,
                                   state.load_pct)
        if abs(t_par - t_kar) <= tie_margin_pct / 100.0 * min(t_par, t_kar):
            return entry.karatsuba_plan
    return entry.parallel_plan


class TimeModel:
    """Piecewise-linear mean-time curves per (plan, degree), from records."""

    def __init__(self, curves: dict[tuple, list[tuple[int, float]]]):
        self._curves = curves

    @classmethod
    def from_records(cls, records: list[BenchmarkRecord]) -> "TimeModel":
        groups: dict[tuple, list[BenchmarkRecord]] = {}
        for r in records:
            key = (r.method, r.k, r.workers, r.base_cutoff, r.degree)
            groups.setdefault(key, []).append(r)
        curves = {}
        for key, rs in groups.items():
            curve = _mean_curve(rs)
            curves[key] = sorted(curve.items())
        return cls(curves)

    def covered(self, plan: MethodPlan, degree: int) -> bool:
        return (plan.method, plan.k, plan.workers,
                plan.base_cutoff, degree) in self._curves

    def predict(self, plan: MethodPlan, degree: int, load_pct: float) -> float:
        """Estimated mean duration (ns); exact at sampled loads.

        Loads outside the sampled sweep clamp to the nearest endpoint.
        """
        key = (plan.method, plan.k, plan.workers, plan.base_cutoff, degree)
        curve = self._curves.get(key)
        if curve is None:
            raise CoverageError(
                f"no calibration data for plan {plan.label} at degree {degree}")
        if load_pct <= curve[0][0]:
            return curve[0][1]
        if load_pct >= curve[-1][0]:
            return curve[-1][1]
        for (l0, t0), (l1, t1) in zip(curve, curve[1:]):
            if l0 <= load_pct <= l1:
                if load_pct == l0:
                    return t0
                frac = (load_pct - l0) / (l1 - l0)
                return t0 + frac * (t1 - t0)
        raise CoverageError(f"load {load_pct} not bracketed by {curve}")


def predict_time(model: TimeModel, plan: MethodPlan, degree: int,
                 load_pct: float) -> float:
    """Module-level alias for TimeModel.predict."""
    return model.predict(plan, degree, load_pct)


class LoadSmoother:
    """Exponentially-weighted moving average of observed load.

    Callers feed raw load observations and pass the smoothed value to
    select_method; this is the only form of future-load prediction here.
    """

    def __init__(self, alpha: float = 0.3):
        if not 0 < alpha <= 1:
            raise InvalidInputError(f"alpha must be in (0, 1], got {alpha}")
        self.alpha = alpha
        self.value: float | None = None

    def update(self, load_pct: float) -> float:
        if self.value is None:
            self.value = float(load_pct)
        else:
            self.value += self.alpha * (load_pct - self.value)
        return self.value


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _entry_to_dict(e: RuleEntry) -> dict:
    return {
        "degree_band": {"min": e.degree_min, "max": e.degree_max},
        "min_cores": e.min_cores,
        "thresholds": {
            "parallel_vs_karatsuba_pct": e.threshold_parallel_vs_karatsuba_pct,
            "parallel_vs_sequential_pct": e.threshold_parallel_vs_sequential_pct,
        },
        "plans": {
            "parallel": e.parallel_plan.as_dict(),
            "karatsuba": e.karatsuba_plan.as_dict(),
            "sequential": e.sequential_plan.as_dict(),
        },
    }


def table_to_dict(table: RuleTable) -> dict:
    return {
        "version": table.version,
        "default_plan": table.default_plan.as_dict(),
        "entries": [_entry_to_dict(e) for e in table.entries],
    }


def save_rules(table: RuleTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(table_to_dict(table), fh, indent=2)
        fh.write("\n")


def _need(obj: dict, key: str, kind, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise RuleTableError(f"{where}.{key}: missing")
    val = obj[key]
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise RuleTableError(f"{where}.{key}: expected a number, got {val!r}")
        return float(val)
    if not isinstance(val, kind) or isinstance(val, bool):
        raise RuleTableError(
            f"{where}.{key}: expected {kind.__name__}, got {val!r}")
    return val


def _plan_from_dict(d: dict, where: str) -> MethodPlan:
    try:
        return MethodPlan(
            method=_need(d, "method", str, where),
            k=_need(d, "k", int, where),
            workers=_need(d, "workers", int, where),
            base_cutoff=_need(d, "base_cutoff", int, where))
    except InvalidPlanError as exc:
        raise RuleTableError(f"{where}: {exc}") from exc


def table_from_dict(data: dict, where: str = "rules") -> RuleTable:
    version = _need(data, "version", int, where)
    if version != RULE_FILE_VERSION:
        raise RuleTableError(
            f"{where}.version: unsupported version {version}")
    default_plan = _plan_from_dict(
        _need(data, "default_plan", dict, where), f"{where}.default_plan")
    entries = []
    raw_entries = _need(data, "entries", list, where)
    for i, raw in enumerate(raw_entries):
        ew = f"{where}.entries[{i}]"
        band = _need(raw, "degree_band", dict, ew)
        thresholds = _need(raw, "thresholds", dict, ew)
        plans = _need(raw, "plans", dict, ew)
        entries.append(RuleEntry(
            degree_min=_need(band, "min", int, f"{ew}.degree_band"),
            degree_max=_need(band, "max", int, f"{ew}.degree_band"),
            min_cores=_need(raw, "min_cores", int, ew),
            threshold_parallel_vs_karatsuba_pct=_need(
                thresholds, "parallel_vs_karatsuba_pct", float,
                f"{ew}.thresholds"),
            threshold_parallel_vs_sequential_pct=_need(
                thresholds, "parallel_vs_sequential_pct", float,
                f"{ew}.thresholds"),
            parallel_plan=_plan_from_dict(
                _need(plans, "parallel", dict, f"{ew}.plans"),
                f"{ew}.plans.parallel"),
            karatsuba_plan=_plan_from_dict(
                _need(plans, "karatsuba", dict, f"{ew}.plans"),
                f"{ew}.plans.karatsuba"),
            sequential_plan=_plan_from_dict(
                _need(plans, "sequential", dict, f"{ew}.plans"),
                f"{ew}.plans.sequential")))
    return RuleTable(entries=tuple(entries), default_plan=default_plan,
                     version=version)


def load_rules(path) -> RuleTable:
    """Read and fully validate a rule file; errors name the offending field."""
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RuleTableError(f"{path}: not valid JSON: {exc}") from exc
    try:
        return table_from_dict(data, where="rules")
    except (RuleTableError, InvalidPlanError, InvalidInputError) as exc:
        raise RuleTableError(f"{path}: {exc}") from exc
