"""Discrete-event handover simulation over MEC nodes.

Vehicles hand over between MEC nodes with exponentially distributed
intervals; every handover triggers a secure-session re-establishment whose
cost is mults_per_handover polynomial multiplications on the target node.
The plan for those multiplications comes either from the rule table (reading
the node's instantaneous background load off its trace) or from a fixed
plan, and the latency is taken from the calibrated time model, which keeps
runs fast and machine-reproducible.  Everything is deterministic for a
fixed seed.
"""

from __future__ import annotations

import json
import math
import random
import sys
from dataclasses import dataclass

from .errors import CoverageError, InvalidInputError, InvalidPlanError, ScenarioError
from .multipliers import MethodPlan
from .policy import RuleTable, SystemState, select_method

POLICY_MODES = ("rule_table", "fixed_plan")


@dataclass(frozen=True)
class MecNode:
    """One edge node: its core count and a piecewise-constant load trace."""

    cores: int
    load_trace: tuple[tuple[float, float], ...]  # (time_ms, load_pct)

    def __post_init__(self):
        object.__setattr__(self, "load_trace",
                           tuple((float(t), float(l)) for t, l in self.load_trace))
        if self.cores < 1:
            raise ScenarioError(f"mec cores must be >= 1, got {self.cores}")
        if not self.load_trace:
            raise ScenarioError("load trace must have at least one breakpoint")
        if self.load_trace[0][0] != 0:
            raise ScenarioError(
                f"load trace must start at time 0, got {self.load_trace[0][0]}")
        prev_t = -1.0
        for t, load in self.load_trace:
            if t <= prev_t:
                raise ScenarioError(f"load trace times must increase, got {t}")
            if not 0 <= load <= 100:
                raise ScenarioError(f"trace load {load} outside [0, 100]")
            prev_t = t

    def load_at(self, t_ms: float) -> float:
        current = self.load_trace[0][1]
        for bt, load in self.load_trace:
            if bt <= t_ms:
                current = load
            else:
                break
        return current


@dataclass(frozen=True)
class Scenario:
    """Everything a simulation run depends on, seed included."""

    mec_nodes: tuple[MecNode, ...]
    vehicles: int
    handover_interval_ms: float
    degree: int
    duration_ms: float
    seed: int = 0
    mults_per_handover: int = 10
    policy_mode: str = "rule_table"
    fixed_plan: MethodPlan | None = None

    def __post_init__(self):
        object.__setattr__(self, "mec_nodes", tuple(self.mec_nodes))
        if not self.mec_nodes:
            raise ScenarioError("at least one MEC node is required")
        if self.vehicles < 0:
            raise ScenarioError(f"vehicles must be >= 0, got {self.vehicles}")
        if self.handover_interval_ms <= 0:
            raise ScenarioError("handover_interval_ms must be > 0")
        if self.degree < 1:
            raise ScenarioError(f"degree must be >= 1, got {self.degree}")
        if self.duration_ms <= 0:
            raise ScenarioError("duration_ms must be > 0")
        if self.mults_per_handover < 1:
            raise ScenarioError("mults_per_handover must be >= 1")
        if self.policy_mode not in POLICY_MODES:
            raise ScenarioError(
                f"policy_mode must be one of {POLICY_MODES}, got "
                f"{self.policy_mode!r}")
        if self.policy_mode == "fixed_plan" and self.fixed_plan is None:
            raise ScenarioError("fixed_plan mode needs a fixed_plan descriptor")


@dataclass(frozen=True)
class VehicleStats:
    vehicle: int
    handovers: int
    mean_latency_ms: float
    p95_latency_ms: float


@dataclass(frozen=True)
class MecStats:
    mec: int
    handovers: int
    plan_counts: dict[str, int]


@dataclass(frozen=True)
class SimReport:
    total_handovers: int
    mean_latency_ms: float
    p95_latency_ms: float
    per_vehicle: tuple[VehicleStats, ...]
    per_mec: tuple[MecStats, ...]
    policy_mode: str


def _mix(seed: int, salt: int) -> int:
    h = (seed & 0xFFFFFFFFFFFFFFFF) ^ (salt + 0x9E3779B97F4A7C15)
    h = (h * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    return h ^ (h >> 31)


def _p95(sorted_values: list[float]) -> float:
    if not sorted_values:
        return 0.0
    rank = math.ceil(0.95 * len(sorted_values))
    return sorted_values[rank - 1]


def run_simulation(scenario: Scenario, table: RuleTable | None,
                   time_model) -> SimReport:
    """Simulate the scenario and report handover crypto latencies.

    time_model is anything with predict(plan, degree, load_pct) -> ns (the
    calibrated TimeModel, or a live runner).  Deterministic per seed.
    """
    if scenario.policy_mode == "rule_table" and table is None:
        raise InvalidInputError("rule_table mode needs a rule table")
    n_mecs = len(scenario.mec_nodes)
    per_vehicle = []
    mec_handovers = [0] * n_mecs
    mec_plans: list[dict[str, int]] = [{} for _ in range(n_mecs)]
    all_latencies: list[float] = []

    for v in range(scenario.vehicles):
        rng = random.Random(_mix(scenario.seed, v))
        current = rng.randrange(n_mecs)
        latencies: list[float] = []
        t = rng.expovariate(1.0 / scenario.handover_interval_ms)
        while t < scenario.duration_ms:
            if n_mecs > 1:
                target = rng.randrange(n_mecs - 1)
                if target >= current:
                    target += 1
            else:
                target = current
            node = scenario.mec_nodes[target]
            load = node.load_at(t)
            if scenario.policy_mode == "rule_table":
                plan = select_method(table, SystemState(
                    degree=scenario.degree, load_pct=load,
                    available_cores=node.cores))
            else:
                plan = scenario.fixed_plan
            try:
                per_mult_ns = time_model.predict(plan, scenario.degree, load)
            except CoverageError as exc:
                raise CoverageError(
                    f"vehicle {v} handover at t={t:.1f}ms to mec {target}: "
                    f"{exc}") from exc
            latency_ms = scenario.mults_per_handover * per_mult_ns / 1e6
            latencies.append(latency_ms)
            mec_handovers[target] += 1
            mec_plans[target][plan.label] = \
                mec_plans[target].get(plan.label, 0) + 1
            current = target
            t += rng.expovariate(1.0 / scenario.handover_interval_ms)
        latencies_sorted = sorted(latencies)
        per_vehicle.append(VehicleStats(
            vehicle=v, handovers=len(latencies),
            mean_latency_ms=(sum(latencies) / len(latencies)) if latencies else 0.0,
            p95_latency_ms=_p95(latencies_sorted)))
        all_latencies.extend(latencies)

    all_sorted = sorted(all_latencies)
    return SimReport(
        total_handovers=len(all_latencies),
        mean_latency_ms=(sum(all_latencies) / len(all_latencies))
        if all_latencies else 0.0,
        p95_latency_ms=_p95(all_sorted),
        per_vehicle=tuple(per_vehicle),
        per_mec=tuple(MecStats(mec=i, handovers=mec_handovers[i],
                               plan_counts=dict(sorted(mec_plans[i].items())))
                      for i in range(n_mecs)),
        policy_mode=scenario.policy_mode)


def report_to_dict(report: SimReport) -> dict:
    return {
        "policy_mode": report.policy_mode,
        "total_handovers": report.total_handovers,
        "mean_latency_ms": report.mean_latency_ms,
        "p95_latency_ms": report.p95_latency_ms,
        "per_mec": [{"mec": m.mec, "handovers": m.handovers,
                     "plan_counts": m.plan_counts} for m in report.per_mec],
        "per_vehicle": [{"vehicle": v.vehicle, "handovers": v.handovers,
                         "mean_latency_ms": v.mean_latency_ms,
                         "p95_latency_ms": v.p95_latency_ms}
                        for v in report.per_vehicle],
    }


def render_report(report: SimReport, fmt: str = "text", path=None) -> str:
    """Render to text or canonical JSON; write to path or stdout.

    Rendering the same report twice yields byte-identical output.
    """
    if fmt == "json":
        text = json.dumps(report_to_dict(report), indent=2) + "\n"
    elif fmt == "text":
        lines = [f"policy_mode: {report.policy_mode}"]
        for m in report.per_mec:
            plans = " ".join(f"{label}={count}"
                             for label, count in m.plan_counts.items())
            lines.append(f"mec {m.mec}: handovers={m.handovers} {plans}".rstrip())
        lines.append(f"total handovers: {report.total_handovers}")
        lines.append(f"mean latency: {report.mean_latency_ms:.3f} ms")
        lines.append(f"p95 latency: {report.p95_latency_ms:.3f} ms")
        text = "\n".join(lines) + "\n"
    else:
        raise InvalidInputError(f"unknown report format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# scenario persistence
# ---------------------------------------------------------------------------

def scenario_to_dict(s: Scenario) -> dict:
    return {
        "mec_nodes": [{"cores": n.cores,
                       "background_load_trace": [[t, l] for t, l in n.load_trace]}
                      for n in s.mec_nodes],
        "vehicles": s.vehicles,
        "handover_interval_ms": s.handover_interval_ms,
        "mults_per_handover": s.mults_per_handover,
        "degree": s.degree,
        "duration_ms": s.duration_ms,
        "seed": s.seed,
        "policy_mode": s.policy_mode,
        "fixed_plan": s.fixed_plan.as_dict() if s.fixed_plan else None,
    }


def scenario_from_dict(data: dict, where: str = "scenario") -> Scenario:
    def need(obj, key, where_):
        if not isinstance(obj, dict) or key not in obj:
            raise ScenarioError(f"{where_}.{key}: missing")
        return obj[key]

    raw_nodes = need(data, "mec_nodes", where)
    if not isinstance(raw_nodes, list):
        raise ScenarioError(f"{where}.mec_nodes: expected a list")
    nodes = []
    for i, raw in enumerate(raw_nodes):
        nodes.append(MecNode(
            cores=need(raw, "cores", f"{where}.mec_nodes[{i}]"),
            load_trace=tuple(
                tuple(bp) for bp in
                need(raw, "background_load_trace", f"{where}.mec_nodes[{i}]"))))
    fixed_raw = data.get("fixed_plan")
    fixed_plan = None
    if fixed_raw is not None:
        try:
            fixed_plan = MethodPlan.from_dict(fixed_raw)
        except InvalidPlanError as exc:
            raise ScenarioError(f"{where}.fixed_plan: {exc}") from exc
    try:
        return Scenario(
            mec_nodes=tuple(nodes),
            vehicles=int(need(data, "vehicles", where)),
            handover_interval_ms=float(need(data, "handover_interval_ms", where)),
            mults_per_handover=int(data.get("mults_per_handover", 10)),
            degree=int(need(data, "degree", where)),
            duration_ms=float(need(data, "duration_ms", where)),
            seed=int(data.get("seed", 0)),
            policy_mode=str(data.get("policy_mode", "rule_table")),
            fixed_plan=fixed_plan)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"{where}: {exc}") from exc


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON: {exc}") from exc
    try:
        return scenario_from_dict(data)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")
