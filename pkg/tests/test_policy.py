"""Rule-table calibration, method selection, time model, persistence."""

import json
import random

import pytest

from pqmul import (
    BenchmarkRecord,
    CalibrationError,
    CoverageError,
    InvalidInputError,
    MethodPlan,
    RuleEntry,
    RuleTable,
    SystemState,
    TimeModel,
    calibrate,
    load_rules,
    predict_time,
    save_rules,
    select_method,
)
from pqmul.policy import LoadSmoother, table_to_dict

KARATSUBA = MethodPlan.karatsuba(base_cutoff=16)
TOOM_SEQ = MethodPlan.toom(3, workers=1, base_cutoff=16)
TOOM_PAR = MethodPlan.toom(3, workers=5, base_cutoff=16)


def records_from_curves(curves: dict[MethodPlan, dict[int, float]],
                        degree: int = 512, runs: int = 2):
    """Build records whose per-load means are exactly the given curves."""
    records = []
    for plan, curve in curves.items():
        for load, mean_ns in curve.items():
            for i in range(runs):
                records.append(BenchmarkRecord(
                    method=plan.method, k=plan.k, workers=plan.workers,
                    base_cutoff=plan.base_cutoff, degree=degree,
                    load_pct=load, run_index=i, elapsed_ns=int(mean_ns),
                    mult_count=1000))
    return records


def linear_curves(loads, kar_base=10e6, kar_slope=0.02e6,
                  seq_base=14e6, seq_slope=0.02e6,
                  par_base=5e6, par_slope=0.4e6):
    return {
        KARATSUBA: {l: kar_base + kar_slope * l for l in loads},
        TOOM_SEQ: {l: seq_base + seq_slope * l for l in loads},
        TOOM_PAR: {l: par_base + par_slope * l for l in loads},
    }


LOADS = [0, 10, 20, 30, 40, 50]


class TestCalibrate:
    def test_interpolated_crossovers_exact(self):
        table = calibrate(records_from_curves(linear_curves(LOADS)),
                          [(512, 512)])
        (entry,) = table.entries
        # parallel meets karatsuba where 5e6 + 0.4e6 L = 10e6 + 0.02e6 L
        assert entry.threshold_parallel_vs_karatsuba_pct == \
            pytest.approx(5e6 / 0.38e6)
        assert entry.threshold_parallel_vs_sequential_pct == \
            pytest.approx(9e6 / 0.38e6)
        assert entry.min_cores == 5

    def test_crossover_near_25(self):
        # parallel faster below ~25, slower above: threshold lands at 25
        curves = linear_curves(LOADS, par_base=5e6, par_slope=0.2e6)
        table = calibrate(records_from_curves(curves), [(512, 512)])
        assert table.entries[0].threshold_parallel_vs_karatsuba_pct == \
            pytest.approx(5e6 / 0.18e6)  # 27.8

    def test_parallel_always_fastest_gives_100(self):
        curves = linear_curves(LOADS, par_base=1e6, par_slope=0.0)
        table = calibrate(records_from_curves(curves), [(512, 512)])
        assert table.entries[0].threshold_parallel_vs_karatsuba_pct == 100.0
        assert table.entries[0].threshold_parallel_vs_sequential_pct == 100.0

    def test_parallel_never_wins_gives_0(self):
        curves = linear_curves(LOADS, par_base=20e6, par_slope=0.0)
        table = calibrate(records_from_curves(curves), [(512, 512)])
        assert table.entries[0].threshold_parallel_vs_karatsuba_pct == 0.0

    def test_fig4b_like_double_crossover(self):
        # karatsuba overtakes parallel at exactly 5, sequential at 60
        loads = list(range(0, 95, 5))

        def par(l):
            return 48e6 + 0.4e6 * l + 4.8e6 * max(0, l - 50)

        curves = {
            KARATSUBA: {l: 50e6 for l in loads},
            TOOM_SEQ: {l: 120e6 for l in loads},
            TOOM_PAR: {l: par(l) for l in loads},
        }
        assert par(5) == 50e6 and par(60) == 120e6
        table = calibrate(records_from_curves(curves, degree=821),
                          [(821, 821)])
        (entry,) = table.entries
        assert entry.threshold_parallel_vs_karatsuba_pct == pytest.approx(5.0)
        assert entry.threshold_parallel_vs_sequential_pct == pytest.approx(60.0)

    def test_missing_plan_role(self):
        curves = linear_curves(LOADS)
        del curves[TOOM_SEQ]
        with pytest.raises(CalibrationError, match="sequential"):
            calibrate(records_from_curves(curves), [(512, 512)])

    def test_too_few_load_levels(self):
        with pytest.raises(CalibrationError, match=r"\[512, 512\]"):
            calibrate(records_from_curves(linear_curves([0, 10])),
                      [(512, 512)])

    def test_missing_zero_load(self):
        with pytest.raises(CalibrationError):
            calibrate(records_from_curves(linear_curves([10, 20, 30])),
                      [(512, 512)])

    def test_missing_cells_named(self):
        curves = linear_curves(LOADS)
        curves[TOOM_PAR] = {l: 5e6 for l in [0, 10]}  # gaps at 20..50
        with pytest.raises(CalibrationError, match="toom3-w5.*load 20"):
            calibrate(records_from_curves(curves), [(512, 512)])

    def test_ambiguous_role_rejected(self):
        curves = linear_curves(LOADS)
        other_par = MethodPlan.toom(4, workers=3, base_cutoff=16)
        curves[other_par] = {l: 6e6 for l in LOADS}
        with pytest.raises(CalibrationError, match="two distinct parallel"):
            calibrate(records_from_curves(curves), [(512, 512)])

    def test_monotone_response_to_slower_parallel(self):
        """Scaling every parallel time up never raises the thresholds."""
        rng = random.Random(0)
        for _ in range(20):
            par_base = rng.uniform(2e6, 12e6)
            par_slope = rng.uniform(0.05e6, 0.5e6)
            curves = linear_curves(LOADS, par_base=par_base,
                                   par_slope=par_slope)
            t1 = calibrate(records_from_curves(curves), [(512, 512)])
            factor = rng.uniform(1.0, 3.0)
            curves[TOOM_PAR] = {l: v * factor
                                for l, v in curves[TOOM_PAR].items()}
            t2 = calibrate(records_from_curves(curves), [(512, 512)])
            assert t2.entries[0].threshold_parallel_vs_karatsuba_pct <= \
                t1.entries[0].threshold_parallel_vs_karatsuba_pct + 1e-9
            assert t2.entries[0].threshold_parallel_vs_sequential_pct <= \
                t1.entries[0].threshold_parallel_vs_sequential_pct + 1e-9


def make_entry(**overrides):
    base = dict(degree_min=256, degree_max=1024, min_cores=5,
                threshold_parallel_vs_karatsuba_pct=25.0,
                threshold_parallel_vs_sequential_pct=45.0,
                parallel_plan=TOOM_PAR, karatsuba_plan=KARATSUBA,
                sequential_plan=TOOM_SEQ)
    base.update(overrides)
    return RuleEntry(**base)


def make_table(entries=None):
    return RuleTable(entries=tuple(entries or [make_entry()]),
                     default_plan=KARATSUBA)


class TestRuleTableValidation:
    def test_default_plan_must_be_sequential_karatsuba(self):
        from pqmul import RuleTableError
        with pytest.raises(RuleTableError, match="default_plan"):
            RuleTable(entries=(make_entry(),), default_plan=TOOM_SEQ)

    def test_overlapping_bands_named(self):
        from pqmul import RuleTableError
        e1 = make_entry(degree_min=1, degree_max=600)
        e2 = make_entry(degree_min=500, degree_max=1024)
        with pytest.raises(RuleTableError, match=r"\[500, 1024\].*\[1, 600\]"):
            make_table([e1, e2])

    def test_threshold_range(self):
        from pqmul import RuleTableError
        with pytest.raises(RuleTableError, match="120"):
            make_table([make_entry(
                threshold_parallel_vs_karatsuba_pct=120.0)])

    def test_threshold_ordering_when_both_interior(self):
        from pqmul import RuleTableError
        with pytest.raises(RuleTableError, match="thresholds"):
            make_table([make_entry(
                threshold_parallel_vs_karatsuba_pct=50.0,
                threshold_parallel_vs_sequential_pct=20.0)])

    def test_boundary_thresholds_exempt_from_ordering(self):
        make_table([make_entry(threshold_parallel_vs_karatsuba_pct=100.0,
                               threshold_parallel_vs_sequential_pct=30.0)])

    def test_plan_roles_enforced(self):
        from pqmul import RuleTableError
        with pytest.raises(RuleTableError, match="parallel"):
            make_table([make_entry(parallel_plan=TOOM_SEQ)])
        with pytest.raises(RuleTableError, match="karatsuba"):
            make_table([make_entry(karatsuba_plan=TOOM_SEQ)])


class TestSelectMethod:
    def test_single_core_always_karatsuba(self):
        table = make_table()
        for load in (0, 25, 99.5):
            plan = select_method(table, SystemState(512, load, 1))
            assert plan == KARATSUBA

    def test_below_threshold_parallel(self):
        plan = select_method(make_table(), SystemState(512, 10, 5))
        assert plan == TOOM_PAR

    def test_above_threshold_karatsuba(self):
        plan = select_method(make_table(), SystemState(512, 50, 5))
        assert plan == KARATSUBA

    def test_at_threshold_karatsuba(self):
        plan = select_method(make_table(), SystemState(512, 25, 5))
        assert plan == KARATSUBA

    def test_between_thresholds_karatsuba_never_sequential(self):
        plan = select_method(make_table(), SystemState(512, 30, 5))
        assert plan == KARATSUBA

    def test_beyond_sequential_threshold_still_karatsuba(self):
        plan = select_method(make_table(), SystemState(512, 90, 5))
        assert plan == KARATSUBA

    def test_no_matching_band_default(self):
        plan = select_method(make_table(), SystemState(2000, 0, 5))
        assert plan == KARATSUBA

    def test_too_few_cores_for_parallel(self):
        plan = select_method(make_table(), SystemState(512, 0, 3))
        assert plan == KARATSUBA

    def test_deterministic(self):
        table = make_table()
        state = SystemState(512, 24.9, 5)
        assert all(select_method(table, state) == TOOM_PAR for _ in range(5))

    def test_hysteresis_holds_previous_parallel(self):
        table = make_table()
        # just above the hard threshold: a parallel incumbent survives
        state = SystemState(512, 27, 5)
        assert select_method(table, state) == KARATSUBA
        assert select_method(table, state, previous=TOOM_PAR) == TOOM_PAR
        # but far above, it does not
        assert select_method(table, SystemState(512, 35, 5),
                             previous=TOOM_PAR) == KARATSUBA

    def test_hysteresis_holds_previous_karatsuba(self):
        table = make_table()
        state = SystemState(512, 23, 5)
        assert select_method(table, state) == TOOM_PAR
        assert select_method(table, state, previous=KARATSUBA) == KARATSUBA

    def test_tie_break_prefers_fewer_workers(self):
        loads = [0, 10, 20, 30, 40, 50]
        # parallel nominally wins at low load but within 3%: tie-break
        curves = linear_curves(loads, kar_base=10e6, kar_slope=0.0,
                               par_base=9.8e6, par_slope=0.05e6)
        records = records_from_curves(curves)
        table = calibrate(records, [(512, 512)])
        model = TimeModel.from_records(records)
        state = SystemState(512, 0, 5)
        assert select_method(table, state) == TOOM_PAR
        assert select_method(table, state, time_model=model) == KARATSUBA


class TestTimeModel:
    def test_exact_at_sampled_loads(self):
        records = records_from_curves(linear_curves(LOADS))
        model = TimeModel.from_records(records)
        assert model.predict(KARATSUBA, 512, 0) == 10e6
        assert model.predict(KARATSUBA, 512, 50) == 10e6 + 0.02e6 * 50

    def test_linear_midpoint(self):
        records = records_from_curves({
            KARATSUBA: {0: 10e6, 10: 20e6},
            TOOM_SEQ: {0: 1e6, 10: 1e6},
            TOOM_PAR: {0: 1e6, 10: 1e6}})
        model = TimeModel.from_records(records)
        assert model.predict(KARATSUBA, 512, 5) == pytest.approx(15e6)

    def test_clamps_outside_sweep(self):
        records = records_from_curves(linear_curves(LOADS))
        model = TimeModel.from_records(records)
        assert model.predict(KARATSUBA, 512, 80) == \
            model.predict(KARATSUBA, 512, 50)

    def test_coverage_error(self):
        model = TimeModel.from_records(
            records_from_curves(linear_curves(LOADS)))
        with pytest.raises(CoverageError):
            model.predict(KARATSUBA, 821, 0)
        with pytest.raises(CoverageError):
            model.predict(MethodPlan.toom(4, base_cutoff=16), 512, 0)

    def test_module_level_alias(self):
        records = records_from_curves(linear_curves(LOADS))
        model = TimeModel.from_records(records)
        assert predict_time(model, KARATSUBA, 512, 0) == 10e6


class TestRegret:
    def test_selected_plan_near_best_on_synthetic_data(self):
        records = records_from_curves(linear_curves(LOADS))
        table = calibrate(records, [(512, 512)])
        model = TimeModel.from_records(records)
        plans = [KARATSUBA, TOOM_SEQ, TOOM_PAR]
        for load in LOADS:
            chosen = select_method(table, SystemState(512, load, 5))
            chosen_t = model.predict(chosen, 512, load)
            best_t = min(model.predict(p, 512, load) for p in plans)
            assert chosen_t <= best_t * 1.10


class TestPersistence:
    def test_round_trip_equal_and_byte_identical(self, tmp_path):
        table = calibrate(records_from_curves(linear_curves(LOADS)),
                          [(512, 512)])
        p1, p2 = tmp_path / "r1.json", tmp_path / "r2.json"
        save_rules(table, p1)
        loaded = load_rules(p1)
        assert loaded == table
        save_rules(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_schema_fields(self, tmp_path):
        path = tmp_path / "rules.json"
        save_rules(make_table(), path)
        data = json.loads(path.read_text())
        assert data["version"] == 1
        (entry,) = data["entries"]
        assert entry["degree_band"] == {"min": 256, "max": 1024}
        assert set(entry["thresholds"]) == {"parallel_vs_karatsuba_pct",
                                            "parallel_vs_sequential_pct"}
        assert set(entry["plans"]) == {"parallel", "karatsuba", "sequential"}
        assert set(entry["plans"]["parallel"]) == {"method", "k", "workers",
                                                   "base_cutoff"}

    def test_threshold_out_of_range_rejected_with_path(self, tmp_path):
        from pqmul import RuleTableError
        path = tmp_path / "rules.json"
        save_rules(make_table(), path)
        data = json.loads(path.read_text())
        data["entries"][0]["thresholds"]["parallel_vs_karatsuba_pct"] = 120
        path.write_text(json.dumps(data))
        with pytest.raises(RuleTableError, match="parallel_vs_karatsuba_pct"):
            load_rules(path)

    def test_overlapping_bands_rejected_on_load(self, tmp_path):
        from pqmul import RuleTableError
        path = tmp_path / "rules.json"
        data = table_to_dict(make_table())
        data["entries"].append(json.loads(json.dumps(data["entries"][0])))
        path.write_text(json.dumps(data))
        with pytest.raises(RuleTableError, match="overlaps"):
            load_rules(path)

    def test_missing_field_named(self, tmp_path):
        from pqmul import RuleTableError
        path = tmp_path / "rules.json"
        save_rules(make_table(), path)
        data = json.loads(path.read_text())
        del data["entries"][0]["min_cores"]
        path.write_text(json.dumps(data))
        with pytest.raises(RuleTableError, match=r"entries\[0\].min_cores"):
            load_rules(path)

    def test_invalid_json_rejected(self, tmp_path):
        from pqmul import RuleTableError
        path = tmp_path / "rules.json"
        path.write_text("{nope")
        with pytest.raises(RuleTableError, match="JSON"):
            load_rules(path)


class TestLoadSmoother:
    def test_first_observation_taken_verbatim(self):
        s = LoadSmoother(alpha=0.5)
        assert s.update(40) == 40

    def test_converges_toward_constant_input(self):
        s = LoadSmoother(alpha=0.5)
        s.update(0)
        for _ in range(20):
            v = s.update(80)
        assert v == pytest.approx(80, abs=0.1)

    def test_alpha_validated(self):
        with pytest.raises(InvalidInputError):
            LoadSmoother(alpha=0)
