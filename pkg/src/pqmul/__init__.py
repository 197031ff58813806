"""Polynomial multiplication back ends with load-aware method selection.

The pieces, bottom up: dense integer polynomials and the schoolbook oracle
(poly), Karatsuba/Toom-Cook recursive multipliers with exact operation-count
predictors (multipliers), process-parallel execution of the independent
subproducts (parallel), a synthetic duty-cycle CPU load generator (loadgen),
a Monte Carlo timing harness (bench), rule-table calibration and method
selection (policy), and a handover simulator that exercises the decision
loop end to end (simulator).  `pqmul` on the command line wires them
together.
"""

from .bench import (
    BenchmarkRecord,
    BenchmarkSpec,
    CellStats,
    aggregate,
    export_records,
    format_aggregate_table,
    host_metadata,
    import_records,
    run_benchmark,
)
from .errors import (
    CalibrationError,
    CapacityError,
    CoverageError,
    InternalArithmeticError,
    InvalidInputError,
    InvalidPlanError,
    PqmulError,
    ResourceError,
    RingMismatchError,
    RuleTableError,
    ScenarioError,
    TimerResolutionError,
)
from .loadgen import LoadHandle, LoadProfile, measure_achieved_load, start_load, stop_load
from .multipliers import (
    DEFAULT_BASE_CUTOFF,
    EVALUATION_POINTS,
    MethodPlan,
    evaluate_parts,
    interpolate,
    karatsuba_mul,
    multiply,
    predicted_mult_count,
    recompose,
    recursion_depth,
    split,
    toomcook_mul,
)
from .parallel import ParallelConfig, parallel_mul, shutdown_pools
from .policy import (
    LoadSmoother,
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
from .poly import OperationCounter, Polynomial, schoolbook_mul
from .simulator import (
    MecNode,
    Scenario,
    SimReport,
    load_scenario,
    render_report,
    run_simulation,
    save_scenario,
)

__version__ = "0.1.0"
