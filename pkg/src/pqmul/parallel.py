"""Parallel execution of the independent pointwise subproducts.

At every splitting level of the Toom-Cook engine the 2k-1 subproducts are
independent of each other, so the top `parallel_depth` levels can be farmed
out to worker processes: the parent performs split/evaluate, flattens the
subproduct pairs into a task list, assigns task i to worker i mod workers
(statically, so timings are not perturbed by work stealing), and then
interpolates/recombines the returned products in task order.  The result and
the aggregated operation counts are therefore identical for every worker
count and every scheduling of the pool.

Worker pools are processes (not threads) so the coefficient arithmetic runs
on separate cores; pools are created lazily per worker count and reused
across calls.  workers values above the host core count are permitted but
merely oversubscribe the machine.
"""

from __future__ import annotations

import atexit
import threading
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .errors import InvalidInputError, ResourceError
from .multipliers import (
    KARATSUBA,
    SCHOOLBOOK,
    MethodPlan,
    _evaluate_raw,
    _interpolate_raw,
    _lift_pair,
    _recombine_raw,
    _toom_engine,
    multiply,
)
from .poly import OperationCounter, Polynomial, schoolbook_mul


@dataclass(frozen=True)
class ParallelConfig:
    """Worker count and how deep to dispatch subproducts in parallel.

    parallel_depth levels of the recursion are dispatched; below that each
    task recurses sequentially.  workers = 1 degrades to the sequential code
    path exactly (no pool involved).
    """

    workers: int = 1
    parallel_depth: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise InvalidInputError(f"workers must be >= 1, got {self.workers}")
        if self.parallel_depth < 0:
            raise InvalidInputError(
                f"parallel_depth must be >= 0, got {self.parallel_depth}")


_pools: dict[int, ProcessPoolExecutor] = {}
_pools_lock = threading.Lock()


def _get_pool(workers: int) -> ProcessPoolExecutor:
    with _pools_lock:
        pool = _pools.get(workers)
        if pool is None:
            try:
                pool = ProcessPoolExecutor(max_workers=workers)
            except Exception as exc:
                raise ResourceError(
                    f"could not create a {workers}-worker pool: {exc}") from exc
            _pools[workers] = pool
        return pool


def shutdown_pools() -> None:
    """Tear down all cached worker pools (tests, interpreter exit)."""
    with _pools_lock:
        for pool in _pools.values():
            pool.shutdown(wait=True, cancel_futures=True)
        _pools.clear()


atexit.register(shutdown_pools)


def _run_batch(tasks):
    """Sequentially multiply a batch of (a, b, k, cutoff) leaf tasks."""
    out = []
    for a, b, k, cutoff in tasks:
        counter = OperationCounter()
        vec = _toom_engine(a, b, k, cutoff, counter)
        out.append((vec, counter.fundamental_mults, counter.fundamental_adds))
    return out


def _expand(a, b, k, cutoff, depth, counter, leaves):
    """Split/evaluate `depth` levels down, collecting leaf operand pairs.

    Mirrors _toom_engine exactly so that the merged counters match the
    sequential run; returns a tree recombined by _combine.
    """
    n = len(a)
    if depth == 0 or n <= cutoff:
        leaves.append((a, b, k, cutoff))
        return ("leaf", len(leaves) - 1, n)
    m = -(-n // k)
    padded = m * k
    if padded != n:
        pad = [0] * (padded - n)
        a = a + pad
        b = b + pad
    parts_a = [a[i * m:(i + 1) * m] for i in range(k)]
    parts_b = [b[i * m:(i + 1) * m] for i in range(k)]
    ev_a = _evaluate_raw(parts_a, k, counter)
    ev_b = _evaluate_raw(parts_b, k, counter)
    children = [_expand(ev_a[i], ev_b[i], k, cutoff, depth - 1, counter, leaves)
                for i in range(2 * k - 1)]
    return ("node", n, padded, m, children)


def _combine(node, products, k, counter):
    if node[0] == "leaf":
        return products[node[1]]
    _, n, padded, m, children = node
    child_vecs = [_combine(c, products, k, counter) for c in children]
    coeffs = _interpolate_raw(child_vecs, k, counter)
    out = _recombine_raw(coeffs, m, 2 * padded - 1, counter)
    return out[:2 * n - 1] if padded != n else out


def parallel_mul(a: Polynomial, b: Polynomial, plan: MethodPlan,
                 cfg: ParallelConfig | None = None
                 ) -> tuple[Polynomial, OperationCounter]:
    """Multiply with the plan's method, dispatching subproducts to workers.

    The returned polynomial and counter totals are identical to the
    sequential toomcook_mul/karatsuba_mul run for the same plan, whatever
    the worker count or scheduling.  Pool creation failure raises
    ResourceError; it is never silently downgraded to sequential.
    """
    if cfg is None:
        cfg = ParallelConfig(workers=plan.workers)
    counter = OperationCounter()
    if plan.method == SCHOOLBOOK:
        return schoolbook_mul(a, b, counter), counter
    if cfg.workers == 1 or cfg.parallel_depth == 0:
        return multiply(a, b, plan, counter), counter

    k = 2 if plan.method == KARATSUBA else plan.k
    av, bv, q = _lift_pair(a, b)
    leaves: list = []
    tree = _expand(av, bv, k, plan.base_cutoff, cfg.parallel_depth,
                   counter, leaves)

    pool = _get_pool(cfg.workers)
    batches = []  # (leaf indices, future)
    for w in range(cfg.workers):
        indices = list(range(w, len(leaves), cfg.workers))
        if indices:
            batch = [leaves[i] for i in indices]
            batches.append((indices, pool.submit(_run_batch, batch)))

    products: list = [None] * len(leaves)
    for indices, future in batches:
        for i, (vec, mults, adds) in zip(indices, future.result()):
            products[i] = vec
            counter.add_mults(mults)
            counter.add_adds(adds)

    out = _combine(tree, products, k, counter)
    return Polynomial(out, q), counter
