"""Dependency resolution and parallel execution of correctors and coefficients."""
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
import graphlib
import heapq
import logging
import os
import time

import numpy as np

from ..config import ProblemConfig, parse_problem
from ..errors import ConfigError, DependencyCycleError, TaskFailedError
from ..problem import Problem
from .coefs import (coef_node, eval_coefficient, parse_definitions,
                    solve_requirement)

log = logging.getLogger(__name__)

PENDING, READY, RUNNING, DONE, FAILED = ('pending', 'ready', 'running', 'done',
                                         'failed')


@dataclass
class TaskGraph:
    """Nodes, their dependencies and a deterministic topological schedule."""

    requires: dict
    schedule: tuple
    state: dict = field(default_factory=dict)

    @property
    def nodes(self):
        return tuple(sorted(self.requires))

    def dependents(self):
        out = {n: [] for n in self.requires}
        for n, deps in self.requires.items():
            for d in deps:
                out[d].append(n)
        return {n: sorted(v) for n, v in out.items()}


def resolve_dependencies(requires):
    """Validate a ``{node: [dependency, ...]}`` map and schedule it.

    Ties are broken lexicographically, so the schedule is unique. Raises
    :class:`ConfigError` for an undefined dependency and
    :class:`DependencyCycleError` for a cycle.
    """
    requires = {n: tuple(dict.fromkeys(d)) for n, d in requires.items()}
    for n, deps in sorted(requires.items()):
        for d in deps:
            if d not in requires:
                raise ConfigError(f'{n!r} requires undefined {d!r}')
    try:
        graphlib.TopologicalSorter(requires).prepare()
    except graphlib.CycleError as exc:
        cycle = exc.args[1]
        if len(cycle) > 1 and cycle[0] == cycle[-1]:
            cycle = cycle[:-1]
        k = cycle.index(min(cycle))
        raise DependencyCycleError(cycle[k:] + cycle[:k]) from None
    indeg = {n: len(d) for n, d in requires.items()}
    graph = TaskGraph(requires, ())
    deps_of = graph.dependents()
    heap = [n for n, k in indeg.items() if k == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        n = heapq.heappop(heap)
        order.append(n)
        for m in deps_of[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, m)
    graph.schedule = tuple(order)
    graph.state = {n: PENDING for n in requires}
    return graph


@dataclass
class HomogResults:
    """Coefficients, corrector store and bookkeeping of one engine run."""

    coefs: dict
    correctors: dict
    volume: float
    part_volumes: dict
    schedule: tuple = ()
    execution_order: tuple = ()
    stats: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.coefs[name]


def _cell_volume(mesh):
    lo, hi = mesh.bounding_box
    return float(np.prod(np.asarray(hi) - np.asarray(lo)))


def _run_graph(graph, run_node, n_workers):
    """Execute ``run_node(node, inputs)`` for every node in dependency order.

    Returns ``(results, execution_order)``; a node starts only when all of
    its dependencies are done. Failures mark every dependent as failed.
    """
    deps_of = graph.dependents()
    state = graph.state
    results = {}
    failures = {}
    started = []
    ready = [n for n in graph.schedule if not graph.requires[n]]
    heapq.heapify(ready)
    for n in ready:
        state[n] = READY

    def fail(node, root, exc):
        stack = [node]
        failures[node] = (root, exc)
        state[node] = FAILED
        while stack:
            for m in deps_of[stack.pop()]:
                if state[m] != FAILED:
                    state[m] = FAILED
                    failures[m] = (root, exc)
                    stack.append(m)

    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        running = {}
        while ready or running:
            while ready and len(running) < n_workers:
                node = heapq.heappop(ready)
                if state[node] != READY:
                    continue
                deps = graph.requires[node]
                assert all(state[d] == DONE for d in deps), node
                state[node] = RUNNING
                started.append(node)
                inputs = {d: results[d] for d in deps}
                running[pool.submit(run_node, node, inputs)] = node
            if not running:
                break
            finished, _ = wait(running, return_when=FIRST_COMPLETED)
            for fut in sorted(finished, key=running.get):
                node = running.pop(fut)
                exc = fut.exception()
                if exc is not None:
                    log.error('%s failed: %s', node, exc)
                    fail(node, node, exc)
                    continue
                results[node] = fut.result()
                state[node] = DONE
                for m in deps_of[node]:
                    if state[m] == PENDING and all(
                            state[d] == DONE for d in graph.requires[m]):
                        state[m] = READY
                        heapq.heappush(ready, m)
    if failures:
        raise TaskFailedError(failures)
    return results, tuple(started)


def run_engine(micro, n_workers=None, registry=None, problem=None):
    """Solve all correctors and evaluate all coefficients of a micro config.

    ``micro`` is a path or a :class:`ProblemConfig` with ``requirements``
    and ``coefs`` maps. Up to ``n_workers`` nodes run concurrently; the
    results do not depend on the worker count.
    """
    conf = micro if isinstance(micro, ProblemConfig) else parse_problem(micro,
                                                                        registry)
    if n_workers is None:
        n_workers = os.cpu_count() or 1
    if int(n_workers) < 1:
        raise ConfigError('the number of workers must be positive')
    n_workers = int(n_workers)
    reqs, coefs = parse_definitions(conf)
    if problem is None:
        problem = Problem(conf, registry)
    requires = {}
    for r in reqs.values():
        requires[r.node] = r.requires
    for c in coefs.values():
        requires[c.node] = c.requires
    for node, deps in requires.items():
        for d in deps:
            if d.startswith('c.') and d[2:] not in coefs:
                raise ConfigError(f'{node!r} requires undefined coefficient {d!r}')
            if not d.startswith('c.') and d not in reqs:
                raise ConfigError(f'{node!r} requires undefined corrector {d!r}')
    graph = resolve_dependencies(requires)
    kinds = {n: r.index_kind for n, r in reqs.items()}
    cell_volume = _cell_volume(problem.mesh)
    by_node = {**{r.node: r for r in reqs.values()},
               **{c.node: c for c in coefs.values()}}

    def run_node(node, inputs):
        d = by_node[node]
        t = time.perf_counter()
        store = {k: v[0] for k, v in inputs.items() if not k.startswith('c.')}
        if node in reqs:
            out = solve_requirement(d, problem, store)
        else:
            values = {k[2:]: v[0] for k, v in inputs.items() if k.startswith('c.')}
            vol = (problem.regions[d.volume].measure() if d.volume
                   else cell_volume)
            out = (eval_coefficient(d, problem, store, kinds, values, vol), 0)
        log.info('%s done in %.3f s', node, time.perf_counter() - t)
        return out

    results, started = _run_graph(graph, run_node, n_workers)
    correctors = {n: results[n][0] for n in reqs}
    values = {n: results[coef_node(n)][0] for n in sorted(coefs)}
    parts = {name: r.measure() for name, r in sorted(problem.regions.items())
             if r.kind == 'cell'}
    stats = {'corrector_solves': sum(results[n][1] for n in reqs),
             'workers': n_workers}
    return HomogResults(values, correctors, cell_volume, parts, graph.schedule,
                        started, stats)
