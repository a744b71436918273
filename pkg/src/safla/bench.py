"""Benchmark harnesses and experiment sweeps shared by the CLI and the tests."""

from __future__ import annotations

import gc
import statistics
import time
from contextlib import contextmanager

from .assurance import AssuranceLoop
from .extractor import extract
from .simnet import (ScenarioSpec, baseline_primary_backup, build_scenario, fail_nodes,
                     feasible_fraction, inject_hijack, survival_rate)

# switch count -> Mesh(rows, cols)
MESH_SHAPES = {1: (1, 1), 50: (10, 5), 100: (10, 10), 200: (10, 20), 400: (10, 40)}


def mesh_shape(switches: int) -> tuple:
    if switches in MESH_SHAPES:
        return MESH_SHAPES[switches]
    if switches % 10 == 0:
        return (10, switches // 10)
    return (1, switches)


@contextmanager
def _quiet_gc():
    """Collect first, then keep the collector out of the timed section (as timeit does)."""
    gc.collect()
    was = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was:
            gc.enable()


def _mesh(switches, intents, seed):
    rows, cols = mesh_shape(switches)
    return build_scenario(ScenarioSpec({"kind": "Mesh", "rows": rows, "cols": cols},
                                       intents, seed=seed))


class _ExtractionCase:
    def __init__(self, switches, intents, seed):
        net, _ = _mesh(switches, intents, seed)
        self.tables, self.g = net.export_flow_tables(), net.nskg

    def sample(self, r):
        with _quiet_gc():
            t0 = time.perf_counter()
            extract(self.tables, self.g)
            return time.perf_counter() - t0


class _RecoveryCase:
    """A deployed mesh whose loop has already run once on the healthy network."""

    def __init__(self, switches, intents, seed):
        self.net, self.repo = _mesh(switches, intents, seed)
        self.seed = seed
        self.loop = AssuranceLoop(self.net, self.repo)
        self.loop.cycle()

    def sample(self, r):
        vid = sorted(self.repo.intents)[r % len(self.repo)]
        inject_hijack(self.net, self.repo, 0, self.seed, victims=[vid])
        with _quiet_gc():
            t0 = time.perf_counter()
            rep = self.loop.cycle()
            elapsed = time.perf_counter() - t0
        if not rep.post_check.consistent:
            raise RuntimeError(f"recovery benchmark: cycle left {vid} unrepaired")
        return elapsed


def _medians(cases, repeat) -> list:
    """Round-robin sampling: each round times every case once, so slow drift in
    machine load spreads over all grid points instead of biasing a few."""
    samples = [[] for _ in cases]
    for r in range(repeat):
        for c, out in zip(cases, samples):
            out.append(c.sample(r))
    return [statistics.median(s) for s in samples]


def time_extraction(intents: int, repeat: int = 5, seed: int = 0, switches: int = 100) -> float:
    """Median wall time of one full extraction over a deployed mesh."""
    return _medians([_ExtractionCase(switches, intents, seed)], repeat)[0]


def time_recovery(switches: int, intents: int, repeat: int = 5, seed: int = 0) -> float:
    """Median wall time of one assurance cycle repairing a single hijacked intent."""
    return _medians([_RecoveryCase(switches, intents, seed)], repeat)[0]


def bench_extraction(intent_grid, repeat: int = 5, seed: int = 0, switches: int = 100) -> list:
    grid = list(intent_grid)
    times = _medians([_ExtractionCase(switches, n, seed) for n in grid], repeat)
    return [{"intents": n, "switches": switches, "seconds": t} for n, t in zip(grid, times)]


def bench_recovery(switch_grid, intent_grid, repeat: int = 5, seed: int = 0) -> list:
    points = [(s, n) for s in switch_grid for n in intent_grid]
    times = _medians([_RecoveryCase(s, n, seed) for s, n in points], repeat)
    return [{"switches": s, "intents": n, "seconds": t} for (s, n), t in zip(points, times)]


def hijack_sweep(seeds: int, seed: int = 0, hosts: int = 11, intents: int = 9) -> list:
    """Survival before and after one cycle at intensity k*100/|I| for k = 1..|I|."""
    rows = []
    for k in range(1, intents + 1):
        intensity = k * 100 / intents
        for s in range(seed, seed + seeds):
            net, repo = build_scenario(ScenarioSpec({"kind": "Star", "hosts": hosts},
                                                    intents, seed=s))
            inject_hijack(net, repo, intensity, s)
            pre = survival_rate(net, repo)
            base = baseline_primary_backup(net, repo)
            AssuranceLoop(net, repo).cycle()
            rows.append({"k": k, "intensity": intensity, "seed": s, "pre": pre,
                         "baseline": base, "post": survival_rate(net, repo)})
    return rows


def completeness_sweep(seeds: int, seed: int = 0, levels=range(40, 101, 10),
                       rows_: int = 10, cols: int = 10, intents: int = 10) -> list:
    """Survival after node failures: SAFLA post-cycle vs baseline vs feasible."""
    out = []
    for c in levels:
        for s in range(seed, seed + seeds):
            net, repo = build_scenario(ScenarioSpec({"kind": "Mesh", "rows": rows_, "cols": cols},
                                                    intents, seed=s))
            fail_nodes(net, repo, c, s)
            pre = survival_rate(net, repo)
            base = baseline_primary_backup(net, repo)
            feasible = feasible_fraction(net, repo)
            AssuranceLoop(net, repo).cycle()
            out.append({"completeness": c, "seed": s, "pre": pre, "baseline": base,
                        "feasible": feasible, "post": survival_rate(net, repo)})
    return out
