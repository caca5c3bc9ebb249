"""Exhaustive reference optimizer for small deterministic networks.

Where the adaptive scheme discovers scheduled patterns greedily, the oracle
enumerates every vertex of the achievable wireless rate region: each
admissible pattern combined with every assignment of one served link per
active station.  With a deterministic channel each vertex row is exact, and
subband-splitting schedules are convex combinations of these pure assignments,
so optimizing time shares over the enumerated rows solves the full problem.

Enumeration cost grows multiplicatively with network size, so the oracle
refuses anything beyond a desk-check scale instead of silently taking hours.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import ChannelModel
from .netopt import FlowSolution, UtilitySpec, optimize_time_sharing, solve_p1
from .phy import Pattern, enumerate_feasible_patterns
from .topology import TopologyGraph

MAX_ORACLE_BS = 6
MAX_ORACLE_WIRELESS_LINKS = 12
MAX_ORACLE_PATTERNS = 16


class OracleScaleError(RuntimeError):
    """The network exceeds the size the exhaustive oracle will attempt."""


@dataclass(frozen=True)
class OracleSolution:
    utility: float
    shares: np.ndarray
    rate_rows: np.ndarray
    flow: FlowSolution
    n_vertices: int


def check_oracle_scale(graph: TopologyGraph, patterns: list[Pattern]) -> None:
    if graph.num_bs > MAX_ORACLE_BS:
        raise OracleScaleError(f"{graph.num_bs} base stations exceed oracle cap {MAX_ORACLE_BS}")
    n_wireless = len(graph.wireless_links)
    if n_wireless > MAX_ORACLE_WIRELESS_LINKS:
        raise OracleScaleError(
            f"{n_wireless} wireless links exceed oracle cap {MAX_ORACLE_WIRELESS_LINKS}"
        )
    if len(patterns) > MAX_ORACLE_PATTERNS:
        raise OracleScaleError(
            f"{len(patterns)} patterns exceed oracle cap {MAX_ORACLE_PATTERNS}"
        )


def vertex_rate_rows(model: ChannelModel) -> np.ndarray:
    """Every pattern x served-link assignment as a deterministic rate row.

    Requires a deterministic channel: rows are then exact conditional rates
    rather than Monte Carlo estimates.  Duplicate rows are dropped.
    """
    if not model.deterministic:
        raise ValueError("the exhaustive oracle only supports deterministic channels")
    graph = model.graph
    patterns = enumerate_feasible_patterns(graph.interference)
    check_oracle_scale(graph, patterns)
    link_rates = model.rate_block(0, 1)[0].sum(axis=1)  # (L,) nats over subbands

    rows: list[np.ndarray] = []
    for pattern in patterns:
        choices: list[list[int]] = []
        for slot, node in enumerate(graph.bs_nodes):
            if not pattern[slot]:
                continue
            outgoing = list(graph.outgoing_wireless(node))
            if outgoing:
                choices.append(outgoing)
        if not choices:
            rows.append(np.zeros(graph.num_links))
            continue
        for combo in itertools.product(*choices):
            row = np.zeros(graph.num_links)
            row[list(combo)] = link_rates[list(combo)]
            rows.append(row)
    unique = np.unique(np.array(rows), axis=0)
    return unique


def oracle_solve(model: ChannelModel, utility: UtilitySpec) -> OracleSolution:
    """Utility-optimal time sharing over the exhaustively enumerated vertices."""
    rows = vertex_rate_rows(model)
    graph = model.graph
    shares, flow = optimize_time_sharing(
        rows,
        graph,
        utility,
        tol=1e-7,
        base_capacity=graph.wired_base_capacity(),
    )
    return OracleSolution(
        utility=flow.utility,
        shares=shares,
        rate_rows=rows,
        flow=flow,
        n_vertices=rows.shape[0],
    )


def grid_search_time_sharing(
    rate_rows: np.ndarray,
    graph: TopologyGraph,
    utility: UtilitySpec,
    base_capacity: np.ndarray,
    resolution: float,
) -> float:
    """Best utility over a simplex grid of shares (at most three rows).

    A deliberately brainless cross-check for the continuous share optimizer:
    grid points are priced through the flow solver and the best utility is
    returned.  Three-row grids are refined in two stages (coarse sweep, then
    a fine pass around the winner) to keep the solve count manageable.
    """
    n_rows = rate_rows.shape[0]
    if n_rows > 3:
        raise ValueError("grid search is limited to three rows")
    if n_rows == 1:
        return solve_p1(graph, base_capacity + rate_rows[0], utility).utility

    def evaluate(candidates: list[np.ndarray]) -> tuple[float, np.ndarray]:
        best, best_q = -np.inf, candidates[0]
        for q in candidates:
            sol = solve_p1(graph, base_capacity + q @ rate_rows, utility)
            if sol.utility > best:
                best, best_q = sol.utility, q
        return best, best_q

    if n_rows == 2:
        steps = int(round(1.0 / resolution))
        best, _ = evaluate(
            [np.array([k / steps, 1.0 - k / steps]) for k in range(steps + 1)]
        )
        return best

    coarse = max(resolution, 1e-2)
    steps = int(round(1.0 / coarse))
    grid = [
        np.array([a / steps, b / steps, 1.0 - (a + b) / steps])
        for a in range(steps + 1)
        for b in range(steps + 1 - a)
    ]
    best, center = evaluate(grid)
    if resolution < coarse:
        fine_steps = int(round(coarse / resolution))
        offsets = np.arange(-fine_steps, fine_steps + 1) * resolution
        local: list[np.ndarray] = []
        for da in offsets:
            for db in offsets:
                a, b = center[0] + da, center[1] + db
                if a < -1e-12 or b < -1e-12 or a + b > 1.0 + 1e-12:
                    continue
                a, b = min(max(a, 0.0), 1.0), min(max(b, 0.0), 1.0)
                local.append(np.array([a, b, max(1.0 - a - b, 0.0)]))
        fine_best, _ = evaluate(local)
        best = max(best, fine_best)
    return best
