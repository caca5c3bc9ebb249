"""Reference schemes the adaptive scheme is compared against.

Three baselines share the proposed scheme's trace shape so sweeps can plot
them side by side:

* fixed backhaul connection (FBC): every pico lacking wired backhaul gets a
  generous wired link from its nearest macro, then the full adaptive scheme
  runs on the augmented network.  An upper-reference since wireless relay
  traffic moves onto wires.
* fixed-duration dynamic spectrum allocation (FDDSA): uniform time-sharing
  over every admissible pattern with no pattern discovery and no share
  optimization; flow control and price-based weights still adapt.
* two-timescale rate-statistics coordination (TTRSC): the adaptive scheme but
  with subband winners chosen from statistical (fading-averaged) rates rather
  than per-subframe realizations.  Identical to the proposed scheme when the
  channel is deterministic.
"""

from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from .channel import ChannelModel
from .netopt import solve_p1
from .phy import enumerate_feasible_patterns, rate_table_for_patterns, schedule_links
from .rrm import (
    RrmConfig,
    RrmResult,
    RrmState,
    ScheduledPattern,
    SuperframeRecord,
    _sample_member_indices,
    certificate,
    run_to_convergence,
)
from .topology import Link, NodeKind, TopologyGraph

FBC_CAPACITY_MARGIN = 10.0


def run_proposed(model: ChannelModel, config: RrmConfig) -> RrmResult:
    return run_to_convergence(model, config)


def run_ttrsc(model: ChannelModel, config: RrmConfig) -> RrmResult:
    return run_to_convergence(model, replace(config, statistical_scheduling=True))


def run_fddsa(model: ChannelModel, config: RrmConfig) -> RrmResult:
    """Uniform time-sharing over all admissible patterns.

    Each superframe simulates the subframes, rebuilds the pattern rate table
    under the current weights, and re-solves flow control at the uniform
    mixture's capacities; the prices feed the next superframe's scheduler.
    """
    graph = model.graph
    patterns = enumerate_feasible_patterns(graph.interference)
    shares = np.full(len(patterns), 1.0 / len(patterns))
    weights = np.ones(graph.num_links)
    base = graph.wired_base_capacity()
    n_sub = config.subframes_per_superframe

    records: list[SuperframeRecord] = []
    state = RrmState(
        members=[ScheduledPattern(pattern=p, weights=weights) for p in patterns],
        shares=shares,
        weights=weights,
        patterns=patterns,
        rate_rows=np.zeros((len(patterns), graph.num_links)),
        row_stderr=np.zeros((len(patterns), graph.num_links)),
    )
    converged = False
    previous = None
    for i in range(config.max_superframes):
        started = time.perf_counter()
        t0 = i * n_sub
        rate_block = model.rate_block(t0, n_sub)
        pattern_idx = _sample_member_indices(shares, model.pattern_draws(t0, n_sub))
        served = np.zeros(graph.num_links)
        for t in range(n_sub):
            rho = schedule_links(graph, patterns[pattern_idx[t]], weights, rate_block[t])
            served += (rho * rate_block[t]).sum(axis=1)
        served /= n_sub

        table = rate_table_for_patterns(graph, patterns, weights, rate_block)
        flow = solve_p1(graph, base + shares @ table.rates, config.utility, tol=config.flow_tol)
        weights = flow.prices.copy()
        state = RrmState(
            members=[ScheduledPattern(pattern=p, weights=weights) for p in patterns],
            shares=shares,
            weights=weights,
            patterns=patterns,
            rate_rows=table.rates,
            row_stderr=table.stderr,
            flow=flow,
            utility=flow.utility,
            superframe=i + 1,
        )
        records.append(
            SuperframeRecord(
                index=i,
                utility=flow.utility,
                n_members=len(patterns),
                shares=shares.copy(),
                flow_rates=flow.rates.copy(),
                served_rates=served,
                wall_ms=(time.perf_counter() - started) * 1e3,
            )
        )
        if previous is not None and abs(flow.utility - previous) < config.epsilon_converge:
            converged = True
            break
        previous = flow.utility

    report = certificate(model, state, config, state.superframe * n_sub)
    return RrmResult(state=state, records=records, converged=converged, certificate=report)


def nearest_macro(graph: TopologyGraph, pico_index: int) -> int:
    """Index of the closest macro node (lowest index wins ties)."""
    px, py = graph.nodes[pico_index].position
    best, best_dist = -1, np.inf
    for node in graph.nodes:
        if node.kind is not NodeKind.MACRO:
            continue
        dist = float(np.hypot(node.position[0] - px, node.position[1] - py))
        if dist < best_dist - 1e-12:
            best, best_dist = node.index, dist
    if best < 0:
        raise ValueError("graph has no macro node")
    return best


def augment_with_wired_backhaul(
    graph: TopologyGraph, wired_capacity: float
) -> TopologyGraph:
    """Give every pico without backhaul a wired link from its nearest macro.

    New links are appended after all existing ones so wireless channel draws
    stay aligned with the unmodified network; returns the original graph when
    every base station already has backhaul.
    """
    missing = [
        n.index
        for n in graph.nodes
        if n.kind is NodeKind.PICO and n.index not in graph.backhaul
    ]
    if not missing:
        return graph
    links = list(graph.links)
    for pico in missing:
        links.append(
            Link(
                index=len(links),
                head=nearest_macro(graph, pico),
                tail=pico,
                wired_capacity=wired_capacity,
            )
        )
    return TopologyGraph(
        nodes=graph.nodes,
        links=tuple(links),
        flows=graph.flows,
        backhaul=frozenset(graph.backhaul | set(missing)),
        interference=graph.interference,
    )


def run_fbc(
    model: ChannelModel,
    config: RrmConfig,
    wired_capacity: float | None = None,
) -> tuple[RrmResult, ChannelModel]:
    """Adaptive scheme on the wired-backhaul-augmented network.

    The default wired capacity is a wide margin above the best single-link
    wireless rate, so the added backhaul never bottlenecks.  Returns the
    result together with the augmented network's channel model (the original
    model when nothing needed wiring).
    """
    if wired_capacity is None:
        peak = float(model.statistical_rates().sum(axis=1).max())
        wired_capacity = FBC_CAPACITY_MARGIN * max(peak, 1.0)
    augmented = augment_with_wired_backhaul(model.graph, wired_capacity)
    if augmented is model.graph:
        return run_to_convergence(model, config), model
    fbc_model = ChannelModel(
        augmented,
        num_subbands=model.num_subbands,
        p_macro_dbm=model.p_macro_dbm,
        p_pico_dbm=model.p_pico_dbm,
        seed=model.seed,
        deterministic=model.deterministic,
        pathloss=model.pathloss,
        noise_dbm=model.noise_dbm,
        power_overrides=model.power_overrides,
    )
    return run_to_convergence(fbc_model, config), fbc_model
