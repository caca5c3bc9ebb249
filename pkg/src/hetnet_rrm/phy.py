"""DTX pattern enumeration and per-subband max-weight link scheduling.

A DTX pattern is a boolean activity vector over base stations.  A pattern is
admissible when its active set is independent in the interference graph, so
active stations never interfere; the candidate set we optimize over is every
maximal independent set plus the all-silent pattern.

Within a subframe each active station serves, on every subband, the outgoing
wireless link maximizing ``weight * log(1 + |h|^2 p)``; ties go to the lowest
link index, and the argmax link is scheduled even when its weighted rate is
zero.  Since every link has exactly one transmitter and admissible patterns
are interference-free, conditional link rates are additive over active
stations, which the rate-table computation exploits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelModel
from .topology import TopologyGraph

MAX_PATTERN_BS = 20

Pattern = tuple[int, ...]


class PatternEnumerationError(RuntimeError):
    pass


def _maximal_independent_sets(conflicts: np.ndarray) -> list[frozenset[int]]:
    """Bron-Kerbosch with pivoting on the complement graph (cliques there are
    independent sets here)."""
    n = conflicts.shape[0]
    comp = ~conflicts.copy()
    np.fill_diagonal(comp, False)
    neighbors = [frozenset(np.flatnonzero(comp[v])) for v in range(n)]
    found: list[frozenset[int]] = []

    def expand(r: frozenset[int], p: set[int], x: set[int]) -> None:
        if not p and not x:
            found.append(r)
            return
        pivot = max(p | x, key=lambda v: len(neighbors[v] & p))
        for v in sorted(p - neighbors[pivot]):
            expand(r | {v}, p & set(neighbors[v]), x & set(neighbors[v]))
            p.discard(v)
            x.add(v)

    expand(frozenset(), set(range(n)), set())
    return found


def enumerate_feasible_patterns(interference: np.ndarray, max_bs: int = MAX_PATTERN_BS) -> list[Pattern]:
    """All-silent plus every maximal independent set, in lexicographic order."""
    n = interference.shape[0]
    if n > max_bs:
        raise PatternEnumerationError(
            f"pattern enumeration over {n} base stations exceeds the cap of {max_bs}"
        )
    patterns = {tuple(0 for _ in range(n))}
    for s in _maximal_independent_sets(interference):
        patterns.add(tuple(1 if v in s else 0 for v in range(n)))
    return sorted(patterns)


def is_feasible_pattern(interference: np.ndarray, pattern: Pattern) -> bool:
    active = np.flatnonzero(np.asarray(pattern, dtype=bool))
    sub = interference[np.ix_(active, active)]
    return not np.any(sub)


def schedule_links(
    graph: TopologyGraph,
    pattern: Pattern,
    weights: np.ndarray,
    subband_rates: np.ndarray,
) -> np.ndarray:
    """One-subframe schedule: boolean (L, M) with at most one served link per
    active station and subband.

    ``subband_rates`` holds per-link per-subband rates ``log(1+|h|^2 p)``.
    """
    n_links, n_subbands = subband_rates.shape
    rho = np.zeros((n_links, n_subbands), dtype=bool)
    for slot, node in enumerate(graph.bs_nodes):
        if not pattern[slot]:
            continue
        cand = np.array(graph.outgoing_wireless(node), dtype=int)
        if cand.size == 0:
            continue
        scores = weights[cand, None] * subband_rates[cand, :]
        winner = cand[np.argmax(scores, axis=0)]  # first max -> lowest link index
        rho[winner, np.arange(n_subbands)] = True
    assert_schedule_feasible(graph, pattern, rho)
    return rho


def assert_schedule_feasible(graph: TopologyGraph, pattern: Pattern, rho: np.ndarray) -> None:
    """Hard feasibility assertions: silent or foreign links never scheduled and
    every active station serves at most one link per subband."""
    for slot, node in enumerate(graph.bs_nodes):
        links = list(graph.outgoing_wireless(node))
        used = rho[links, :].sum(axis=0) if links else np.zeros(rho.shape[1])
        limit = int(pattern[slot])
        if np.any(used > limit):
            raise AssertionError(f"station {node} scheduled {used.max()} links on one subband (limit {limit})")
    for l in graph.wired_links:
        if np.any(rho[l]):
            raise AssertionError(f"wired link {l} appeared in a radio schedule")


@dataclass(frozen=True, eq=False)
class RateTable:
    """Conditional mean link rates per pattern, with Monte Carlo standard errors.

    ``rates[j, l]`` is the average rate of link ``l`` when pattern ``j`` is on
    and links are scheduled by the max-weight rule for the weights the table
    was built with.  Wired links are not radio-scheduled and carry zeros.
    """

    patterns: list[Pattern]
    rates: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)

    def row(self, j: int) -> np.ndarray:
        return self.rates[j]


def station_contributions(
    graph: TopologyGraph,
    weights: np.ndarray,
    rate_block: np.ndarray,
    winner_rates: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-station mean link-rate contributions under max-weight scheduling.

    Returns ``(mean, stderr)`` of shape (B, L): row ``n`` holds the average
    over the block's subframes of the rate each of station ``n``'s links gets
    when the station is active.  Because admissible patterns are
    interference-free, a pattern's rate row is the sum of its active rows.

    ``winner_rates`` optionally supplies a separate (L, M) table used only for
    the argmax (statistical scheduling); payload rates still come from
    ``rate_block``.
    """
    n_samples, n_links, n_subbands = rate_block.shape
    mean = np.zeros((graph.num_bs, n_links))
    stderr = np.zeros((graph.num_bs, n_links))
    for slot, node in enumerate(graph.bs_nodes):
        cand = np.array(graph.outgoing_wireless(node), dtype=int)
        if cand.size == 0:
            continue
        payload = rate_block[:, cand, :]  # (S, C, M)
        if winner_rates is None:
            scores = weights[cand][None, :, None] * payload
        else:
            scores = np.broadcast_to(
                weights[cand][None, :, None] * winner_rates[cand, :][None, :, :], payload.shape
            )
        winner = np.argmax(scores, axis=1)  # (S, M), first max -> lowest link index
        chosen = winner[:, None, :] == np.arange(cand.size)[None, :, None]
        per_sample = np.where(chosen, payload, 0.0).sum(axis=2)  # (S, C)
        mean[slot, cand] = per_sample.mean(axis=0)
        if n_samples > 1:
            stderr[slot, cand] = per_sample.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return mean, stderr


def rate_table_for_patterns(
    graph: TopologyGraph,
    patterns: list[Pattern],
    weights: np.ndarray,
    rate_block: np.ndarray,
    winner_rates: np.ndarray | None = None,
) -> RateTable:
    """Conditional rates for every pattern from one shared draw block.

    Sharing draws across patterns keeps comparisons paired: the argmax pattern
    of the sampled table genuinely maximizes the sampled weighted rate.
    """
    mean, stderr = station_contributions(graph, weights, rate_block, winner_rates)
    mask = np.array(patterns, dtype=float)  # (J, B)
    return RateTable(patterns=list(patterns), rates=mask @ mean, stderr=mask @ stderr)


def conditional_rate(
    graph: TopologyGraph,
    pattern: Pattern,
    weights: np.ndarray,
    channel: ChannelModel,
    n_samples: int,
    t_start: int = 0,
    statistical_winners: bool = False,
) -> np.ndarray:
    """Monte Carlo mean link rates for one pattern (exact when the channel is
    deterministic and ``n_samples`` is 1)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    block = channel.rate_block(t_start, n_samples)
    winner = channel.statistical_rates() if statistical_winners else None
    table = rate_table_for_patterns(graph, [pattern], weights, block, winner)
    return table.rates[0]


def policy_rate(shares: np.ndarray, rate_rows: np.ndarray) -> np.ndarray:
    """Time-sharing average ``sum_j q_j r_j`` over pattern rate rows."""
    shares = np.asarray(shares, dtype=float)
    if shares.ndim != 1 or rate_rows.shape[0] != shares.shape[0]:
        raise ValueError(f"{shares.shape[0]} shares for {rate_rows.shape[0]} rate rows")
    if np.any(shares < -1e-12) or abs(shares.sum() - 1.0) > 1e-9:
        raise ValueError("shares must lie on the probability simplex")
    return shares @ rate_rows
