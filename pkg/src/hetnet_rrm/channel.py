"""Two-scale fading channel with counter-based, coordinate-keyed randomness.

Every random draw is a pure function of ``(seed, stream, subframe, link,
subband)``: we key a Philox counter-based generator on the seed and stream id
and place the subframe index in a high counter word, so identical coordinates
reproduce identical values on any machine and in any call order.

The per-link gain factors as ``h = h_small * h_large``.  The large-scale part
is a log-distance law with optional lognormal shadowing and is fixed for a
scenario realization; the small-scale part is unit-mean Rayleigh block fading,
redrawn independently per subframe and subband (``|h_small|^2`` exponential
with mean 1).  In deterministic mode ``h_small`` is pinned to 1.

Note on conventions: the configured path-loss ``exponent`` applies to the
amplitude-like ``h_large`` directly (received power therefore decays at twice
that exponent), and ``ref_gain_db`` is the power gain at 1 m, already
normalized so the receiver noise power is 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .topology import NodeKind, TopologyGraph

# Stream ids keep independent random purposes on disjoint Philox keys.
STREAM_FADING = 1
STREAM_SHADOWING = 2
STREAM_PATTERN = 3

_MIN_DISTANCE_M = 1.0


@dataclass(frozen=True)
class LinkClassParams:
    """Log-distance parameters for one link class."""

    exponent: float
    ref_gain_db: float
    shadow_sigma_db: float


@dataclass(frozen=True)
class PathlossParams:
    macro_macro: LinkClassParams = LinkClassParams(1.6, -20.0, 2.0)
    bs_bs: LinkClassParams = LinkClassParams(1.75, -18.0, 3.0)
    bs_user: LinkClassParams = LinkClassParams(1.9, -16.0, 4.0)

    def for_link(self, graph: TopologyGraph, link_index: int) -> LinkClassParams:
        link = graph.links[link_index]
        head, tail = graph.nodes[link.head], graph.nodes[link.tail]
        if tail.kind is NodeKind.USER:
            return self.bs_user
        if head.kind is NodeKind.MACRO and tail.kind is NodeKind.MACRO:
            return self.macro_macro
        return self.bs_bs


def keyed_generator(seed: int, stream: int, t: int = 0) -> Generator:
    """Philox generator whose output depends only on (seed, stream, t)."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream], dtype=np.uint64)
    counter = np.array([0, 0, t, 0], dtype=np.uint64)
    return Generator(Philox(key=key, counter=counter))


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def large_scale_gains(graph: TopologyGraph, params: PathlossParams, seed: int) -> np.ndarray:
    """Per-link amplitude gains ``h_large > 0``; wired links get a placeholder 1.

    Shadowing draws consume one normal per wireless link, in link order, from
    the dedicated shadowing stream, so gains are reproducible per seed.
    """
    gains = np.ones(graph.num_links)
    shadows = keyed_generator(seed, STREAM_SHADOWING).standard_normal(len(graph.wireless_links))
    for pos, l in enumerate(graph.wireless_links):
        link = graph.links[l]
        a = graph.nodes[link.head].position
        b = graph.nodes[link.tail].position
        dist = max(float(np.hypot(a[0] - b[0], a[1] - b[1])), _MIN_DISTANCE_M)
        cls = params.for_link(graph, l)
        shadow_db = cls.shadow_sigma_db * shadows[pos]
        gains[l] = 10.0 ** ((cls.ref_gain_db + shadow_db) / 20.0) * dist ** (-cls.exponent)
    return gains


def snr_term(h_squared: np.ndarray, power: np.ndarray | float) -> np.ndarray:
    """Instantaneous spectral efficiency ``log(1 + |h|^2 p)`` in nats."""
    return np.log1p(h_squared * power)


class ChannelModel:
    """Fading state generator for one scenario realization.

    Holds the static per-link transmit powers (noise-normalized linear watts)
    and large-scale gains; produces per-subframe squared channel magnitudes
    and the derived per-subband rate tables used by the scheduler.
    """

    def __init__(
        self,
        graph: TopologyGraph,
        num_subbands: int,
        p_macro_dbm: float,
        p_pico_dbm: float,
        seed: int,
        deterministic: bool = False,
        pathloss: PathlossParams | None = None,
        noise_dbm: float = -100.0,
        large_gains: np.ndarray | None = None,
        power_overrides: dict[int, float] | None = None,
    ):
        if num_subbands < 1:
            raise ValueError("need at least one subband")
        self.graph = graph
        self.num_subbands = num_subbands
        self.seed = int(seed)
        self.deterministic = bool(deterministic)
        self.p_macro_dbm = float(p_macro_dbm)
        self.p_pico_dbm = float(p_pico_dbm)
        self.noise_dbm = float(noise_dbm)
        self.pathloss = pathloss or PathlossParams()
        self.power_overrides = dict(power_overrides or {})
        if large_gains is None:
            self.large_gains = large_scale_gains(graph, self.pathloss, seed)
        else:
            if large_gains.shape != (graph.num_links,):
                raise ValueError("large_gains must have one entry per link")
            if np.any(large_gains[list(graph.wireless_links)] <= 0):
                raise ValueError("large-scale gains must be positive")
            self.large_gains = np.asarray(large_gains, dtype=float)

        noise_watts = dbm_to_watts(noise_dbm)
        self.tx_powers = np.zeros(graph.num_links)
        for l in graph.links:
            if l.is_wired:
                continue
            kind = graph.nodes[l.head].kind
            dbm = self.power_overrides.get(
                l.head, p_macro_dbm if kind is NodeKind.MACRO else p_pico_dbm
            )
            self.tx_powers[l.index] = dbm_to_watts(dbm) / noise_watts

        self._wireless = np.array(graph.wireless_links, dtype=int)

    @property
    def num_links(self) -> int:
        return self.graph.num_links

    def draw_subframe(self, t: int) -> np.ndarray:
        """Squared magnitudes ``|h|^2`` with shape (L, M) for subframe ``t``.

        Wired links carry zeros; they never enter the radio scheduler.
        """
        out = np.zeros((self.num_links, self.num_subbands))
        large_sq = self.large_gains[self._wireless] ** 2
        if self.deterministic:
            out[self._wireless, :] = large_sq[:, None]
        else:
            small = keyed_generator(self.seed, STREAM_FADING, t).standard_exponential(
                (len(self._wireless), self.num_subbands)
            )
            out[self._wireless, :] = small * large_sq[:, None]
        return out

    def draw_block(self, t_start: int, n_subframes: int) -> np.ndarray:
        """Stacked draws for subframes ``t_start .. t_start + n - 1``: (S, L, M)."""
        return np.stack([self.draw_subframe(t_start + s) for s in range(n_subframes)])

    def rate_block(self, t_start: int, n_subframes: int) -> np.ndarray:
        """Per-subband achievable rates (nats) for a run of subframes: (S, L, M)."""
        return snr_term(self.draw_block(t_start, n_subframes), self.tx_powers[None, :, None])

    def statistical_rates(self) -> np.ndarray:
        """Rates with ``h_small`` replaced by its unit mean: (L, M), constant in t."""
        h2 = np.zeros((self.num_links, self.num_subbands))
        h2[self._wireless, :] = (self.large_gains[self._wireless] ** 2)[:, None]
        return snr_term(h2, self.tx_powers[:, None])

    def pattern_draws(self, t_start: int, n_subframes: int) -> np.ndarray:
        """Uniform(0,1) stream for per-subframe pattern sampling, one per subframe."""
        return np.concatenate(
            [keyed_generator(self.seed, STREAM_PATTERN, t_start + s).random(1) for s in range(n_subframes)]
        )
