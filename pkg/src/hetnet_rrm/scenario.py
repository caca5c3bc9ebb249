"""Scenario files: the on-disk description of one experiment.

A scenario is a line-oriented text file (header ``hetnet-scenario v1``) with
bracketed sections.  Record sections list one item per line in index order;
setting sections hold ``key = value`` pairs.  Unknown sections and keys are
rejected so typos fail loudly, and every parse or validation problem is
reported with its file line.  On the wire, powers are in dBm, positions in
meters, and wired capacities in bits per subframe; rates are converted to
nats internally.

Sections: ``[nodes]`` (``id kind x y [power_dbm]``), ``[links]``
(``id head tail [wired <bits>]``), ``[backhaul]`` (node ids), ``[flows]``
(``id source destination``), ``[radio]``, ``[pathloss]`` (optional, one
``exponent ref_gain_db shadow_sigma_db`` triple per link class) and ``[run]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .channel import ChannelModel, LinkClassParams, PathlossParams
from .netopt import UtilitySpec
from .rrm import RrmConfig
from .topology import (
    Flow,
    Link,
    Node,
    NodeKind,
    TopologyGraph,
    interference_from_positions,
    validate,
)

SCENARIO_HEADER = "hetnet-scenario v1"
NATS_PER_BIT = math.log(2.0)

_SECTIONS = ("nodes", "links", "backhaul", "flows", "radio", "pathloss", "run")
_REQUIRED_SECTIONS = ("nodes", "links", "backhaul", "flows", "radio", "run")

_MODES = ("proposed", "fbc", "fddsa", "ttrsc")

_RADIO_KEYS = (
    "subbands",
    "p_macro_dbm",
    "p_pico_dbm",
    "noise_dbm",
    "deterministic",
    "macro_radius_m",
    "pico_radius_m",
)
_PATHLOSS_KEYS = ("macro_macro", "bs_bs", "bs_user")
_RUN_KEYS = (
    "seed",
    "mode",
    "subframes_per_superframe",
    "control_lead_subframes",
    "max_superframes",
    "epsilon_converge",
    "gap_converge_rel",
    "q_prune",
    "max_members",
    "flow_tol",
    "share_gap_tol",
    "utility",
    "alpha",
    "utility_epsilon",
)

#: Parameters the sweep command may vary without editing the file.
SWEEPABLE_PARAMS = (
    "p_macro_dbm",
    "p_pico_dbm",
    "noise_dbm",
    "seed",
    "subbands",
    "subframes_per_superframe",
    "max_superframes",
)


class ScenarioError(ValueError):
    """One or more parse or validation problems; ``errors`` lists them all."""

    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class Scenario:
    """Fully validated experiment description.

    ``power_overrides`` maps node index to an explicit transmit power for
    nodes whose record carried one; everything else uses the class-wide
    ``p_macro_dbm`` / ``p_pico_dbm`` values (which is what the power sweep
    varies).
    """

    graph: TopologyGraph
    power_overrides: dict[int, float] = field(default_factory=dict)
    subbands: int = 10
    p_macro_dbm: float = 40.0
    p_pico_dbm: float = 33.0
    noise_dbm: float = -100.0
    deterministic: bool = False
    macro_radius_m: float = 420.0
    pico_radius_m: float = 260.0
    pathloss: PathlossParams = field(default_factory=PathlossParams)
    seed: int = 0
    mode: str = "proposed"
    control_lead_subframes: int = 2
    rrm: RrmConfig = field(default_factory=RrmConfig)

    def channel_model(self, seed: int | None = None) -> ChannelModel:
        return ChannelModel(
            self.graph,
            num_subbands=self.subbands,
            p_macro_dbm=self.p_macro_dbm,
            p_pico_dbm=self.p_pico_dbm,
            seed=self.seed if seed is None else seed,
            deterministic=self.deterministic,
            pathloss=self.pathloss,
            noise_dbm=self.noise_dbm,
            power_overrides=self.power_overrides,
        )


class _Cursor:
    """Line stream with error accumulation tagged by source line."""

    def __init__(self, path: str, text: str):
        self.path = path
        self.errors: list[str] = []
        self.lines: list[tuple[int, str]] = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            body = raw.split("#", 1)[0].strip()
            if body:
                self.lines.append((lineno, body))

    def error(self, lineno: int, message: str) -> None:
        self.errors.append(f"{self.path}:{lineno}: {message}")


def _parse_sections(cur: _Cursor) -> dict[str, list[tuple[int, str]]]:
    if not cur.lines:
        cur.error(
            0,
            "empty scenario: expected header '%s' and sections %s"
            % (SCENARIO_HEADER, ", ".join(f"[{s}]" for s in _REQUIRED_SECTIONS)),
        )
        return {}
    lineno, head = cur.lines[0]
    if head != SCENARIO_HEADER:
        cur.error(lineno, f"expected header '{SCENARIO_HEADER}', got '{head}'")
        return {}

    sections: dict[str, list[tuple[int, str]]] = {}
    current: list[tuple[int, str]] | None = None
    for lineno, body in cur.lines[1:]:
        if body.startswith("[") and body.endswith("]"):
            name = body[1:-1].strip()
            if name not in _SECTIONS:
                cur.error(lineno, f"unknown section [{name}]")
                current = None
            elif name in sections:
                cur.error(lineno, f"duplicate section [{name}]")
                current = None
            else:
                current = sections.setdefault(name, [])
        elif current is None:
            cur.error(lineno, f"line outside any recognized section: '{body}'")
        else:
            current.append((lineno, body))

    for name in _REQUIRED_SECTIONS:
        if name not in sections:
            cur.error(0, f"missing required section [{name}]")
    return sections


def _parse_settings(
    cur: _Cursor, records: list[tuple[int, str]], section: str, keys: tuple[str, ...]
) -> dict[str, tuple[int, str]]:
    out: dict[str, tuple[int, str]] = {}
    for lineno, body in records:
        if "=" not in body:
            cur.error(lineno, f"[{section}] expects 'key = value', got '{body}'")
            continue
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in keys:
            cur.error(lineno, f"unknown [{section}] key '{key}'")
        elif key in out:
            cur.error(lineno, f"duplicate [{section}] key '{key}'")
        else:
            out[key] = (lineno, value)
    return out


def _get_float(cur: _Cursor, settings, key: str, default: float) -> float:
    if key not in settings:
        return default
    lineno, raw = settings[key]
    try:
        return float(raw)
    except ValueError:
        cur.error(lineno, f"'{key}' must be a number, got '{raw}'")
        return default


def _get_int(cur: _Cursor, settings, key: str, default: int, minimum: int) -> int:
    if key not in settings:
        return default
    lineno, raw = settings[key]
    try:
        value = int(raw)
    except ValueError:
        cur.error(lineno, f"'{key}' must be an integer, got '{raw}'")
        return default
    if value < minimum:
        cur.error(lineno, f"'{key}' must be >= {minimum}, got {value}")
        return default
    return value


def _get_bool(cur: _Cursor, settings, key: str, default: bool) -> bool:
    if key not in settings:
        return default
    lineno, raw = settings[key]
    if raw in ("true", "false"):
        return raw == "true"
    cur.error(lineno, f"'{key}' must be 'true' or 'false', got '{raw}'")
    return default


def _parse_nodes(
    cur: _Cursor, records: list[tuple[int, str]]
) -> tuple[list[Node], dict[int, float]]:
    nodes: list[Node] = []
    overrides: dict[int, float] = {}
    kinds = {k.value: k for k in NodeKind}
    for lineno, body in records:
        parts = body.split()
        if len(parts) not in (4, 5):
            cur.error(lineno, f"[nodes] record needs 'id kind x y [power_dbm]', got '{body}'")
            continue
        try:
            idx = int(parts[0])
            x, y = float(parts[2]), float(parts[3])
        except ValueError:
            cur.error(lineno, f"[nodes] record has non-numeric id or position: '{body}'")
            continue
        if parts[1] not in kinds:
            cur.error(lineno, f"unknown node kind '{parts[1]}' (macro, pico or user)")
            continue
        kind = kinds[parts[1]]
        if idx != len(nodes):
            cur.error(lineno, f"node id {idx} out of order; expected {len(nodes)}")
            continue
        if len(parts) == 5:
            if kind is NodeKind.USER:
                cur.error(lineno, f"user node {idx} cannot carry a transmit power")
                continue
            try:
                overrides[idx] = float(parts[4])
            except ValueError:
                cur.error(lineno, f"node {idx} power must be a number, got '{parts[4]}'")
                continue
        nodes.append(Node(index=idx, kind=kind, position=(x, y)))
    return nodes, overrides


def _parse_links(cur: _Cursor, records: list[tuple[int, str]]) -> list[Link]:
    links: list[Link] = []
    for lineno, body in records:
        parts = body.split()
        if len(parts) not in (3, 5) or (len(parts) == 5 and parts[3] != "wired"):
            cur.error(lineno, f"[links] record needs 'id head tail [wired <bits>]', got '{body}'")
            continue
        try:
            idx, head, tail = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            cur.error(lineno, f"[links] record has non-integer ids: '{body}'")
            continue
        if idx != len(links):
            cur.error(lineno, f"link id {idx} out of order; expected {len(links)}")
            continue
        capacity = None
        if len(parts) == 5:
            try:
                bits = float(parts[4])
            except ValueError:
                cur.error(lineno, f"link {idx} wired capacity must be a number, got '{parts[4]}'")
                continue
            if bits <= 0:
                cur.error(lineno, f"link {idx} wired capacity must be positive, got {bits}")
                continue
            capacity = bits * NATS_PER_BIT
        links.append(Link(index=idx, head=head, tail=tail, wired_capacity=capacity))
    return links


def _parse_backhaul(cur: _Cursor, records: list[tuple[int, str]]) -> set[int]:
    out: set[int] = set()
    for lineno, body in records:
        for token in body.split():
            try:
                node = int(token)
            except ValueError:
                cur.error(lineno, f"[backhaul] entries must be node ids, got '{token}'")
                continue
            if node in out:
                cur.error(lineno, f"duplicate backhaul entry {node}")
            out.add(node)
    return out


def _parse_flows(cur: _Cursor, records: list[tuple[int, str]]) -> list[Flow]:
    flows: list[Flow] = []
    for lineno, body in records:
        parts = body.split()
        if len(parts) != 3:
            cur.error(lineno, f"[flows] record needs 'id source destination', got '{body}'")
            continue
        try:
            idx, src, dst = (int(p) for p in parts)
        except ValueError:
            cur.error(lineno, f"[flows] record has non-integer ids: '{body}'")
            continue
        if idx != len(flows):
            cur.error(lineno, f"flow id {idx} out of order; expected {len(flows)}")
            continue
        flows.append(Flow(index=idx, source=src, destination=dst))
    return flows


def _parse_pathloss(cur: _Cursor, records: list[tuple[int, str]]) -> PathlossParams:
    settings = _parse_settings(cur, records, "pathloss", _PATHLOSS_KEYS)
    classes = {}
    defaults = PathlossParams()
    for key in _PATHLOSS_KEYS:
        if key not in settings:
            classes[key] = getattr(defaults, key)
            continue
        lineno, raw = settings[key]
        parts = raw.split()
        try:
            exponent, ref_gain, sigma = (float(p) for p in parts)
        except ValueError:
            cur.error(
                lineno,
                f"'{key}' needs three numbers 'exponent ref_gain_db shadow_sigma_db', got '{raw}'",
            )
            classes[key] = getattr(defaults, key)
            continue
        classes[key] = LinkClassParams(exponent, ref_gain, sigma)
    return PathlossParams(**classes)


def parse_scenario(text: str, path: str = "<scenario>") -> Scenario:
    """Parse and validate scenario text; raises :class:`ScenarioError` listing
    every problem found (never just the first one)."""
    cur = _Cursor(path, text)
    sections = _parse_sections(cur)
    if cur.errors:
        raise ScenarioError(cur.errors)

    nodes, overrides = _parse_nodes(cur, sections["nodes"])
    links = _parse_links(cur, sections["links"])
    backhaul = _parse_backhaul(cur, sections["backhaul"])
    flows = _parse_flows(cur, sections["flows"])

    radio = _parse_settings(cur, sections["radio"], "radio", _RADIO_KEYS)
    subbands = _get_int(cur, radio, "subbands", 10, minimum=1)
    p_macro = _get_float(cur, radio, "p_macro_dbm", 40.0)
    p_pico = _get_float(cur, radio, "p_pico_dbm", 33.0)
    noise = _get_float(cur, radio, "noise_dbm", -100.0)
    deterministic = _get_bool(cur, radio, "deterministic", False)
    macro_radius = _get_float(cur, radio, "macro_radius_m", 420.0)
    pico_radius = _get_float(cur, radio, "pico_radius_m", 260.0)

    pathloss = _parse_pathloss(cur, sections.get("pathloss", []))

    run = _parse_settings(cur, sections["run"], "run", _RUN_KEYS)
    seed = _get_int(cur, run, "seed", 0, minimum=0)
    t_s = _get_int(cur, run, "subframes_per_superframe", 200, minimum=1)
    t_d = _get_int(cur, run, "control_lead_subframes", 2, minimum=0)
    if t_d >= t_s:
        lineno = run["control_lead_subframes"][0] if "control_lead_subframes" in run else 0
        cur.error(lineno, f"control_lead_subframes ({t_d}) must be smaller than subframes_per_superframe ({t_s})")
    max_superframes = _get_int(cur, run, "max_superframes", 60, minimum=1)
    epsilon = _get_float(cur, run, "epsilon_converge", 1e-6)
    gap_rel = _get_float(cur, run, "gap_converge_rel", 1e-6)
    q_prune = _get_float(cur, run, "q_prune", 1e-12)
    max_members = _get_int(cur, run, "max_members", 64, minimum=2)
    flow_tol = _get_float(cur, run, "flow_tol", 1e-6)
    share_gap_tol = _get_float(cur, run, "share_gap_tol", 1e-5)
    alpha = _get_float(cur, run, "alpha", 1.0)
    utility_eps = _get_float(cur, run, "utility_epsilon", 1e-3)

    mode = "proposed"
    if "mode" in run:
        lineno, raw = run["mode"]
        if raw not in _MODES:
            cur.error(lineno, f"mode must be one of {', '.join(_MODES)}, got '{raw}'")
        else:
            mode = raw
    if "utility" in run:
        lineno, raw = run["utility"]
        if raw != "alpha_fair":
            cur.error(lineno, f"only the 'alpha_fair' utility family is supported, got '{raw}'")

    if cur.errors:
        raise ScenarioError(cur.errors)

    interference = interference_from_positions(tuple(nodes), macro_radius, pico_radius)
    graph = TopologyGraph(
        nodes=tuple(nodes),
        links=tuple(links),
        flows=tuple(flows),
        backhaul=frozenset(backhaul),
        interference=interference,
    )
    problems = validate(graph)
    if problems:
        raise ScenarioError([f"{path}: {p}" for p in problems])

    try:
        utility = UtilitySpec(alpha=alpha, epsilon=utility_eps)
        rrm = RrmConfig(
            subframes_per_superframe=t_s,
            max_superframes=max_superframes,
            epsilon_converge=epsilon,
            gap_converge_rel=gap_rel,
            q_prune=q_prune,
            max_members=max_members,
            flow_tol=flow_tol,
            share_gap_tol=share_gap_tol,
            utility=utility,
        )
    except ValueError as exc:
        raise ScenarioError([f"{path}: {exc}"]) from exc

    return Scenario(
        graph=graph,
        power_overrides=overrides,
        subbands=subbands,
        p_macro_dbm=p_macro,
        p_pico_dbm=p_pico,
        noise_dbm=noise,
        deterministic=deterministic,
        macro_radius_m=macro_radius,
        pico_radius_m=pico_radius,
        pathloss=pathloss,
        seed=seed,
        mode=mode,
        control_lead_subframes=t_d,
        rrm=rrm,
    )


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_scenario(handle.read(), path=str(path))


def _fmt(value: float) -> str:
    return repr(float(value))


def dump_scenario(scenario: Scenario) -> str:
    """Canonical text form; ``parse_scenario(dump_scenario(s))`` reproduces
    ``s`` exactly, which is what makes the trace's config echo re-runnable."""
    graph = scenario.graph
    out = [SCENARIO_HEADER, "", "[nodes]"]
    for node in graph.nodes:
        line = f"{node.index} {node.kind.value} {_fmt(node.position[0])} {_fmt(node.position[1])}"
        if node.index in scenario.power_overrides:
            line += f" {_fmt(scenario.power_overrides[node.index])}"
        out.append(line)
    out += ["", "[links]"]
    for link in graph.links:
        line = f"{link.index} {link.head} {link.tail}"
        if link.is_wired:
            line += f" wired {_fmt(link.wired_capacity / NATS_PER_BIT)}"
        out.append(line)
    out += ["", "[backhaul]"]
    if graph.backhaul:
        out.append(" ".join(str(n) for n in sorted(graph.backhaul)))
    out += ["", "[flows]"]
    for flow in graph.flows:
        out.append(f"{flow.index} {flow.source} {flow.destination}")
    out += [
        "",
        "[radio]",
        f"subbands = {scenario.subbands}",
        f"p_macro_dbm = {_fmt(scenario.p_macro_dbm)}",
        f"p_pico_dbm = {_fmt(scenario.p_pico_dbm)}",
        f"noise_dbm = {_fmt(scenario.noise_dbm)}",
        f"deterministic = {'true' if scenario.deterministic else 'false'}",
        f"macro_radius_m = {_fmt(scenario.macro_radius_m)}",
        f"pico_radius_m = {_fmt(scenario.pico_radius_m)}",
        "",
        "[pathloss]",
    ]
    for key in _PATHLOSS_KEYS:
        cls = getattr(scenario.pathloss, key)
        out.append(f"{key} = {_fmt(cls.exponent)} {_fmt(cls.ref_gain_db)} {_fmt(cls.shadow_sigma_db)}")
    rrm = scenario.rrm
    out += [
        "",
        "[run]",
        f"seed = {scenario.seed}",
        f"mode = {scenario.mode}",
        f"subframes_per_superframe = {rrm.subframes_per_superframe}",
        f"control_lead_subframes = {scenario.control_lead_subframes}",
        f"max_superframes = {rrm.max_superframes}",
        f"epsilon_converge = {_fmt(rrm.epsilon_converge)}",
        f"gap_converge_rel = {_fmt(rrm.gap_converge_rel)}",
        f"q_prune = {_fmt(rrm.q_prune)}",
        f"max_members = {rrm.max_members}",
        f"flow_tol = {_fmt(rrm.flow_tol)}",
        f"share_gap_tol = {_fmt(rrm.share_gap_tol)}",
        "utility = alpha_fair",
        f"alpha = {_fmt(rrm.utility.alpha)}",
        f"utility_epsilon = {_fmt(rrm.utility.epsilon)}",
        "",
    ]
    return "\n".join(out)


def with_param(scenario: Scenario, name: str, value: float) -> Scenario:
    """Return a copy with one swept parameter replaced.

    Only :data:`SWEEPABLE_PARAMS` are accepted; anything else needs a real
    edit to the scenario file so sweeps stay reviewable.
    """
    if name not in SWEEPABLE_PARAMS:
        raise ScenarioError(
            [f"parameter '{name}' is not sweepable (choose from {', '.join(SWEEPABLE_PARAMS)})"]
        )
    if name in ("seed", "subbands"):
        return replace(scenario, **{name: int(value)})
    if name in ("subframes_per_superframe", "max_superframes"):
        return replace(scenario, rrm=replace(scenario.rrm, **{name: int(value)}))
    return replace(scenario, **{name: float(value)})
