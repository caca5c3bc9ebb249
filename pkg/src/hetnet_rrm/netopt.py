"""Concave flow optimization over fixed link capacities, with exact prices.

This solves the long-timescale flow-control plus multi-path routing program:
maximize the sum of per-flow alpha-fair utilities of delivered rate subject to
flow conservation and per-link capacity.  Flows live on explicit path sets
(every simple source-to-destination path), which makes conservation structural
and leaves a concave program with only inequality constraints.  A primal-dual
interior-point method solves it; its capacity multipliers are the gradient of
the achieved utility with respect to capacities and drive both the
time-sharing step and pattern discovery upstream.

Zero or near-zero capacities are clamped to a tiny floor rather than pruned so
the returned price of a starved link reflects the marginal value of giving it
capacity; the primal flow routed across such links is zeroed on return.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.optimize import minimize_scalar

from .topology import TopologyGraph

CAPACITY_FLOOR = 1e-9
MAX_PATHS_PER_FLOW = 4000


class NetOptError(RuntimeError):
    """Solver failed to reach the requested accuracy."""


class PathExplosionError(RuntimeError):
    """A flow admits more simple paths than the configured cap."""


@dataclass(frozen=True)
class UtilitySpec:
    """Alpha-fair utility ``U(d) = log(d + eps)`` at alpha=1, else
    ``(d + eps)^(1-alpha) / (1 - alpha)``.

    The offset ``eps`` keeps the utility finite at zero rate; alpha must be
    strictly positive so the objective is strictly concave in each rate.
    """

    alpha: float = 1.0
    epsilon: float = 1e-3

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0 for strict concavity")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")

    def value(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.alpha == 1.0:
            return np.log(d + self.epsilon)
        return (d + self.epsilon) ** (1.0 - self.alpha) / (1.0 - self.alpha)

    def gradient(self, d: np.ndarray) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        return (d + self.epsilon) ** (-self.alpha)

    def curvature(self, d: np.ndarray) -> np.ndarray:
        """Negative second derivative, ``alpha * (d + eps)^(-alpha - 1)``."""
        d = np.asarray(d, dtype=float)
        return self.alpha * (d + self.epsilon) ** (-self.alpha - 1.0)

    def total(self, d: np.ndarray) -> float:
        return float(np.sum(self.value(d)))


@dataclass(frozen=True, eq=False)
class FlowSolution:
    """Optimal flows for fixed capacities.

    ``rates[k]`` is flow k's delivered rate, ``link_flows[k, l]`` its share on
    link l, and ``prices[l]`` the capacity multiplier, i.e. the derivative of
    the achieved utility with respect to the capacity of link l.
    """

    rates: np.ndarray
    link_flows: np.ndarray = field(repr=False)
    prices: np.ndarray = field(repr=False)
    utility: float
    kkt_residual: float


@dataclass(frozen=True, eq=False)
class _PathProblem:
    paths: list[tuple[int, ...]]
    flow_of_path: np.ndarray
    link_matrix: np.ndarray  # (L, P) 0/1, link membership per path
    flow_matrix: np.ndarray  # (K, P) 0/1, flow membership per path


def _simple_paths(graph: TopologyGraph, source: int, dest: int, cap: int) -> list[tuple[int, ...]]:
    out: dict[int, list[int]] = {n.index: [] for n in graph.nodes}
    for l in graph.links:
        out[l.head].append(l.index)
    for links in out.values():
        links.sort()
    found: list[tuple[int, ...]] = []

    def dfs(node: int, visited: set[int], acc: list[int]) -> None:
        if node == dest:
            found.append(tuple(acc))
            if len(found) > cap:
                raise PathExplosionError(
                    f"flow {source}->{dest} exceeds {cap} simple paths; refusing to enumerate"
                )
            return
        for l in out[node]:
            nxt = graph.links[l].tail
            if nxt in visited:
                continue
            visited.add(nxt)
            acc.append(l)
            dfs(nxt, visited, acc)
            acc.pop()
            visited.remove(nxt)

    dfs(source, {source}, [])
    found.sort()
    return found


@lru_cache(maxsize=256)
def _path_problem(graph: TopologyGraph, max_paths: int = MAX_PATHS_PER_FLOW) -> _PathProblem:
    paths: list[tuple[int, ...]] = []
    flow_of_path: list[int] = []
    for flow in graph.flows:
        flow_paths = _simple_paths(graph, flow.source, flow.destination, max_paths)
        if not flow_paths:
            raise NetOptError(f"flow {flow.index} has no route from {flow.source} to {flow.destination}")
        paths.extend(flow_paths)
        flow_of_path.extend([flow.index] * len(flow_paths))
    link_matrix = np.zeros((graph.num_links, len(paths)))
    for p, path in enumerate(paths):
        link_matrix[list(path), p] = 1.0
    flow_matrix = np.zeros((graph.num_flows, len(paths)))
    flow_matrix[flow_of_path, np.arange(len(paths))] = 1.0
    return _PathProblem(paths, np.array(flow_of_path), link_matrix, flow_matrix)


def _step_length(pairs: list[tuple[np.ndarray, np.ndarray]]) -> float:
    alpha = 1.0
    for val, step in pairs:
        neg = step < 0
        if np.any(neg):
            alpha = min(alpha, 0.995 * float(np.min(-val[neg] / step[neg])))
    return alpha


def _interior_point(
    flow_matrix: np.ndarray,
    ineq_matrix: np.ndarray,
    ineq_rhs: np.ndarray,
    utility: UtilitySpec,
    mu_floor: float,
    max_iters: int = 300,
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Minimize ``-sum U(flow_matrix @ v)`` s.t. ``ineq_matrix @ v <= rhs, v >= 0``.

    Infeasible-start primal-dual Newton iteration; returns ``(v, multipliers,
    complementarity, residual)``.  Multipliers converge as independent
    variables, so prices stay accurate even when slacks shrink to ~1e-12.
    The start is centered (``lam = mu0/s``, ``z = mu0/v``) so no
    complementarity pair begins orders of magnitude off the central path.

    Near the end of the path the Newton matrix conditions like
    ``max(lam/s, z/v)``, which can break Cholesky a few iterations before
    ``mu_floor`` is reached even though the iterate is already stationary and
    feasible to full precision.  Every iterate that passes the residual tests
    is therefore banked, and numerical breakdown returns the banked iterate
    instead of failing; NetOptError is raised only when breakdown strikes
    before any accurate iterate exists.
    """
    n_rows, n_vars = ineq_matrix.shape
    scale = max(1.0, float(np.max(ineq_rhs)))
    v = np.full(n_vars, 0.25 * scale)
    s = np.maximum(ineq_rhs - ineq_matrix @ v, 0.25 * scale)
    mu0 = scale
    lam = mu0 / s
    z = mu0 / v
    feas_scale = 1.0 + float(np.max(np.abs(ineq_rhs)))
    banked: tuple[np.ndarray, np.ndarray, float, float] | None = None

    for _ in range(max_iters):
        d = flow_matrix @ v
        grad_obj = -flow_matrix.T @ utility.gradient(d)
        f1 = grad_obj + ineq_matrix.T @ lam - z
        f2 = ineq_matrix @ v + s - ineq_rhs
        mu_now = (lam @ s + z @ v) / (n_rows + n_vars)
        stat_scale = 1.0 + float(np.max(np.abs(grad_obj)))
        residual_ok = (
            np.max(np.abs(f1)) <= 1e-9 * stat_scale
            and np.max(np.abs(f2)) <= 1e-9 * feas_scale
        )
        if residual_ok:
            banked = (
                v.copy(),
                lam.copy(),
                mu_now,
                max(np.max(np.abs(f1)) / stat_scale, np.max(np.abs(f2)) / feas_scale),
            )
            if mu_now <= mu_floor:
                return banked

        if not (np.isfinite(mu_now) and np.all(np.isfinite(f1))):
            if banked is not None:
                return banked
            raise NetOptError("interior point diverged to non-finite iterates")
        mu = 0.2 * mu_now
        with np.errstate(over="ignore", divide="ignore"):
            w_cap = lam / s
            diag_bar = z / v
        if not (np.all(np.isfinite(w_cap)) and np.all(np.isfinite(diag_bar))):
            if banked is not None:
                return banked
            raise NetOptError("interior point barrier weights overflowed")
        hess = (
            (flow_matrix * utility.curvature(d)[:, None]).T @ flow_matrix
            + (ineq_matrix * w_cap[:, None]).T @ ineq_matrix
        )
        hess[np.diag_indices_from(hess)] += diag_bar
        rhs = -f1 - ineq_matrix.T @ (mu / s - lam + w_cap * f2) + (mu / v - z)
        jitter = 0.0
        dv = None
        for _ in range(8):
            try:
                cho = scipy.linalg.cho_factor(
                    hess if jitter == 0.0 else hess + jitter * np.eye(n_vars), lower=True
                )
                dv = scipy.linalg.cho_solve(cho, rhs)
                break
            except (scipy.linalg.LinAlgError, ValueError):
                jitter = max(jitter * 10.0, 1e-10 * float(np.trace(hess)) / n_vars)
        if dv is None:
            if banked is not None:
                return banked
            raise NetOptError("interior-point Newton system not positive definite")
        ds = -f2 - ineq_matrix @ dv
        dlam = mu / s - lam + w_cap * (f2 + ineq_matrix @ dv)
        dz = mu / v - z - (z / v) * dv

        alpha_p = _step_length([(v, dv), (s, ds)])
        alpha_d = _step_length([(lam, dlam), (z, dz)])
        v = v + alpha_p * dv
        s = s + alpha_p * ds
        lam = lam + alpha_d * dlam
        z = z + alpha_d * dz

    if banked is not None:
        return banked
    raise NetOptError(f"interior point did not converge in {max_iters} iterations")


def _alive_paths(problem: _PathProblem, dead_links: np.ndarray) -> np.ndarray:
    """Boolean mask of paths that avoid every dead link."""
    return problem.link_matrix[dead_links].sum(axis=0) == 0


def _starved_link_prices(
    problem: _PathProblem,
    dead_links: np.ndarray,
    prices: np.ndarray,
    marginal_utility: np.ndarray,
) -> None:
    """Fill in marginal prices for links priced out of the flow problem.

    A starved link's shadow price is the utility gained by giving it capacity:
    the best over paths through it of the flow's marginal utility minus the
    prices already paid on the rest of the path.  Other starved links on the
    same path are treated as free, which errs on the side of discovery.
    """
    for l in np.flatnonzero(dead_links):
        best = 0.0
        for p, path in enumerate(problem.paths):
            if l not in path:
                continue
            rest = sum(prices[m] for m in path if m != l and not dead_links[m])
            best = max(best, float(marginal_utility[problem.flow_of_path[p]]) - rest)
        prices[l] = best


def solve_p1(
    graph: TopologyGraph,
    capacities: np.ndarray,
    utility: UtilitySpec,
    tol: float = 1e-6,
) -> FlowSolution:
    """Utility-optimal flow control and routing for fixed link capacities.

    Returns per-flow rates, per-link flow splits, and capacity prices; the
    price vector is the gradient of the optimal utility in the capacities.
    Paths through starved (near-zero capacity) links are removed from the
    optimization, and those links get their marginal price patched in
    afterwards so they stay visible to capacity allocation.
    """
    capacities = np.asarray(capacities, dtype=float)
    if capacities.shape != (graph.num_links,):
        raise ValueError("need one capacity per link")
    if np.any(capacities < -1e-12):
        raise ValueError("capacities must be nonnegative")
    problem = _path_problem(graph)
    capped = np.maximum(capacities, CAPACITY_FLOOR)
    dead = capped <= CAPACITY_FLOOR
    alive = _alive_paths(problem, dead)

    prices = np.zeros(graph.num_links)
    if np.any(alive):
        flow_matrix = problem.flow_matrix[:, alive]
        link_matrix = problem.link_matrix[np.ix_(~dead, alive)]
        mu_floor = min(1e-12 * max(1.0, float(np.max(capped))), tol * 1e-4)
        v, lam, comp, residual = _interior_point(
            flow_matrix, link_matrix, capped[~dead], utility, mu_floor
        )
        rates = flow_matrix @ v
        link_flows = np.zeros((graph.num_flows, graph.num_links))
        link_flows[:, ~dead] = (flow_matrix * v) @ link_matrix.T
        prices[~dead] = lam
        kkt = max(residual, comp / max(1.0, abs(utility.total(rates))))
    else:
        rates = np.zeros(graph.num_flows)
        link_flows = np.zeros((graph.num_flows, graph.num_links))
        kkt = 0.0

    if kkt > tol:
        raise NetOptError(f"flow solver residual {kkt:.2e} exceeds tolerance {tol:.2e}")
    _starved_link_prices(problem, dead, prices, utility.gradient(rates))
    return FlowSolution(
        rates=rates,
        link_flows=link_flows,
        prices=prices,
        utility=utility.total(rates),
        kkt_residual=kkt,
    )


def finite_diff_gradient(
    graph: TopologyGraph,
    capacities: np.ndarray,
    utility: UtilitySpec,
    h: float = 1e-4,
) -> np.ndarray:
    """Central-difference gradient of the optimal utility in the capacities.

    Reference oracle for the solver's prices; needs capacities comfortably
    above ``h`` so both perturbations stay interior.
    """
    capacities = np.asarray(capacities, dtype=float)
    grad = np.zeros_like(capacities)
    for l in range(len(capacities)):
        bump = np.zeros_like(capacities)
        bump[l] = h
        up = solve_p1(graph, capacities + bump, utility).utility
        down = solve_p1(graph, capacities - bump, utility).utility
        grad[l] = (up - down) / (2.0 * h)
    return grad


def _time_sharing_presolve(
    rate_rows: np.ndarray,
    base_capacity: np.ndarray,
    graph: TopologyGraph,
    utility: UtilitySpec,
) -> tuple[np.ndarray, FlowSolution]:
    """Jointly optimize shares and flows by the same interior-point core.

    Variables are path flows plus the first J-1 shares (the last share is
    eliminated through the simplex equality).  Returns the share vector and
    the matching flow solution.  The capacity prices come from the joint
    problem, so at a degenerate optimum they are already share-stationary;
    re-pricing the same shares through the flow problem alone can split
    prices across tied constraints in a way that wrecks the gap certificate.
    """
    n_rows = rate_rows.shape[0]
    problem = _path_problem(graph)

    # A link no share vector can lift above the floor stays dead; drop the
    # paths through it so the solver never chases near-boundary variables.
    best_caps = np.maximum(base_capacity + rate_rows.max(axis=0), CAPACITY_FLOOR)
    dead = best_caps <= CAPACITY_FLOOR
    alive = _alive_paths(problem, dead)
    if not np.any(alive):
        shares = np.full(n_rows, 1.0 / n_rows)
        rates = np.zeros(graph.num_flows)
        prices = np.zeros(graph.num_links)
        _starved_link_prices(problem, dead, prices, utility.gradient(rates))
        return shares, FlowSolution(
            rates=rates,
            link_flows=np.zeros((graph.num_flows, graph.num_links)),
            prices=prices,
            utility=utility.total(rates),
            kkt_residual=0.0,
        )
    link_matrix = problem.link_matrix[np.ix_(~dead, alive)]
    n_paths = link_matrix.shape[1]
    n_caps = link_matrix.shape[0]
    reduced = (rate_rows[:-1] - rate_rows[-1])[:, ~dead]  # (J-1, L_alive)

    # Inequalities: path loads minus capacity offset from shares, then sum of
    # free shares <= 1 (keeps the eliminated share nonnegative).
    ineq = np.zeros((n_caps + 1, n_paths + n_rows - 1))
    ineq[:n_caps, :n_paths] = link_matrix
    ineq[:n_caps, n_paths:] = -reduced.T
    ineq[n_caps, n_paths:] = 1.0
    rhs = np.concatenate([
        np.maximum(base_capacity[~dead] + rate_rows[-1, ~dead], CAPACITY_FLOOR),
        [1.0],
    ])
    flow_matrix = np.zeros((graph.num_flows, n_paths + n_rows - 1))
    flow_matrix[:, :n_paths] = problem.flow_matrix[:, alive]

    mu_floor = 1e-12 * max(1.0, float(np.max(rhs)))
    v, lam, comp, residual = _interior_point(flow_matrix, ineq, rhs, utility, mu_floor)

    shares = np.empty(n_rows)
    shares[:-1] = v[n_paths:]
    shares[-1] = max(0.0, 1.0 - shares[:-1].sum())
    shares /= shares.sum()

    rates = flow_matrix @ v
    link_flows = np.zeros((graph.num_flows, graph.num_links))
    link_flows[:, ~dead] = (problem.flow_matrix[:, alive] * v[:n_paths]) @ link_matrix.T
    prices = np.zeros(graph.num_links)
    prices[~dead] = lam[:n_caps]
    _starved_link_prices(problem, dead, prices, utility.gradient(rates))
    solution = FlowSolution(
        rates=rates,
        link_flows=link_flows,
        prices=prices,
        utility=utility.total(rates),
        kkt_residual=max(residual, comp / max(1.0, abs(utility.total(rates)))),
    )
    return shares, solution


def optimize_time_sharing(
    rate_rows: np.ndarray,
    graph: TopologyGraph,
    utility: UtilitySpec,
    tol: float = 1e-5,
    base_capacity: np.ndarray | None = None,
    presolve: bool = True,
    init_shares: np.ndarray | None = None,
    max_iters: int = 500,
) -> tuple[np.ndarray, FlowSolution]:
    """Optimal time-sharing over pattern rate rows by conditional gradient.

    Maximizes utility of the shared capacity ``base + rate_rows^T q`` over the
    probability simplex.  Each iterate prices the current capacities through
    :func:`solve_p1`; the share gradient is ``rate_rows @ prices`` and the loop
    stops when the linearization gap ``max_j g_j - q.g`` drops to ``tol``.
    Away steps keep the iteration from stalling on simplex faces, and an
    optional joint interior-point presolve warm-starts q so the loop normally
    only has to certify the gap.
    """
    rate_rows = np.atleast_2d(np.asarray(rate_rows, dtype=float))
    n_rows = rate_rows.shape[0]
    if rate_rows.shape[1] != graph.num_links:
        raise ValueError("rate rows must have one column per link")
    if base_capacity is None:
        base_capacity = np.zeros(graph.num_links)

    sol: FlowSolution | None = None
    if init_shares is not None:
        q = np.asarray(init_shares, dtype=float)
        if q.shape != (n_rows,) or np.any(q < 0) or abs(q.sum() - 1.0) > 1e-9:
            raise ValueError("init_shares must lie on the probability simplex")
    elif presolve and n_rows > 1:
        try:
            q, sol = _time_sharing_presolve(rate_rows, base_capacity, graph, utility)
        except NetOptError:
            # The presolve is only a warm start; the conditional-gradient
            # loop below carries full convergence responsibility.
            q = np.full(n_rows, 1.0 / n_rows)
    else:
        q = np.full(n_rows, 1.0 / n_rows)

    def solve_at(shares: np.ndarray) -> FlowSolution:
        return solve_p1(graph, base_capacity + shares @ rate_rows, utility)

    if sol is None:
        sol = solve_at(q)
    for _ in range(max_iters):
        g = rate_rows @ sol.prices
        gap = float(np.max(g) - q @ g)
        if gap <= tol:
            return q, sol

        j_fw = int(np.argmax(g))
        support = np.flatnonzero(q > 1e-14)
        j_aw = int(support[np.argmin(g[support])])
        fw_gain = g[j_fw] - q @ g
        aw_gain = q @ g - g[j_aw]
        if fw_gain >= aw_gain:
            direction = -q.copy()
            direction[j_fw] += 1.0
            gamma_max = 1.0
        else:
            direction = q.copy()
            direction[j_aw] -= 1.0
            denom = 1.0 - q[j_aw]
            gamma_max = q[j_aw] / denom if denom > 1e-14 else 0.0
        if gamma_max <= 1e-14:
            return q, sol

        def shares_at(gamma: float) -> np.ndarray:
            shares = np.clip(q + gamma * direction, 0.0, None)
            return shares / shares.sum()

        res = minimize_scalar(
            lambda gamma: -solve_at(shares_at(gamma)).utility,
            bounds=(0.0, gamma_max),
            method="bounded",
            options={"xatol": 1e-9},
        )
        # The bounded search never probes the exact endpoint, so compare both.
        best_gamma, best_sol = 0.0, sol
        for gamma in (float(res.x), gamma_max):
            cand = solve_at(shares_at(gamma))
            if cand.utility > best_sol.utility:
                best_gamma, best_sol = gamma, cand
        if best_gamma == 0.0:
            # A stall with a large reported gap usually means the flow
            # problem's prices split degenerately across tied constraints.
            # The joint solve prices the same point share-stationarily.
            if n_rows > 1:
                q_joint, sol_joint = _time_sharing_presolve(
                    rate_rows, base_capacity, graph, utility
                )
                g_joint = rate_rows @ sol_joint.prices
                gap_joint = float(np.max(g_joint) - q_joint @ g_joint)
                if sol_joint.utility >= sol.utility - 1e-9 and gap_joint <= tol:
                    return q_joint, sol_joint
            raise NetOptError(
                f"time-sharing stalled with linearization gap {gap:.3e} above tol {tol:.1e}"
            )
        q, sol = shares_at(best_gamma), best_sol

    raise NetOptError(f"time-sharing gap above {tol} after {max_iters} conditional-gradient steps")
