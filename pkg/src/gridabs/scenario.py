"""Scenario ingestion and validation.

A scenario document is a JSON object with keys ``agents``, ``edges``,
``horizon`` and ``numerics``; the exact field names are fixed by
``docs/scenario.schema.json``.  An edge ``{"from": j, "to": i, "mu": m}``
declares that agent ``i`` observes agent ``j`` (``j`` is a neighbor of
``i``) and constrains the grid diameters by ``d_max(j) <= m * d_max(i)``.
Neighbor ordering follows edge order in the document and is stable for the
whole run.

Scenarios are immutable after loading and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np

from .errors import ScenarioError
from .fields import FieldFn, build_field


@dataclass(frozen=True)
class Numerics:
    """Run-wide numeric configuration with conservative defaults."""

    eps_geo: float = 1e-9
    integrator_divisor: int = 128
    seed: int = 0
    margin: float = 0.05
    theta: float = 0.5
    cell_cap: int = 10_000_000
    layer_cap: int = 1_000_000
    points_per_axis: int = 9
    sample_budget: int = 200_000
    tube_grid: int = 64
    d_floor: float = 1e-12


@dataclass(frozen=True)
class AgentSpec:
    """One agent: dimension, coupling field, input budget and bounds.

    ``lam`` is the fraction of the input budget reserved for steering toward
    a chosen target; the rest absorbs start-cell offset and coupling error.
    ``rho_horizon``, when set, is a user-certified bound on how far the agent
    can travel from ``x0`` over the whole horizon.
    """

    id: int
    n: int
    dynamics: dict
    v_max: float
    lam: float
    L1: float
    L2: float
    x0: np.ndarray
    rho_horizon: float | None = None
    field: FieldFn = field(repr=False, compare=False, default=None)


@dataclass(frozen=True)
class NetworkGraph:
    """Directed neighbor structure with per-edge diameter ratios."""

    agent_ids: tuple[int, ...]
    neighbors: dict[int, tuple[int, ...]]  # i -> ordered (j_1, ..., j_{N_i})
    mu: dict[tuple[int, int], float]  # (j, i) -> mu(j, i)

    @property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple(self.mu)


@dataclass(frozen=True)
class NetworkParameters:
    """Per-agent aggregates over incoming neighbors.

    ``mu_bold[i]`` is the Euclidean norm of the incoming diameter ratios;
    ``m_bold[i]`` the Euclidean norm of the neighbors' speed caps
    ``M(j) + v_max(j)``.  Both are zero exactly when the agent has no
    neighbors.
    """

    mu_bold: dict[int, float]
    m_bold: dict[int, float]


@dataclass(frozen=True)
class Scenario:
    agents: tuple[AgentSpec, ...]
    graph: NetworkGraph
    horizon: float
    numerics: Numerics

    def agent(self, agent_id: int) -> AgentSpec:
        return self._by_id[agent_id]

    @property
    def _by_id(self) -> dict[int, AgentSpec]:
        return {a.id: a for a in self.agents}

    def with_numerics(self, **overrides) -> "Scenario":
        return replace(self, numerics=replace(self.numerics, **overrides))


def _check_numerics(raw: dict, problems: list[str]) -> Numerics:
    known = {f for f in Numerics.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        problems.append(f"unknown numerics keys: {sorted(unknown)}")
    kwargs = {k: v for k, v in raw.items() if k in known}
    num = Numerics(**kwargs)
    if num.eps_geo <= 0:
        problems.append("numerics.eps_geo must be positive")
    if num.integrator_divisor < 1:
        problems.append("numerics.integrator_divisor must be >= 1")
    if not 0 < num.margin < 1:
        problems.append("numerics.margin must lie in (0, 1)")
    if not 0 < num.theta <= 1:
        problems.append("numerics.theta must lie in (0, 1]")
    return num


def load_scenario(doc: dict) -> Scenario:
    """Validate a scenario document and build the immutable Scenario.

    Raises ScenarioError carrying the full list of violations found.
    """
    problems: list[str] = []
    if not isinstance(doc, dict):
        raise ScenarioError(["scenario document must be a JSON object"])

    horizon = doc.get("horizon")
    if not isinstance(horizon, (int, float)) or not horizon > 0:
        problems.append("horizon must be a positive number")
        horizon = 1.0

    numerics = _check_numerics(doc.get("numerics", {}), problems)

    raw_agents = doc.get("agents")
    if not isinstance(raw_agents, list) or not raw_agents:
        problems.append("agents must be a nonempty list")
        raise ScenarioError(problems)

    specs: dict[int, dict] = {}
    order: list[int] = []
    for idx, raw in enumerate(raw_agents):
        label = f"agents[{idx}]"
        if not isinstance(raw, dict):
            problems.append(f"{label} must be an object")
            continue
        agent_id = raw.get("id")
        if not isinstance(agent_id, int):
            problems.append(f"{label}: id must be an integer")
            continue
        if agent_id in specs:
            problems.append(f"{label}: duplicate agent id {agent_id}")
            continue
        specs[agent_id] = raw
        order.append(agent_id)

    # Edge list: {"from": j, "to": i, "mu": m} means j is a neighbor of i.
    neighbors: dict[int, list[int]] = {i: [] for i in order}
    mu: dict[tuple[int, int], float] = {}
    for idx, raw in enumerate(doc.get("edges", [])):
        label = f"edges[{idx}]"
        if not isinstance(raw, dict):
            problems.append(f"{label} must be an object")
            continue
        src, dst = raw.get("from"), raw.get("to")
        m = raw.get("mu", 1.0)
        if src not in specs or dst not in specs:
            problems.append(f"{label}: references unknown agent ({src} -> {dst})")
            continue
        if src == dst:
            problems.append(f"{label}: self-loops are not allowed")
            continue
        if (src, dst) in mu:
            problems.append(f"{label}: duplicate edge ({src} -> {dst})")
            continue
        if not isinstance(m, (int, float)) or not m > 0:
            problems.append(f"{label}: mu must be positive")
            continue
        neighbors[dst].append(src)
        mu[(src, dst)] = float(m)

    agents: list[AgentSpec] = []
    for agent_id in order:
        raw = specs[agent_id]
        label = f"agent {agent_id}"
        n = raw.get("n")
        if not isinstance(n, int) or n < 1:
            problems.append(f"{label}: n must be a positive integer")
            continue
        v_max = raw.get("v_max")
        if not isinstance(v_max, (int, float)) or not v_max > 0:
            problems.append(f"{label}: v_max must be positive")
            v_max = 1.0
        lam = raw.get("lambda")
        if not isinstance(lam, (int, float)) or not 0 < lam < 1:
            problems.append(f"{label}: lambda out of (0,1)")
            lam = 0.5
        l1 = raw.get("L1", 0.0)
        l2 = raw.get("L2", 0.0)
        if not isinstance(l1, (int, float)) or l1 < 0:
            problems.append(f"{label}: L1 must be nonnegative")
            l1 = 0.0
        if not isinstance(l2, (int, float)) or l2 < 0:
            problems.append(f"{label}: L2 must be nonnegative")
            l2 = 0.0
        x0_raw = raw.get("x0")
        try:
            x0 = np.asarray(x0_raw, dtype=float).reshape(n)
        except Exception:
            problems.append(f"{label}: x0 must be a length-{n} vector")
            x0 = np.zeros(n)
        if not np.all(np.isfinite(x0)):
            problems.append(f"{label}: x0 entries must be finite")
            x0 = np.zeros(n)
        rho = raw.get("rho_horizon")
        if rho is not None and (not isinstance(rho, (int, float)) or rho <= 0):
            problems.append(f"{label}: rho_horizon must be positive when given")
            rho = None

        neighbor_dims = []
        for j in neighbors[agent_id]:
            nj = specs[j].get("n")
            neighbor_dims.append(nj if isinstance(nj, int) else 1)
        dyn = raw.get("dynamics", {"kind": "zero"})
        try:
            fld = build_field(dyn, n, neighbor_dims)
        except ValueError as exc:
            problems.append(f"{label}: {exc}")
            fld = build_field({"kind": "zero"}, n, neighbor_dims)

        agents.append(
            AgentSpec(
                id=agent_id,
                n=n,
                dynamics=dict(dyn),
                v_max=float(v_max),
                lam=float(lam),
                L1=float(l1),
                L2=float(l2),
                x0=x0,
                rho_horizon=None if rho is None else float(rho),
                field=fld,
            )
        )

    if problems:
        raise ScenarioError(problems)

    graph = NetworkGraph(
        agent_ids=tuple(order),
        neighbors={i: tuple(js) for i, js in neighbors.items()},
        mu=mu,
    )
    return Scenario(
        agents=tuple(agents), graph=graph, horizon=float(horizon), numerics=numerics
    )


def validate_cycle_condition(
    graph: NetworkGraph, eps: float = 1e-9
) -> list[tuple[tuple[int, ...], float]]:
    """Find directed cycles whose diameter-ratio product drops below one.

    Returns ``(cycle, product)`` pairs where ``cycle`` repeats its first
    node at the end; an empty list means every simple cycle satisfies
    ``mu(i0,i1) * ... * mu(i_{m-1},i_m) >= 1 - eps``.  All-ones ratios pass
    trivially.  Intended for small networks; enumeration is exhaustive.
    """
    digraph = nx.DiGraph()
    digraph.add_nodes_from(graph.agent_ids)
    digraph.add_edges_from(graph.mu)
    violations = []
    for nodes in nx.simple_cycles(digraph):
        closed = list(nodes) + [nodes[0]]
        product = math.prod(graph.mu[(a, b)] for a, b in zip(closed, closed[1:]))
        if product < 1.0 - eps:
            violations.append((tuple(closed), product))
    violations.sort()
    return violations


def network_parameters(scenario: Scenario, m: dict[int, float]) -> NetworkParameters:
    """Aggregate neighbor ratios and speed caps per agent.

    ``m`` maps each agent to its dynamics bound; every neighbor of every
    agent must be covered.  Both aggregates are invariant under neighbor
    reordering.
    """
    mu_bold, m_bold = {}, {}
    for spec in scenario.agents:
        js = scenario.graph.neighbors[spec.id]
        mu_bold[spec.id] = math.sqrt(
            sum(scenario.graph.mu[(j, spec.id)] ** 2 for j in js)
        )
        m_bold[spec.id] = math.sqrt(
            sum((m[j] + scenario.agent(j).v_max) ** 2 for j in js)
        )
    return NetworkParameters(mu_bold=mu_bold, m_bold=m_bold)
