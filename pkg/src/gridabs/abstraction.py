"""Per-agent transition systems and their product, built lazily.

The successor rule: integrate the agent's reference curve for one step with
neighbors frozen at their cell reference points, then take every extended
cell meeting the ball of radius ``lam dt v_max`` around the endpoint.  The
engine shrinks that radius by a small slack before intersecting so that
integration error can never produce a successor whose witness point is
unreachable.  Restricting to the base index set gives the agent's
transition relation; the product operator is the Cartesian product of the
per-agent successor sets.

The full action alphabet (all cell configurations) is far too large to
materialize, so successor sets are computed per configuration on first use
and memoized; only product-reachable configurations ever get computed.
Layer expansion, iteration and sampling all run in sorted order, so results
are reproducible regardless of hash seeds or worker interleaving.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .discretization import SpaceTimeDiscretization
from .dynamics import ExtendedField, Trajectory, reach_radius, reference_trajectory
from .errors import NoOutgoingTransitionsError
from .geometry import Ball
from .grid import (
    Cell,
    CellConfiguration,
    CellDecomposition,
    GlobalConfiguration,
    project_configuration,
)
from .reach import DynamicsBounds, ReachTube, inflation_constant
from .scenario import NetworkParameters, Scenario

# Reach-ball shrinkage absorbing integrator and interpolation error in the
# reference endpoint; keeps every claimed successor realizable.
R_SLACK = 1e-6

Path = tuple[GlobalConfiguration, ...]


@dataclass(frozen=True)
class SuccessorSet:
    """Successors within the extended index set and their restriction to the
    base index set (the actual transition targets)."""

    extended: frozenset[Cell]
    core: frozenset[Cell]
    reach_ball_ok: bool


@dataclass(frozen=True)
class LayeredProduct:
    """Breadth-first layers of the product system with one recorded
    predecessor per configuration for path reconstruction."""

    layers: tuple[tuple[GlobalConfiguration, ...], ...]
    predecessors: tuple[dict, ...]
    truncated: bool
    blocked: int

    @property
    def sizes(self) -> list[int]:
        return [len(layer) for layer in self.layers]


class AbstractionEngine:
    """Lazy transition-system constructor bound to one certified build."""

    def __init__(
        self,
        scenario: Scenario,
        tube: ReachTube,
        bounds: DynamicsBounds,
        netparams: NetworkParameters,
        disc: SpaceTimeDiscretization,
        decomps: dict[int, CellDecomposition],
        strict: bool = True,
    ):
        self.scenario = scenario
        self.tube = tube
        self.bounds = bounds
        self.netparams = netparams
        self.disc = disc
        self.decomps = decomps
        self.strict = strict
        self._fields: dict[int, ExtendedField] = {}
        self._refs: dict[tuple, Trajectory] = {}
        self._succ: dict[tuple, SuccessorSet] = {}
        horizon = scenario.horizon
        for spec in scenario.agents:
            c_tau = inflation_constant(scenario, spec.id, disc.tau, bounds)
            own = tube[spec.id].inflated_hull(0.0, horizon - disc.tau, c_tau)
            nbs = tuple(
                tube[j].hull(0.0, horizon) for j in scenario.graph.neighbors[spec.id]
            )
            self._fields[spec.id] = ExtendedField(
                raw=spec.field,
                own_domain=own,
                neighbor_domains=nbs,
                bound=bounds.m[spec.id],
            )

    # -- continuous-side accessors ------------------------------------------

    def extended_field(self, agent_id: int) -> ExtendedField:
        return self._fields[agent_id]

    def reference(self, agent_id: int, cfg: CellConfiguration) -> Trajectory:
        key = (agent_id, cfg.key())
        ref = self._refs.get(key)
        if ref is None:
            decomp = self.decomps[agent_id]
            neighbor_refs = [
                self.decomps[j].center(cell)
                for j, cell in zip(
                    self.scenario.graph.neighbors[agent_id], cfg.neighbors
                )
            ]
            ref = reference_trajectory(
                self._fields[agent_id],
                decomp.center(cfg.own),
                neighbor_refs,
                self.disc.delta_t,
                self.scenario.numerics.integrator_divisor,
            )
            self._refs[key] = ref
        return ref

    def radius(self, agent_id: int) -> float:
        spec = self.scenario.agent(agent_id)
        return reach_radius(spec.lam, self.disc.delta_t, spec.v_max)

    def reach_ball(self, agent_id: int, cfg: CellConfiguration) -> Ball:
        """Shrunk ball around the reference endpoint used for intersections."""
        r = self.radius(agent_id) - R_SLACK
        if r <= 0:
            raise ValueError(
                f"reach radius for agent {agent_id} does not exceed the slack"
            )
        return Ball(self.reference(agent_id, cfg).endpoint, r)

    # -- discrete side --------------------------------------------------------

    def successors(self, agent_id: int, cfg: CellConfiguration) -> SuccessorSet:
        key = (agent_id, cfg.key())
        cached = self._succ.get(key)
        if cached is not None:
            return cached
        decomp = self.decomps[agent_id]
        if cfg.own not in decomp.initial_cells:
            raise NoOutgoingTransitionsError(
                f"no outgoing transitions defined here: cell {cfg.own} of agent "
                f"{agent_id} lies outside the shrunk-horizon mark"
            )
        eps = self.scenario.numerics.eps_geo
        ball = self.reach_ball(agent_id, cfg)
        spec = self.scenario.agent(agent_id)
        c_tau = inflation_constant(self.scenario, agent_id, self.disc.tau, self.bounds)
        allowed = self.tube[agent_id].inflated_hull(
            0.0, self.scenario.horizon - self.disc.tau, c_tau
        )
        ok = (
            float(np.linalg.norm(ball.center - allowed.center))
            + self.radius(agent_id)
            <= allowed.radius + eps
        )
        if self.strict and not ok:
            raise AssertionError(
                f"reach ball of agent {agent_id} escapes the inflated hull; the "
                f"certificate is unsound (cfg {cfg.key()})"
            )
        touching = decomp.cells_touching(ball, tol=eps)
        extended = touching & decomp.extended_cells
        result = SuccessorSet(
            extended=frozenset(extended),
            core=frozenset(extended & decomp.cells),
            reach_ball_ok=bool(ok),
        )
        self._succ[key] = result
        return result

    def post(self, config: GlobalConfiguration) -> tuple[GlobalConfiguration, ...]:
        """Product successor set; empty when any factor has none."""
        factors = []
        for spec in self.scenario.agents:
            cfg = project_configuration(self.scenario, config, spec.id)
            if cfg.own not in self.decomps[spec.id].initial_cells:
                return ()
            core = self.successors(spec.id, cfg).core
            if not core:
                return ()
            factors.append(sorted(core))
        return tuple(itertools.product(*factors))

    def initial_configurations(self) -> tuple[GlobalConfiguration, ...]:
        """Product of the per-agent cells containing the initial states."""
        per_agent = []
        eps = self.scenario.numerics.eps_geo
        for spec in self.scenario.agents:
            decomp = self.decomps[spec.id]
            base = decomp.locate(spec.x0, eps=eps)
            holders = []
            for offset in itertools.product((-1, 0, 1), repeat=spec.n):
                cell = tuple(b + o for b, o in zip(base, offset))
                if cell in decomp.cells and bool(
                    decomp.box(cell).contains(spec.x0, tol=0.0)
                ):
                    holders.append(cell)
            per_agent.append(sorted(holders))
        return tuple(itertools.product(*per_agent))

    def build_layers(self, depth: int | None = None) -> LayeredProduct:
        """Expand reachable layers breadth-first up to ``depth`` steps.

        Records one predecessor per newly seen configuration; truncates a
        layer at the configured cap rather than failing.
        """
        depth = self.disc.ell if depth is None else depth
        cap = self.scenario.numerics.layer_cap
        layers = [tuple(sorted(self.initial_configurations()))]
        predecessors: list[dict] = [{}]
        truncated = False
        blocked = 0
        for _ in range(depth):
            nxt: dict[GlobalConfiguration, GlobalConfiguration] = {}
            for config in layers[-1]:
                succ = self.post(config)
                if not succ:
                    blocked += 1
                    continue
                for s in succ:
                    if s not in nxt:
                        nxt[s] = config
            ordered = sorted(nxt)
            if len(ordered) > cap:
                ordered = ordered[:cap]
                truncated = True
            layers.append(tuple(ordered))
            predecessors.append({s: nxt[s] for s in ordered})
        return LayeredProduct(
            layers=tuple(layers),
            predecessors=tuple(predecessors),
            truncated=truncated,
            blocked=blocked,
        )

    def sample_path(self, length: int, seed: int) -> Path:
        """Random path of the requested length from a random initial state."""
        if length > self.disc.ell:
            raise ValueError(f"path length {length} exceeds ell = {self.disc.ell}")
        rng = np.random.default_rng(seed)
        start_pool = sorted(self.initial_configurations())
        config = start_pool[int(rng.integers(len(start_pool)))]
        path = [config]
        for _ in range(length):
            factors = []
            for spec in self.scenario.agents:
                cfg = project_configuration(self.scenario, config, spec.id)
                core = sorted(self.successors(spec.id, cfg).core)
                if not core:
                    raise NoOutgoingTransitionsError(
                        f"agent {spec.id} has no successors from {cfg.key()}"
                    )
                factors.append(core[int(rng.integers(len(core)))])
            config = tuple(factors)
            path.append(config)
        return tuple(path)

    def reconstruct_path(
        self, layered: LayeredProduct, config: GlobalConfiguration, layer: int
    ) -> Path:
        """Deterministic predecessor-chain path ending at ``config``."""
        if config not in set(layered.layers[layer]):
            raise ValueError(f"configuration not present in layer {layer}")
        chain = [config]
        for k in range(layer, 0, -1):
            config = layered.predecessors[k][config]
            if config not in set(layered.layers[k - 1]):
                raise AssertionError(f"predecessor missing from layer {k - 1}")
            chain.append(config)
        return tuple(reversed(chain))

    def materialized_transitions(
        self, agent_id: int
    ) -> dict[tuple, SuccessorSet]:
        """All successor sets computed so far for one agent (export helper)."""
        return {
            cfg_key: succ
            for (aid, cfg_key), succ in sorted(self._succ.items())
            if aid == agent_id
        }
