"""Simulation oracles for the abstraction's guarantees.

Three layers of checks, each falsifiable and replayable from a seed:

* ``check_consistency`` drives one agent's disturbance system from random
  starts in the source cell under sampled admissible neighbor signals and
  asserts the three transition requirements: the state never strays from
  the source cell faster than the worst-case speed, the step lands on the
  chosen witness point in the target cell, and the controller stays
  strictly inside the input budget.
* ``realize_step`` / ``realize_path`` run the true coupled system with all
  agents' controllers active and check that every component lands in its
  claimed cell at every step boundary.
* ``audit_bounds`` estimates Lipschitz and magnitude bounds by sampled
  difference quotients and warns when a declared constant looks too small.

Soundness rests on the certificate; sampling exists to catch implementation
and declaration errors, so failures carry their seed and are never ignored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .abstraction import AbstractionEngine, Path
from .dynamics import (
    DisturbanceSignal,
    HybridController,
    Trajectory,
    integrate,
    sample_disturbance,
    target_parameter,
)
from .errors import OutOfCoverError, PreconditionError
from .geometry import Box, distance_to_box
from .grid import Cell, CellConfiguration, project_configuration

ENDPOINT_TOL = 1e-6
MEMBERSHIP_TOL = 1e-9
# Inward nudge keeping witness points strictly inside their cell so the
# landed cell is unambiguous; stays far below the reach-ball slack.
WITNESS_NUDGE = 1e-7


@dataclass(frozen=True)
class ConsistencyReport:
    agent_id: int
    cfg_key: tuple
    target: Cell
    trials: int
    seed: int
    cell_bound_failures: int
    endpoint_failures: int
    controller_failures: int
    inadmissible_disturbances: int
    max_cell_bound_excess: float
    max_endpoint_error: float
    max_controller_norm: float
    v_max: float

    @property
    def passed(self) -> bool:
        return (
            self.cell_bound_failures == 0
            and self.endpoint_failures == 0
            and self.controller_failures == 0
            and self.inadmissible_disturbances == 0
        )


@dataclass(frozen=True)
class AgentStepRecord:
    agent_id: int
    claimed: Cell
    landed: Cell | None
    target_in_ball: bool
    membership_distance: float
    max_controller_norm: float
    controller_ok: bool

    @property
    def ok(self) -> bool:
        return (
            self.target_in_ball
            and self.membership_distance <= MEMBERSHIP_TOL
            and self.landed == self.claimed
            and self.controller_ok
        )


@dataclass(frozen=True)
class StepReport:
    records: tuple[AgentStepRecord, ...]
    endpoint: dict[int, np.ndarray]
    trajectory: Trajectory

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.records)


@dataclass(frozen=True)
class RealizationReport:
    path: Path
    steps: tuple[StepReport, ...]
    failed_step: int | None
    failed_agents: tuple[int, ...]

    @property
    def passed(self) -> bool:
        return self.failed_step is None


def witness_point(box: Box, chi_end: np.ndarray, width: float) -> np.ndarray:
    """Nearest point of the target cell, nudged strictly inside.

    The nudge keeps the landed cell canonical under point location without
    consuming the reach-ball slack.
    """
    p = np.clip(chi_end, box.lower, box.upper)
    eta = min(WITNESS_NUDGE, width / 4.0)
    return np.clip(p, box.lower + eta, box.upper - eta)


def _neighbor_disturbances(
    engine: AbstractionEngine,
    agent_id: int,
    cfg: CellConfiguration,
    rng: np.random.Generator,
    trials: int,
) -> list[DisturbanceSignal]:
    scenario = engine.scenario
    signals = []
    for j, cell in zip(scenario.graph.neighbors[agent_id], cfg.neighbors):
        rate = engine.bounds.m[j] + scenario.agent(j).v_max
        signals.append(
            sample_disturbance(
                cell=engine.decomps[j].box(cell),
                hull=engine.tube[j].hull(0.0, scenario.horizon),
                rate=rate,
                rng=rng,
                trials=trials,
            )
        )
    return signals


def check_consistency(
    engine: AbstractionEngine,
    agent_id: int,
    cfg: CellConfiguration,
    target: Cell,
    trials: int = 100,
    seed: int = 0,
) -> ConsistencyReport:
    """Monte-Carlo check of one transition under sampled disturbances.

    The target must come from the successor set; its witness point and
    steering parameter are fixed once, then every trial draws a start state
    uniformly in the source cell and fresh neighbor signals.
    """
    scenario = engine.scenario
    spec = scenario.agent(agent_id)
    decomp = engine.decomps[agent_id]
    eps = scenario.numerics.eps_geo
    delta_t = engine.disc.delta_t
    steps = scenario.numerics.integrator_divisor

    ref = engine.reference(agent_id, cfg)
    chi_end = ref.endpoint
    target_box = decomp.box(target)
    witness = witness_point(target_box, chi_end, decomp.width)
    w = target_parameter(witness, chi_end, spec.lam, delta_t, spec.v_max, tol=eps)

    rng = np.random.default_rng(np.random.SeedSequence((seed, agent_id)))
    own_box = decomp.box(cfg.own)
    x_start = own_box.sample(rng, size=trials)
    signals = _neighbor_disturbances(engine, agent_id, cfg, rng, trials)

    controller = HybridController(
        agent_id=agent_id,
        g=engine.extended_field(agent_id),
        reference=ref,
        own_ref=decomp.center(cfg.own),
        neighbor_refs=tuple(
            engine.decomps[j].center(cell)
            for j, cell in zip(scenario.graph.neighbors[agent_id], cfg.neighbors)
        ),
        x_start=x_start,
        w=w,
        lam=spec.lam,
        delta_t=delta_t,
        v_max=spec.v_max,
    )
    g = engine.extended_field(agent_id)

    def closed_loop(t, x):
        ds = [sig(t) for sig in signals]
        return g(x, ds) + controller(t, x, ds)

    run = integrate(closed_loop, x_start, delta_t, steps)

    rate = engine.bounds.m[agent_id] + spec.v_max
    cell_excess = -math.inf
    cell_failures = np.zeros(trials, dtype=bool)
    ctrl_failures = np.zeros(trials, dtype=bool)
    inadmissible = np.zeros(trials, dtype=bool)
    max_ctrl = -math.inf
    for k, t in enumerate(run.times):
        x_t = run.states[k]
        if t > 0:
            excess = distance_to_box(x_t, own_box) - rate * t
            cell_excess = max(cell_excess, float(np.max(excess)))
            cell_failures |= excess > eps
        ds = [sig(t) for sig in signals]
        knorm = np.linalg.norm(controller(t, x_t, ds), axis=-1)
        max_ctrl = max(max_ctrl, float(np.max(knorm)))
        ctrl_failures |= knorm >= spec.v_max + eps
        for sig in signals:
            inadmissible |= ~sig.admissible(t, eps)

    end_err = np.linalg.norm(run.endpoint - witness, axis=-1)
    end_dist = distance_to_box(run.endpoint, target_box)
    end_failures = (end_err > ENDPOINT_TOL) | (end_dist > ENDPOINT_TOL)

    return ConsistencyReport(
        agent_id=agent_id,
        cfg_key=cfg.key(),
        target=target,
        trials=trials,
        seed=seed,
        cell_bound_failures=int(np.sum(cell_failures)),
        endpoint_failures=int(np.sum(end_failures)),
        controller_failures=int(np.sum(ctrl_failures)),
        inadmissible_disturbances=int(np.sum(inadmissible)),
        max_cell_bound_excess=float(cell_excess),
        max_endpoint_error=float(np.max(end_err)),
        max_controller_norm=float(max_ctrl),
        v_max=spec.v_max,
    )


def _build_step_controllers(engine, config, targets, start):
    """One controller per agent; flags agents whose target is unreachable."""
    scenario = engine.scenario
    controllers, in_ball = {}, {}
    for spec in scenario.agents:
        cfg = project_configuration(scenario, config, spec.id)
        decomp = engine.decomps[spec.id]
        ref = engine.reference(spec.id, cfg)
        box = decomp.box(targets[spec.id])
        witness = witness_point(box, ref.endpoint, decomp.width)
        offset = witness - ref.endpoint
        distance = float(np.linalg.norm(offset))
        radius = engine.radius(spec.id)
        ok = distance <= radius + scenario.numerics.eps_geo
        if not ok:
            # Unreachable target: steer as close as the budget allows so the
            # resulting membership failure is attributed to this agent.
            offset = offset * (radius / distance)
        controllers[spec.id] = HybridController(
            agent_id=spec.id,
            g=engine.extended_field(spec.id),
            reference=ref,
            own_ref=decomp.center(cfg.own),
            neighbor_refs=tuple(
                engine.decomps[j].center(cell)
                for j, cell in zip(scenario.graph.neighbors[spec.id], cfg.neighbors)
            ),
            x_start=start[spec.id],
            w=offset / (spec.lam * engine.disc.delta_t),
            lam=spec.lam,
            delta_t=engine.disc.delta_t,
            v_max=spec.v_max,
        )
        in_ball[spec.id] = ok
    return controllers, in_ball


def realize_step(
    engine: AbstractionEngine,
    config,
    targets: dict[int, Cell],
    start: dict[int, np.ndarray],
) -> StepReport:
    """Simulate the true coupled system for one step, all controllers active.

    Start states must lie in the configured cells; the report records, per
    agent, the landed cell, the distance to the claimed cell and the peak
    controller magnitude.
    """
    scenario = engine.scenario
    eps = scenario.numerics.eps_geo
    ids = scenario.graph.agent_ids
    position = {a: k for k, a in enumerate(ids)}
    for spec in scenario.agents:
        box = engine.decomps[spec.id].box(config[position[spec.id]])
        if distance_to_box(start[spec.id], box) > eps:
            raise PreconditionError(
                f"start state of agent {spec.id} lies outside its configured cell"
            )

    controllers, in_ball = _build_step_controllers(engine, config, targets, start)

    offsets, total = {}, 0
    for spec in scenario.agents:
        offsets[spec.id] = total
        total += spec.n

    def split(z):
        return {
            spec.id: z[..., offsets[spec.id] : offsets[spec.id] + spec.n]
            for spec in scenario.agents
        }

    def coupled(t, z):
        xs = split(z)
        out = np.empty_like(z)
        for spec in scenario.agents:
            neighbors = [xs[j] for j in scenario.graph.neighbors[spec.id]]
            drift = spec.field(xs[spec.id], neighbors)
            control = controllers[spec.id](t, xs[spec.id], neighbors)
            out[..., offsets[spec.id] : offsets[spec.id] + spec.n] = drift + control
        return out

    z0 = np.concatenate([start[spec.id] for spec in scenario.agents])
    run = integrate(coupled, z0, engine.disc.delta_t, scenario.numerics.integrator_divisor)

    max_ctrl = {spec.id: -math.inf for spec in scenario.agents}
    for k, t in enumerate(run.times):
        xs = split(run.states[k])
        for spec in scenario.agents:
            neighbors = [xs[j] for j in scenario.graph.neighbors[spec.id]]
            norm = float(
                np.linalg.norm(controllers[spec.id](t, xs[spec.id], neighbors))
            )
            max_ctrl[spec.id] = max(max_ctrl[spec.id], norm)

    ends = split(run.endpoint)
    records = []
    for spec in scenario.agents:
        decomp = engine.decomps[spec.id]
        claimed = targets[spec.id]
        dist = float(distance_to_box(ends[spec.id], decomp.box(claimed)))
        try:
            landed = decomp.locate(ends[spec.id], eps=eps, extended=True)
        except OutOfCoverError:
            landed = None
        records.append(
            AgentStepRecord(
                agent_id=spec.id,
                claimed=claimed,
                landed=landed,
                target_in_ball=in_ball[spec.id],
                membership_distance=dist,
                max_controller_norm=max_ctrl[spec.id],
                controller_ok=max_ctrl[spec.id] < spec.v_max,
            )
        )
    return StepReport(
        records=tuple(records),
        endpoint={i: np.array(v) for i, v in ends.items()},
        trajectory=run,
    )


def realize_path(engine: AbstractionEngine, path: Path) -> RealizationReport:
    """Chain realize_step along a product path starting from the scenario's
    initial states; stops at the first failing step with agent attribution."""
    scenario = engine.scenario
    ids = scenario.graph.agent_ids
    position = {a: k for k, a in enumerate(ids)}
    start = {spec.id: np.array(spec.x0) for spec in scenario.agents}
    for spec in scenario.agents:
        box = engine.decomps[spec.id].box(path[0][position[spec.id]])
        if distance_to_box(start[spec.id], box) > scenario.numerics.eps_geo:
            return RealizationReport(
                path=path, steps=(), failed_step=0, failed_agents=(spec.id,)
            )
    steps = []
    for k in range(len(path) - 1):
        targets = {
            spec.id: path[k + 1][position[spec.id]] for spec in scenario.agents
        }
        report = realize_step(engine, path[k], targets, start)
        steps.append(report)
        if not report.ok:
            return RealizationReport(
                path=path,
                steps=tuple(steps),
                failed_step=k,
                failed_agents=tuple(
                    r.agent_id for r in report.records if not r.ok
                ),
            )
        start = report.endpoint
    return RealizationReport(
        path=path, steps=tuple(steps), failed_step=None, failed_agents=()
    )


@dataclass(frozen=True)
class AgentAudit:
    agent_id: int
    declared_l1: float
    declared_l2: float
    declared_m: float
    estimated_l1: float
    estimated_l2: float
    estimated_m: float
    warnings: tuple[str, ...]


def audit_bounds(scenario, tube, bounds, samples: int = 4000, seed: int = 0):
    """Estimate L1, L2 and the field bound by sampling; warn on optimistic
    declarations.  Estimates are lower witnesses, so a warning is conclusive
    while silence is not a proof."""
    reports = []
    for spec in scenario.agents:
        rng = np.random.default_rng(np.random.SeedSequence((seed, spec.id)))
        own = tube[spec.id].hull(0.0, scenario.horizon)
        neighbor_hulls = [
            tube[j].hull(0.0, scenario.horizon)
            for j in scenario.graph.neighbors[spec.id]
        ]

        def sample_ball(ball, count):
            pts = rng.standard_normal((count, ball.dim))
            norms = np.linalg.norm(pts, axis=-1, keepdims=True)
            norms = np.where(norms == 0, 1.0, norms)
            radii = rng.random((count, 1)) ** (1.0 / ball.dim)
            return ball.center + pts / norms * radii * ball.radius

        x_a = sample_ball(own, samples)
        x_b = sample_ball(own, samples)
        nbs_a = [sample_ball(b, samples) for b in neighbor_hulls]
        nbs_b = [sample_ball(b, samples) for b in neighbor_hulls]

        f_aa = spec.field(x_a, nbs_a)
        est_m = float(np.max(np.linalg.norm(f_aa, axis=-1))) if samples else 0.0

        # own-state quotients with the neighbor block held fixed
        f_ba = spec.field(x_b, nbs_a)
        gap = np.linalg.norm(x_a - x_b, axis=-1)
        est_l2 = float(
            np.max(
                np.linalg.norm(f_aa - f_ba, axis=-1) / np.maximum(gap, 1e-12)
            )
        )
        if neighbor_hulls:
            f_ab = spec.field(x_a, nbs_b)
            joint = np.sqrt(
                sum(
                    np.linalg.norm(a - b, axis=-1) ** 2
                    for a, b in zip(nbs_a, nbs_b)
                )
            )
            est_l1 = float(
                np.max(
                    np.linalg.norm(f_aa - f_ab, axis=-1) / np.maximum(joint, 1e-12)
                )
            )
        else:
            est_l1 = 0.0

        warnings = []
        if est_l1 > spec.L1 * (1 + 1e-6) + 1e-12:
            warnings.append(
                f"agent {spec.id}: declared L1 {spec.L1} below estimate {est_l1:.6g}"
            )
        if est_l2 > spec.L2 * (1 + 1e-6) + 1e-12:
            warnings.append(
                f"agent {spec.id}: declared L2 {spec.L2} below estimate {est_l2:.6g}"
            )
        if est_m > bounds.m[spec.id] * (1 + 1e-6) + 1e-12:
            warnings.append(
                f"agent {spec.id}: certified M {bounds.m[spec.id]:.6g} below "
                f"estimate {est_m:.6g}"
            )
        reports.append(
            AgentAudit(
                agent_id=spec.id,
                declared_l1=spec.L1,
                declared_l2=spec.L2,
                declared_m=bounds.m[spec.id],
                estimated_l1=est_l1,
                estimated_l2=est_l2,
                estimated_m=est_m,
                warnings=tuple(warnings),
            )
        )
    return reports
