"""Reachable-set overapproximations over the planning horizon.

Each agent gets a ball-shaped tube ``R_i(t) = B(x0_i, rho_i(t))`` whose
radius grows linearly at the agent's worst-case speed ``M(i) + v_max(i)``.
``M(i)`` bounds the coupling field over the tube cross products, so the two
quantities are coupled; ``compute_reach_tube`` resolves them by fixed-point
iteration from below (start with ``M = 0``, re-evaluate, repeat).  Because
the iteration is monotone, the accepted tube always satisfies
``growth_rate <= M + v_max``, which makes every inflation inclusion used
downstream hold by construction.

For couplings that amplify with distance the iteration can diverge; the
scenario may then declare ``rho_horizon``, a user-certified travel bound,
which caps the radius profile at that value (a capped profile still
satisfies all nesting requirements, see ``check_nesting``).

``M(i)`` is certified, not just empirical: the supremum is evaluated on a
deterministic per-axis grid projected into each ball and padded by the
declared Lipschitz constants times the grid's covering radius.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from .errors import TubeDivergenceError
from .geometry import Ball, project
from .scenario import AgentSpec, Scenario

_FIXED_POINT_TOL = 1e-6
_FIXED_POINT_MAX_ITER = 50
_RATE_BLOWUP = 1e12


@dataclass(frozen=True, eq=False)
class AgentTube:
    """Time-indexed family of balls ``B(center, radii[k])`` at ``times[k]``.

    ``radii`` is piecewise linear between grid points; the grid always
    contains any slope change, so interpolation is exact.
    """

    agent_id: int
    center: np.ndarray
    times: np.ndarray
    radii: np.ndarray
    growth_rate: float

    def radius_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.radii))

    def hull_radius(self, a: float, b: float) -> float:
        """Radius of the interval hull ``R_i([a, b])`` (max over the window)."""
        if b < a:
            raise ValueError(f"empty interval [{a}, {b}]")
        inside = self.radii[(self.times > a) & (self.times < b)]
        edges = [self.radius_at(a), self.radius_at(b)]
        return float(max(edges + list(inside)))

    def ball_at(self, t: float) -> Ball:
        return Ball(self.center, self.radius_at(t))

    def hull(self, a: float, b: float) -> Ball:
        return Ball(self.center, self.hull_radius(a, b))

    def inflated_hull(self, a: float, b: float, c: float) -> Ball:
        if c < 0:
            raise ValueError("inflation constant must be nonnegative")
        return Ball(self.center, self.hull_radius(a, b) + c)


@dataclass(frozen=True)
class ReachTube:
    horizon: float
    tubes: dict[int, AgentTube]

    def __getitem__(self, agent_id: int) -> AgentTube:
        return self.tubes[agent_id]


@dataclass(frozen=True)
class DynamicsBounds:
    """Certified sup-norm bounds of the coupling fields over the tubes."""

    m: dict[int, float]
    padding: dict[int, float]


def _time_grid(horizon: float, points: int, kink: float | None) -> np.ndarray:
    grid = list(np.linspace(0.0, horizon, points + 1))
    if kink is not None and 0.0 < kink < horizon:
        grid.append(kink)
    return np.array(sorted(set(grid)))


def _agent_tube(spec: AgentSpec, horizon: float, rate: float, points: int) -> AgentTube:
    kink = None
    if spec.rho_horizon is not None and rate > 0:
        kink = spec.rho_horizon / rate
    times = _time_grid(horizon, points, kink)
    radii = rate * times
    if spec.rho_horizon is not None:
        radii = np.minimum(radii, spec.rho_horizon)
    return AgentTube(
        agent_id=spec.id,
        center=spec.x0,
        times=times,
        radii=radii,
        growth_rate=rate,
    )


def _build_tube(scenario: Scenario, rates: dict[int, float]) -> ReachTube:
    points = scenario.numerics.tube_grid
    tubes = {
        spec.id: _agent_tube(spec, scenario.horizon, rates[spec.id], points)
        for spec in scenario.agents
    }
    return ReachTube(horizon=scenario.horizon, tubes=tubes)


def _ball_samples(ball: Ball, k: int) -> tuple[np.ndarray, float]:
    """Deterministic samples of a ball with a certified covering radius.

    A ``k``-per-axis grid over the bounding cube is projected into the ball;
    projection is 1-Lipschitz, so the covering radius of the cube grid,
    ``(2r / (k-1)) * sqrt(n) / 2``, also covers the ball.
    """
    n = ball.dim
    if ball.radius == 0.0 or k <= 1:
        return ball.center[None, :], ball.radius
    axes = [
        np.linspace(ball.center[d] - ball.radius, ball.center[d] + ball.radius, k)
        for d in range(n)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    cube = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    covering = (2.0 * ball.radius / (k - 1)) * math.sqrt(n) / 2.0
    return project(cube, ball), covering


def _points_per_axis(total_dim: int, preferred: int, budget: int) -> int:
    k = preferred
    while k > 2 and k**total_dim > budget:
        k -= 1
    return max(k, 2)


def _certified_sup(
    spec: AgentSpec, own: Ball, neighbor_balls: list[Ball], numerics
) -> tuple[float, float]:
    """Upper bound for ``sup |f_i|`` over ``own x prod(neighbor_balls)``."""
    blocks = [own] + neighbor_balls
    total_dim = sum(b.dim for b in blocks)
    k = _points_per_axis(total_dim, numerics.points_per_axis, numerics.sample_budget)
    sampled = [_ball_samples(b, k) for b in blocks]
    counts = [s.shape[0] for s, _ in sampled]
    mesh = np.meshgrid(*[np.arange(c) for c in counts], indexing="ij")
    flat = [m.reshape(-1) for m in mesh]
    own_pts = sampled[0][0][flat[0]]
    neighbor_pts = [sampled[1 + j][0][flat[1 + j]] for j in range(len(neighbor_balls))]
    values = spec.field(own_pts, neighbor_pts)
    empirical = float(np.max(np.linalg.norm(values, axis=-1))) if values.size else 0.0
    cover_own = sampled[0][1]
    cover_nb = math.sqrt(sum(c * c for _, c in sampled[1:]))
    padding = spec.L2 * cover_own + spec.L1 * cover_nb
    return empirical + padding, padding


def dynamics_bound(scenario: Scenario, tube: ReachTube) -> DynamicsBounds:
    """Certified per-agent bounds ``M(i) >= sup |f_i|`` over the tube hulls."""
    horizon = scenario.horizon
    m, padding = {}, {}
    for spec in scenario.agents:
        own = tube[spec.id].hull(0.0, horizon)
        nbs = [tube[j].hull(0.0, horizon) for j in scenario.graph.neighbors[spec.id]]
        m[spec.id], padding[spec.id] = _certified_sup(spec, own, nbs, scenario.numerics)
    return DynamicsBounds(m=m, padding=padding)


def compute_reach_tube(scenario: Scenario) -> tuple[ReachTube, DynamicsBounds]:
    """Fixed-point construction of the tubes and their dynamics bounds.

    Raises TubeDivergenceError when the radii keep growing after the
    iteration cap; the error names the agents that need an explicit
    ``rho_horizon`` bound in the scenario document.
    """
    rates = {spec.id: spec.v_max for spec in scenario.agents}
    for _ in range(_FIXED_POINT_MAX_ITER):
        tube = _build_tube(scenario, rates)
        bounds = dynamics_bound(scenario, tube)
        new_rates = {
            spec.id: bounds.m[spec.id] + spec.v_max for spec in scenario.agents
        }
        rel = max(
            abs(new_rates[i] - rates[i]) / max(new_rates[i], 1e-30) for i in rates
        )
        if any(r > _RATE_BLOWUP for r in new_rates.values()):
            break
        if rel < _FIXED_POINT_TOL:
            return tube, bounds
        rates = new_rates
    stuck = sorted(
        i
        for i in rates
        if abs(new_rates[i] - rates[i]) / max(new_rates[i], 1e-30) >= _FIXED_POINT_TOL
    )
    raise TubeDivergenceError(
        "tube divergence: provide explicit global bound (rho_horizon) for agents "
        f"{stuck}"
    )


def inflation_constant(
    scenario: Scenario, agent_id: int, sigma: float, bounds: DynamicsBounds
) -> float:
    """Inflation budget ``(M(i) + v_max(i)) * sigma`` for a window of length sigma."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return (bounds.m[agent_id] + scenario.agent(agent_id).v_max) * sigma


@dataclass(frozen=True)
class NestingEntry:
    agent_id: int
    sigma: float
    inflated_radius: float
    required_radius: float
    ok: bool


def check_nesting(
    scenario: Scenario,
    tube: ReachTube,
    bounds: DynamicsBounds,
    delta_t: float,
    tau: float,
) -> tuple[bool, list[NestingEntry]]:
    """Verify ``R_i([0, T - tau])`` inflated by ``c_i(sigma)`` covers
    ``R_i([0, T - tau + sigma])`` for the three window lengths used
    downstream.

    Holds with equality for linear-growth tubes; a failure flags a supplied
    radius profile that shrinks faster than the dynamics allow.
    """
    horizon = scenario.horizon
    sigmas = [s for s in (delta_t, tau - delta_t, tau) if s > 0]
    eps = scenario.numerics.eps_geo
    entries = []
    for spec in scenario.agents:
        base = tube[spec.id].hull_radius(0.0, horizon - tau)
        for sigma in sigmas:
            lhs = base + inflation_constant(scenario, spec.id, sigma, bounds)
            rhs = tube[spec.id].hull_radius(0.0, horizon - tau + sigma)
            entries.append(
                NestingEntry(
                    agent_id=spec.id,
                    sigma=sigma,
                    inflated_radius=lhs,
                    required_radius=rhs,
                    ok=bool(lhs >= rhs - eps),
                )
            )
    return all(e.ok for e in entries), entries


def tube_csv(tube: ReachTube) -> str:
    """Render the tube grid as CSV with columns agent, t, c0..c{n-1}, radius."""
    max_dim = max(t.center.shape[0] for t in tube.tubes.values())
    out = io.StringIO()
    cols = ",".join(f"c{d}" for d in range(max_dim))
    out.write(f"agent,t,{cols},radius\n")
    for agent_id in sorted(tube.tubes):
        t = tube.tubes[agent_id]
        for time, radius in zip(t.times, t.radii):
            center = [f"{c!r}" for c in t.center] + [""] * (max_dim - t.center.size)
            out.write(f"{agent_id},{time!r},{','.join(center)},{radius!r}\n")
    return out.getvalue()
