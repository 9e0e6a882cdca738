"""Joint selection of the time step, horizon split and per-agent diameters.

The feasibility conditions (all strict) are, per agent ``i`` with free-input
fraction ``lam``, input cap ``v``, Lipschitz constants ``L1``/``L2`` and
network aggregates ``mu_bold``/``m_bold``:

    delta_t < (1 - lam) v / (L1 m_bold + L2 lam v)

    d_max   < min( 2 (1 - lam) v dt / (1 + (L1 mu_bold + L2) dt),
                   (2 (1 - lam) v dt - 2 (L1 m_bold + L2 lam v) dt^2)
                       / (1 + L1 mu_bold dt) )

plus the edge coupling ``d_max(j) <= mu(j, i) d_max(i)``, the cycle
condition on the ``mu`` products, and ``ell * delta_t == horizon`` for an
integer ``ell``.

Nothing prescribes how to pick a point inside this open region, so the
solver uses a backoff scheme: take ``delta_t`` a factor ``theta`` below the
binding bound (rounded so it divides the horizon), cap the diameters a
relative ``margin`` below their bounds, then shrink diameters to the edge
constraints by fixed-point iteration.  Every emitted value is re-verified
against the inequalities with the required margin, so the heuristic cannot
produce an unsound certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InfeasibleError
from .reach import DynamicsBounds, ReachTube, check_nesting
from .scenario import (
    NetworkParameters,
    Scenario,
    validate_cycle_condition,
)

# Keeps the emitted margin strictly above the advertised one under rounding.
_MARGIN_GUARD = 1e-9


@dataclass(frozen=True)
class AgentCertificate:
    """Re-verified margins of one agent's feasibility inequalities."""

    agent_id: int
    delta_t_bound: float
    delta_t_margin: float  # relative distance below the bound
    dmax_term1: float
    dmax_term2: float
    dmax_bound: float
    d_max: float
    dmax_margin: float
    budget_t0: float  # controller budget LHS at t = 0, must be < v_max
    budget_t1: float  # controller budget LHS at t = delta_t
    v_max: float
    ok: bool


@dataclass(frozen=True)
class SpaceTimeDiscretization:
    horizon: float
    ell: int
    tau: float
    d_max: dict[int, float]
    theta: float
    margin: float
    certificates: dict[int, AgentCertificate]
    retries: int = 0

    @property
    def delta_t(self) -> float:
        return self.horizon / self.ell

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.certificates.values())


def delta_t_upper_bound(
    scenario: Scenario, agent_id: int, netparams: NetworkParameters
) -> float:
    """Open upper bound on the time step; +inf when the agent is uncoupled."""
    spec = scenario.agent(agent_id)
    numerator = (1.0 - spec.lam) * spec.v_max
    denominator = spec.L1 * netparams.m_bold[agent_id] + spec.L2 * spec.lam * spec.v_max
    if denominator <= 0.0:
        return math.inf
    return numerator / denominator


def d_max_upper_bound(
    scenario: Scenario,
    agent_id: int,
    delta_t: float,
    netparams: NetworkParameters,
) -> tuple[float, float]:
    """The two diameter bounds at a given time step (their min is binding).

    The second term turns nonpositive when ``delta_t`` reaches its own
    bound, which signals infeasibility at that time step.
    """
    spec = scenario.agent(agent_id)
    mu_b = netparams.mu_bold[agent_id]
    m_b = netparams.m_bold[agent_id]
    free = 2.0 * (1.0 - spec.lam) * spec.v_max * delta_t
    term1 = free / (1.0 + (spec.L1 * mu_b + spec.L2) * delta_t)
    term2 = (
        free - 2.0 * (spec.L1 * m_b + spec.L2 * spec.lam * spec.v_max) * delta_t**2
    ) / (1.0 + spec.L1 * mu_b * delta_t)
    return term1, term2


def controller_budget(
    scenario: Scenario,
    agent_id: int,
    delta_t: float,
    d_max: float,
    netparams: NetworkParameters,
    t: float,
) -> float:
    """Worst-case controller magnitude along a step; linear in ``t``.

    Must stay strictly below ``v_max`` on ``[0, delta_t]``; by linearity it
    suffices to evaluate the endpoints.
    """
    spec = scenario.agent(agent_id)
    mu_b = netparams.mu_bold[agent_id]
    m_b = netparams.m_bold[agent_id]
    k1 = spec.L1 * (mu_b * d_max / 2.0 + m_b * t) + spec.L2 * (
        (delta_t - t) * d_max / (2.0 * delta_t) + spec.lam * spec.v_max * t
    )
    k2 = d_max / (2.0 * delta_t)
    k3 = spec.lam * spec.v_max
    return k1 + k2 + k3


def certify(
    scenario: Scenario,
    netparams: NetworkParameters,
    ell: int,
    tau: float,
    d_max: dict[int, float],
    theta: float,
    margin: float,
    retries: int = 0,
    enforce: bool = True,
) -> SpaceTimeDiscretization:
    """Re-verify a candidate discretization and package the certificate.

    With ``enforce`` the first failing inequality raises InfeasibleError;
    without it the certificate records failures (used by negative tests).
    """
    horizon = scenario.horizon
    delta_t = horizon / ell
    problems: list[dict] = []
    if not delta_t < tau < horizon:
        problems.append(
            {"check": "tau", "message": f"need delta_t < tau < horizon, got {tau}"}
        )
    certificates = {}
    for spec in scenario.agents:
        dt_bound = delta_t_upper_bound(scenario, spec.id, netparams)
        dt_margin = (
            1.0 - delta_t / dt_bound if math.isfinite(dt_bound) else 1.0
        )
        term1, term2 = d_max_upper_bound(scenario, spec.id, delta_t, netparams)
        bound = min(term1, term2)
        d = d_max[spec.id]
        d_margin = 1.0 - d / bound if bound > 0 else -math.inf
        b0 = controller_budget(scenario, spec.id, delta_t, d, netparams, 0.0)
        b1 = controller_budget(scenario, spec.id, delta_t, d, netparams, delta_t)
        ok = (
            dt_margin >= margin - _MARGIN_GUARD
            and d > 0
            and d_margin >= margin - _MARGIN_GUARD
            and b0 < spec.v_max
            and b1 < spec.v_max
        )
        certificates[spec.id] = AgentCertificate(
            agent_id=spec.id,
            delta_t_bound=dt_bound,
            delta_t_margin=dt_margin,
            dmax_term1=term1,
            dmax_term2=term2,
            dmax_bound=bound,
            d_max=d,
            dmax_margin=d_margin,
            budget_t0=b0,
            budget_t1=b1,
            v_max=spec.v_max,
            ok=ok,
        )
        if not ok:
            problems.append(
                {
                    "check": "agent",
                    "agent": spec.id,
                    "message": (
                        f"agent {spec.id}: delta_t margin {dt_margin:.4g}, "
                        f"d_max margin {d_margin:.4g}, budget "
                        f"({b0:.4g}, {b1:.4g}) vs v_max {spec.v_max}"
                    ),
                }
            )
    for message in _edge_violations(scenario, d_max):
        problems.append({"check": "edges", "message": message})
    disc = SpaceTimeDiscretization(
        horizon=horizon,
        ell=ell,
        tau=tau,
        d_max=dict(d_max),
        theta=theta,
        margin=margin,
        certificates=certificates,
        retries=retries,
    )
    if enforce and (problems or not disc.ok):
        binding = problems[0]["message"] if problems else "certificate failed"
        raise InfeasibleError(f"infeasible discretization: {binding}", problems)
    return disc


def _edge_violations(scenario: Scenario, d_max: dict[int, float]) -> list[str]:
    eps = scenario.numerics.eps_geo
    out = []
    for (j, i), ratio in scenario.graph.mu.items():
        if d_max[j] > ratio * d_max[i] + eps:
            out.append(
                f"edge ({j} -> {i}): d_max({j}) = {d_max[j]:.6g} exceeds "
                f"mu * d_max({i}) = {ratio * d_max[i]:.6g}"
            )
    return out


def _choose_tau(delta_t: float, horizon: float) -> float:
    return min(2.0 * delta_t, 0.5 * (delta_t + horizon))


def solve_discretization(
    scenario: Scenario,
    tube: ReachTube,
    bounds: DynamicsBounds,
    netparams: NetworkParameters,
    theta: float | None = None,
    margin: float | None = None,
) -> SpaceTimeDiscretization:
    """Pick certified ``(delta_t, ell, tau, d_max)`` for the scenario.

    The time step is ``theta`` times the binding bound, rounded down so it
    divides the horizon exactly; uncoupled scenarios (unbounded time step)
    default to a tenth of the horizon.  Diameter caps carry a relative
    safety ``margin``; the edge constraints are then resolved by iterating
    ``d(i) <- min(cap(i), min_j mu(i, j) d(j))``, which is monotone
    nonincreasing and cannot collapse to zero under the cycle condition.
    If a diameter still lands below the configured floor, the time step is
    backed off (theta halved) and the search retried.
    """
    numerics = scenario.numerics
    theta = numerics.theta if theta is None else theta
    margin = numerics.margin if margin is None else margin
    horizon = scenario.horizon

    cycles = validate_cycle_condition(scenario.graph, numerics.eps_geo)
    if cycles:
        worst = ", ".join(
            f"{'-'.join(map(str, cyc))} (product {prod:.6g})" for cyc, prod in cycles
        )
        raise InfeasibleError(
            f"cycle condition violated: {worst}",
            [{"check": "cycles", "message": worst}],
        )

    dt_star = min(
        delta_t_upper_bound(scenario, spec.id, netparams) for spec in scenario.agents
    )

    last_error = None
    current_theta = theta
    for attempt in range(9):
        effective = dt_star if math.isfinite(dt_star) else (horizon / 10.0) / current_theta
        ell = max(2, math.ceil(horizon / (current_theta * effective)))
        delta_t = horizon / ell
        tau = _choose_tau(delta_t, horizon)
        nested_ok, nest_entries = check_nesting(scenario, tube, bounds, delta_t, tau)

        caps = {}
        feasible = True
        for spec in scenario.agents:
            term1, term2 = d_max_upper_bound(scenario, spec.id, delta_t, netparams)
            cap = min(term1, term2)
            if cap <= 0:
                feasible = False
                last_error = InfeasibleError(
                    f"agent {spec.id}: nonpositive diameter bound at delta_t "
                    f"{delta_t:.6g} (term2 {term2:.6g})",
                    [{"check": "dmax", "agent": spec.id, "message": "term2 <= 0"}],
                )
                break
            caps[spec.id] = cap * (1.0 - margin) * (1.0 - _MARGIN_GUARD)
        if feasible:
            d = dict(caps)
            for _ in range(len(scenario.agents) * len(scenario.graph.mu) + 1):
                changed = False
                for (j, i), ratio in scenario.graph.mu.items():
                    limit = ratio * d[i]
                    if d[j] > limit:
                        d[j] = limit
                        changed = True
                if not changed:
                    break
            if all(v >= numerics.d_floor for v in d.values()):
                disc = certify(
                    scenario,
                    netparams,
                    ell,
                    tau,
                    d,
                    current_theta,
                    margin,
                    retries=attempt,
                )
                if not nested_ok:
                    bad = [e for e in nest_entries if not e.ok]
                    raise InfeasibleError(
                        f"reach tube violates the nesting requirement for agents "
                        f"{sorted({e.agent_id for e in bad})}",
                        [{"check": "nesting", "message": str(e)} for e in bad],
                    )
                return disc
            smallest = min(d, key=d.get)
            last_error = InfeasibleError(
                f"agent {smallest}: diameter {d[smallest]:.6g} fell below the "
                f"floor {numerics.d_floor}",
                [{"check": "floor", "agent": smallest, "message": "below floor"}],
            )
        current_theta *= 0.5
    raise last_error or InfeasibleError("discretization search exhausted", [])
