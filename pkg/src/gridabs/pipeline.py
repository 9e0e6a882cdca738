"""End-to-end construction: scenario -> tubes -> certificate -> grids ->
abstraction engine.  Shared by the HTTP service and by tests."""

from __future__ import annotations

from dataclasses import dataclass

from .abstraction import AbstractionEngine
from .discretization import SpaceTimeDiscretization, certify, solve_discretization
from .grid import CellDecomposition, build_decomposition, extend_decomposition
from .reach import (
    DynamicsBounds,
    ReachTube,
    compute_reach_tube,
    inflation_constant,
)
from .scenario import NetworkParameters, Scenario, network_parameters


@dataclass(frozen=True)
class BuiltModel:
    scenario: Scenario
    tube: ReachTube
    bounds: DynamicsBounds
    netparams: NetworkParameters
    disc: SpaceTimeDiscretization
    decomps: dict[int, CellDecomposition]
    engine: AbstractionEngine


def _assemble(scenario, tube, bounds, netparams, disc, strict) -> BuiltModel:
    decomps = build_decomposition(scenario, tube, disc.d_max, disc.delta_t)
    inflation = {
        spec.id: inflation_constant(scenario, spec.id, disc.tau, bounds)
        for spec in scenario.agents
    }
    decomps = extend_decomposition(scenario, decomps, tube, disc.tau, inflation)
    engine = AbstractionEngine(
        scenario, tube, bounds, netparams, disc, decomps, strict=strict
    )
    return BuiltModel(
        scenario=scenario,
        tube=tube,
        bounds=bounds,
        netparams=netparams,
        disc=disc,
        decomps=decomps,
        engine=engine,
    )


def build_model(
    scenario: Scenario,
    theta: float | None = None,
    margin: float | None = None,
) -> BuiltModel:
    """Run the full certified pipeline for a validated scenario."""
    tube, bounds = compute_reach_tube(scenario)
    netparams = network_parameters(scenario, bounds.m)
    disc = solve_discretization(scenario, tube, bounds, netparams, theta, margin)
    return _assemble(scenario, tube, bounds, netparams, disc, strict=True)


def build_model_with_parameters(
    scenario: Scenario,
    ell: int,
    tau: float,
    d_max: dict[int, float],
    enforce: bool = True,
) -> BuiltModel:
    """Build with explicitly chosen parameters.

    With ``enforce`` the parameters must pass certification; without it the
    certificate records the failures and downstream guarantees are void
    (used by negative controls that prove the validators have teeth).
    """
    tube, bounds = compute_reach_tube(scenario)
    netparams = network_parameters(scenario, bounds.m)
    disc = certify(
        scenario,
        netparams,
        ell=ell,
        tau=tau,
        d_max=d_max,
        theta=scenario.numerics.theta,
        margin=scenario.numerics.margin,
        enforce=enforce,
    )
    return _assemble(scenario, tube, bounds, netparams, disc, strict=enforce)
