import math

import numpy as np
import pytest

from gridabs.discretization import (
    certify,
    controller_budget,
    d_max_upper_bound,
    delta_t_upper_bound,
    solve_discretization,
)
from gridabs.errors import InfeasibleError
from gridabs.pipeline import build_model
from gridabs.reach import compute_reach_tube
from gridabs.scenario import (
    NetworkParameters,
    load_scenario,
    network_parameters,
)


def _scenario(l1=1.0, l2=1.0, v_max=1.0, lam=0.5):
    return load_scenario(
        {
            "agents": [
                {"id": 1, "n": 1, "dynamics": {"kind": "zero"}, "v_max": v_max,
                 "lambda": lam, "L1": l1, "L2": l2, "x0": [0.0]}
            ],
            "edges": [],
            "horizon": 1.0,
        }
    )


def _params(mu_bold, m_bold):
    return NetworkParameters(mu_bold={1: mu_bold}, m_bold={1: m_bold})


def test_delta_t_bound_reference_values():
    scn = _scenario()
    assert delta_t_upper_bound(scn, 1, _params(1.0, 2.0)) == pytest.approx(
        0.2, abs=1e-12
    )


def test_delta_t_bound_decoupled_is_infinite():
    scn = _scenario(l1=0.0, l2=0.0)
    assert delta_t_upper_bound(scn, 1, _params(0.0, 0.0)) == math.inf


def test_delta_t_bound_cancellation():
    # With L1 = 0 and L2 = 1 the bound is (1-lam)/ (lam L2), independent of v.
    for v in (1.0, 2.0, 8.0):
        scn = _scenario(l1=0.0, l2=1.0, v_max=v)
        assert delta_t_upper_bound(scn, 1, _params(0.0, 0.0)) == pytest.approx(1.0)


def test_d_max_bound_reference_values():
    scn = _scenario()
    term1, term2 = d_max_upper_bound(scn, 1, 0.1, _params(1.0, 2.0))
    assert term1 == pytest.approx(0.1 / 1.2, abs=1e-12)
    assert term2 == pytest.approx(0.05 / 1.1, abs=1e-12)
    assert min(term1, term2) == pytest.approx(0.0454545454545, abs=1e-12)


def test_d_max_bound_decoupled():
    scn = _scenario(l1=0.0, l2=0.0)
    term1, term2 = d_max_upper_bound(scn, 1, 0.1, _params(0.0, 0.0))
    assert term1 == pytest.approx(0.1)
    assert term2 == pytest.approx(0.1)


def test_d_max_bound_vanishes_with_delta_t():
    scn = _scenario()
    params = _params(1.0, 2.0)
    values = [min(d_max_upper_bound(scn, 1, dt, params)) for dt in (0.1, 0.01, 0.001)]
    assert values[0] > values[1] > values[2]
    assert values[2] < 0.01


def test_d_max_bound_nonpositive_past_delta_t_limit():
    scn = _scenario()
    _, term2 = d_max_upper_bound(scn, 1, 0.25, _params(1.0, 2.0))
    assert term2 <= 0.0


def test_bounds_decrease_in_lambda():
    params = _params(1.0, 2.0)
    lams = np.linspace(0.05, 0.95, 19)
    dt_bounds = [
        delta_t_upper_bound(_scenario(lam=float(l)), 1, params) for l in lams
    ]
    assert all(a >= b - 1e-12 for a, b in zip(dt_bounds, dt_bounds[1:]))
    dmax_bounds = [
        min(d_max_upper_bound(_scenario(lam=float(l)), 1, 0.05, params)) for l in lams
    ]
    assert all(a >= b - 1e-12 for a, b in zip(dmax_bounds, dmax_bounds[1:]))


def test_solver_decoupled_defaults(decoupled_doc):
    scn = load_scenario(decoupled_doc)
    tube, bounds = compute_reach_tube(scn)
    netparams = network_parameters(scn, bounds.m)
    disc = solve_discretization(scn, tube, bounds, netparams)
    assert disc.ell == 10
    assert disc.delta_t == pytest.approx(0.1)
    assert disc.d_max[1] == pytest.approx(0.095, abs=1e-8)
    assert disc.tau == pytest.approx(0.2)


def test_solver_symmetric_agents_equal_diameters(consensus_model):
    disc = consensus_model.disc
    assert disc.d_max[1] == pytest.approx(disc.d_max[2])


def test_solver_respects_mu_constraints():
    doc = {
        "agents": [
            {"id": i, "n": 1, "dynamics": {"kind": "zero"}, "v_max": 1.0,
             "lambda": 0.5, "L1": 0.0, "L2": 0.0, "x0": [0.0]}
            for i in (1, 2)
        ],
        # d_max(1) <= 0.5 d_max(2); no reverse edge, so no cycle to check
        "edges": [{"from": 1, "to": 2, "mu": 0.5}],
        "horizon": 1.0,
    }
    scn = load_scenario(doc)
    tube, bounds = compute_reach_tube(scn)
    netparams = network_parameters(scn, bounds.m)
    disc = solve_discretization(scn, tube, bounds, netparams)
    assert disc.d_max[1] <= 0.5 * disc.d_max[2] + 1e-12
    # hand iteration of the shrink recurrence reaches the same fixed point
    caps = {i: disc.certificates[i].dmax_bound * 0.95 for i in (1, 2)}
    d = dict(caps)
    for _ in range(4):
        d[1] = min(d[1], 0.5 * d[2])
    assert disc.d_max[1] == pytest.approx(d[1], rel=1e-6)


def test_solver_rejects_cycle_violation():
    doc = {
        "agents": [
            {"id": i, "n": 1, "dynamics": {"kind": "zero"}, "v_max": 1.0,
             "lambda": 0.5, "L1": 0.0, "L2": 0.0, "x0": [0.0]}
            for i in (1, 2)
        ],
        "edges": [
            {"from": 1, "to": 2, "mu": 0.5},
            {"from": 2, "to": 1, "mu": 1.5},
        ],
        "horizon": 1.0,
    }
    scn = load_scenario(doc)
    tube, bounds = compute_reach_tube(scn)
    netparams = network_parameters(scn, bounds.m)
    with pytest.raises(InfeasibleError) as err:
        solve_discretization(scn, tube, bounds, netparams)
    assert "cycle" in str(err.value)


def test_certificates_reverify_with_margin(consensus_model, chain_model):
    for model in (consensus_model, chain_model):
        disc = model.disc
        assert disc.ell * disc.delta_t == pytest.approx(model.scenario.horizon, abs=0.0)
        assert disc.delta_t < disc.tau < model.scenario.horizon
        for cert in disc.certificates.values():
            assert cert.ok
            assert cert.delta_t_margin >= disc.margin - 1e-12
            assert cert.dmax_margin >= disc.margin - 1e-12
            assert cert.budget_t0 < cert.v_max
            assert cert.budget_t1 < cert.v_max


def test_budget_linearity_endpoints_suffice(consensus_model):
    # the budget envelope is affine in t, so interior values interpolate
    model = consensus_model
    disc = model.disc
    for agent in (1, 2):
        b0 = controller_budget(
            model.scenario, agent, disc.delta_t, disc.d_max[agent], model.netparams, 0.0
        )
        b1 = controller_budget(
            model.scenario, agent, disc.delta_t, disc.d_max[agent],
            model.netparams, disc.delta_t,
        )
        mid = controller_budget(
            model.scenario, agent, disc.delta_t, disc.d_max[agent],
            model.netparams, disc.delta_t / 2,
        )
        assert mid == pytest.approx(0.5 * (b0 + b1), rel=1e-12)


def test_certify_enforce_false_records_failures(consensus_model):
    model = consensus_model
    disc = model.disc
    bad = {i: 3.0 * disc.certificates[i].dmax_bound for i in disc.d_max}
    with pytest.raises(InfeasibleError):
        certify(
            model.scenario, model.netparams, disc.ell, disc.tau, bad,
            disc.theta, disc.margin, enforce=True,
        )
    loose = certify(
        model.scenario, model.netparams, disc.ell, disc.tau, bad,
        disc.theta, disc.margin, enforce=False,
    )
    assert not loose.ok
    assert all(not c.ok for c in loose.certificates.values())


def test_infeasible_diagnosis_names_binding_inequality():
    # lambda so close to 1 that the diameter cap dives below the floor
    doc = {
        "agents": [
            {"id": 1, "n": 1, "dynamics": {"kind": "zero"}, "v_max": 1.0,
             "lambda": 0.999999999, "L1": 0.0, "L2": 0.0, "x0": [0.0]}
        ],
        "edges": [],
        "horizon": 1.0,
        "numerics": {"d_floor": 1e-3},
    }
    scn = load_scenario(doc)
    tube, bounds = compute_reach_tube(scn)
    netparams = network_parameters(scn, bounds.m)
    with pytest.raises(InfeasibleError) as err:
        solve_discretization(scn, tube, bounds, netparams)
    assert "floor" in str(err.value)


def test_full_model_builds_for_chain(chain_model):
    assert chain_model.disc.ell <= 5
    assert chain_model.disc.ok
