import copy

import pytest

# Single uncoupled 1-D agent; the time-step bound is unbounded, so the
# solver falls back to a tenth of the horizon.
DECOUPLED_1D = {
    "agents": [
        {
            "id": 1,
            "n": 1,
            "dynamics": {"kind": "zero"},
            "v_max": 1.0,
            "lambda": 0.5,
            "L1": 0.0,
            "L2": 0.0,
            "x0": [0.0],
        }
    ],
    "edges": [],
    "horizon": 1.0,
    "numerics": {"seed": 7},
}

# Two mutually coupled consensus agents.  With the declared travel bound of
# 0.5 the certified field bound lands at 1 plus sampling padding, which puts
# the binding time-step bound right below 0.2.
CONSENSUS_PAIR = {
    "agents": [
        {
            "id": 1,
            "n": 1,
            "dynamics": {"kind": "consensus", "gain": 1.0},
            "v_max": 1.0,
            "lambda": 0.5,
            "L1": 1.0,
            "L2": 1.0,
            "x0": [0.0],
            "rho_horizon": 0.5,
        },
        {
            "id": 2,
            "n": 1,
            "dynamics": {"kind": "consensus", "gain": 1.0},
            "v_max": 1.0,
            "lambda": 0.5,
            "L1": 1.0,
            "L2": 1.0,
            "x0": [0.0],
            "rho_horizon": 0.5,
        },
    ],
    "edges": [
        {"from": 2, "to": 1, "mu": 1.0},
        {"from": 1, "to": 2, "mu": 1.0},
    ],
    "horizon": 0.25,
    "numerics": {"seed": 11},
}

# Three-agent chain 1 -> 2 -> 3 (agent 2 follows 1, agent 3 follows 2).
CHAIN_3 = {
    "agents": [
        {
            "id": 1,
            "n": 1,
            "dynamics": {"kind": "zero"},
            "v_max": 1.0,
            "lambda": 0.5,
            "L1": 0.0,
            "L2": 0.0,
            "x0": [0.0],
        },
        {
            "id": 2,
            "n": 1,
            "dynamics": {"kind": "consensus", "gain": 1.0},
            "v_max": 1.0,
            "lambda": 0.5,
            "L1": 1.0,
            "L2": 1.0,
            "x0": [0.05],
        },
        {
            "id": 3,
            "n": 1,
            "dynamics": {"kind": "consensus", "gain": 1.0},
            "v_max": 1.0,
            "lambda": 0.5,
            "L1": 1.0,
            "L2": 1.0,
            "x0": [0.1],
        },
    ],
    "edges": [
        {"from": 1, "to": 2, "mu": 1.0},
        {"from": 2, "to": 3, "mu": 1.0},
    ],
    "horizon": 0.25,
    "numerics": {"seed": 3},
}


@pytest.fixture
def decoupled_doc():
    return copy.deepcopy(DECOUPLED_1D)


@pytest.fixture
def consensus_doc():
    return copy.deepcopy(CONSENSUS_PAIR)


@pytest.fixture
def chain_doc():
    return copy.deepcopy(CHAIN_3)


@pytest.fixture(scope="session")
def consensus_model():
    from gridabs.pipeline import build_model
    from gridabs.scenario import load_scenario

    return build_model(load_scenario(copy.deepcopy(CONSENSUS_PAIR)))


@pytest.fixture(scope="session")
def chain_model():
    from gridabs.pipeline import build_model
    from gridabs.scenario import load_scenario

    return build_model(load_scenario(copy.deepcopy(CHAIN_3)))


@pytest.fixture(scope="session")
def decoupled_model():
    from gridabs.pipeline import build_model
    from gridabs.scenario import load_scenario

    return build_model(load_scenario(copy.deepcopy(DECOUPLED_1D)))
