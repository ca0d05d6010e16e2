import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hostcap import build_network, compact_matrices
from hostcap.net_model import fixture_path, load_network


def fourbus_spec(**overrides):
    """The motivating 4-bus feeder: substation 1, junction 2, DERs at 3/4.

    The base demands are the paper values used verbatim (negative real part,
    positive reactive part); see README for the calibration.
    """
    spec = {
        "s_base_mva": 100.0,
        "v_base_kv": 4.16,
        "v0_pu": 1.0,
        "buses": [
            {"id": 1},
            {"id": 2},
            {"id": 3, "p_demand_kw": -2000.0, "q_demand_kvar": 500.0, "is_generator": True},
            {"id": 4, "p_demand_kw": -1500.0, "q_demand_kvar": 1000.0, "is_generator": True},
        ],
        "branches": [
            {"from": 1, "to": 2, "r_pu": 0.55, "x_pu": 1.33},
            {"from": 2, "to": 3, "r_pu": 0.55, "x_pu": 1.33},
            {"from": 2, "to": 4, "r_pu": 0.55, "x_pu": 1.33},
        ],
    }
    spec.update(overrides)
    return spec


@pytest.fixture(scope="session")
def fourbus():
    return build_network(fourbus_spec())


@pytest.fixture(scope="session")
def fourbus_mats(fourbus):
    return compact_matrices(fourbus)


@pytest.fixture(scope="session")
def ieee37():
    return load_network(fixture_path("ieee37_mod.json"))


@pytest.fixture(scope="session")
def ieee37_mats(ieee37):
    return compact_matrices(ieee37)


def random_tree_spec(rng: np.random.Generator, n: int, allow_capacitive: bool = False):
    """A random radial feeder with n branches and benign impedances.

    Capacitive branches (x < 0) are opt-in: they are legal inputs and give
    the reactance sign splits something to do, but M_q is only PSD for
    inductive feeders.
    """
    x_lo = -0.3 if allow_capacitive else 0.0
    buses = [{"id": 0}]
    branches = []
    for k in range(1, n + 1):
        gen = bool(rng.random() < 0.4)
        buses.append({
            "id": k,
            "p_demand_kw": float(rng.uniform(0, 50)),
            "q_demand_kvar": float(rng.uniform(0, 20)),
            "is_generator": gen,
        })
        branches.append({
            "from": int(rng.integers(0, k)),
            "to": k,
            "r_pu": float(rng.uniform(0.001, 0.5)),
            "x_pu": float(rng.uniform(x_lo, 0.8)),
        })
    if not any(b.get("is_generator") for b in buses):
        buses[-1]["is_generator"] = True
    return {
        "s_base_mva": 10.0,
        "v_base_kv": 4.8,
        "v0_pu": 1.0,
        "buses": buses,
        "branches": branches,
    }
