import hypothesis
import numpy as np
import pytest

hypothesis.settings.register_profile(
    "default", max_examples=25, deadline=None, derandomize=True
)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture(scope="session")
def unit_plant_taps():
    """Unit-peak-gain order-4 plant taps (lag-0 structural zero included)."""
    from slsid.experiments import gen_random_plant
    from slsid.rng import make_rng

    return gen_random_plant(4, make_rng(42, 100, 4, 0)).taps


@pytest.fixture(scope="session")
def plant_r4(unit_plant_taps):
    from slsid.plant import build_disturbance_rejection

    return build_disturbance_rejection(unit_plant_taps[1:], 1.0)


@pytest.fixture(scope="session")
def robust_r4(unit_plant_taps):
    """One radius-robust synthesis result shared across test modules."""
    from slsid.plant import PlantKind
    from slsid.synthesis import robust_synthesis

    g_hat = unit_plant_taps[1:] * 0.97 + 0.01
    return robust_synthesis(
        g_hat, PlantKind.DISTURBANCE_REJECTION, rho=1.0, eps=0.08, T=12
    )


def random_feasible_response(plant, T, rng, scale=0.3):
    """Random exactly-feasible response via the free-parameter map."""
    from slsid.synthesis import _LParameterization

    params = _LParameterization(plant.control_rescaled(), T)
    return params.polish(scale * rng.standard_normal(T))


@pytest.fixture(scope="session")
def rand_theta_r4(plant_r4):
    return random_feasible_response(plant_r4, 12, np.random.default_rng(7))
