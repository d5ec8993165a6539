import jax
import numpy as np
import pytest

jax.config.update("jax_enable_x64", True)

from orbcrawl.robot import RobotModel


@pytest.fixture(scope="session")
def model():
    return RobotModel.default()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sim(model):
    from orbcrawl.sim import Simulator

    return Simulator(model)


class _Plans:
    """Scenario solves shared by every test in the session."""

    def __init__(self):
        self.cache = {}

    def get(self, name, **overrides):
        from orbcrawl.ocp import build_problem, solve
        from orbcrawl.scenario import load_scenario

        key = (name, tuple(sorted(overrides.items())))
        if key not in self.cache:
            prob = build_problem(load_scenario(name), **overrides)
            self.cache[key] = (prob, solve(prob))
        return self.cache[key]


@pytest.fixture(scope="session")
def plans():
    return _Plans()
