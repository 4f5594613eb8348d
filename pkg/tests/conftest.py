"""Shared fixtures.

The imitation pipeline (collect 274 episodes, train both learners, evaluate
four policies) is expensive, so it is built once per session and shared by
the pipeline-level tests. ``pipeline_clock`` accumulates wall-clock seconds
per stage so the budget assertion can see the whole cost.
"""

import time

import pytest

from dinersim.bc import RandomPolicy, bc_train
from dinersim.config import default_config
from dinersim.data import record_episodes
from dinersim.dpgm import dpgm_train
from dinersim.env import Env
from dinersim.evaluate import evaluate
from dinersim.expert import ExpertPolicy


@pytest.fixture(scope="session")
def config():
    return default_config()


@pytest.fixture(scope="session")
def pipeline_clock():
    return {}


def _timed(clock, key, fn):
    t0 = time.monotonic()
    out = fn()
    clock[key] = time.monotonic() - t0
    return out


@pytest.fixture(scope="session")
def dataset274(config, pipeline_clock):
    expert = ExpertPolicy(config)
    return _timed(pipeline_clock, "collect",
                  lambda: record_episodes(lambda s: Env(config, s), expert, 274, 0))


@pytest.fixture(scope="session")
def small_dataset(config):
    """Three expert episodes; enough structure for format tests, loads fast."""
    expert = ExpertPolicy(config)
    return record_episodes(lambda s: Env(config, s), expert, 3, 0)


@pytest.fixture(scope="session")
def dpgm_policy(dataset274, pipeline_clock):
    policy, _ = _timed(pipeline_clock, "train_dpgm", lambda: dpgm_train(dataset274))
    return policy


@pytest.fixture(scope="session")
def bc_policy(dataset274, pipeline_clock):
    policy, _ = _timed(pipeline_clock, "train_bc", lambda: bc_train(dataset274))
    return policy


@pytest.fixture(scope="session")
def expert_report(config, pipeline_clock):
    return _timed(pipeline_clock, "eval_expert",
                  lambda: evaluate(ExpertPolicy(config), 100, 10000, config))


@pytest.fixture(scope="session")
def dpgm_report(dpgm_policy, config, pipeline_clock):
    return _timed(pipeline_clock, "eval_dpgm",
                  lambda: evaluate(dpgm_policy, 100, 10000, config))


@pytest.fixture(scope="session")
def bc_report(bc_policy, config, pipeline_clock):
    return _timed(pipeline_clock, "eval_bc",
                  lambda: evaluate(bc_policy, 100, 10000, config))


@pytest.fixture(scope="session")
def random_report(config, pipeline_clock):
    return _timed(pipeline_clock, "eval_random",
                  lambda: evaluate(RandomPolicy(0), 100, 10000, config))


@pytest.fixture(scope="session")
def dataset70(dataset274):
    return dataset274.subset_episodes(range(70))


@pytest.fixture(scope="session")
def dpgm70_policy(dataset70, pipeline_clock):
    policy, _ = _timed(pipeline_clock, "train_dpgm70", lambda: dpgm_train(dataset70))
    return policy


@pytest.fixture(scope="session")
def bc70_policy(dataset70, pipeline_clock):
    policy, _ = _timed(pipeline_clock, "train_bc70", lambda: bc_train(dataset70))
    return policy


@pytest.fixture(scope="session")
def dpgm70_report(dpgm70_policy, config, pipeline_clock):
    return _timed(pipeline_clock, "eval_dpgm70",
                  lambda: evaluate(dpgm70_policy, 100, 10000, config))


@pytest.fixture(scope="session")
def bc70_report(bc70_policy, config, pipeline_clock):
    return _timed(pipeline_clock, "eval_bc70",
                  lambda: evaluate(bc70_policy, 100, 10000, config))
