import os

import numpy as np
import pytest
import torch

from oracle_envs import collect_dataset, make_env
from preprocess import normalize_states
from tdm_model import TdmConfig


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: suite de aceptación (requiere TSRL_RUN_SLOW=1)")


def pytest_collection_modifyitems(config, items):
    if os.environ.get("TSRL_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="define TSRL_RUN_SLOW=1 para ejecutar")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def float64():
    """Las pruebas unitarias corren en 64 bits"""
    previous = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(previous)


@pytest.fixture
def linear_env():
    return make_env('linear_reversible')


@pytest.fixture
def linear_dataset(linear_env):
    return collect_dataset(linear_env, 'scripted-suboptimal', 300, seed=0)


@pytest.fixture
def normalized_linear(linear_dataset):
    return normalize_states(linear_dataset)


@pytest.fixture
def tiny_tdm_config():
    return TdmConfig(state_dim=2, action_dim=2, latent_state_dim=2, latent_action_dim=2,
                     encoder_hidden=(8,), dynamics_hidden=8, dynamics_layers=2,
                     training_epochs=4, pretrain_epochs=1, batch_size=64, log_interval=1)


def make_arrays(n=10, state_dim=2, action_dim=1, seed=0):
    """Arrays con formato de benchmark para una sola trayectoria encadenada"""
    rng = np.random.default_rng(seed)
    observations = rng.normal(size=(n + 1, state_dim))
    return {
        'observations': observations[:-1],
        'next_observations': observations[1:],
        'actions': rng.uniform(-1, 1, size=(n, action_dim)),
        'rewards': rng.normal(size=n),
        'terminals': np.zeros(n, dtype=bool),
    }


@pytest.fixture
def benchmark_arrays():
    return make_arrays
