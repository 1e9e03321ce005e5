"""
Pruebas del agente TSRL: objetivos TD, α, actualización suave, ablaciones y checkpoints
"""
import numpy as np
import pytest
import torch
import torch.nn as nn

from augmentation import AugmentationRule
from preprocess import NormalizationStats
from tdm_model import TdmModel
from tsrl_agent import (LAMBDA_REGIMES, ReplayBuffer, TsrlAgent, TsrlConfig, alpha_normalizer, compute_td_target,
                        critic_loss, soft_update)
from utils import ConfigError, NumericalAbortError, parameter_digest


@pytest.fixture
def tdm(tiny_tdm_config):
    torch.manual_seed(0)
    return TdmModel(tiny_tdm_config, stats=NormalizationStats.identity(2))


@pytest.fixture
def buffer(normalized_linear):
    dataset, _ = normalized_linear
    return ReplayBuffer(dataset)


def _config(**overrides):
    values = dict(hidden_width=16, batch_size=32, iterations=10)
    values.update(overrides)
    return TsrlConfig(**values)


def _agent(tdm, **overrides):
    return TsrlAgent(tdm, _config(**overrides), -np.ones(2), np.ones(2), seed=0)


def _rule(tdm, dataset, tau=0.7):
    return AugmentationRule.fit(tdm, dataset, tau=tau)


# ==================== OPERACIONES PURAS ====================

def test_td_target_arithmetic():
    target = compute_td_target(torch.tensor([1.0]), torch.tensor([0.0]), torch.tensor([2.0]),
                               torch.tensor([3.0]), 0.99)
    assert float(target) == pytest.approx(2.98)
    q = torch.tensor([1.0])
    assert float(critic_loss(q, q, target)) == pytest.approx(2 * 3.9204)


def test_td_target_done_ignores_critic():
    rewards = torch.tensor([0.5, -1.0])
    dones = torch.ones(2)
    for scale in (1.0, 1e6):
        target = compute_td_target(rewards, dones, scale * torch.randn(2), scale * torch.randn(2), 0.99)
        torch.testing.assert_close(target, rewards)


def test_td_target_uses_pessimistic_minimum():
    q1, q2 = torch.randn(100), torch.randn(100)
    target = compute_td_target(torch.zeros(100), torch.zeros(100), q1, q2, 1.0)
    assert torch.all(target <= q1) and torch.all(target <= q2)


def test_alpha_normalizer_values():
    assert float(alpha_normalizer(torch.ones(5), 2.5)) == pytest.approx(2.5)
    assert float(alpha_normalizer(torch.tensor([2.0, -2.0, 4.0]), 2.5)) == pytest.approx(0.9375)


def test_alpha_normalizer_scale_and_floor():
    q = torch.randn(20)
    assert float(alpha_normalizer(3 * q, 2.5)) == pytest.approx(float(alpha_normalizer(q, 2.5)) / 3)
    assert float(alpha_normalizer(torch.zeros(4), 2.5)) == pytest.approx(2.5e8)


def test_alpha_normalizer_is_detached():
    q = torch.randn(6, requires_grad=True)
    assert not alpha_normalizer(q, 2.5).requires_grad


def test_alpha_normalizer_rejects_empty_batch():
    with pytest.raises(ValueError):
        alpha_normalizer(torch.zeros(0), 2.5)


def test_soft_update_limits():
    torch.manual_seed(0)
    online, target = nn.Linear(3, 2), nn.Linear(3, 2)
    before = parameter_digest(target)
    soft_update(target, online, 0.0)
    assert parameter_digest(target) == before
    soft_update(target, online, 1.0)
    assert parameter_digest(target) == parameter_digest(online)


def test_soft_update_geometric_decay():
    torch.manual_seed(1)
    online, target = nn.Linear(3, 2), nn.Linear(3, 2)
    gap = (target.weight - online.weight).detach().clone()
    rho = 0.005
    for _ in range(50):
        soft_update(target, online, rho)
    torch.testing.assert_close(target.weight - online.weight, (1 - rho) ** 50 * gap)


def test_soft_update_shape_mismatch():
    with pytest.raises(ValueError):
        soft_update(nn.Linear(3, 2), nn.Linear(4, 2), 0.5)


# ==================== CONFIGURACIÓN ====================

def test_default_config_values():
    config = TsrlConfig()
    assert (config.discount, config.target_update_rate, config.policy_noise, config.noise_clip) == (0.99, 0.005, 0.2, 0.5)
    assert config.alpha0 == 2.5 and config.policy_update_freq == 2
    assert config.hidden_width == 512


def test_regime_presets():
    assert LAMBDA_REGIMES['mujoco_10k'] == (100.0, 100.0)
    config = TsrlConfig.from_dict({'regime': 'adroit'})
    assert (config.lambda1, config.lambda2) == (10000.0, 1.0)
    assert TsrlConfig.from_dict({'regime': 'adroit', 'lambda1': 5.0}).lambda1 == 5.0


@pytest.mark.parametrize("data", [{'regime': 'nope'}, {'bogus': 1}])
def test_invalid_config(data):
    with pytest.raises(ConfigError):
        TsrlConfig.from_dict(data)


@pytest.mark.parametrize("field, value", [('discount', 1.0), ('target_update_rate', 0.0), ('actor_lr', 0.0)])
def test_validate_ranges(field, value):
    with pytest.raises(ConfigError):
        TsrlConfig(**{field: value}).validate()


# ==================== AGENTE ====================

def test_policy_update_schedule(tdm, buffer, normalized_linear):
    dataset, _ = normalized_linear
    agent = _agent(tdm)
    rule = _rule(tdm, dataset)
    rng = np.random.default_rng(0)
    first = agent.train_step(buffer.sample(32, rng), rule)
    second = agent.train_step(buffer.sample(32, rng), rule)
    assert first['policy_loss'] is None and first['alpha'] is None
    assert second['policy_loss'] is not None and second['alpha'] > 0
    assert set(first) >= {'critic_loss', 'policy_loss', 'alpha', 'kept_fraction', 'q_mean'}


def test_no_augmentation_keeps_batch_size(tdm, buffer):
    agent = _agent(tdm, no_A=True)
    metrics = agent.train_step(buffer.sample(32, np.random.default_rng(0)))
    assert metrics['kept_fraction'] == 0.0
    assert metrics['batch_rows'] == 32


def test_augmentation_appends_rows(tdm, buffer, normalized_linear):
    dataset, _ = normalized_linear
    agent = _agent(tdm)
    rule = AugmentationRule(threshold=float('inf'), tau=0.7, sigma_zs=tdm.latent_state_std(dataset))
    metrics = agent.train_step(buffer.sample(32, np.random.default_rng(0)), rule)
    assert metrics['kept_fraction'] == 1.0
    assert metrics['batch_rows'] == 64


def test_augmentation_requires_rule(tdm, buffer):
    with pytest.raises(ValueError):
        _agent(tdm).train_step(buffer.sample(32, np.random.default_rng(0)))


def test_tdm_stays_frozen(tdm, buffer, normalized_linear):
    dataset, _ = normalized_linear
    before = parameter_digest(tdm.network)
    agent = _agent(tdm)
    rule = _rule(tdm, dataset)
    rng = np.random.default_rng(0)
    for _ in range(6):
        agent.train_step(buffer.sample(32, rng), rule)
    assert parameter_digest(tdm.network) == before
    assert not any(p.requires_grad for p in tdm.network.parameters())


def test_targets_trail_online_networks(tdm, buffer):
    agent = _agent(tdm, no_A=True, target_update_rate=1.0)
    rng = np.random.default_rng(0)
    for _ in range(2):
        agent.train_step(buffer.sample(32, rng))
    assert parameter_digest(agent.actor_target) == parameter_digest(agent.actor)
    assert parameter_digest(agent.critic_target) == parameter_digest(agent.critic)


def test_train_steps_are_reproducible(tdm, buffer, normalized_linear):
    dataset, _ = normalized_linear
    rule = _rule(tdm, dataset)

    def run():
        agent = _agent(tdm)
        rng = np.random.default_rng(3)
        return [agent.train_step(buffer.sample(32, rng), rule) for _ in range(4)]

    assert run() == run()


def test_ablation_identity_is_pure_policy_gradient(tdm, buffer):
    agent = _agent(tdm, lambda1=0.0, lambda2=0.0, alpha0=1.0, normalize_q=False)
    batch = buffer.sample(32, np.random.default_rng(0))
    loss, alpha = agent.policy_loss(batch.states, batch.actions)
    z_s, z_a = tdm.network.encode(batch.states, agent.actor(batch.states))
    expected = -agent.critic.q1(z_s, z_a).mean()
    torch.testing.assert_close(loss, expected)
    assert float(alpha) == 1.0


def test_policy_gradient_direction_is_scale_invariant(tdm, buffer):
    batch = buffer.sample(32, np.random.default_rng(0))

    def actor_gradient(scale):
        agent = _agent(tdm, lambda1=0.0, lambda2=0.0)
        with torch.no_grad():
            last = agent.critic.q1_net[-1]
            last.weight.mul_(scale)
            last.bias.mul_(scale)
        loss, _ = agent.policy_loss(batch.states, batch.actions)
        grads = torch.autograd.grad(loss, list(agent.actor.parameters()))
        return torch.cat([g.reshape(-1) for g in grads])

    torch.testing.assert_close(actor_gradient(1.0), actor_gradient(10.0))


def test_no_p_uses_behavior_cloning_term(tdm, buffer):
    agent = _agent(tdm, no_P=True, alpha0=0.0)
    batch = buffer.sample(32, np.random.default_rng(0))
    loss, _ = agent.policy_loss(batch.states, batch.actions)
    expected = ((agent.actor(batch.states) - batch.actions) ** 2).mean()
    torch.testing.assert_close(loss, expected)


def test_no_r_critic_consumes_raw_inputs(tdm, buffer, normalized_linear):
    dataset, _ = normalized_linear
    agent = _agent(tdm, no_R=True)
    assert agent.critic.q1_net[0].in_features == 4
    s = torch.randn(5, 2)
    a = torch.randn(5, 2)
    z_s, z_a = agent.represent(s, a)
    assert z_s is s and z_a is a
    rule = AugmentationRule(threshold=float('inf'), tau=0.7, sigma_zs=tdm.latent_state_std(dataset))
    metrics = agent.train_step(buffer.sample(32, np.random.default_rng(0)), rule)
    assert metrics['batch_rows'] == 64


def test_act_within_bounds_and_deterministic(tdm):
    agent = TsrlAgent(tdm, _config(), np.array([-0.5, -2.0]), np.array([0.5, 1.0]), seed=0)
    states = 10 * np.random.default_rng(0).normal(size=(10_000, 2))
    actions = agent.act(states)
    assert actions.shape == (10_000, 2)
    assert np.all(actions >= [-0.5, -2.0]) and np.all(actions <= [0.5, 1.0])
    np.testing.assert_array_equal(agent.act(states), actions)
    np.testing.assert_allclose(agent.act(states[0]), actions[0], rtol=1e-12)


def test_act_disables_dropout(tdm):
    agent = _agent(tdm, dropout_rate=0.5)
    state = np.array([0.3, -0.2])
    assert agent.actor.training
    np.testing.assert_array_equal(agent.act(state), agent.act(state))
    assert agent.actor.training


def test_target_networks_stay_in_eval_mode(tdm, buffer):
    agent = _agent(tdm, dropout_rate=0.5)
    rng = np.random.default_rng(0)
    for _ in range(4):
        agent.train_step(buffer.sample(32, rng))
    assert not agent.actor_target.training and not agent.critic_target.training
    states = torch.as_tensor(buffer.sample(32, rng).next_states)
    with torch.no_grad():
        torch.testing.assert_close(agent.actor_target(states), agent.actor_target(states))


def test_non_finite_critic_loss_aborts(tdm, buffer):
    agent = _agent(tdm, no_A=True)
    with torch.no_grad():
        agent.critic.q1_net[0].weight.fill_(float('nan'))
    with pytest.raises(NumericalAbortError):
        agent.train_step(buffer.sample(32, np.random.default_rng(0)))


def test_checkpoint_round_trip(tdm, buffer, normalized_linear, tmp_path):
    dataset, _ = normalized_linear
    agent = _agent(tdm)
    rule = _rule(tdm, dataset)
    rng = np.random.default_rng(0)
    for _ in range(3):
        agent.train_step(buffer.sample(32, rng), rule)
    agent.save(tmp_path / "tsrl.pt")
    loaded = TsrlAgent.load(tmp_path / "tsrl.pt")
    assert loaded.total_it == 3
    assert parameter_digest(loaded.critic_target) == parameter_digest(agent.critic_target)
    assert parameter_digest(loaded.tdm.network) == parameter_digest(agent.tdm.network)
    states = dataset.states[:10]
    np.testing.assert_array_equal(loaded.act(states), agent.act(states))

    batch = buffer.sample(32, np.random.default_rng(9))
    assert loaded.train_step(batch, rule) == agent.train_step(batch, rule)
