import numpy as np
import pytest

from data_loader import split_trajectories, validate_dataset
from oracle_envs import (analytic_tsym_residual, collect_dataset, evaluate_policy, make_behavior_policy, make_env,
                         reference_returns, rotation_generator)


def test_unknown_env():
    with pytest.raises(ValueError):
        make_env('cartpole')


def test_identity_linear_dynamics():
    env = make_env('linear_reversible', {'A': np.zeros((2, 2)), 'B': np.eye(2)})
    s = np.array([0.3, -0.4])
    a = np.array([0.5, 0.25])
    s_next, _, done = env.step(s, a)
    np.testing.assert_allclose(s_next, s + a)
    assert not done


def test_linear_reward_uses_pre_step_state(linear_env):
    s = np.array([1.0, 2.0])
    a = np.array([0.5, -0.5])
    _, r, _ = linear_env.step(s, a)
    assert r == pytest.approx(-(5.0 + 0.1 * 0.5))


def test_linear_actions_are_clipped(linear_env):
    s = np.zeros(2)
    s_next, _, _ = linear_env.step(s, np.array([5.0, -5.0]))
    np.testing.assert_allclose(s_next, linear_env.B @ np.array([1.0, -1.0]))


def test_linear_predecessor_is_exact(linear_env):
    rng = np.random.default_rng(0)
    for _ in range(100):
        s = rng.normal(size=2)
        a = rng.uniform(-1, 1, size=2)
        s_next = linear_env.transition(s, a)
        np.testing.assert_allclose(linear_env.reversible_predecessor(s_next, a), s, atol=1e-12)
        assert analytic_tsym_residual(linear_env, s, a) <= 1e-12


@pytest.mark.parametrize("dim", [1, 3, 4])
def test_linear_default_matrices_follow_state_dim(dim):
    env = make_env('linear_reversible', {'state_dim': dim})
    assert env.A.shape == env.B.shape == (dim, dim)
    np.testing.assert_array_equal(env.A, -env.A.T)
    s = env.reset(np.random.default_rng(0))
    a = np.full(dim, 0.5)
    np.testing.assert_allclose(env.reversible_predecessor(env.transition(s, a), a), s, atol=1e-12)


def test_rotation_generator_blocks():
    np.testing.assert_array_equal(rotation_generator(3), [[0, 1, 0], [-1, 0, 0], [0, 0, 0]])
    with pytest.raises(ValueError):
        rotation_generator(0)


def test_pendulum_is_exactly_invertible():
    env = make_env('pendulum')
    rng = np.random.default_rng(1)
    for _ in range(50):
        s = rng.uniform(-2, 2, size=2)
        a = rng.uniform(-2, 2, size=1)
        np.testing.assert_allclose(env.reversible_predecessor(env.transition(s, a), a), s, atol=1e-12)
        assert analytic_tsym_residual(env, s, a) <= 1e-20


def test_pendulum_small_angle_matches_harmonic_solution():
    env = make_env('pendulum')
    theta0, dt = 0.01, env.dt
    w = np.sqrt(env.g / env.length)
    theta, omega = env.transition(np.array([theta0, 0.0]), np.zeros(1))
    bound = (w * dt) ** 2 * abs(theta0)
    assert abs(theta - theta0 * np.cos(w * dt)) <= bound
    assert abs(omega + theta0 * w * np.sin(w * dt)) <= bound * w


def test_pointmass_without_friction_is_reversible():
    env = make_env('pointmass_friction', {'friction': 0.0})
    s = np.array([0.2, -0.1, 0.5, -0.3])
    assert analytic_tsym_residual(env, s, np.array([0.3, 0.1])) <= 1e-20


def test_pointmass_friction_residual_closed_form_and_monotone():
    s = np.array([0.2, -0.1, 0.5, -0.3])
    a = np.array([0.3, 0.1])
    residuals = []
    for mu in (0.0, 0.1, 0.5, 1.0):
        env = make_env('pointmass_friction', {'friction': mu})
        residual = analytic_tsym_residual(env, s, a)
        assert residual == pytest.approx((mu * env.dt) ** 2 * np.sum(s[2:] ** 2), abs=1e-15)
        residuals.append(residual)
    assert residuals[1] > 0
    assert residuals == sorted(residuals)


def test_negative_friction_rejected():
    with pytest.raises(ValueError):
        make_env('pointmass_friction', {'friction': -0.1})


# ==================== DATOS ====================

@pytest.mark.parametrize("name", ['linear_reversible', 'pendulum', 'pointmass_friction'])
def test_collect_random_dataset(name):
    env = make_env(name)
    dataset = collect_dataset(env, 'random', 1000, seed=0)
    assert dataset.n == 1000
    assert dataset.state_dim == env.state_dim and dataset.action_dim == env.action_dim
    indices = np.concatenate([t.indices() for t in split_trajectories(dataset)])
    np.testing.assert_array_equal(indices, np.arange(1000))
    assert validate_dataset(dataset)['warnings'] == []
    assert np.all(dataset.actions >= env.action_low) and np.all(dataset.actions <= env.action_high)


def test_collect_is_deterministic(linear_env):
    a = collect_dataset(linear_env, 'noisy-expert', 250, seed=4)
    b = collect_dataset(linear_env, 'noisy-expert', 250, seed=4)
    for key, value in a.to_arrays().items():
        assert value.tobytes() == b.to_arrays()[key].tobytes()


def test_unknown_behavior_policy(linear_env):
    with pytest.raises(ValueError):
        collect_dataset(linear_env, 'optimal', 10, seed=0)


def test_noisy_expert_beats_random(linear_env):
    expert = make_behavior_policy(linear_env, 'noisy-expert')
    random = make_behavior_policy(linear_env, 'random')
    rng = np.random.default_rng(0)
    seeds = list(range(20))
    expert_return = evaluate_policy(linear_env, lambda s: expert(s, rng), episodes=1, seeds=seeds).mean_return
    random_return = evaluate_policy(linear_env, lambda s: random(s, rng), episodes=1, seeds=seeds).mean_return
    assert expert_return >= random_return


# ==================== EVALUACIÓN ====================

def test_zero_policy_return_is_closed_form(linear_env):
    report = evaluate_policy(linear_env, lambda s: np.zeros(2), episodes=2, seeds=[0, 1])
    transition = np.eye(2) + linear_env.A
    expected = []
    for seed in (0, 1):
        rng = np.random.default_rng(seed)
        for _ in range(2):
            s = rng.uniform(-1, 1, size=2)
            total = 0.0
            for _ in range(linear_env.horizon):
                total -= s @ s
                s = transition @ s
            expected.append(total)
    assert report.mean_return == pytest.approx(np.mean(expected), abs=1e-6)
    assert report.episodes == 2 and report.seeds == [0, 1]
    assert len(report.returns) == 4


def test_reference_policies_normalize_to_0_and_100():
    env = make_env('linear_reversible')
    random_ref, expert_ref = reference_returns(env)
    assert expert_ref > random_ref

    policy_rng = np.random.default_rng(12345)
    random = make_behavior_policy(env, 'random')
    report = evaluate_policy(env, lambda s: random(s, policy_rng), episodes=10, seeds=[12345])
    assert report.normalized_score == pytest.approx(0.0, abs=1e-9)

    report = evaluate_policy(env, env.expert_action, episodes=10, seeds=[12345])
    assert report.normalized_score == pytest.approx(100.0)


def test_reference_returns_are_cached(linear_env):
    assert reference_returns(linear_env) is reference_returns(linear_env)


def test_eval_report_to_dict(linear_env):
    report = evaluate_policy(linear_env, linear_env.expert_action, episodes=1, seeds=[0])
    data = report.to_dict()
    assert set(data) == {'mean_return', 'std_return', 'normalized_score', 'episodes', 'seeds', 'returns'}


def test_evaluate_requires_episodes(linear_env):
    with pytest.raises(ValueError):
        evaluate_policy(linear_env, linear_env.expert_action, episodes=0)


def test_reset_is_seeded():
    a = make_env('pendulum', seed=3).reset()
    b = make_env('pendulum', seed=3).reset()
    np.testing.assert_array_equal(a, b)
