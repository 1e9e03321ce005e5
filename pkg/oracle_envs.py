"""
Sistemas dinámicos sintéticos con simetría temporal conocida analíticamente

Cada entorno define transition(s, a) y reversible_predecessor(s', a), es decir
F(s,a) = s' − s y G(s',a) = pred − s' en forma cerrada.
"""
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from data_loader import TransitionDataset


BEHAVIOR_POLICIES = ('random', 'scripted-suboptimal', 'noisy-expert', 'expert')


class OracleEnv:
    """Entorno determinista: s' = transition(s, a); la semilla sólo afecta a reset"""

    name = 'oracle'
    state_dim = 0
    action_dim = 0

    def __init__(self, horizon: int, action_low, action_high, seed: int = 0):
        if horizon < 1:
            raise ValueError(f"horizon debe ser >= 1, no {horizon}")
        self.horizon = horizon
        self.action_low = np.broadcast_to(np.asarray(action_low, dtype=np.float64),
                                          (self.action_dim,)).copy()
        self.action_high = np.broadcast_to(np.asarray(action_high, dtype=np.float64),
                                           (self.action_dim,)).copy()
        self.rng = np.random.default_rng(seed)

    # ---------- a definir por cada sistema ----------

    def params(self) -> Dict:
        raise NotImplementedError

    def sample_initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def transition(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def reversible_predecessor(self, s_next: np.ndarray, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def reward(self, s: np.ndarray, a: np.ndarray) -> float:
        raise NotImplementedError

    def expert_action(self, s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def is_terminal(self, s: np.ndarray) -> bool:
        return False

    # ---------- interfaz común ----------

    def clip_action(self, a) -> np.ndarray:
        return np.clip(np.asarray(a, dtype=np.float64), self.action_low, self.action_high)

    def reset(self, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        return self.sample_initial_state(rng if rng is not None else self.rng)

    def step(self, s, a) -> Tuple[np.ndarray, float, bool]:
        """(s', r, done); la recompensa se evalúa en el estado previo"""
        s = np.asarray(s, dtype=np.float64)
        a = self.clip_action(a)
        s_next = self.transition(s, a)
        return s_next, self.reward(s, a), self.is_terminal(s_next)

    def cache_key(self) -> Tuple:
        return (self.name, tuple(sorted((k, repr(v)) for k, v in self.params().items())))


def rotation_generator(dim: int) -> np.ndarray:
    """Generador antisimétrico con bloques [[0, 1], [-1, 0]]; con dim impar la última coordenada queda fija"""
    if dim < 1:
        raise ValueError(f"state_dim debe ser >= 1, no {dim}")
    J = np.zeros((dim, dim))
    for i in range(0, dim - 1, 2):
        J[i, i + 1] = 1.0
        J[i + 1, i] = -1.0
    return J


class LinearReversibleEnv(OracleEnv):
    """s' = s + A·s + B·a; exactamente reversible mientras I + A sea invertible"""

    name = 'linear_reversible'

    def __init__(self, A=None, B=None, dt: float = 0.1, horizon: int = 100,
                 state_dim: int = 2, seed: int = 0):
        A = dt * rotation_generator(state_dim) if A is None else np.asarray(A, dtype=np.float64)
        B = dt * np.eye(A.shape[0]) if B is None else np.asarray(B, dtype=np.float64)
        if A.shape != (A.shape[0], A.shape[0]) or B.shape[0] != A.shape[0]:
            raise ValueError(f"Formas incompatibles: A {A.shape}, B {B.shape}")
        self.A = A
        self.B = B
        self.dt = dt
        self.state_dim = A.shape[0]
        self.action_dim = B.shape[1]
        super().__init__(horizon, -1.0, 1.0, seed)
        self._inverse = np.linalg.inv(np.eye(self.state_dim) + A)
        self._gain = -np.linalg.pinv(B) @ (A + 0.5 * np.eye(self.state_dim))

    def params(self) -> Dict:
        return {'A': self.A.tolist(), 'B': self.B.tolist(), 'dt': self.dt, 'horizon': self.horizon}

    def sample_initial_state(self, rng):
        return rng.uniform(-1.0, 1.0, size=self.state_dim)

    def transition(self, s, a):
        return s + self.A @ s + self.B @ a

    def reversible_predecessor(self, s_next, a):
        return self._inverse @ (s_next - self.B @ a)

    def reward(self, s, a):
        return -float(s @ s + 0.1 * a @ a)

    def is_terminal(self, s):
        return bool(np.linalg.norm(s) > 10.0)

    def expert_action(self, s):
        # Lleva s' a 0.5·s cuando B es invertible
        return self.clip_action(self._gain @ s)


class PendulumEnv(OracleEnv):
    """
    Péndulo con Euler simpléctico, θ medido desde la posición colgante

        ω' = ω − (g/l)·sin θ·dt + u·dt/(m·l²)
        θ' = θ + ω'·dt
    """

    name = 'pendulum'
    state_dim = 2
    action_dim = 1

    def __init__(self, g: float = 10.0, length: float = 1.0, mass: float = 1.0,
                 dt: float = 0.05, max_torque: float = 2.0, horizon: int = 200, seed: int = 0):
        self.g = g
        self.length = length
        self.mass = mass
        self.dt = dt
        self.max_torque = max_torque
        super().__init__(horizon, -max_torque, max_torque, seed)

    def params(self) -> Dict:
        return {'g': self.g, 'length': self.length, 'mass': self.mass, 'dt': self.dt,
                'max_torque': self.max_torque, 'horizon': self.horizon}

    def sample_initial_state(self, rng):
        return np.array([rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0)])

    def _torque_term(self, a):
        return a[0] * self.dt / (self.mass * self.length ** 2)

    def transition(self, s, a):
        theta, omega = s
        omega_next = omega - (self.g / self.length) * np.sin(theta) * self.dt + self._torque_term(a)
        return np.array([theta + omega_next * self.dt, omega_next])

    def reversible_predecessor(self, s_next, a):
        theta_next, omega_next = s_next
        theta = theta_next - omega_next * self.dt
        omega = omega_next + (self.g / self.length) * np.sin(theta) * self.dt - self._torque_term(a)
        return np.array([theta, omega])

    def reward(self, s, a):
        theta, omega = s
        return -float(theta ** 2 + 0.1 * omega ** 2 + 0.001 * a[0] ** 2)

    def expert_action(self, s):
        theta, omega = s
        return self.clip_action([-(theta + 2.0 * omega)])


class PointMassFrictionEnv(OracleEnv):
    """
    Masa puntual 2-D con fricción viscosa μ: estado (x, v)

    El modelo inverso es el del sistema sin fricción, así que μ > 0 deja un
    residuo de simetría (μ·dt)²·‖v‖².
    """

    name = 'pointmass_friction'
    state_dim = 4
    action_dim = 2

    def __init__(self, friction: float = 0.1, dt: float = 0.1, horizon: int = 100, seed: int = 0):
        if friction < 0:
            raise ValueError(f"friction debe ser >= 0, no {friction}")
        self.friction = friction
        self.dt = dt
        super().__init__(horizon, -1.0, 1.0, seed)

    def params(self) -> Dict:
        return {'friction': self.friction, 'dt': self.dt, 'horizon': self.horizon}

    def sample_initial_state(self, rng):
        return np.concatenate([rng.uniform(-1.0, 1.0, 2), rng.uniform(-0.5, 0.5, 2)])

    def transition(self, s, a):
        x, v = s[:2], s[2:]
        v_next = v + self.dt * (a - self.friction * v)
        return np.concatenate([x + self.dt * v_next, v_next])

    def reversible_predecessor(self, s_next, a):
        x_next, v_next = s_next[:2], s_next[2:]
        return np.concatenate([x_next - self.dt * v_next, v_next - self.dt * a])

    def reward(self, s, a):
        x = s[:2]
        return -float(x @ x + 0.01 * a @ a)

    def expert_action(self, s):
        x, v = s[:2], s[2:]
        return self.clip_action(-(1.0 * x + 2.0 * v))


ENV_REGISTRY = {
    LinearReversibleEnv.name: LinearReversibleEnv,
    PendulumEnv.name: PendulumEnv,
    PointMassFrictionEnv.name: PointMassFrictionEnv,
}

# (random_ref, expert_ref) por entorno y parámetros
_REFERENCE_CACHE: Dict[Tuple, Tuple[float, float]] = {}


def make_env(name: str, params: Optional[Dict] = None, seed: int = 0) -> OracleEnv:
    if name not in ENV_REGISTRY:
        raise ValueError(f"Entorno desconocido: {name} (opciones: {sorted(ENV_REGISTRY)})")
    return ENV_REGISTRY[name](**(params or {}), seed=seed)


def analytic_tsym_residual(env: OracleEnv, s, a) -> float:
    """‖F(s,a) + G(s',a)‖² con s' = transition(s, a)"""
    s = np.asarray(s, dtype=np.float64)
    a = env.clip_action(a)
    s_next = env.transition(s, a)
    forward = s_next - s
    reverse = env.reversible_predecessor(s_next, a) - s_next
    residual = forward + reverse
    return float(residual @ residual)


# ==================== POLÍTICAS DE COMPORTAMIENTO ====================

def make_behavior_policy(env: OracleEnv, name: str) -> Callable:
    """Devuelve policy(s, rng) -> a"""
    half_range = (env.action_high - env.action_low) / 2

    def random_policy(s, rng):
        return rng.uniform(env.action_low, env.action_high)

    def scripted_suboptimal(s, rng):
        return env.clip_action(0.5 * env.expert_action(s) + 0.2 * half_range * rng.standard_normal(env.action_dim))

    def noisy_expert(s, rng):
        return env.clip_action(env.expert_action(s) + 0.3 * half_range * rng.standard_normal(env.action_dim))

    def expert(s, rng):
        return env.expert_action(s)

    policies = {
        'random': random_policy,
        'scripted-suboptimal': scripted_suboptimal,
        'noisy-expert': noisy_expert,
        'expert': expert,
    }
    if name not in policies:
        raise ValueError(f"Política desconocida: {name} (opciones: {BEHAVIOR_POLICIES})")
    return policies[name]


def collect_dataset(env: OracleEnv, behavior_policy: str, n_transitions: int,
                    seed: int) -> TransitionDataset:
    """Concatena episodios hasta reunir n_transitions; los límites quedan en terminals/timeouts"""
    if n_transitions < 1:
        raise ValueError(f"n_transitions debe ser >= 1, no {n_transitions}")
    policy = make_behavior_policy(env, behavior_policy)
    rng = np.random.default_rng(seed)

    states, actions, rewards, next_states, terminals, timeouts = [], [], [], [], [], []
    while len(states) < n_transitions:
        s = env.reset(rng)
        for t in range(env.horizon):
            a = env.clip_action(policy(s, rng))
            s_next, r, done = env.step(s, a)
            states.append(s)
            actions.append(a)
            rewards.append(r)
            next_states.append(s_next)
            terminals.append(done)
            timeouts.append(not done and t == env.horizon - 1)
            s = s_next
            if done or len(states) == n_transitions:
                break

    dataset = TransitionDataset(
        states=np.array(states), actions=np.array(actions), rewards=np.array(rewards),
        next_states=np.array(next_states), terminals=np.array(terminals),
        timeouts=np.array(timeouts), name=f"{env.name}-{behavior_policy}",
    )
    print(f"✓ Dataset {dataset.name}: {dataset.n} transiciones, "
          f"{int(dataset.terminals.sum())} terminales, {int(dataset.timeouts.sum())} timeouts")
    return dataset


# ==================== EVALUACIÓN ====================

@dataclass
class EvalReport:
    mean_return: float
    std_return: float
    normalized_score: float
    episodes: int
    seeds: List[int]
    returns: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)


def rollout_returns(env: OracleEnv, act_fn: Callable, episodes: int,
                    seeds: Sequence[int]) -> List[float]:
    """Retorno de cada episodio; cada semilla tiene su propio generador de estados iniciales"""
    if episodes < 1:
        raise ValueError(f"episodes debe ser >= 1, no {episodes}")
    returns = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        for _ in range(episodes):
            s = env.reset(rng)
            total = 0.0
            for _ in range(env.horizon):
                s, r, done = env.step(s, act_fn(s))
                total += r
                if done:
                    break
            returns.append(total)
    return returns


def reference_returns(env: OracleEnv, episodes: int = 10, seed: int = 12345) -> Tuple[float, float]:
    """(random_ref, expert_ref), calculados una vez por entorno y guardados en caché"""
    key = env.cache_key()
    if key not in _REFERENCE_CACHE:
        policy_rng = np.random.default_rng(seed)
        random_policy = make_behavior_policy(env, 'random')
        random_ref = np.mean(rollout_returns(env, lambda s: random_policy(s, policy_rng), episodes, [seed]))
        expert_ref = np.mean(rollout_returns(env, env.expert_action, episodes, [seed]))
        _REFERENCE_CACHE[key] = (float(random_ref), float(expert_ref))
    return _REFERENCE_CACHE[key]


def normalized_score(env: OracleEnv, mean_return: float) -> float:
    random_ref, expert_ref = reference_returns(env)
    return 100.0 * (mean_return - random_ref) / (expert_ref - random_ref)


def evaluate_policy(env: OracleEnv, act_fn: Callable, episodes: int = 5,
                    seeds: Sequence[int] = (0, 1, 2)) -> EvalReport:
    """Media y desviación sobre episodios × semillas, con puntaje normalizado"""
    returns = rollout_returns(env, act_fn, episodes, seeds)
    mean_return = float(np.mean(returns))
    return EvalReport(
        mean_return=mean_return,
        std_return=float(np.std(returns)),
        normalized_score=normalized_score(env, mean_return),
        episodes=episodes,
        seeds=list(seeds),
        returns=[float(r) for r in returns],
    )
