"""
Agente TSRL: actor-crítico estilo TD3 sobre las representaciones del TDM
"""
import copy
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
import torch.optim as optim

from augmentation import AugmentationRule, LatentBatch, augment_batch
from data_loader import TransitionDataset
from tdm_model import TdmModel, loss_tsym, mlp
from utils import ConfigError, NumericalAbortError, to_tensor


# (lambda1, lambda2) por régimen de datos
LAMBDA_REGIMES = {
    'mujoco_full': (10.0, 1.0),
    'mujoco_10k': (100.0, 100.0),
    'adroit': (10000.0, 1.0),
    'desk': (10.0, 1.0),
}

ALPHA_FLOOR = 1e-8


@dataclass
class TsrlConfig:
    """Hiperparámetros del agente TSRL"""
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    discount: float = 0.99
    target_update_rate: float = 0.005
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    policy_update_freq: int = 2
    iterations: int = 1_000_000
    alpha0: float = 2.5
    normalize_q: bool = True
    lambda1: float = 10.0
    lambda2: float = 1.0
    dropout_rate: float = 0.0
    hidden_width: int = 512
    hidden_layers: int = 2
    batch_size: int = 256
    no_R: bool = False
    no_P: bool = False
    no_A: bool = False

    def validate(self):
        if not 0 < self.discount < 1:
            raise ConfigError(f"discount debe estar en (0, 1), no {self.discount}")
        if not 0 < self.target_update_rate <= 1:
            raise ConfigError(f"target_update_rate debe estar en (0, 1], no {self.target_update_rate}")
        rates = [self.actor_lr, self.critic_lr, self.policy_update_freq, self.iterations,
                 self.hidden_width, self.hidden_layers, self.batch_size]
        if any(r <= 0 for r in rates):
            raise ConfigError("tasas, iteraciones, anchos y batch_size deben ser positivos")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError(f"dropout_rate debe estar en [0, 1), no {self.dropout_rate}")
        if min(self.policy_noise, self.noise_clip, self.alpha0, self.lambda1, self.lambda2) < 0:
            raise ConfigError("ruidos, alpha0 y lambdas no pueden ser negativos")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> 'TsrlConfig':
        """regime fija (lambda1, lambda2); las claves explícitas tienen prioridad"""
        data = dict(data or {})
        regime = data.pop('regime', None)
        values = {}
        if regime is not None:
            if regime not in LAMBDA_REGIMES:
                raise ConfigError(f"regime desconocido: {regime}")
            values['lambda1'], values['lambda2'] = LAMBDA_REGIMES[regime]
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"claves desconocidas en tsrl: {sorted(unknown)}")
        values.update(data)
        return cls(**values)


# ==================== REDES ====================

class Actor(nn.Module):
    """Política determinista π(s), acotada con tanh a los límites de acción"""

    def __init__(self, state_dim: int, action_low, action_high, width: int = 512,
                 layers: int = 2, dropout: float = 0.0):
        super().__init__()
        low = to_tensor(action_low)
        high = to_tensor(action_high)
        self.register_buffer('action_center', (high + low) / 2)
        self.register_buffer('action_scale', (high - low) / 2)
        self.net = mlp(state_dim, [width] * layers, low.shape[-1], dropout=dropout)

    def forward(self, state: torch.Tensor) -> torch.Tensor:
        return self.action_center + self.action_scale * torch.tanh(self.net(state))


class TwinCritic(nn.Module):
    """Críticos gemelos Q1, Q2 sobre (z_s, z_a)"""

    def __init__(self, input_dim: int, width: int = 512, layers: int = 2):
        super().__init__()
        self.q1_net = mlp(input_dim, [width] * layers, 1)
        self.q2_net = mlp(input_dim, [width] * layers, 1)

    def forward(self, z_s: torch.Tensor, z_a: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        x = torch.cat([z_s, z_a], dim=-1)
        return self.q1_net(x).squeeze(-1), self.q2_net(x).squeeze(-1)

    def q1(self, z_s: torch.Tensor, z_a: torch.Tensor) -> torch.Tensor:
        return self.q1_net(torch.cat([z_s, z_a], dim=-1)).squeeze(-1)


# ==================== OPERACIONES ====================

def alpha_normalizer(q_values: torch.Tensor, alpha0: float) -> torch.Tensor:
    """α = α₀ / mean(|Q|), denominador con piso 1e-8 y sin gradiente"""
    if q_values.numel() == 0:
        raise ValueError("alpha_normalizer requiere un batch no vacío")
    return alpha0 / q_values.detach().abs().mean().clamp_min(ALPHA_FLOOR)


@torch.no_grad()
def soft_update(target: nn.Module, online: nn.Module, rho: float):
    """target ← (1−ρ)·target + ρ·online"""
    target_params = list(target.parameters())
    online_params = list(online.parameters())
    if len(target_params) != len(online_params) or any(
            t.shape != o.shape for t, o in zip(target_params, online_params)):
        raise ValueError("soft_update: las formas de los parámetros no coinciden")
    for t, o in zip(target_params, online_params):
        if rho == 1:
            t.copy_(o)
        else:
            t.mul_(1 - rho).add_(o, alpha=rho)


def compute_td_target(rewards, dones, target_q1, target_q2, discount: float) -> torch.Tensor:
    """y = r + γ·(1−done)·min(Q̂1, Q̂2)"""
    return rewards + discount * (1 - dones) * torch.min(target_q1, target_q2)


def critic_loss(q1: torch.Tensor, q2: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    return F.mse_loss(q1, target) + F.mse_loss(q2, target)


class RawBatch(NamedTuple):
    states: torch.Tensor
    actions: torch.Tensor
    rewards: torch.Tensor
    next_states: torch.Tensor
    dones: torch.Tensor


class ReplayBuffer:
    """Dataset offline como tensores, con muestreo uniforme reproducible"""

    def __init__(self, dataset: TransitionDataset):
        self.states = to_tensor(dataset.states)
        self.actions = to_tensor(dataset.actions)
        self.rewards = to_tensor(dataset.rewards)
        self.next_states = to_tensor(dataset.next_states)
        # Sólo terminals corta el bootstrap; los timeouts no
        self.dones = to_tensor(dataset.terminals)
        self.size = dataset.n

    def sample(self, batch_size: int, rng: np.random.Generator) -> RawBatch:
        idx = torch.as_tensor(rng.integers(0, self.size, size=batch_size))
        return RawBatch(self.states[idx], self.actions[idx], self.rewards[idx],
                        self.next_states[idx], self.dones[idx])


# ==================== AGENTE ====================

class TsrlAgent:
    """
    Política π, críticos gemelos, sus redes objetivo y el TDM congelado

    Ablaciones: no_R (críticos sobre (s,a) crudos), no_P (término BC en
    lugar de las restricciones latentes), no_A (sin aumento de datos).
    """

    FORMAT_VERSION = 1

    def __init__(self, tdm: TdmModel, config: TsrlConfig, action_low, action_high, seed: int = 0):
        config.validate()
        self.config = config
        self.tdm = tdm.freeze()
        self.action_low = np.asarray(action_low, dtype=np.float64)
        self.action_high = np.asarray(action_high, dtype=np.float64)

        tdm_config = tdm.config
        self.state_dim = tdm_config.state_dim
        self.action_dim = tdm_config.action_dim
        if config.no_R:
            critic_input = self.state_dim + self.action_dim
        else:
            critic_input = tdm_config.latent_state_dim + tdm_config.latent_action_dim

        torch.manual_seed(seed)
        self.actor = Actor(self.state_dim, self.action_low, self.action_high,
                           config.hidden_width, config.hidden_layers, config.dropout_rate)
        self.actor_target = copy.deepcopy(self.actor).eval()
        self.critic = TwinCritic(critic_input, config.hidden_width, config.hidden_layers)
        self.critic_target = copy.deepcopy(self.critic).eval()
        self.actor_optimizer = optim.Adam(self.actor.parameters(), lr=config.actor_lr)
        self.critic_optimizer = optim.Adam(self.critic.parameters(), lr=config.critic_lr)

        self.generator = torch.Generator().manual_seed(seed)
        self.total_it = 0

    # ---------- representaciones ----------

    def represent(self, s: torch.Tensor, a: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """Entrada de los críticos: φ(s,a), o (s,a) crudos con no_R"""
        if self.config.no_R:
            return s, a
        return self.tdm.network.encode(s, a)

    @torch.no_grad()
    def _tdm_latents(self, batch: RawBatch) -> LatentBatch:
        net = self.tdm.network
        z_s, z_a = net.encode(batch.states, batch.actions)
        z_next, _ = net.encode(batch.next_states, batch.actions)
        return LatentBatch(z_s, z_a, batch.rewards, z_next, batch.dones, next_states=batch.next_states)

    @torch.no_grad()
    def _critic_rows(self, batch: RawBatch, latents: LatentBatch) -> LatentBatch:
        if not self.config.no_R:
            return latents
        return LatentBatch(batch.states, batch.actions, batch.rewards, batch.next_states,
                           batch.dones, next_states=batch.next_states)

    @torch.no_grad()
    def _decode_rows(self, rows: LatentBatch) -> LatentBatch:
        """Lleva filas aumentadas al espacio crudo vía ψ_s y ψ_a (ablación no_R)"""
        net = self.tdm.network
        return LatentBatch(
            z_s=net.decode_state(rows.z_s, 0),
            z_a=net.decode_action(rows.z_a),
            rewards=rows.rewards,
            z_next=net.decode_state(rows.z_next, 0),
            dones=rows.dones,
        )

    # ---------- actualizaciones ----------

    @torch.no_grad()
    def _td_targets(self, real: LatentBatch, augmented: Optional[LatentBatch]) -> torch.Tensor:
        scale = self.actor.action_scale
        noise = torch.randn(real.next_states.shape[0], self.action_dim, generator=self.generator,
                            dtype=real.next_states.dtype)
        noise = (noise * self.config.policy_noise).clamp(-self.config.noise_clip, self.config.noise_clip)
        next_action = self.actor_target(real.next_states) + noise * scale
        next_action = torch.max(torch.min(next_action, self.actor.action_center + scale),
                                self.actor.action_center - scale)
        z_s_target, z_a_target = self.represent(real.next_states, next_action)
        target_q1, target_q2 = self.critic_target(z_s_target, z_a_target)
        targets = compute_td_target(real.rewards, real.dones, target_q1, target_q2,
                                    self.config.discount)
        if augmented is not None and len(augmented) > 0:
            # Las filas aumentadas no tienen estado crudo: se usa su propio z_a
            aug_q1, aug_q2 = self.critic_target(augmented.z_next, augmented.z_a)
            aug_targets = compute_td_target(augmented.rewards, augmented.dones, aug_q1, aug_q2,
                                            self.config.discount)
            targets = torch.cat([targets, aug_targets])
        return targets

    def critic_update(self, real: LatentBatch,
                      augmented: Optional[LatentBatch] = None) -> Tuple[float, float]:
        """
        Regresión de ambos críticos al objetivo TD (sin gradiente en y)

        Returns:
            (pérdida del crítico, Q media)
        """
        targets = self._td_targets(real, augmented)
        z_s, z_a = real.z_s, real.z_a
        if augmented is not None and len(augmented) > 0:
            z_s = torch.cat([z_s, augmented.z_s])
            z_a = torch.cat([z_a, augmented.z_a])

        q1, q2 = self.critic(z_s, z_a)
        loss = critic_loss(q1, q2, targets)
        if not torch.isfinite(loss):
            raise NumericalAbortError(f"Pérdida del crítico no finita en la iteración {self.total_it}")

        self.critic_optimizer.zero_grad()
        loss.backward()
        self.critic_optimizer.step()
        return float(loss.detach()), float(q1.detach().mean())

    def policy_loss(self, states: torch.Tensor, actions: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        −α·Q1(φ(s,π(s))) + λ1·‖z_{aπ} − z_a‖² + λ2·ℓ_tsym(φ(s,π(s)))

        El gradiente atraviesa φ hacia π; los parámetros de φ están congelados.
        """
        config = self.config
        net = self.tdm.network
        pi = self.actor(states)
        q = self.critic.q1(*self.represent(states, pi))
        alpha = alpha_normalizer(q, config.alpha0) if config.normalize_q else torch.tensor(config.alpha0)
        loss = -(alpha * q).mean()

        if config.no_P:
            loss = loss + F.mse_loss(pi, actions)
        else:
            z_s_pi, z_a_pi = net.encode(states, pi)
            with torch.no_grad():
                _, z_a_data = net.encode(states, actions)
            latent_gap = ((z_a_pi - z_a_data) ** 2).sum(dim=-1).mean()
            loss = loss + config.lambda1 * latent_gap
            loss = loss + config.lambda2 * loss_tsym(net, z_s_pi, z_a_pi)
        return loss, alpha

    def policy_update(self, states: torch.Tensor, actions: torch.Tensor) -> Tuple[float, float]:
        loss, alpha = self.policy_loss(states, actions)
        if not torch.isfinite(loss):
            raise NumericalAbortError(f"Pérdida de la política no finita en la iteración {self.total_it}")
        self.actor_optimizer.zero_grad()
        loss.backward()
        self.actor_optimizer.step()
        return float(loss.detach()), float(alpha)

    def train_step(self, batch: RawBatch, rule: Optional[AugmentationRule] = None) -> Dict:
        """Una iteración del algoritmo: aumento, crítico y (cada policy_update_freq) política"""
        config = self.config
        self.total_it += 1

        latents = self._tdm_latents(batch)
        real = self._critic_rows(batch, latents)

        augmented = None
        kept_fraction = 0.0
        if not config.no_A:
            if rule is None:
                raise ValueError("train_step sin no_A requiere una AugmentationRule")
            kept = augment_batch(self.tdm.network, latents, rule, self.generator)
            kept_fraction = len(kept) / (rule.k * len(latents))
            if len(kept) > 0:
                augmented = self._decode_rows(kept) if config.no_R else kept

        critic_value, q_mean = self.critic_update(real, augmented)
        metrics = {
            'step': self.total_it,
            'critic_loss': critic_value,
            'policy_loss': None,
            'alpha': None,
            'kept_fraction': kept_fraction,
            'q_mean': q_mean,
            'batch_rows': len(real) + (len(augmented) if augmented is not None else 0),
        }

        if self.total_it % config.policy_update_freq == 0:
            metrics['policy_loss'], metrics['alpha'] = self.policy_update(batch.states, batch.actions)
            soft_update(self.critic_target, self.critic, config.target_update_rate)
            soft_update(self.actor_target, self.actor, config.target_update_rate)
        return metrics

    # ---------- evaluación ----------

    @torch.no_grad()
    def act(self, state) -> np.ndarray:
        """π(s) determinista (dropout desactivado), recortada a los límites de acción"""
        was_training = self.actor.training
        self.actor.eval()
        s = to_tensor(state)
        single = s.dim() == 1
        if single:
            s = s.unsqueeze(0)
        action = self.actor(s).cpu().numpy().astype(np.float64)
        if was_training:
            self.actor.train()
        action = np.clip(action, self.action_low, self.action_high)
        return action[0] if single else action

    # ---------- checkpoints ----------

    def checkpoint_dict(self) -> Dict:
        return {
            'format_version': self.FORMAT_VERSION,
            'config': self.config.to_dict(),
            'action_low': self.action_low.tolist(),
            'action_high': self.action_high.tolist(),
            'tdm': self.tdm.checkpoint_dict(),
            'actor': self.actor.state_dict(),
            'actor_target': self.actor_target.state_dict(),
            'critic': self.critic.state_dict(),
            'critic_target': self.critic_target.state_dict(),
            'actor_optimizer': self.actor_optimizer.state_dict(),
            'critic_optimizer': self.critic_optimizer.state_dict(),
            'generator_state': self.generator.get_state(),
            'total_it': self.total_it,
        }

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(self.checkpoint_dict(), path)
        print(f"✓ Agente TSRL guardado en {path}")

    @classmethod
    def load(cls, path) -> 'TsrlAgent':
        data = torch.load(path, map_location='cpu', weights_only=True)
        if data.get('format_version') != cls.FORMAT_VERSION:
            raise ValueError(f"format_version no soportada: {data.get('format_version')}")
        tdm = TdmModel.from_checkpoint_dict(data['tdm'])
        agent = cls(tdm, TsrlConfig.from_dict(data['config']), data['action_low'], data['action_high'])
        agent.actor.load_state_dict(data['actor'])
        agent.actor_target.load_state_dict(data['actor_target'])
        agent.critic.load_state_dict(data['critic'])
        agent.critic_target.load_state_dict(data['critic_target'])
        agent.actor_optimizer.load_state_dict(data['actor_optimizer'])
        agent.critic_optimizer.load_state_dict(data['critic_optimizer'])
        agent.generator.set_state(data['generator_state'])
        agent.total_it = data['total_it']
        print(f"✓ Agente TSRL cargado desde {path} (iteración {agent.total_it})")
        return agent
