"""
Modelo de dinámica con simetría temporal (TDM)

Encoder φ(s,a) = (z_s, z_a), decoders ψ_s / ψ_a y dinámicas latentes
ODE hacia adelante f y en reversa g, entrenadas con reconstrucción,
restricciones ODE (vía productos Jacobiano-vector) y consistencia de
simetría temporal.
"""
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
import torch
import torch.nn as nn
import torch.optim as optim
from tqdm import tqdm

from data_loader import TransitionDataset
from preprocess import NormalizationStats, state_derivative
from utils import ConfigError, NumericalAbortError, to_tensor


VARIANTS = ('TDM', 'TDM-no-ODE', 'AE-fwd-rep', 'AE-rep')

# (training_epochs, pretrain_epochs) por escala de dataset
EPOCH_SCHEDULES = {
    'locomotion_10k': (2000, 200),
    'locomotion_100k': (1000, 100),
    'locomotion_full': (200, 20),
    'adroit_10k': (2000, 0),
    'adroit_full': (200, 0),
}

# (w_rec, w_ds, w_fwd, w_rvs, w_tsym)
# loose y strong son ajustes locales alrededor de standard
REGULARIZATION_PRESETS = {
    'loose': (1.0, 1.0, 0.01, 0.01, 0.01),
    'standard': (1.0, 1.0, 0.1, 0.1, 1.0),
    'strong': (1.0, 1.0, 1.0, 1.0, 1.0),
}


@dataclass
class TdmConfig:
    """Hiperparámetros del TDM"""
    state_dim: int = 0
    action_dim: int = 0
    latent_state_dim: Optional[int] = None
    latent_action_dim: Optional[int] = None
    encoder_hidden: Tuple[int, ...] = (512, 256, 128)
    dynamics_hidden: int = 512
    dynamics_layers: int = 4
    learning_rate: float = 3e-4
    w_rec: float = 1.0
    w_ds: float = 1.0
    w_fwd: float = 0.1
    w_rvs: float = 0.1
    w_tsym: float = 1.0
    l1_weight: float = 1e-5
    training_epochs: int = 2000
    pretrain_epochs: int = 200
    batch_size: int = 256
    use_enhanced_tsym: bool = False
    variant: str = 'TDM'
    log_interval: int = 100

    def with_dims(self, state_dim: int, action_dim: int) -> 'TdmConfig':
        """Fija dimensiones; por defecto d_z = d_s y d_w = d_a"""
        return replace(
            self,
            state_dim=state_dim,
            action_dim=action_dim,
            latent_state_dim=self.latent_state_dim or state_dim,
            latent_action_dim=self.latent_action_dim or action_dim,
        )

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant desconocida: {self.variant} (opciones: {VARIANTS})")
        widths = list(self.encoder_hidden) + [self.dynamics_hidden, self.dynamics_layers,
                                              self.batch_size, self.training_epochs]
        if any(w <= 0 for w in widths):
            raise ConfigError("anchos, capas, batch_size y training_epochs deben ser positivos")
        if self.pretrain_epochs < 0 or self.pretrain_epochs > self.training_epochs:
            raise ConfigError(
                f"pretrain_epochs ({self.pretrain_epochs}) debe estar en [0, training_epochs]"
            )
        weights = [self.w_rec, self.w_ds, self.w_fwd, self.w_rvs, self.w_tsym, self.l1_weight]
        if any(w < 0 for w in weights):
            raise ConfigError("los pesos de las pérdidas no pueden ser negativos")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate debe ser positivo")

    def to_dict(self) -> Dict:
        data = asdict(self)
        data['encoder_hidden'] = list(self.encoder_hidden)
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> 'TdmConfig':
        """Construye la config aplicando presets: schedule < regularization < claves explícitas"""
        data = dict(data or {})
        schedule = data.pop('schedule', None)
        regularization = data.pop('regularization', None)

        values = {}
        if schedule is not None:
            if schedule not in EPOCH_SCHEDULES:
                raise ConfigError(f"schedule desconocido: {schedule}")
            values['training_epochs'], values['pretrain_epochs'] = EPOCH_SCHEDULES[schedule]
        if regularization is not None:
            if regularization not in REGULARIZATION_PRESETS:
                raise ConfigError(f"regularization desconocida: {regularization}")
            keys = ('w_rec', 'w_ds', 'w_fwd', 'w_rvs', 'w_tsym')
            values.update(dict(zip(keys, REGULARIZATION_PRESETS[regularization])))

        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"claves desconocidas en tdm: {sorted(unknown)}")
        values.update(data)
        if 'encoder_hidden' in values:
            values['encoder_hidden'] = tuple(values['encoder_hidden'])
        return cls(**values)


# ==================== REDES ====================

def mlp(input_dim: int, hidden: List[int], output_dim: int,
        activation=nn.ReLU, dropout: float = 0.0) -> nn.Sequential:
    """Perceptrón multicapa: Linear + activación (+ Dropout) por capa oculta"""
    layers = []
    prev = input_dim
    for width in hidden:
        layers.append(nn.Linear(prev, width))
        layers.append(activation())
        if dropout > 0:
            layers.append(nn.Dropout(dropout))
        prev = width
    layers.append(nn.Linear(prev, output_dim))
    return nn.Sequential(*layers)


class TdmNetwork(nn.Module):
    """
    Redes del TDM

    Cada componente es un nn.Module intercambiable: encoder recibe [s;a],
    state_decoder recibe [z;δ], las dinámicas reciben [z_s;z_a].
    """

    def __init__(self, config: TdmConfig):
        super().__init__()
        self.state_dim = config.state_dim
        self.action_dim = config.action_dim
        self.latent_state_dim = config.latent_state_dim
        self.latent_action_dim = config.latent_action_dim

        d_s, d_a = config.state_dim, config.action_dim
        d_z, d_w = config.latent_state_dim, config.latent_action_dim
        hidden = list(config.encoder_hidden)
        dyn_hidden = [config.dynamics_hidden] * (config.dynamics_layers - 1)

        self.encoder = mlp(d_s + d_a, hidden, d_z + d_w)
        self.state_decoder = mlp(d_z + 1, hidden[::-1], d_s)
        self.action_decoder = mlp(d_w, hidden[::-1], d_a)
        self.forward_dynamics = mlp(d_z + d_w, dyn_hidden, d_z)
        self.reverse_dynamics = mlp(d_z + d_w, dyn_hidden, d_z)

    def encode(self, s: torch.Tensor, a: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """φ(s,a) -> (z_s, z_a)"""
        if s.shape[-1] != self.state_dim or a.shape[-1] != self.action_dim:
            raise ValueError(
                f"encode espera dims ({self.state_dim}, {self.action_dim}), "
                f"recibió ({s.shape[-1]}, {a.shape[-1]})"
            )
        z = self.encoder(torch.cat([s, a], dim=-1))
        return z[..., :self.latent_state_dim], z[..., self.latent_state_dim:]

    def decode_state(self, z: torch.Tensor, delta: int) -> torch.Tensor:
        """ψ_s(z, δ): δ=0 decodifica z_s -> s, δ=1 decodifica ż_s -> ṡ"""
        indicator = torch.full(z.shape[:-1] + (1,), float(delta), dtype=z.dtype, device=z.device)
        return self.state_decoder(torch.cat([z, indicator], dim=-1))

    def decode_action(self, z_a: torch.Tensor) -> torch.Tensor:
        return self.action_decoder(z_a)

    def f(self, z_s: torch.Tensor, z_a: torch.Tensor) -> torch.Tensor:
        """Dinámica latente hacia adelante: ż_s"""
        return self.forward_dynamics(torch.cat([z_s, z_a], dim=-1))

    def g(self, z_s: torch.Tensor, z_a: torch.Tensor) -> torch.Tensor:
        """Dinámica latente en reversa: -ż_s evaluada en (z_{s'}, z_a)"""
        return self.reverse_dynamics(torch.cat([z_s, z_a], dim=-1))

    def dynamics_parameters(self):
        return list(self.forward_dynamics.parameters()) + list(self.reverse_dynamics.parameters())

    def autoencoder_parameters(self):
        return (list(self.encoder.parameters()) + list(self.state_decoder.parameters())
                + list(self.action_decoder.parameters()))


# ==================== PÉRDIDAS ====================

class TdmBatch(NamedTuple):
    states: torch.Tensor
    actions: torch.Tensor
    next_states: torch.Tensor


def _squared_norm(x: torch.Tensor) -> torch.Tensor:
    return (x ** 2).sum(dim=-1)


def _reduce(per_sample: torch.Tensor, reduction: str) -> torch.Tensor:
    if reduction == 'mean':
        return per_sample.mean()
    if reduction == 'sum':
        return per_sample.sum()
    if reduction == 'none':
        return per_sample
    raise ValueError(f"reduction desconocida: {reduction}")


def jacobian_vector_product(outputs: torch.Tensor, inputs: torch.Tensor,
                            direction: torch.Tensor, create_graph: bool = True) -> torch.Tensor:
    """
    (∂outputs/∂inputs)·direction por doble backward

    u ↦ J^T u es lineal en u, así que derivar <J^T u, v> respecto a u da J v
    sin materializar el Jacobiano. Con create_graph=True el resultado sigue
    siendo diferenciable respecto a los parámetros (gradiente a través de un
    gradiente).
    """
    dummy = torch.zeros_like(outputs, requires_grad=True)
    vjp, = torch.autograd.grad(outputs, inputs, grad_outputs=dummy, create_graph=True)
    jvp, = torch.autograd.grad(vjp, dummy, grad_outputs=direction, create_graph=create_graph)
    return jvp


def encode_with_velocity(net: TdmNetwork, s: torch.Tensor, a: torch.Tensor,
                         direction: torch.Tensor):
    """φ(s,a) junto con (∂z_s/∂s)·direction"""
    s = s.detach().clone().requires_grad_(True)
    z_s, z_a = net.encode(s, a)
    return jacobian_vector_product(z_s, s, direction), z_s, z_a


def loss_reconstruction(net: TdmNetwork, s, a, reduction: str = 'mean') -> torch.Tensor:
    """‖s − ψ_s(z_s,0)‖² + ‖a − ψ_a(z_a)‖²"""
    z_s, z_a = net.encode(s, a)
    per_sample = _squared_norm(s - net.decode_state(z_s, 0)) + _squared_norm(a - net.decode_action(z_a))
    return _reduce(per_sample, reduction)


def loss_forward_ode(net: TdmNetwork, s, a, s_next, reduction: str = 'mean') -> torch.Tensor:
    """‖(∂φ(s,a)/∂s)·ṡ − f(φ(s,a))‖²"""
    s_dot = state_derivative(s, s_next)
    velocity, z_s, z_a = encode_with_velocity(net, s, a, s_dot)
    return _reduce(_squared_norm(velocity - net.f(z_s, z_a)), reduction)


def loss_ds_reconstruction(net: TdmNetwork, s, a, s_next, reduction: str = 'mean') -> torch.Tensor:
    """‖ṡ − ψ_s(f(φ(s,a)), 1)‖²"""
    s_dot = state_derivative(s, s_next)
    z_s, z_a = net.encode(s, a)
    return _reduce(_squared_norm(s_dot - net.decode_state(net.f(z_s, z_a), 1)), reduction)


def loss_reverse_ode(net: TdmNetwork, s, a, s_next, reduction: str = 'mean') -> torch.Tensor:
    """‖(∂φ(s',a)/∂s')·(−ṡ) − g(φ(s',a))‖²"""
    s_dot = state_derivative(s, s_next)
    velocity, z_next, z_a = encode_with_velocity(net, s_next, a, -s_dot)
    return _reduce(_squared_norm(velocity - net.g(z_next, z_a)), reduction)


def loss_tsym(net: TdmNetwork, z_s, z_a, reduction: str = 'mean') -> torch.Tensor:
    """‖f(z_s,z_a) + g(z_s + f(z_s,z_a), z_a)‖²"""
    f = net.f(z_s, z_a)
    return _reduce(_squared_norm(f + net.g(z_s + f, z_a)), reduction)


def loss_tsym_enhanced(net: TdmNetwork, z_s, z_a, z_s_next, reduction: str = 'mean') -> torch.Tensor:
    """ℓ_tsym + ‖f(z_s,z_a) + g(z_{s'},z_a)‖²"""
    f = net.f(z_s, z_a)
    per_sample = _squared_norm(f + net.g(z_s + f, z_a)) + _squared_norm(f + net.g(z_s_next, z_a))
    return _reduce(per_sample, reduction)


def l1_penalty(modules) -> torch.Tensor:
    return sum(p.abs().sum() for module in modules for p in module.parameters())


def loss_total(net: TdmNetwork, batch: TdmBatch,
               config: TdmConfig) -> Tuple[torch.Tensor, Dict[str, float]]:
    """
    Pérdida total del TDM según la variante configurada

    Cada término se promedia sobre el batch. El L1 cubre f y g en TDM y
    TDM-no-ODE; AE-rep y AE-fwd-rep no lo usan.

    Returns:
        (pérdida escalar, componentes como floats)
    """
    s, a, s_next = batch
    s_dot = state_derivative(s, s_next)
    variant = config.variant
    terms = {}

    if variant == 'TDM':
        velocity, z_s, z_a = encode_with_velocity(net, s, a, s_dot)
    else:
        z_s, z_a = net.encode(s, a)

    terms['rec'] = (_squared_norm(s - net.decode_state(z_s, 0))
                    + _squared_norm(a - net.decode_action(z_a))).mean()
    total = config.w_rec * terms['rec']
    if variant == 'AE-rep':
        terms['total'] = total
        return total, {k: float(v.detach()) for k, v in terms.items()}

    f = net.f(z_s, z_a)
    terms['ds'] = _squared_norm(s_dot - net.decode_state(f, 1)).mean()

    if variant == 'TDM':
        next_velocity, z_next, z_a_next = encode_with_velocity(net, s_next, a, -s_dot)
        terms['fwd'] = _squared_norm(velocity - f).mean()
        terms['rvs'] = _squared_norm(next_velocity - net.g(z_next, z_a_next)).mean()
    else:
        z_next, z_a_next = net.encode(s_next, a)
        z_dot = z_next - z_s
        terms['fwd'] = _squared_norm(z_dot - f).mean()
        if variant == 'TDM-no-ODE':
            terms['rvs'] = _squared_norm(-z_dot - net.g(z_next, z_a_next)).mean()

    if variant == 'AE-fwd-rep':
        # ℓ_rec + ‖ż_s − f‖² + ℓ_ds sin pesos ni L1
        terms['total'] = terms['rec'] + terms['fwd'] + terms['ds']
        return terms['total'], {k: float(v.detach()) for k, v in terms.items()}

    total = total + config.w_ds * terms['ds'] + config.w_fwd * terms['fwd'] + config.w_rvs * terms['rvs']
    if config.use_enhanced_tsym:
        terms['tsym'] = loss_tsym_enhanced(net, z_s, z_a, z_next)
    else:
        terms['tsym'] = loss_tsym(net, z_s, z_a)
    total = total + config.w_tsym * terms['tsym']
    terms['l1'] = l1_penalty([net.forward_dynamics, net.reverse_dynamics])

    terms['total_without_l1'] = total
    total = total + config.l1_weight * terms['l1']
    terms['total'] = total
    return total, {k: float(v.detach()) for k, v in terms.items()}


# ==================== MODELO ENTRENADO ====================

class TdmModel:
    """TDM entrenado: red + config + estadísticas de normalización"""

    FORMAT_VERSION = 1

    def __init__(self, config: TdmConfig, network: Optional[TdmNetwork] = None,
                 stats: Optional[NormalizationStats] = None):
        self.config = config
        self.network = network if network is not None else TdmNetwork(config)
        self.stats = stats
        self.history: List[Dict] = []

    def freeze(self) -> 'TdmModel':
        """Congela los parámetros (el TDM no recibe gradientes en TSRL)"""
        self.network.eval()
        for p in self.network.parameters():
            p.requires_grad_(False)
        return self

    def encode(self, s, a) -> Tuple[torch.Tensor, torch.Tensor]:
        return self.network.encode(to_tensor(s), to_tensor(a))

    def _chunks(self, dataset: TransitionDataset, batch_size: int):
        for start in range(0, dataset.n, batch_size):
            end = min(start + batch_size, dataset.n)
            yield (to_tensor(dataset.states[start:end]),
                   to_tensor(dataset.actions[start:end]),
                   to_tensor(dataset.next_states[start:end]))

    @torch.no_grad()
    def tsym_scores(self, dataset: TransitionDataset, batch_size: int = 4096) -> np.ndarray:
        """ℓ_tsym(φ(s,a)) por muestra, en el orden de las filas"""
        scores = []
        for s, a, _ in self._chunks(dataset, batch_size):
            z_s, z_a = self.network.encode(s, a)
            scores.append(loss_tsym(self.network, z_s, z_a, reduction='none').cpu().numpy())
        return np.concatenate(scores).astype(np.float64)

    @torch.no_grad()
    def latent_state_std(self, dataset: TransitionDataset, batch_size: int = 4096) -> np.ndarray:
        """σ_{z_s}: desviación estándar por dimensión de los estados latentes"""
        latents = []
        for s, a, _ in self._chunks(dataset, batch_size):
            z_s, _ = self.network.encode(s, a)
            latents.append(z_s.cpu().numpy())
        return np.concatenate(latents).std(axis=0)

    def compatibility_key(self) -> Dict:
        return {
            'state_dim': self.config.state_dim,
            'action_dim': self.config.action_dim,
            'latent_state_dim': self.config.latent_state_dim,
            'latent_action_dim': self.config.latent_action_dim,
            'stats_digest': self.stats.digest() if self.stats is not None else None,
        }

    def checkpoint_dict(self) -> Dict:
        return {
            'format_version': self.FORMAT_VERSION,
            'variant': self.config.variant,
            'config': self.config.to_dict(),
            'normalization': self.stats.to_dict() if self.stats is not None else None,
            'compatibility': self.compatibility_key(),
            'state_dict': self.network.state_dict(),
        }

    @classmethod
    def from_checkpoint_dict(cls, data: Dict) -> 'TdmModel':
        if data.get('format_version') != cls.FORMAT_VERSION:
            raise ValueError(f"format_version no soportada: {data.get('format_version')}")
        config = TdmConfig.from_dict(data['config'])
        stats = NormalizationStats.from_dict(data['normalization']) if data['normalization'] else None
        model = cls(config, stats=stats)
        model.network.load_state_dict(data['state_dict'])
        return model

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        torch.save(self.checkpoint_dict(), path)
        print(f"✓ Modelo TDM guardado en {path}")

    @classmethod
    def load(cls, path) -> 'TdmModel':
        data = torch.load(path, map_location='cpu', weights_only=True)
        model = cls.from_checkpoint_dict(data)
        print(f"✓ Modelo TDM cargado desde {path} (variante {model.config.variant})")
        return model


def tsym_scores(model: TdmModel, dataset: TransitionDataset) -> np.ndarray:
    return model.tsym_scores(dataset)


def write_scores_csv(scores: np.ndarray, path):
    """Exporta puntajes a CSV de dos columnas (index, score)"""
    df = pd.DataFrame({'index': np.arange(len(scores)), 'score': scores})
    df.to_csv(path, index=False, float_format='%.17g')
    print(f"✓ Puntajes exportados a: {path}")


def read_scores_csv(path) -> np.ndarray:
    df = pd.read_csv(path)
    return df.sort_values('index')['score'].to_numpy(dtype=np.float64)


# ==================== ENTRENAMIENTO ====================

class TdmTrainer:
    """
    Entrena el TDM en dos fases

    Fase 1 (pretrain_epochs): sólo ℓ_rec sobre encoder y decoders.
    Fase 2 (el resto hasta training_epochs): loss_total de la variante.
    """

    def __init__(self, config: TdmConfig, seed: int = 0,
                 stats: Optional[NormalizationStats] = None,
                 output_dir: Optional[str] = None, verbose: bool = True):
        config.validate()
        self.config = config
        self.seed = seed
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.verbose = verbose

        torch.manual_seed(seed)
        self.model = TdmModel(config, TdmNetwork(config), stats)
        self.generator = torch.Generator().manual_seed(seed)
        self.history: List[Dict] = []

    def _trainable_parameters(self, phase: str):
        net = self.model.network
        variant = self.config.variant
        if phase == 'pretrain' or variant == 'AE-rep':
            return net.autoencoder_parameters()
        if variant == 'AE-fwd-rep':
            return net.autoencoder_parameters() + list(net.forward_dynamics.parameters())
        return list(net.parameters())

    def _loss(self, batch: TdmBatch, phase: str):
        if phase == 'pretrain':
            loss = loss_reconstruction(self.model.network, batch.states, batch.actions)
            return loss, {'rec': float(loss.detach()), 'total': float(loss.detach())}
        return loss_total(self.model.network, batch, self.config)

    def _abort(self, epoch: int, phase: str, components: Dict):
        path = None
        if self.output_dir is not None:
            path = self.output_dir / "tdm_diagnostic.pt"
            data = self.model.checkpoint_dict()
            data['diagnostic'] = {'epoch': epoch, 'phase': phase, 'components': components}
            torch.save(data, path)
        raise NumericalAbortError(
            f"Pérdida no finita en la época {epoch} (fase {phase}): {components}",
            checkpoint_path=str(path) if path else None,
        )

    def _run_phase(self, phase: str, epochs: int, tensors: TdmBatch, epoch_offset: int):
        if epochs == 0:
            return
        optimizer = optim.Adam(self._trainable_parameters(phase), lr=self.config.learning_rate)
        n = tensors.states.shape[0]
        batch_size = self.config.batch_size
        self.model.network.train()

        bar = tqdm(range(epochs), desc=f"TDM {phase}", disable=not self.verbose, leave=False)
        for local_epoch in bar:
            epoch = epoch_offset + local_epoch + 1
            sums: Dict[str, float] = {}
            num_batches = 0
            indices = torch.randperm(n, generator=self.generator)
            for start in range(0, n, batch_size):
                idx = indices[start:start + batch_size]
                batch = TdmBatch(tensors.states[idx], tensors.actions[idx], tensors.next_states[idx])

                optimizer.zero_grad()
                loss, components = self._loss(batch, phase)
                if not torch.isfinite(loss):
                    self._abort(epoch, phase, components)
                loss.backward()
                optimizer.step()

                for key, value in components.items():
                    sums[key] = sums.get(key, 0.0) + value
                num_batches += 1

            record = {'epoch': epoch, 'phase': phase}
            record.update({key: value / num_batches for key, value in sums.items()})
            self.history.append(record)
            if self.verbose and (epoch % self.config.log_interval == 0 or epoch == self.config.training_epochs):
                tqdm.write(f"  Época {epoch}/{self.config.training_epochs} [{phase}] - Loss: {record['total']:.6f}")

    def fit(self, dataset: TransitionDataset) -> TdmModel:
        """Entrena sobre un dataset ya normalizado"""
        if dataset.state_dim != self.config.state_dim or dataset.action_dim != self.config.action_dim:
            raise ValueError(
                f"El dataset tiene dims ({dataset.state_dim}, {dataset.action_dim}) y la config "
                f"({self.config.state_dim}, {self.config.action_dim})"
            )
        tensors = TdmBatch(to_tensor(dataset.states), to_tensor(dataset.actions),
                           to_tensor(dataset.next_states))

        pretrain = 0 if self.config.variant == 'AE-rep' else self.config.pretrain_epochs
        if self.verbose:
            print(f"Entrenando TDM [{self.config.variant}] "
                  f"(d_z={self.config.latent_state_dim}, d_w={self.config.latent_action_dim}, "
                  f"{self.config.training_epochs} épocas, {pretrain} de pre-entrenamiento)...")
        self._run_phase('pretrain', pretrain, tensors, 0)
        self._run_phase('train', self.config.training_epochs - pretrain, tensors, pretrain)
        self.model.network.eval()
        if self.verbose and self.history:
            print(f"[OK] TDM entrenado - Loss final: {self.history[-1]['total']:.6f}")
        return self.model


def train_tdm(dataset: TransitionDataset, config: TdmConfig, seed: int = 0,
              stats: Optional[NormalizationStats] = None,
              output_dir: Optional[str] = None, verbose: bool = True) -> TdmModel:
    """Entrena un TDM sobre un dataset normalizado"""
    config = config.with_dims(dataset.state_dim, dataset.action_dim)
    trainer = TdmTrainer(config, seed=seed, stats=stats, output_dir=output_dir, verbose=verbose)
    model = trainer.fit(dataset)
    model.history = trainer.history
    return model
