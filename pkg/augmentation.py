"""
Aumento de datos en el espacio latente consistente con la simetría temporal
"""
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
import torch

from data_loader import TransitionDataset
from tdm_model import TdmModel, TdmNetwork, loss_tsym
from utils import to_tensor


@dataclass
class LatentBatch:
    """Filas (z_s, z_a, r, z_{s'}, done); next_states sólo existe para filas reales"""
    z_s: torch.Tensor
    z_a: torch.Tensor
    rewards: torch.Tensor
    z_next: torch.Tensor
    dones: torch.Tensor
    next_states: Optional[torch.Tensor] = None

    def __len__(self) -> int:
        return self.z_s.shape[0]

    def select(self, index) -> 'LatentBatch':
        return LatentBatch(
            z_s=self.z_s[index], z_a=self.z_a[index], rewards=self.rewards[index],
            z_next=self.z_next[index], dones=self.dones[index],
            next_states=None if self.next_states is None else self.next_states[index],
        )


def compute_threshold(scores, tau: float) -> float:
    """Cuantil empírico tau de los puntajes, con interpolación lineal entre estadísticos de orden"""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise ValueError("compute_threshold requiere al menos un puntaje")
    if not 0 < tau < 1:
        raise ValueError(f"tau debe estar en (0, 1), no {tau}")
    return float(np.quantile(scores, tau, method='linear'))


@dataclass
class AugmentationRule:
    """Umbral h (cuantil tau), escala de ruido y σ_{z_s} por dimensión"""
    threshold: float
    tau: float
    sigma_zs: np.ndarray
    noise_scale: float = 0.01
    k: int = 1

    def __post_init__(self):
        self.sigma_zs = np.asarray(self.sigma_zs, dtype=np.float64)
        if np.any(self.sigma_zs < 0):
            raise ValueError("sigma_zs debe ser no negativo")
        if self.noise_scale < 0:
            raise ValueError("noise_scale debe ser no negativo")
        if self.k < 1:
            raise ValueError("k debe ser >= 1")

    @classmethod
    def fit(cls, model: TdmModel, dataset: TransitionDataset, tau: float,
            noise_scale: float = 0.01, k: int = 1,
            scores: Optional[np.ndarray] = None) -> 'AugmentationRule':
        """Calcula h y σ_{z_s} con el MISMO modelo sobre el dataset de entrenamiento"""
        if scores is None:
            scores = model.tsym_scores(dataset)
        rule = cls(
            threshold=compute_threshold(scores, tau),
            tau=tau,
            sigma_zs=model.latent_state_std(dataset),
            noise_scale=noise_scale,
            k=k,
        )
        print(f"✓ Umbral de aumento h = {rule.threshold:.6g} (tau={tau:.0%}, "
              f"ruido={noise_scale}·σ_zs, K={k})")
        return rule

    def to_dict(self) -> Dict:
        return {'threshold': self.threshold, 'tau': self.tau, 'sigma_zs': self.sigma_zs.tolist(),
                'noise_scale': self.noise_scale, 'k': self.k}

    @classmethod
    def from_dict(cls, data: Dict) -> 'AugmentationRule':
        return cls(**data)


def perturb_latent(z_s: torch.Tensor, sigma_zs, noise_scale: float,
                   generator: torch.Generator) -> torch.Tensor:
    """z_s + ε con ε_i ~ N(0, (noise_scale·σ_i)²)"""
    sigma = to_tensor(sigma_zs, dtype=z_s.dtype)
    if sigma.shape[-1] != z_s.shape[-1]:
        raise ValueError(f"sigma_zs tiene dim {sigma.shape[-1]} y z_s {z_s.shape[-1]}")
    noise = torch.randn(z_s.shape, generator=generator, dtype=z_s.dtype)
    return z_s + noise * (noise_scale * sigma)


def propagate_next(net: TdmNetwork, z_s_pert: torch.Tensor, z_a: torch.Tensor) -> torch.Tensor:
    """z_{s'} + ε' = (z_s + ε) + f(z_s + ε, z_a)"""
    return z_s_pert + net.f(z_s_pert, z_a)


@torch.no_grad()
def score_perturbations(net: TdmNetwork, batch: LatentBatch, rule: AugmentationRule,
                        generator: torch.Generator) -> Tuple[LatentBatch, torch.Tensor]:
    """K perturbaciones por fila junto con su ℓ_tsym"""
    repeated = batch.select(torch.arange(len(batch)).repeat_interleave(rule.k))
    z_pert = perturb_latent(repeated.z_s, rule.sigma_zs, rule.noise_scale, generator)
    scores = loss_tsym(net, z_pert, repeated.z_a, reduction='none')
    candidates = LatentBatch(
        z_s=z_pert,
        z_a=repeated.z_a,
        rewards=repeated.rewards,
        z_next=propagate_next(net, z_pert, repeated.z_a),
        dones=repeated.dones,
    )
    return candidates, scores


def augment_batch(net: TdmNetwork, batch: LatentBatch, rule: AugmentationRule,
                  generator: torch.Generator) -> LatentBatch:
    """
    Conserva sólo los candidatos con ℓ_tsym(z_s+ε, z_a) <= h

    Recompensa y done se copian de la transición de origen.
    """
    candidates, scores = score_perturbations(net, batch, rule, generator)
    return candidates.select(scores <= rule.threshold)


def preview_augmentation(model: TdmModel, dataset: TransitionDataset, rule: AugmentationRule,
                         seed: int = 0, bins: int = 20, batch_size: int = 4096) -> Dict:
    """Estadísticas de aceptación del aumento sobre todo un dataset"""
    generator = torch.Generator().manual_seed(seed)
    net = model.network
    candidate_scores = []
    kept = 0
    with torch.no_grad():
        for start in range(0, dataset.n, batch_size):
            end = min(start + batch_size, dataset.n)
            s = to_tensor(dataset.states[start:end])
            a = to_tensor(dataset.actions[start:end])
            s_next = to_tensor(dataset.next_states[start:end])
            z_s, z_a = net.encode(s, a)
            z_next, _ = net.encode(s_next, a)
            batch = LatentBatch(z_s, z_a, to_tensor(dataset.rewards[start:end]), z_next,
                                to_tensor(dataset.terminals[start:end]))
            _, scores = score_perturbations(net, batch, rule, generator)
            kept += int((scores <= rule.threshold).sum())
            candidate_scores.append(scores.cpu().numpy())

    candidate_scores = np.concatenate(candidate_scores)
    data_scores = model.tsym_scores(dataset)
    counts, edges = np.histogram(candidate_scores, bins=bins)
    return {
        'threshold': rule.threshold,
        'tau': rule.tau,
        'noise_scale': rule.noise_scale,
        'k': rule.k,
        'n_candidates': int(candidate_scores.size),
        'n_kept': kept,
        'kept_fraction': kept / candidate_scores.size,
        'data_kept_fraction': float((data_scores <= rule.threshold).mean()),
        'score_histogram': {'edges': edges.tolist(), 'counts': counts.tolist()},
    }
