import hashlib
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from data_loader import TransitionDataset, split_trajectories
from utils import DatasetValidationError


STD_FLOOR = 1e-3


@dataclass(frozen=True, eq=False)
class NormalizationStats:
    """Media y desviación estándar (con piso) de los estados de entrenamiento"""
    mean: np.ndarray
    std: np.ndarray

    def normalize(self, x):
        return (x - self.mean) / self.std

    def denormalize(self, x):
        return x * self.std + self.mean

    def apply(self, dataset: TransitionDataset) -> TransitionDataset:
        """Normaliza states y next_states con las MISMAS estadísticas"""
        return dataset.replace(
            states=self.normalize(dataset.states),
            next_states=self.normalize(dataset.next_states),
        )

    def digest(self) -> str:
        """Hash usado para verificar compatibilidad de checkpoints"""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.mean, dtype=np.float64).tobytes())
        h.update(np.ascontiguousarray(self.std, dtype=np.float64).tobytes())
        return h.hexdigest()

    def to_dict(self) -> Dict:
        return {'mean': np.asarray(self.mean).tolist(), 'std': np.asarray(self.std).tolist()}

    @classmethod
    def from_dict(cls, data: Dict) -> 'NormalizationStats':
        return cls(mean=np.asarray(data['mean'], dtype=np.float64),
                   std=np.asarray(data['std'], dtype=np.float64))

    @classmethod
    def identity(cls, dim: int) -> 'NormalizationStats':
        return cls(mean=np.zeros(dim), std=np.ones(dim))


def normalize_states(dataset: TransitionDataset,
                     std_floor: float = STD_FLOOR) -> Tuple[TransitionDataset, NormalizationStats]:
    """
    Normaliza estados con estadísticas calculadas sólo sobre `states`

    Returns:
        (dataset normalizado, NormalizationStats)
    """
    if dataset.n < 2:
        raise ValueError(f"normalize_states requiere N >= 2 (N={dataset.n})")

    mean = dataset.states.mean(axis=0)
    std = np.maximum(dataset.states.std(axis=0), std_floor)
    floored = int((dataset.states.std(axis=0) < std_floor).sum())
    if floored:
        print(f"  ⚠ {floored} dimensiones con std bajo el piso {std_floor}")

    stats = NormalizationStats(mean=mean, std=std)
    return stats.apply(dataset), stats


def subsample_trajectories(dataset: TransitionDataset, target_transitions: int,
                           seed: int) -> TransitionDataset:
    """
    Sub-muestrea trayectorias completas (no transiciones sueltas)

    Se sacan trayectorias uniformemente sin reemplazo hasta que la longitud
    acumulada alcanza o supera target_transitions; todas se conservan enteras.
    """
    if target_transitions < 1 or target_transitions > dataset.n:
        raise ValueError(
            f"target_transitions debe estar en [1, {dataset.n}], no {target_transitions}"
        )

    trajectories = split_trajectories(dataset)
    order = np.random.default_rng(seed).permutation(len(trajectories))

    chosen = []
    total = 0
    for idx in order:
        chosen.append(trajectories[idx])
        total += len(trajectories[idx])
        if total >= target_transitions:
            break

    indices = np.concatenate([t.indices() for t in chosen])
    subset = dataset.select(indices, name=f"{dataset.name}-sub{target_transitions}")

    # El final del dataset original no es terminal ni timeout; al moverlo al
    # medio hay que marcarlo para no unir dos trayectorias
    timeouts = np.zeros(subset.n, dtype=bool) if subset.timeouts is None else subset.timeouts.copy()
    ends = np.cumsum([len(t) for t in chosen]) - 1
    timeouts[ends] |= ~subset.terminals[ends]
    subset = subset.replace(timeouts=timeouts)

    print(f"✓ Sub-muestreo: {len(chosen)} trayectorias, {subset.n} transiciones "
          f"(objetivo {target_transitions})")
    return subset


def filter_by_feature(dataset: TransitionDataset, dim: int,
                      fraction: float) -> TransitionDataset:
    """
    Conserva las transiciones con states[i][dim] <= fraction * max_j states[j][dim]

    Una muestra interior eliminada parte su trayectoria en dos.
    """
    if not 0 <= dim < dataset.state_dim:
        raise ValueError(f"dim debe estar en [0, {dataset.state_dim}), no {dim}")
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction debe estar en (0, 1], no {fraction}")

    values = dataset.states[:, dim]
    limit = fraction * values.max()
    kept = np.flatnonzero(values <= limit)
    if len(kept) == 0:
        raise DatasetValidationError(
            f"El filtro no deja ninguna muestra (dim={dim}, fraction={fraction}, "
            f"límite={limit:.4f}, rango=[{values.min():.4f}, {values.max():.4f}])"
        )

    subset = dataset.select(kept, name=f"{dataset.name}-filt{dim}")
    timeouts = np.zeros(subset.n, dtype=bool) if subset.timeouts is None else subset.timeouts.copy()
    successor_removed = np.append(np.diff(kept) != 1, kept[-1] != dataset.n - 1)
    timeouts |= successor_removed & ~subset.terminals
    subset = subset.replace(timeouts=timeouts)

    print(f"✓ Filtro dim={dim} fraction={fraction}: {subset.n}/{dataset.n} transiciones conservadas")
    return subset


def state_derivative(s, s_next):
    """Derivada de estado por diferencias finitas: s' - s"""
    if not hasattr(s, 'shape'):
        s = np.asarray(s, dtype=np.float64)
    if not hasattr(s_next, 'shape'):
        s_next = np.asarray(s_next, dtype=np.float64)
    if s.shape != s_next.shape:
        raise ValueError(f"Dimensiones distintas: {tuple(s.shape)} vs {tuple(s_next.shape)}")
    return s_next - s
