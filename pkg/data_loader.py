import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import h5py
import numpy as np

from utils import DatasetFormatError, DatasetValidationError


REQUIRED_KEYS = ['observations', 'actions', 'rewards', 'terminals']
OPTIONAL_KEYS = ['timeouts', 'next_observations']
MANIFEST_NAME = "manifest.json"


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Trajectory:
    """Segmento [start, end) de un TransitionDataset"""
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start

    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.end)


@dataclass(frozen=True, eq=False)
class TransitionDataset:
    """
    Almacén columnar e inmutable de transiciones (s, a, r, s', done)

    Las filas de una misma trayectoria son contiguas; una trayectoria se
    cierra en un terminal, en un timeout o al final del dataset.
    """
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminals: np.ndarray
    timeouts: Optional[np.ndarray] = None
    name: str = "dataset"

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        actions = np.asarray(self.actions, dtype=np.float64)
        next_states = np.asarray(self.next_states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
            next_states = next_states.reshape(-1, 1)
        if actions.ndim == 1:
            actions = actions[:, None]

        columns = {
            'states': states,
            'actions': actions,
            'rewards': np.asarray(self.rewards, dtype=np.float64).reshape(-1),
            'next_states': next_states,
            'terminals': np.asarray(self.terminals).astype(bool).reshape(-1),
        }
        if self.timeouts is not None:
            columns['timeouts'] = np.asarray(self.timeouts).astype(bool).reshape(-1)

        counts = {key: len(value) for key, value in columns.items()}
        if len(set(counts.values())) != 1:
            raise DatasetValidationError(f"Número de filas inconsistente: {counts}")
        n = counts['states']
        if n < 1:
            raise DatasetValidationError("El dataset está vacío (N debe ser >= 1)")
        if states.shape[1] != next_states.shape[1]:
            raise DatasetValidationError(
                f"states tiene dim {states.shape[1]} pero next_states tiene {next_states.shape[1]}"
            )
        if 'timeouts' in columns:
            both = np.flatnonzero(columns['terminals'] & columns['timeouts'])
            if len(both) > 0:
                raise DatasetValidationError(
                    f"terminals y timeouts activos a la vez en {len(both)} índices "
                    f"(ej. {both[:5].tolist()})"
                )

        for key, value in columns.items():
            object.__setattr__(self, key, _frozen(value))

    @property
    def n(self) -> int:
        return len(self.rewards)

    def __len__(self) -> int:
        return self.n

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def action_dim(self) -> int:
        return self.actions.shape[1]

    @property
    def episode_ends(self) -> np.ndarray:
        """Máscara de filas que cierran trayectoria (terminal o timeout)"""
        ends = self.terminals.copy()
        if self.timeouts is not None:
            ends |= self.timeouts
        return ends

    def select(self, indices, name: Optional[str] = None) -> 'TransitionDataset':
        """Sub-dataset con las filas indicadas (en ese orden)"""
        indices = np.asarray(indices, dtype=int)
        return TransitionDataset(
            states=self.states[indices],
            actions=self.actions[indices],
            rewards=self.rewards[indices],
            next_states=self.next_states[indices],
            terminals=self.terminals[indices],
            timeouts=None if self.timeouts is None else self.timeouts[indices],
            name=name or self.name,
        )

    def replace(self, **changes) -> 'TransitionDataset':
        fields = {
            'states': self.states, 'actions': self.actions, 'rewards': self.rewards,
            'next_states': self.next_states, 'terminals': self.terminals,
            'timeouts': self.timeouts, 'name': self.name,
        }
        fields.update(changes)
        return TransitionDataset(**fields)

    def to_arrays(self) -> Dict[str, np.ndarray]:
        """Columnas con los nombres del formato estándar de benchmarks"""
        arrays = {
            'observations': np.asarray(self.states),
            'actions': np.asarray(self.actions),
            'rewards': np.asarray(self.rewards),
            'next_observations': np.asarray(self.next_states),
            'terminals': np.asarray(self.terminals),
        }
        if self.timeouts is not None:
            arrays['timeouts'] = np.asarray(self.timeouts)
        return arrays


# ==================== TRAYECTORIAS ====================

def split_trajectories(dataset: TransitionDataset) -> List[Trajectory]:
    """
    Divide el dataset en trayectorias según terminals y timeouts

    Un segmento se cierra después de cualquier índice con terminal o
    timeout, o al llegar a N. Los segmentos particionan [0, N).
    """
    ends = np.flatnonzero(dataset.episode_ends) + 1
    if len(ends) == 0 or ends[-1] != dataset.n:
        ends = np.append(ends, dataset.n)

    trajectories = []
    start = 0
    for end in ends:
        trajectories.append(Trajectory(int(start), int(end)))
        start = end
    return trajectories


def derive_next_observations(arrays: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """
    Deriva next_observations desplazando observations dentro de cada trayectoria

    - fila terminal: s' = s (no hay bootstrap)
    - fila que cierra trayectoria sin terminal (timeout o fin): no tiene
      sucesor y se descarta; su predecesora hereda el cierre
    """
    observations = np.asarray(arrays['observations'])
    terminals = np.asarray(arrays['terminals']).astype(bool)
    timeouts = arrays.get('timeouts')
    timeouts = np.zeros_like(terminals) if timeouts is None else np.asarray(timeouts).astype(bool)
    n = len(observations)

    next_observations = np.empty_like(observations)
    next_observations[:-1] = observations[1:]
    next_observations[-1] = observations[-1]
    next_observations[terminals] = observations[terminals]

    open_end = (timeouts & ~terminals)
    open_end[-1] = open_end[-1] or not terminals[-1]
    keep = ~open_end

    new_timeouts = timeouts.copy()
    for i in np.flatnonzero(open_end):
        if i > 0 and keep[i - 1] and not terminals[i - 1]:
            new_timeouts[i - 1] = True
    new_timeouts &= ~terminals

    derived = {key: np.asarray(value)[keep] for key, value in arrays.items()
               if key not in ('timeouts', 'next_observations')}
    derived['next_observations'] = next_observations[keep]
    derived['timeouts'] = new_timeouts[keep]
    if keep.sum() < n:
        print(f"  ⚠ {n - keep.sum()} filas sin sucesor descartadas al derivar next_observations")
    return derived


# ==================== LECTURA / ESCRITURA ====================

def _read_hdf5(path: Path) -> Dict[str, np.ndarray]:
    arrays = {}
    with h5py.File(path, 'r') as f:
        for key in REQUIRED_KEYS + OPTIONAL_KEYS:
            if key in f:
                arrays[key] = f[key][()]
    return arrays


def _read_columnar(path: Path) -> Dict[str, np.ndarray]:
    with open(path / MANIFEST_NAME, 'r') as f:
        manifest = json.load(f)
    arrays = {}
    for key, filename in manifest.get('files', {}).items():
        arrays[key] = np.load(path / filename, allow_pickle=False)
    return arrays


def load_dataset(path, name: Optional[str] = None) -> TransitionDataset:
    """
    Carga un dataset offline desde HDF5 o desde un directorio columnar

    Returns:
        TransitionDataset validado
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No se encuentra: {path}")

    if path.is_dir():
        if not (path / MANIFEST_NAME).exists():
            raise DatasetFormatError(f"{path} no contiene {MANIFEST_NAME}")
        arrays = _read_columnar(path)
    elif path.suffix in ('.hdf5', '.h5'):
        arrays = _read_hdf5(path)
    else:
        raise DatasetFormatError(f"Formato no soportado: {path.suffix}")

    missing = [key for key in REQUIRED_KEYS if key not in arrays]
    if missing:
        raise DatasetFormatError(f"{path.name} falta claves: {missing}")

    counts = {key: len(value) for key, value in arrays.items()}
    if len(set(counts.values())) != 1:
        raise DatasetValidationError(f"Número de filas inconsistente en {path.name}: {counts}")

    if 'next_observations' not in arrays:
        arrays = derive_next_observations(arrays)

    dataset = TransitionDataset(
        states=arrays['observations'],
        actions=arrays['actions'],
        rewards=arrays['rewards'],
        next_states=arrays['next_observations'],
        terminals=arrays['terminals'],
        timeouts=arrays.get('timeouts'),
        name=name or path.stem,
    )
    print(f"✓ {path.name} cargado: {dataset.n} transiciones "
          f"(d_s={dataset.state_dim}, d_a={dataset.action_dim})")
    return dataset


def save_dataset(dataset: TransitionDataset, path) -> Path:
    """Guarda en HDF5 (.hdf5/.h5) o en directorio columnar (cualquier otro path)"""
    path = Path(path)
    arrays = dataset.to_arrays()
    if path.suffix in ('.hdf5', '.h5'):
        path.parent.mkdir(parents=True, exist_ok=True)
        with h5py.File(path, 'w') as f:
            for key, value in arrays.items():
                f.create_dataset(key, data=value)
            f.attrs['name'] = dataset.name
    else:
        path.mkdir(parents=True, exist_ok=True)
        files = {}
        for key, value in arrays.items():
            filename = f"{key}.npy"
            np.save(path / filename, value, allow_pickle=False)
            files[key] = filename
        with open(path / MANIFEST_NAME, 'w') as f:
            json.dump({'name': dataset.name, 'n': dataset.n, 'files': files}, f, indent=2)
    print(f"✓ Dataset guardado en {path}")
    return path


# ==================== VALIDACIÓN ====================

def validate_dataset(dataset: TransitionDataset, atol: float = 1e-6) -> Dict:
    """
    Valida la consistencia interna de un dataset sin abortar

    Returns:
        Dict con issues, warnings y estadísticas
    """
    issues = []
    warnings = []

    for key in ('states', 'actions', 'rewards', 'next_states'):
        values = getattr(dataset, key)
        if not np.all(np.isfinite(values)):
            issues.append(f"{key} contiene valores no finitos")

    # Continuidad interior: next_states[i] == states[i+1]
    interior = ~dataset.episode_ends[:-1]
    gaps = np.abs(dataset.next_states[:-1] - dataset.states[1:]).max(axis=1) > atol
    broken = np.flatnonzero(interior & gaps)
    if len(broken) > 0:
        warnings.append(f"{len(broken)} transiciones interiores discontinuas")
        if len(broken) <= 10:
            warnings.append(f"  Ejemplos: {broken.tolist()}")

    trajectories = split_trajectories(dataset)
    lengths = [len(t) for t in trajectories]
    stats = {
        'num_transitions': dataset.n,
        'num_trajectories': len(trajectories),
        'avg_trajectory_length': float(np.mean(lengths)),
        'num_terminals': int(dataset.terminals.sum()),
        'num_timeouts': 0 if dataset.timeouts is None else int(dataset.timeouts.sum()),
        'avg_reward': float(dataset.rewards.mean()),
    }
    return {
        'valid': len(issues) == 0,
        'issues': issues,
        'warnings': warnings,
        'stats': stats,
    }


def print_validation_report(validation: Dict):
    """Imprime reporte de validación"""
    print("\n" + "="*70)
    print("REPORTE DE VALIDACIÓN DEL DATASET")
    print("="*70)

    if validation['valid']:
        print("✓ Validación exitosa - No se encontraron errores críticos")
    else:
        print("✗ Validación fallida - Se encontraron errores:")
        for issue in validation['issues']:
            print(f"  ✗ {issue}")

    if validation['warnings']:
        print("\n⚠ Advertencias:")
        for warning in validation['warnings']:
            print(f"  ⚠ {warning}")

    stats = validation['stats']
    print("\n📊 Estadísticas:")
    print(f"  • Transiciones: {stats['num_transitions']}")
    print(f"  • Trayectorias: {stats['num_trajectories']}")
    print(f"  • Longitud media: {stats['avg_trajectory_length']:.1f}")
    print(f"  • Terminales / timeouts: {stats['num_terminals']} / {stats['num_timeouts']}")
    print(f"  • Recompensa media: {stats['avg_reward']:.4f}")
    print("="*70 + "\n")
