"""
Utilidades compartidas del sistema TDM + TSRL
"""
import hashlib
import json
import random
import shutil
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np
import torch


# ==================== ERRORES ====================

class TsrlError(Exception):
    """Error base del proyecto"""


class ConfigError(TsrlError, ValueError):
    """Configuración inválida o incompleta"""


class DatasetFormatError(TsrlError, ValueError):
    """El contenedor del dataset no tiene el formato esperado"""


class DatasetValidationError(TsrlError, ValueError):
    """El dataset viola alguna invariante (filas, flags, resultado vacío)"""


class CompatibilityError(TsrlError, RuntimeError):
    """Checkpoint TDM incompatible con el dataset o el agente"""


class NumericalAbortError(TsrlError, RuntimeError):
    """Pérdida no finita durante el entrenamiento"""

    def __init__(self, message: str, checkpoint_path: Optional[str] = None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


class MetricsParseError(TsrlError, ValueError):
    """Archivo JSONL de métricas mal formado"""

    def __init__(self, path: str, line_number: int, detail: str):
        super().__init__(f"{path}:{line_number}: JSON inválido ({detail})")
        self.path = path
        self.line_number = line_number


# ==================== SEMILLAS Y PRECISIÓN ====================

def set_seed(seed: int):
    """Fija todas las semillas antes de cualquier operación estocástica"""
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def set_precision(precision: int) -> torch.dtype:
    """Configura el dtype por defecto de torch (32 o 64 bits)"""
    if precision not in (32, 64):
        raise ConfigError(f"precision debe ser 32 o 64, no {precision}")
    dtype = torch.float64 if precision == 64 else torch.float32
    torch.set_default_dtype(dtype)
    return dtype


def to_tensor(x, dtype: Optional[torch.dtype] = None) -> torch.Tensor:
    """Convierte arrays de numpy a tensores con el dtype por defecto"""
    dtype = dtype or torch.get_default_dtype()
    if isinstance(x, torch.Tensor):
        return x.to(dtype)
    return torch.as_tensor(np.asarray(x), dtype=dtype)


def parameter_digest(module: torch.nn.Module) -> str:
    """Hash SHA-256 de todos los parámetros de un módulo"""
    h = hashlib.sha256()
    for name, tensor in sorted(module.state_dict().items()):
        h.update(name.encode())
        h.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


# ==================== ARCHIVOS ====================

def prepare_output_dir(path, overwrite: bool = False) -> Path:
    """
    Crea el directorio de salida.

    Sin overwrite, un directorio existente y no vacío nunca se sobrescribe.
    """
    path = Path(path)
    if path.exists() and any(path.iterdir()):
        if not overwrite:
            raise ConfigError(
                f"El directorio {path} ya existe y no está vacío (usa --overwrite)"
            )
        shutil.rmtree(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def guard_output_file(path, overwrite: bool = False) -> Path:
    """Un archivo de salida existente sólo se reemplaza con overwrite"""
    path = Path(path)
    if path.exists() and not overwrite:
        raise ConfigError(f"{path} ya existe (usa --overwrite)")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"No serializable: {type(obj)}")


def save_json(data: Dict, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_json_default)


def load_json(path) -> Dict:
    with open(path, 'r') as f:
        return json.load(f)


def append_jsonl(record: Dict, path):
    """Agrega un registro a un archivo JSONL (append-only)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'a') as f:
        f.write(json.dumps(record, sort_keys=True, default=_json_default) + "\n")


def read_jsonl(path) -> List[Dict]:
    """Lee un JSONL; una línea mal formada reporta su número de línea"""
    records = []
    with open(path, 'r') as f:
        for line_number, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise MetricsParseError(str(path), line_number, e.msg) from e
    return records


def print_section(title: str):
    """Imprime sección decorada"""
    print(f"\n{'='*70}")
    print(f"{title}")
    print(f"{'='*70}")


def print_metrics(metrics: Dict, keys: Iterable[str]):
    parts = []
    for key in keys:
        value = metrics.get(key)
        if value is None:
            continue
        parts.append(f"{key}={value:.4f}" if isinstance(value, float) else f"{key}={value}")
    print("  " + " | ".join(parts))
