"""
Curvas de aprendizaje a partir de archivos metrics.jsonl
"""
from pathlib import Path
from typing import Dict, Sequence, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

from utils import read_jsonl


def load_curves(metric_files: Sequence, metric: str = 'normalized_score') -> pd.DataFrame:
    """Tabla larga (run, step, value); descarta registros sin la métrica"""
    rows = []
    for run, path in enumerate(metric_files):
        for record in read_jsonl(path):
            value = record.get(metric)
            if value is not None:
                rows.append({'run': run, 'step': record['step'], 'value': float(value)})
    return pd.DataFrame(rows, columns=['run', 'step', 'value'])


def curve_band(curves: pd.DataFrame) -> pd.DataFrame:
    """Media y banda min/max punto a punto entre semillas"""
    return curves.groupby('step')['value'].agg(['mean', 'min', 'max']).reset_index()


def plot_learning_curves(metric_files: Union[Sequence, Dict[str, Sequence]], output,
                         metric: str = 'normalized_score') -> Path:
    """
    Dibuja una curva por grupo con banda min/max entre semillas

    Args:
        metric_files: lista de archivos (un grupo) o {etiqueta: lista de archivos}
        output: ruta de la imagen
        metric: clave del registro JSONL a dibujar
    """
    groups = metric_files if isinstance(metric_files, dict) else {metric: list(metric_files)}
    if not groups or any(len(files) == 0 for files in groups.values()):
        raise ValueError("plot_learning_curves requiere al menos un archivo de métricas")

    sns.set_style('whitegrid')
    fig, ax = plt.subplots(figsize=(8, 4))
    for label, files in groups.items():
        band = curve_band(load_curves(files, metric))
        if band.empty:
            print(f"  ⚠ Sin valores de '{metric}' para {label}")
            continue
        ax.plot(band['step'], band['mean'], label=f"{label} (n={len(files)})")
        ax.fill_between(band['step'], band['min'], band['max'], alpha=0.2)

    ax.set_xlabel('Paso')
    ax.set_ylabel(metric)
    ax.legend()
    fig.tight_layout()

    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, dpi=150)
    plt.close(fig)
    print(f"✓ Curva de aprendizaje guardada en {output}")
    return output
