"""
Pipeline de entrenamiento en dos etapas: TDM y luego TSRL
"""
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch
import yaml
from tqdm import tqdm

from augmentation import AugmentationRule, preview_augmentation
from data_loader import TransitionDataset, load_dataset, print_validation_report, validate_dataset
from oracle_envs import ENV_REGISTRY, BEHAVIOR_POLICIES, EvalReport, OracleEnv, collect_dataset, evaluate_policy, make_env
from preprocess import NormalizationStats, filter_by_feature, normalize_states, subsample_trajectories
from tdm_model import TdmConfig, TdmModel, train_tdm, write_scores_csv
from tsrl_agent import ReplayBuffer, TsrlAgent, TsrlConfig
from utils import (CompatibilityError, ConfigError, NumericalAbortError, append_jsonl, load_json,
                   prepare_output_dir, print_metrics, print_section, save_json, set_precision, set_seed)


METRIC_KEYS = ('step', 'critic_loss', 'policy_loss', 'alpha', 'kept_fraction',
               'eval_return_mean', 'eval_return_std', 'normalized_score')


# ==================== CONFIGURACIÓN ====================

@dataclass
class DataConfig:
    """Origen del dataset: archivo (path) o receta de entorno oráculo (env)"""
    path: Optional[str] = None
    env: Optional[str] = 'linear_reversible'
    env_params: Dict = field(default_factory=dict)
    behavior_policy: str = 'scripted-suboptimal'
    n_transitions: int = 5000
    subsample: Optional[int] = None
    filter_dim: Optional[int] = None
    filter_fraction: float = 1.0
    normalize: bool = True


@dataclass
class AugmentationConfig:
    tau: float = 0.7
    noise_scale: float = 0.01
    k: int = 1


@dataclass
class EvalConfig:
    episodes: int = 5
    seeds: List[int] = field(default_factory=lambda: [0, 1, 2])
    interval: int = 5000
    log_interval: int = 1000


def _section(cls, data: Optional[Dict], section: str):
    data = dict(data or {})
    unknown = set(data) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"claves desconocidas en {section}: {sorted(unknown)}")
    return cls(**data)


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    tdm: TdmConfig = field(default_factory=TdmConfig)
    tsrl: TsrlConfig = field(default_factory=TsrlConfig)
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    output_dir: str = "runs/desk"
    seed: int = 0
    precision: int = 32

    @classmethod
    def from_dict(cls, data: Optional[Dict]) -> 'RunConfig':
        data = dict(data or {})
        sections = {'data', 'tdm', 'tsrl', 'augmentation', 'evaluation'}
        unknown = set(data) - sections - {'output_dir', 'seed', 'precision'}
        if unknown:
            raise ConfigError(f"claves desconocidas en la configuración: {sorted(unknown)}")
        return cls(
            data=_section(DataConfig, data.get('data'), 'data'),
            tdm=TdmConfig.from_dict(data.get('tdm')),
            tsrl=TsrlConfig.from_dict(data.get('tsrl')),
            augmentation=_section(AugmentationConfig, data.get('augmentation'), 'augmentation'),
            evaluation=_section(EvalConfig, data.get('evaluation'), 'evaluation'),
            output_dir=str(data.get('output_dir', cls.output_dir)),
            seed=int(data.get('seed', cls.seed)),
            precision=int(data.get('precision', cls.precision)),
        )

    def to_dict(self) -> Dict:
        return {
            'data': asdict(self.data),
            'tdm': self.tdm.to_dict(),
            'tsrl': self.tsrl.to_dict(),
            'augmentation': asdict(self.augmentation),
            'evaluation': asdict(self.evaluation),
            'output_dir': self.output_dir,
            'seed': self.seed,
            'precision': self.precision,
        }

    def validate(self):
        """Todo se comprueba antes de cualquier entrenamiento"""
        if self.precision not in (32, 64):
            raise ConfigError(f"precision debe ser 32 o 64, no {self.precision}")
        data = self.data
        if data.path is None and data.env is None:
            raise ConfigError("data necesita 'path' o 'env'")
        if data.path is not None and not Path(data.path).exists():
            raise ConfigError(f"Dataset no encontrado: {data.path}")
        if data.env is not None and data.env not in ENV_REGISTRY:
            raise ConfigError(f"Entorno desconocido: {data.env} (opciones: {sorted(ENV_REGISTRY)})")
        if data.path is None:
            if data.behavior_policy not in BEHAVIOR_POLICIES:
                raise ConfigError(f"behavior_policy desconocida: {data.behavior_policy}")
            if data.n_transitions < 1:
                raise ConfigError("n_transitions debe ser >= 1")

        aug = self.augmentation
        if not 0 < aug.tau < 1:
            raise ConfigError(f"augmentation.tau debe estar en (0, 1), no {aug.tau}")
        if aug.k < 1 or aug.noise_scale < 0:
            raise ConfigError("augmentation.k debe ser >= 1 y noise_scale >= 0")

        ev = self.evaluation
        if ev.episodes < 1 or not ev.seeds or ev.interval < 1 or ev.log_interval < 1:
            raise ConfigError("evaluation: episodes, interval y log_interval >= 1 y al menos una semilla")

        self.tdm.validate()
        self.tsrl.validate()


def apply_overrides(data: Dict, overrides: Sequence[str]) -> Dict:
    """Aplica overrides 'seccion.clave=valor'; el valor se interpreta como YAML"""
    data = dict(data or {})
    for item in overrides:
        if '=' not in item:
            raise ConfigError(f"Override inválido (se espera clave=valor): {item}")
        key, raw = item.split('=', 1)
        value = yaml.safe_load(raw)
        parts = key.strip().split('.')
        target = data
        for part in parts[:-1]:
            target[part] = dict(target.get(part) or {})
            target = target[part]
        target[parts[-1]] = value
    return data


def load_run_config(path=None, overrides: Sequence[str] = ()) -> RunConfig:
    """Precedencia: defaults < presets < archivo YAML < overrides"""
    data = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Archivo de configuración no encontrado: {path}")
        with open(path, 'r') as f:
            data = yaml.safe_load(f) or {}
    config = RunConfig.from_dict(apply_overrides(data, overrides))
    config.validate()
    return config


def save_run_config(config: RunConfig, path):
    with open(path, 'w') as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=False)


# ==================== PIPELINE ====================

class TrainingPipeline:
    """Orquesta datos, TDM, TSRL, puntajes y evaluación"""

    def __init__(self, config: RunConfig, overwrite: bool = False, verbose: bool = True):
        self.config = config
        self.overwrite = overwrite
        self.verbose = verbose
        self.output_dir = Path(config.output_dir)
        set_precision(config.precision)

        self.raw_dataset: Optional[TransitionDataset] = None
        self.dataset: Optional[TransitionDataset] = None
        self.stats: Optional[NormalizationStats] = None
        self.env: Optional[OracleEnv] = None
        if config.data.env is not None:
            self.env = make_env(config.data.env, config.data.env_params, seed=config.seed)

    def _stage_dir(self, name: str) -> Path:
        path = prepare_output_dir(self.output_dir / name, self.overwrite)
        save_run_config(self.config, path / "config.yaml")
        return path

    def prepare_data(self) -> TransitionDataset:
        """Carga o genera el dataset, aplica sub-muestreo/filtro y normaliza"""
        data = self.config.data
        print("\n[1/4] Preparando datos...")
        if data.path is not None:
            dataset = load_dataset(data.path)
        else:
            dataset = collect_dataset(self.env, data.behavior_policy, data.n_transitions, self.config.seed)

        if data.subsample is not None:
            dataset = subsample_trajectories(dataset, data.subsample, self.config.seed)
        if data.filter_dim is not None:
            dataset = filter_by_feature(dataset, data.filter_dim, data.filter_fraction)

        validation = validate_dataset(dataset)
        if self.verbose:
            print_validation_report(validation)

        self.raw_dataset = dataset
        if data.normalize:
            self.dataset, self.stats = normalize_states(dataset)
        else:
            self.dataset, self.stats = dataset, NormalizationStats.identity(dataset.state_dim)
        return self.dataset

    def _ensure_data(self) -> TransitionDataset:
        return self.dataset if self.dataset is not None else self.prepare_data()

    # ---------- TDM ----------

    def run_tdm(self) -> Path:
        """Entrena el TDM; escribe tdm.pt, metrics.jsonl y config.yaml en <output>/tdm"""
        print_section("ETAPA 1: TDM")
        stage_dir = self._stage_dir("tdm")
        set_seed(self.config.seed)
        dataset = self._ensure_data()

        print("\n[2/4] Entrenando TDM...")
        model = train_tdm(dataset, self.config.tdm, seed=self.config.seed, stats=self.stats,
                          output_dir=stage_dir, verbose=self.verbose)

        print("\n[3/4] Guardando métricas...")
        for record in model.history:
            append_jsonl(record, stage_dir / "metrics.jsonl")

        print("\n[4/4] Guardando checkpoint...")
        checkpoint = stage_dir / "tdm.pt"
        model.save(checkpoint)
        return checkpoint

    # ---------- TSRL ----------

    def check_compatibility(self, model: TdmModel, dataset: TransitionDataset):
        key = model.compatibility_key()
        if (key['state_dim'], key['action_dim']) != (dataset.state_dim, dataset.action_dim):
            raise CompatibilityError(
                f"El TDM espera dims ({key['state_dim']}, {key['action_dim']}) y el dataset tiene "
                f"({dataset.state_dim}, {dataset.action_dim})"
            )
        expected = (self.config.tdm.latent_state_dim, self.config.tdm.latent_action_dim)
        found = (key['latent_state_dim'], key['latent_action_dim'])
        if any(e is not None and e != f for e, f in zip(expected, found)):
            raise CompatibilityError(f"Dims latentes del TDM {found} distintas de las configuradas {expected}")
        if key['stats_digest'] != self.stats.digest():
            raise CompatibilityError("Las estadísticas de normalización del TDM no coinciden con el dataset")

    def _action_bounds(self):
        if self.env is not None:
            return self.env.action_low, self.env.action_high
        dim = self.dataset.action_dim
        return -np.ones(dim), np.ones(dim)

    def act_fn(self, agent: TsrlAgent):
        """Política sobre estados crudos: normaliza con las estadísticas de entrenamiento"""
        stats = agent.tdm.stats or self.stats
        return lambda s: agent.act(stats.normalize(s))

    def evaluate_agent(self, agent: TsrlAgent, episodes: Optional[int] = None,
                       seeds: Optional[Sequence[int]] = None) -> Optional[EvalReport]:
        if self.env is None:
            return None
        ev = self.config.evaluation
        return evaluate_policy(self.env, self.act_fn(agent),
                               episodes=episodes or ev.episodes, seeds=seeds or ev.seeds)

    def run_tsrl(self, tdm_checkpoint) -> Path:
        """
        Algoritmo completo: puntajes y umbral h sobre el dataset, bucle de
        entrenamiento con evaluación periódica, métricas JSONL y EvalReport final
        """
        print_section("ETAPA 2: TSRL")
        tdm_checkpoint = Path(tdm_checkpoint)
        if not tdm_checkpoint.exists():
            raise FileNotFoundError(f"Checkpoint TDM no encontrado: {tdm_checkpoint}")
        stage_dir = self._stage_dir("tsrl")
        set_seed(self.config.seed)
        dataset = self._ensure_data()

        tdm = TdmModel.load(tdm_checkpoint)
        self.check_compatibility(tdm, dataset)
        tsrl_config = self.config.tsrl
        aug = self.config.augmentation

        print("\n[2/4] Calculando umbral de aumento...")
        rule = None
        if not tsrl_config.no_A:
            scores = tdm.tsym_scores(dataset)
            rule = AugmentationRule.fit(tdm, dataset, aug.tau, aug.noise_scale, aug.k, scores=scores)
            save_json(rule.to_dict(), stage_dir / "augmentation_rule.json")
        print(f"  α = α₀ / mean|Q| (α₀={tsrl_config.alpha0}, normalize_q={tsrl_config.normalize_q}); "
              f"umbral = cuantil lineal tau={aug.tau}")

        print("\n[3/4] Entrenando agente TSRL...")
        low, high = self._action_bounds()
        agent = TsrlAgent(tdm, tsrl_config, low, high, seed=self.config.seed)
        buffer = ReplayBuffer(dataset)
        rng = np.random.default_rng(self.config.seed)
        ev = self.config.evaluation
        metrics_path = stage_dir / "metrics.jsonl"

        latest = {}
        bar = tqdm(range(1, tsrl_config.iterations + 1), desc="TSRL", disable=not self.verbose)
        for step in bar:
            try:
                metrics = agent.train_step(buffer.sample(tsrl_config.batch_size, rng), rule)
            except NumericalAbortError as e:
                path = stage_dir / "tsrl_diagnostic.pt"
                torch.save(agent.checkpoint_dict(), path)
                raise NumericalAbortError(str(e), checkpoint_path=str(path)) from e
            latest.update({k: v for k, v in metrics.items() if v is not None})

            evaluate_now = step % ev.interval == 0
            if step % ev.log_interval == 0 or evaluate_now:
                record = {key: latest.get(key) for key in METRIC_KEYS}
                record['step'] = step
                record['eval_return_mean'] = record['eval_return_std'] = record['normalized_score'] = None
                if evaluate_now:
                    report = self.evaluate_agent(agent)
                    if report is not None:
                        record['eval_return_mean'] = report.mean_return
                        record['eval_return_std'] = report.std_return
                        record['normalized_score'] = report.normalized_score
                append_jsonl(record, metrics_path)
                if self.verbose:
                    tqdm.write(f"  Paso {step}/{tsrl_config.iterations}")
                    print_metrics(record, METRIC_KEYS[1:])

        print("\n[4/4] Evaluación final y checkpoint...")
        report = self.evaluate_agent(agent)
        if report is not None:
            save_json(report.to_dict(), stage_dir / "eval_report.json")
            print(f"✓ Retorno medio {report.mean_return:.3f} ± {report.std_return:.3f} "
                  f"(puntaje normalizado {report.normalized_score:.1f})")
        checkpoint = stage_dir / "tsrl.pt"
        agent.save(checkpoint)
        return checkpoint

    # ---------- herramientas ----------

    def score(self, tdm_checkpoint, output_dir) -> Dict:
        """CSV de puntajes por muestra + resumen JSON con cuantiles 50% y 70%"""
        output_dir = prepare_output_dir(output_dir, self.overwrite)
        dataset = self._ensure_data()
        tdm = TdmModel.load(tdm_checkpoint)
        self.check_compatibility(tdm, dataset)

        scores = tdm.tsym_scores(dataset)
        write_scores_csv(scores, output_dir / "scores.csv")
        summary = {
            'n': int(scores.size),
            'mean': float(scores.mean()),
            'std': float(scores.std()),
            'min': float(scores.min()),
            'max': float(scores.max()),
            'quantiles': {str(q): float(np.quantile(scores, q, method='linear')) for q in (0.5, 0.7)},
        }
        save_json(summary, output_dir / "summary.json")
        print(f"✓ Resumen guardado en {output_dir / 'summary.json'}")
        return summary

    def augment_preview(self, tdm_checkpoint, output=None) -> Dict:
        dataset = self._ensure_data()
        tdm = TdmModel.load(tdm_checkpoint)
        self.check_compatibility(tdm, dataset)
        aug = self.config.augmentation
        rule = AugmentationRule.fit(tdm, dataset, aug.tau, aug.noise_scale, aug.k)
        preview = preview_augmentation(tdm, dataset, rule, seed=self.config.seed)
        print(f"  Candidatos conservados: {preview['n_kept']}/{preview['n_candidates']} "
              f"({preview['kept_fraction']:.1%})")
        if output is not None:
            save_json(preview, output)
            print(f"✓ Vista previa guardada en {output}")
        return preview

    def evaluate(self, agent_checkpoint, episodes: Optional[int] = None,
                 seeds: Optional[Sequence[int]] = None) -> EvalReport:
        if self.env is None:
            raise ConfigError("evaluate requiere un entorno oráculo (data.env)")
        agent = TsrlAgent.load(agent_checkpoint)
        report = self.evaluate_agent(agent, episodes, seeds)
        print(f"✓ Retorno medio {report.mean_return:.3f} ± {report.std_return:.3f} "
              f"(puntaje normalizado {report.normalized_score:.1f})")
        stored = Path(agent_checkpoint).parent / "eval_report.json"
        if stored.exists():
            previous = load_json(stored)
            print(f"  Al terminar el entrenamiento: {previous['mean_return']:.3f} "
                  f"(puntaje normalizado {previous['normalized_score']:.1f})")
        return report

    def run_full_pipeline(self) -> Path:
        tdm_checkpoint = self.run_tdm()
        checkpoint = self.run_tsrl(tdm_checkpoint)
        print("\n" + "=" * 70)
        print("PIPELINE COMPLETADO EXITOSAMENTE")
        print("=" * 70)
        return checkpoint


if __name__ == "__main__":
    pipeline = TrainingPipeline(load_run_config("configs/config.yaml"))
    pipeline.run_full_pipeline()
