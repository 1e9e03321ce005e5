"""
Interfaz de línea de comandos

Códigos de salida: 0 éxito, 1 error de validación, 2 aborto numérico.
"""
import argparse
import sys
from pathlib import Path

from data_loader import load_dataset, save_dataset
from plotting import plot_learning_curves
from preprocess import filter_by_feature, subsample_trajectories
from train import TrainingPipeline, load_run_config
from utils import NumericalAbortError, TsrlError, guard_output_file, prepare_output_dir, save_json


def _add_config_args(parser):
    parser.add_argument('--config', type=str, default=None, help='Archivo YAML de configuración')
    parser.add_argument('--set', dest='overrides', action='append', default=[],
                        metavar='SECCION.CLAVE=VALOR', help='Override de configuración (repetible)')
    parser.add_argument('--overwrite', action='store_true', help='Sobrescribe salidas existentes')


def _pipeline(args) -> TrainingPipeline:
    config = load_run_config(args.config, args.overrides)
    return TrainingPipeline(config, overwrite=args.overwrite)


def cmd_train_tdm(args):
    checkpoint = _pipeline(args).run_tdm()
    print(f"Checkpoint TDM: {checkpoint}")


def cmd_train_tsrl(args):
    pipeline = _pipeline(args)
    tdm_checkpoint = args.tdm_checkpoint or pipeline.output_dir / "tdm" / "tdm.pt"
    checkpoint = pipeline.run_tsrl(tdm_checkpoint)
    print(f"Checkpoint TSRL: {checkpoint}")


def cmd_score(args):
    pipeline = _pipeline(args)
    output = args.output or pipeline.output_dir / "scores"
    pipeline.score(args.tdm_checkpoint, output)


def cmd_subsample(args):
    dataset = load_dataset(args.dataset)
    subset = subsample_trajectories(dataset, args.target, args.seed)
    _write_dataset(subset, args.output, args.overwrite)


def cmd_filter(args):
    dataset = load_dataset(args.dataset)
    subset = filter_by_feature(dataset, args.dim, args.fraction)
    _write_dataset(subset, args.output, args.overwrite)


def _write_dataset(dataset, output, overwrite: bool):
    output = Path(output)
    if output.suffix in ('.hdf5', '.h5'):
        guard_output_file(output, overwrite)
    else:
        prepare_output_dir(output, overwrite)
    save_dataset(dataset, output)


def cmd_augment_preview(args):
    if args.output:
        guard_output_file(args.output, args.overwrite)
    _pipeline(args).augment_preview(args.tdm_checkpoint, args.output)


def cmd_evaluate(args):
    if args.output:
        guard_output_file(args.output, args.overwrite)
    pipeline = _pipeline(args)
    report = pipeline.evaluate(args.checkpoint, args.episodes, args.seeds)
    if args.output:
        save_json(report.to_dict(), args.output)


def cmd_plot(args):
    guard_output_file(args.output, args.overwrite)
    plot_learning_curves(args.metrics, args.output, metric=args.metric)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='tsrl', description='TDM + TSRL para RL offline')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('train-tdm', help='Entrena el modelo de dinámica TDM')
    _add_config_args(p)
    p.set_defaults(func=cmd_train_tdm)

    p = sub.add_parser('train-tsrl', help='Entrena el agente TSRL sobre un TDM')
    _add_config_args(p)
    p.add_argument('--tdm-checkpoint', type=str, default=None,
                   help='Checkpoint TDM (por defecto <output_dir>/tdm/tdm.pt)')
    p.set_defaults(func=cmd_train_tsrl)

    p = sub.add_parser('score', help='Puntajes ℓ_tsym por muestra')
    _add_config_args(p)
    p.add_argument('--tdm-checkpoint', type=str, required=True)
    p.add_argument('--output', type=str, default=None, help='Directorio de salida')
    p.set_defaults(func=cmd_score)

    p = sub.add_parser('subsample', help='Sub-muestreo por trayectorias')
    p.add_argument('--dataset', type=str, required=True)
    p.add_argument('--target', type=int, required=True, help='Transiciones objetivo')
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--output', type=str, required=True)
    p.add_argument('--overwrite', action='store_true')
    p.set_defaults(func=cmd_subsample)

    p = sub.add_parser('filter', help='Filtro por una dimensión del estado')
    p.add_argument('--dataset', type=str, required=True)
    p.add_argument('--dim', type=int, required=True)
    p.add_argument('--fraction', type=float, required=True)
    p.add_argument('--output', type=str, required=True)
    p.add_argument('--overwrite', action='store_true')
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser('augment-preview', help='Estadísticas de aceptación del aumento')
    _add_config_args(p)
    p.add_argument('--tdm-checkpoint', type=str, required=True)
    p.add_argument('--output', type=str, default=None, help='Archivo JSON')
    p.set_defaults(func=cmd_augment_preview)

    p = sub.add_parser('evaluate', help='Evalúa un agente TSRL en su entorno oráculo')
    _add_config_args(p)
    p.add_argument('--checkpoint', type=str, required=True)
    p.add_argument('--episodes', type=int, default=None)
    p.add_argument('--seeds', type=int, nargs='+', default=None)
    p.add_argument('--output', type=str, default=None, help='Archivo JSON del EvalReport')
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser('plot', help='Curvas de aprendizaje con bandas min/max')
    p.add_argument('metrics', nargs='*', help='Archivos metrics.jsonl (uno por semilla)')
    p.add_argument('--output', type=str, default='learning_curve.png')
    p.add_argument('--metric', type=str, default='normalized_score')
    p.add_argument('--overwrite', action='store_true', help='Sobrescribe la imagen existente')
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except NumericalAbortError as e:
        print(f"[ERROR] Aborto numérico: {e}", file=sys.stderr)
        if e.checkpoint_path:
            print(f"  Checkpoint de diagnóstico: {e.checkpoint_path}", file=sys.stderr)
        return 2
    except (TsrlError, ValueError, FileNotFoundError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
