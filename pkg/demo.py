import numpy as np
import torch

from augmentation import AugmentationRule, preview_augmentation
from oracle_envs import analytic_tsym_residual, collect_dataset, evaluate_policy, make_env
from preprocess import normalize_states
from tdm_model import TdmConfig, train_tdm
from tsrl_agent import ReplayBuffer, TsrlAgent, TsrlConfig
from utils import print_section, set_seed


def main():
    set_seed(0)
    torch.set_default_dtype(torch.float32)

    print("=" * 70)
    print("TDM + TSRL - DEMO DE ESCRITORIO")
    print("=" * 70)

    # 1. Datos
    print("\n[1] Recolectando dataset en linear_reversible...")
    env = make_env('linear_reversible')
    dataset = collect_dataset(env, 'scripted-suboptimal', 2000, seed=0)
    residuals = [analytic_tsym_residual(env, s, a) for s, a in zip(dataset.states[:100], dataset.actions[:100])]
    print(f"[OK] Residuo analítico máximo de simetría: {max(residuals):.2e}")

    # 2. Normalización
    print("\n[2] Normalizando estados...")
    normalized, stats = normalize_states(dataset)
    print(f"[OK] Media {np.round(stats.mean, 3)}, std {np.round(stats.std, 3)}")

    # 3. TDM
    print("\n[3] Entrenando TDM (versión corta)...")
    config = TdmConfig(encoder_hidden=(64, 64), dynamics_hidden=64, dynamics_layers=3,
                       training_epochs=60, pretrain_epochs=10, log_interval=20)
    tdm = train_tdm(normalized, config, seed=0, stats=stats)

    # 4. Puntajes OOD
    print("\n[4] Puntajes de simetría temporal...")
    scores = tdm.tsym_scores(normalized)
    rng = np.random.default_rng(0)
    shuffled = normalized.replace(actions=normalized.actions[rng.permutation(normalized.n)])
    ood_scores = tdm.tsym_scores(shuffled)
    print(f"[OK] Media real {scores.mean():.4g} vs acciones barajadas {ood_scores.mean():.4g}")

    # 5. Aumento de datos
    print("\n[5] Regla de aumento...")
    rule = AugmentationRule.fit(tdm, normalized, tau=0.7, scores=scores)
    preview = preview_augmentation(tdm, normalized, rule, seed=0)
    print(f"[OK] Fracción conservada: {preview['kept_fraction']:.1%}")

    # 6. TSRL
    print_section("[6] Entrenando TSRL (2000 pasos)")
    agent = TsrlAgent(tdm, TsrlConfig.from_dict({'regime': 'desk', 'hidden_width': 128}),
                      env.action_low, env.action_high, seed=0)
    buffer = ReplayBuffer(normalized)
    for step in range(1, 2001):
        metrics = agent.train_step(buffer.sample(256, rng), rule)
        if step % 500 == 0:
            print(f"  Paso {step} - critic_loss: {metrics['critic_loss']:.4f} | "
                  f"kept: {metrics['kept_fraction']:.2f}")

    # 7. Evaluación
    print("\n[7] Evaluando política...")
    report = evaluate_policy(env, lambda s: agent.act(stats.normalize(s)), episodes=5, seeds=[0, 1, 2])
    print(f"[OK] Retorno {report.mean_return:.2f} ± {report.std_return:.2f} "
          f"| puntaje normalizado {report.normalized_score:.1f}")

    print("\n" + "=" * 70)
    print("DEMO COMPLETADA")
    print("=" * 70)


if __name__ == "__main__":
    main()
