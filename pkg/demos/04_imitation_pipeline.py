"""
A small imitation pipeline, end to end
======================================

Collect expert play, fit the decomposed graph policy and the cloning
baseline, then evaluate everything on fresh seeds. Scaled down from the
full 274-episode experiment so it finishes in about a minute.
"""

from dinersim.bc import BcHyper, RandomPolicy, bc_train
from dinersim.config import default_config
from dinersim.data import record_episodes
from dinersim.dpgm import DpgmHyper, dpgm_train
from dinersim.env import Env
from dinersim.evaluate import compare, evaluate
from dinersim.expert import ExpertPolicy

config = default_config()
expert = ExpertPolicy(config)

print("collecting 40 expert episodes (seeds 0..39)...")
dataset = record_episodes(lambda s: Env(config, s), expert, 40, seed_base=0)
print(f"  {dataset.header.pairs} state/action pairs")

print("training the decomposed graph policy...")
dpgm_policy, info = dpgm_train(dataset, hyper=DpgmHyper(finetune_epochs=4))
print(f"  {len(info['zero_positive'])} actions never demonstrated")
print(f"  arbitration loss {info['phase2_losses'][0]:.3f} -> "
      f"{info['phase2_losses'][-1]:.3f}, "
      f"fine-tune -> {info['phase3_losses'][-1]:.3f}")

print("training the cloning baseline...")
bc_policy, bc_info = bc_train(dataset, hyper=BcHyper(epochs=10))
print(f"  train accuracy {bc_info['train_accuracy']:.3f}")

print("evaluating on seeds 10000..10019...")
reports = [evaluate(p, 20, 10000, config)
           for p in (expert, dpgm_policy, bc_policy, RandomPolicy(0))]

text, _, _ = compare(reports)
print()
print(text)

ratio = reports[1].mean / reports[0].mean
print(f"the graph policy keeps {ratio:.0%} of the expert's score from a "
      f"fraction of the data the full experiment uses")
