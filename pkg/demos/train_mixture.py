"""MoM-GAN against a weight-clipped WGAN on a polluted 8-Gaussian ring.

Half of the training batches get 4% of their points replaced by Gaussian
noise centred far outside the unit square.  Both models use the same seeds,
data and pollution draws; only the number of blocks K differs.  The final
sliced-W1 distance to a clean holdout is printed for each run.

Takes under half a minute on one core.
"""

import numpy as np

from momgan.contamination import ContaminationSpec, DatasetSpec, NoiseSpec
from momgan.trainer import TrainConfig, train

data = DatasetSpec("mixture")
noise = NoiseSpec(mean=5.0, std=1.0)
base = dict(lr=2e-3, clip=0.1, latent_dim=2, epochs=300)
seeds = range(5)

scores = {}
for pi in (0.0, 0.04):
    pollution = ContaminationSpec(pi=pi, noise=noise)
    for K in (1, 4):
        runs = []
        for seed in seeds:
            _, _, metrics = train(TrainConfig(K=K, seed=seed, **base), data, pollution)
            runs.append(metrics.records[-1]["sliced_w1"])
        scores[pi, K] = np.array(runs)
        label = "WGAN  " if K == 1 else f"MoM K={K}"
        print(f"pi={pi:.2f} {label}: sliced-W1 {np.round(runs, 4)}  mean {np.mean(runs):.4f}")

for K in (1, 4):
    change = scores[0.04, K].mean() / scores[0.0, K].mean() - 1
    print(f"K={K}: clean -> polluted change {change:+.0%}")
wins = int(np.sum(scores[0.04, 4] <= scores[0.04, 1]))
print(f"MoM at least as good as WGAN under pollution in {wins}/{len(seeds)} seeds")
