"""Median-of-means GANs with a from-scratch numpy MLP.

Submodules: ``numerics`` (RNG streams, symmetric eigensolver, PSD square
root), ``network`` (bias-free ReLU MLPs with reverse-mode gradients), ``mom``
(median-of-means), ``contamination`` (inlier sources and outlier protocols),
``trainer`` (the MoM-GAN loop), ``evaluation`` (sliced-W1 and Frechet
distances), ``bounds`` (error-bound calculators) and ``cli``.
"""

from .evaluation import fit_gaussian, frechet_distance, sliced_w1, w1_exact_1d
from .mom import median_of_means, mom, partition
from .network import MlpParams, MlpSpec, backward, forward, init_gaussian
from .numerics import make_rng
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "MlpParams",
    "MlpSpec",
    "TrainConfig",
    "backward",
    "fit_gaussian",
    "forward",
    "frechet_distance",
    "init_gaussian",
    "make_rng",
    "median_of_means",
    "mom",
    "partition",
    "sliced_w1",
    "train",
    "w1_exact_1d",
]
