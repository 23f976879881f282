"""MoM-GAN training loop.

Each epoch runs ``d_steps`` discriminator updates followed by one generator
update.  A discriminator update partitions the real batch into ``K`` blocks,
finds the median block of the discriminator scores and ascends

    (K / w) * sum_{i in B_med} d(x_i)  -  (1 / w) * sum_j d(g(z_j))

with RMSProp, then clips every weight to ``[-clip, clip]``.  With ``K = 1`` the
median block is the whole batch and this is the weight-clipped WGAN update.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import contamination as ct
from .evaluation import fit_gaussian, frechet_distance, random_directions, sliced_w1
from .mom import mom, partition
from .network import MlpSpec, backward, forward, init_gaussian, vjp
from .numerics import make_rng

log = logging.getLogger(__name__)

# stream ids of the per-run random streams
STREAM_INIT_D = 0
STREAM_INIT_G = 1
STREAM_DATA = 2
STREAM_POLLUTION = 3
STREAM_LATENT = 4
STREAM_PARTITION = 5
STREAM_EVAL = 6


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    K: int = 4
    clip: float = 0.01
    d_steps: int = 5
    batch_size: int = 64
    epochs: int = 100
    latent_dim: int = 1
    # append a constant 1 to every latent draw; the bias-free generator
    # otherwise maps z -> g(z) positively homogeneously, i.e. onto a cone
    latent_bias: bool = True
    gen_hidden: tuple = (32, 32)
    disc_hidden: tuple = (32, 32)
    gen_squash: str = "sigmoid"
    init_std: float = 0.02
    rho: float = 0.9
    rms_eps: float = 1e-8
    seed: int = 0
    eval_every: int = 0  # 0: evaluate after the last epoch only
    holdout_size: int = 1000
    n_proj: int = 128

    def __post_init__(self):
        object.__setattr__(self, "gen_hidden", tuple(self.gen_hidden))
        object.__setattr__(self, "disc_hidden", tuple(self.disc_hidden))
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not self.clip > 0:
            raise ValueError("clip must be positive")
        if not 1 <= self.K <= self.batch_size:
            raise ValueError("need 1 <= K <= batch_size")
        if self.d_steps < 1:
            raise ValueError("d_steps must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")

    def generator_spec(self, p):
        k = self.latent_dim + (1 if self.latent_bias else 0)
        return MlpSpec((k, *self.gen_hidden, p), squash=self.gen_squash)

    def discriminator_spec(self, p):
        return MlpSpec((p, *self.disc_hidden, 1))


@dataclass
class RmspropState:
    v: list
    rho: float = 0.9
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params, rho=0.9, eps=1e-8):
        return cls([np.zeros_like(w) for w in params.weights], rho, eps)


@dataclass
class TrainMetrics:
    records: list = field(default_factory=list)
    outliers_injected: int = 0
    samples_seen: int = 0

    @property
    def epsilon(self):
        """Observed outlier fraction over every real sample drawn."""
        return self.outliers_injected / self.samples_seen if self.samples_seen else 0.0


def rmsprop_update(theta, grad, state, alpha):
    if len(grad) != len(theta.weights):
        raise ValueError("gradient and parameters have different layer counts")
    new_w, new_v = [], []
    for w, g, v in zip(theta.weights, grad, state.v):
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} does not match weights {w.shape}")
        v = state.rho * v + (1.0 - state.rho) * (g * g)
        new_v.append(v)
        new_w.append(w - alpha * g / (np.sqrt(v) + state.eps))
    theta = type(theta)(theta.spec, new_w, dict(theta.provenance))
    return theta, RmspropState(new_v, state.rho, state.eps)


def clip_params(theta, c):
    if not c > 0:
        raise ValueError("c must be positive")
    return theta.map(lambda w: np.clip(w, -c, c))


def latent_batch(rng, w, k, bias=True):
    z = rng.standard_normal((w, k))
    if bias:
        z = np.hstack([z, np.ones((w, 1))])
    return z


@dataclass
class StepDiagnostics:
    mom_value: float
    fake_mean: float
    median_block: int
    median_indices: np.ndarray

    @property
    def objective(self):
        return self.mom_value - self.fake_mean


def discriminator_gradient(d, batch, fakes, K, part):
    """Median-block gradient ``G`` and the diagnostics of the MoM objective."""
    w = batch.shape[0]
    scores = forward(d, batch)
    if not np.all(np.isfinite(scores)):
        raise TrainingDiverged(f"{int(np.sum(~np.isfinite(scores)))} non-finite discriminator scores")
    value, med = mom(scores, part)
    signs = np.zeros(w)
    signs[part.blocks[med]] = K / w
    fake_signs = np.full(fakes.shape[0], -1.0 / fakes.shape[0])
    grad = backward(d, np.vstack([batch, fakes]), np.concatenate([signs, fake_signs]))
    diag = StepDiagnostics(value, float(np.mean(forward(d, fakes))), med, part.blocks[med].copy())
    return grad, diag


def discriminator_step(d, d_state, g, batch, z, K, rng, alpha, clip, part=None):
    """One ascent step on the MoM objective followed by weight clipping.

    The partition is drawn from ``rng`` unless ``part`` is given; the median
    block is held fixed while differentiating.
    """
    batch = np.asarray(batch, dtype=np.float64)
    if part is None:
        part = partition(batch.shape[0], K, rng)
    fakes = forward(g, z)
    if fakes.ndim == 1:
        fakes = fakes[:, None]
    grad, diag = discriminator_gradient(d, batch, fakes, K, part)
    d, d_state = rmsprop_update(d, [-gl for gl in grad], d_state, alpha)
    return clip_params(d, clip), d_state, diag


def generator_gradient(g, d, z):
    """Gradient of ``-(1/w) sum_j d(g(z_j))`` with respect to the generator weights."""
    fakes = forward(g, z)
    if fakes.ndim == 1:
        fakes = fakes[:, None]
    w = z.shape[0]
    _, dx = vjp(d, fakes, np.full(w, 1.0 / w))
    grads, _ = vjp(g, z, dx.reshape(fakes.shape))
    loss = -float(np.mean(forward(d, fakes)))
    return [-gl for gl in grads], loss


def generator_step(g, g_state, d, z, alpha):
    grad, loss = generator_gradient(g, d, z)
    g, g_state = rmsprop_update(g, grad, g_state, alpha)
    return g, g_state, loss


def _pollute(batch, pollution, part, rng):
    if pollution is None:
        return batch, 0
    if pollution.mode == "per-batch":
        out, idx = ct.inject_batch(batch, pollution, rng)
        return out, idx.size
    if rng.random() >= pollution.batch_prob:
        return batch, 0
    if pollution.block_count is not None:
        part = partition(batch.shape[0], pollution.block_count, rng)
    out, idx = ct.pollute_blocks(batch, part, pollution.block_fraction, pollution.noise, rng)
    return out, idx.size


class Evaluator:
    """Fixed clean holdout, fixed latent draws and fixed projections for a run."""

    def __init__(self, cfg, data):
        rng = make_rng(cfg.seed, STREAM_EVAL)
        self.holdout = ct.sample_inliers(data, cfg.holdout_size, rng)
        self.z = latent_batch(rng, cfg.holdout_size, cfg.latent_dim, cfg.latent_bias)
        self.directions = random_directions(data.p, cfg.n_proj, rng)

    def __call__(self, g):
        fake = forward(g, self.z)
        if fake.ndim == 1:
            fake = fake[:, None]
        return {
            "sliced_w1": sliced_w1(fake, self.holdout, directions=self.directions),
            "frechet": frechet_distance(fit_gaussian(fake), fit_gaussian(self.holdout)),
        }


def init_networks(cfg, p):
    d = init_gaussian(cfg.discriminator_spec(p), cfg.init_std, make_rng(cfg.seed, STREAM_INIT_D))
    g = init_gaussian(cfg.generator_spec(p), cfg.init_std, make_rng(cfg.seed, STREAM_INIT_G))
    d.provenance.update(seed=cfg.seed, stream=STREAM_INIT_D)
    g.provenance.update(seed=cfg.seed, stream=STREAM_INIT_G)
    return g, d


def train(cfg, data, pollution=None, on_epoch=None, evaluate=True):
    """Run MoM-GAN training and return ``(generator, discriminator, metrics)``.

    ``on_epoch(record, g, d)`` is called after every epoch.  All randomness
    is drawn from independent streams of ``cfg.seed``, so runs that differ
    only in ``K`` see identical data, pollution and latent draws.
    """
    g, d = init_networks(cfg, data.p)
    metrics = TrainMetrics()
    if cfg.epochs == 0:
        return g, d, metrics
    d_state = RmspropState.zeros_like(d, cfg.rho, cfg.rms_eps)
    g_state = RmspropState.zeros_like(g, cfg.rho, cfg.rms_eps)
    rng_data = make_rng(cfg.seed, STREAM_DATA)
    rng_poll = make_rng(cfg.seed, STREAM_POLLUTION)
    rng_z = make_rng(cfg.seed, STREAM_LATENT)
    rng_part = make_rng(cfg.seed, STREAM_PARTITION)
    evaluator = Evaluator(cfg, data) if evaluate else None
    w = cfg.batch_size
    t0 = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        for _ in range(cfg.d_steps):
            batch = ct.sample_inliers(data, w, rng_data)
            part = partition(w, cfg.K, rng_part)
            batch, n_out = _pollute(batch, pollution, part, rng_poll)
            metrics.outliers_injected += n_out
            metrics.samples_seen += w
            z = latent_batch(rng_z, w, cfg.latent_dim, cfg.latent_bias)
            d, d_state, diag = discriminator_step(
                d, d_state, g, batch, z, cfg.K, None, cfg.lr, cfg.clip, part=part
            )
        z = latent_batch(rng_z, w, cfg.latent_dim, cfg.latent_bias)
        g, g_state, gen_loss = generator_step(g, g_state, d, z, cfg.lr)
        if not (math.isfinite(diag.mom_value) and math.isfinite(gen_loss)):
            raise TrainingDiverged(
                f"non-finite loss at epoch {epoch}: mom={diag.mom_value}, gen={gen_loss}"
            )
        rec = {"epoch": epoch, "mom_value": diag.mom_value, "gen_loss": gen_loss}
        due = epoch == cfg.epochs or (cfg.eval_every and epoch % cfg.eval_every == 0)
        if evaluator is not None:
            scores = evaluator(g) if due else {"sliced_w1": math.nan, "frechet": math.nan}
            rec.update(scores)
        rec["seconds"] = time.perf_counter() - t0
        metrics.records.append(rec)
        if on_epoch is not None:
            on_epoch(rec, g, d)
    log.debug("trained %d epochs in %.2fs", cfg.epochs, time.perf_counter() - t0)
    return g, d, metrics
