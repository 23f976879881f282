"""Inlier sources, outlier injection protocols and IDX ingestion."""

import math
import os
import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MIXTURE_RADIUS = 0.35
MIXTURE_STD = 0.02
MIXTURE_COMPONENTS = 8
RING_RADII = (0.3, 0.45)


class IdxFormatError(ValueError):
    pass


# -- IDX files -------------------------------------------------------------


def _read_idx(path, magic):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: file too short for an IDX header")
    (got,) = struct.unpack(">I", raw[:4])
    if got != magic:
        raise IdxFormatError(f"{path}: bad magic 0x{got:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise IdxFormatError(f"{path}: truncated header")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    count = math.prod(dims)
    if len(raw) - header < count:
        raise IdxFormatError(f"{path}: truncated payload ({len(raw) - header} of {count} bytes)")
    if len(raw) - header > count:
        raise IdxFormatError(f"{path}: {len(raw) - header - count} trailing bytes")
    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header)
    return dims, data.reshape(dims)


def load_idx(path):
    """Parse an IDX image file into ``(count, rows, cols, pixels)``.

    Pixels come back as ``float64`` in ``[0, 1]`` with shape
    ``(count, rows, cols)``.
    """
    (count, rows, cols), data = _read_idx(path, IDX_IMAGES_MAGIC)
    return count, rows, cols, data.astype(np.float64) / 255.0


def load_idx_labels(path):
    (_,), data = _read_idx(path, IDX_LABELS_MAGIC)
    return data.astype(np.int64)


def write_idx(path, images=None, labels=None):
    """Write uint8 images ``(count, rows, cols)`` or labels ``(count,)`` as IDX."""
    if (images is None) == (labels is None):
        raise ValueError("pass exactly one of images or labels")
    if images is not None:
        arr = np.asarray(images, dtype=np.uint8)
        head = struct.pack(">IIII", IDX_IMAGES_MAGIC, *arr.shape)
    else:
        arr = np.asarray(labels, dtype=np.uint8)
        head = struct.pack(">II", IDX_LABELS_MAGIC, arr.shape[0])
    with open(path, "wb") as fh:
        fh.write(head + arr.tobytes())


@lru_cache(maxsize=8)
def _cached_images(path, mtime):
    _, rows, cols, px = load_idx(path)
    flat = px.reshape(px.shape[0], rows * cols)
    flat.setflags(write=False)
    return flat


def _images_flat(path):
    return _cached_images(os.path.abspath(path), os.path.getmtime(path))


# -- inliers ---------------------------------------------------------------


@dataclass(frozen=True)
class DatasetSpec:
    source: str = "mixture"  # "mixture" | "ring" | "idx"
    p: int = 2
    path: str = None
    unit_cube: bool = True

    def __post_init__(self):
        if self.source not in ("mixture", "ring", "idx"):
            raise ValueError(f"unknown source {self.source!r}")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.source in ("mixture", "ring") and self.p != 2:
            raise ValueError(f"{self.source} source is two-dimensional")
        if self.source == "idx" and not self.path:
            raise ValueError("idx source needs a path")


def mixture_centers():
    ang = 2.0 * np.pi * np.arange(MIXTURE_COMPONENTS) / MIXTURE_COMPONENTS
    return 0.5 + MIXTURE_RADIUS * np.stack([np.cos(ang), np.sin(ang)], axis=1)


def sample_inliers(spec, n, rng):
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.source == "mixture":
        comp = rng.integers(0, MIXTURE_COMPONENTS, size=n)
        pts = mixture_centers()[comp] + MIXTURE_STD * rng.standard_normal((n, 2))
    elif spec.source == "ring":
        r0, r1 = RING_RADII
        rad = np.sqrt(r0 * r0 + (r1 * r1 - r0 * r0) * rng.random(n))
        ang = 2.0 * np.pi * rng.random(n)
        pts = 0.5 + rad[:, None] * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        imgs = _images_flat(spec.path)
        if imgs.shape[1] != spec.p:
            raise ValueError(f"{spec.path}: images have {imgs.shape[1]} pixels, spec says p={spec.p}")
        pts = imgs[rng.integers(0, imgs.shape[0], size=n)].copy()
    if spec.unit_cube:
        # mixture tails leave the cube only ~7 sigma out; the clamp makes it exact
        np.clip(pts, 0.0, 1.0, out=pts)
    return pts


# -- noise -----------------------------------------------------------------


def pareto_from_uniform(u, scale=1.0, shape=2.0):
    """Inverse CDF of the Pareto(scale, shape) law."""
    return scale * np.power(u, -1.0 / shape)


def sample_pareto(scale, shape, rng, size=None):
    if not (scale > 0 and shape > 0):
        raise ValueError("scale and shape must be positive")
    u = 1.0 - rng.random(size)  # uniform on (0, 1]
    out = pareto_from_uniform(u, scale, shape)
    return float(out) if size is None else out


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"  # "gaussian" | "pareto" | "real"
    mean: float = 0.5
    std: float = 1.0
    scale: float = 1.0
    shape: float = 2.0
    images_path: str = None
    labels_path: str = None
    label: int = 3

    def __post_init__(self):
        if self.kind not in ("gaussian", "pareto", "real"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "real" and not (self.images_path and self.labels_path):
            raise ValueError("real-class noise needs images_path and labels_path")

    def draw(self, count, p, rng):
        if self.kind == "gaussian":
            return self.mean + self.std * rng.standard_normal((count, p))
        if self.kind == "pareto":
            return sample_pareto(self.scale, self.shape, rng, size=(count, p))
        imgs = _images_flat(self.images_path)
        labels = load_idx_labels(self.labels_path)
        pool = np.flatnonzero(labels == self.label)
        if pool.size == 0:
            raise ValueError(f"no images with label {self.label}")
        if imgs.shape[1] != p:
            raise ValueError(f"noise images have {imgs.shape[1]} pixels, data has {p}")
        return imgs[pool[rng.integers(0, pool.size, size=count)]].copy()


@dataclass(frozen=True)
class ContaminationSpec:
    mode: str = "per-batch"  # "per-batch" | "per-block"
    batch_prob: float = 0.5
    pi: float = 0.0
    noise: NoiseSpec = NoiseSpec()
    block_fraction: float = 0.0
    # per-block mode: None reuses the discriminator's partition of each batch
    block_count: int = None

    def __post_init__(self):
        if self.mode not in ("per-batch", "per-block"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not 0.0 <= self.pi < 0.5:
            raise ValueError("outlier fraction pi must lie in [0, 0.5)")
        for name in ("batch_prob", "block_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


def n_replaced(pi, w):
    """``round(pi * w)`` with halves rounded up."""
    return int(math.floor(pi * w + 0.5))


def inject_batch(batch, spec, rng):
    """Per-batch pollution: with probability ``batch_prob`` replace ``round(pi*w)`` rows.

    Returns ``(polluted_copy, outlier_indices)``.
    """
    batch = np.asarray(batch, dtype=np.float64)
    w, p = batch.shape
    k = n_replaced(spec.pi, w)
    if k > w:
        raise ValueError(f"round(pi*w) = {k} exceeds batch size {w}")
    out = batch.copy()
    hit = rng.random() < spec.batch_prob
    if not hit or k == 0:
        return out, np.zeros(0, dtype=np.int64)
    idx = np.sort(rng.choice(w, size=k, replace=False))
    out[idx] = spec.noise.draw(k, p, rng)
    return out, idx


def pollute_blocks(data, part, fraction, noise, rng):
    """Replace every sample in ``floor(fraction*K)`` random blocks by noise.

    Returns ``(polluted_copy, outlier_indices)``.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    data = np.asarray(data, dtype=np.float64)
    out = data.copy()
    nb = int(math.floor(fraction * part.K + 1e-12))  # absorb 0.29*100 = 28.999...
    if nb == 0:
        return out, np.zeros(0, dtype=np.int64)
    chosen = rng.choice(part.K, size=nb, replace=False)
    idx = np.sort(part.blocks[chosen].ravel())
    out[idx] = noise.draw(idx.size, data.shape[1], rng)
    return out, idx
