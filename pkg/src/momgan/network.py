"""Bias-free feed-forward ReLU networks.

A network with widths ``D_0, ..., D_{L+1}`` computes
``W_L relu(... W_1 relu(W_0 x))`` with ``W_l`` of shape ``D_{l+1} x D_l``.
There are no bias vectors, so without a squash the map is positively
homogeneous in ``x``.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import make_rng, spectral_norm

DEFAULT_INIT_STD = 0.02


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class MlpSpec:
    widths: tuple
    squash: str = "none"  # "none" | "sigmoid"
    act_lipschitz: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 3:
            raise ValueError("need at least one hidden layer (L >= 1)")
        if min(self.widths) < 1:
            raise ValueError("all widths must be >= 1")
        if self.squash not in ("none", "sigmoid"):
            raise ValueError(f"unknown squash {self.squash!r}")

    @property
    def depth(self):
        """Number of hidden layers L."""
        return len(self.widths) - 2

    @property
    def width(self):
        """Maximum hidden width N."""
        return max(self.widths[1:-1])

    @property
    def in_dim(self):
        return self.widths[0]

    @property
    def out_dim(self):
        return self.widths[-1]

    @property
    def size(self):
        return sum(a * b for a, b in zip(self.widths[:-1], self.widths[1:]))

    def shapes(self):
        return [(self.widths[l + 1], self.widths[l]) for l in range(len(self.widths) - 1)]


@dataclass
class MlpParams:
    spec: MlpSpec
    weights: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        shapes = self.spec.shapes()
        if len(self.weights) != len(shapes):
            raise ShapeError(f"expected {len(shapes)} layers, got {len(self.weights)}")
        for l, (w, shp) in enumerate(zip(self.weights, shapes)):
            if w.shape != shp:
                raise ShapeError(f"layer {l}: expected {shp}, got {w.shape}")

    def copy(self):
        return MlpParams(self.spec, [w.copy() for w in self.weights], dict(self.provenance))

    def map(self, fn):
        return MlpParams(self.spec, [fn(w) for w in self.weights], dict(self.provenance))


def init_gaussian(spec, std=DEFAULT_INIT_STD, rng=None, seed=None):
    if not std > 0:
        raise ValueError("std must be positive")
    if rng is None:
        rng = make_rng(0 if seed is None else seed)
    weights = [std * rng.standard_normal(shp) for shp in spec.shapes()]
    prov = {"init": "gaussian", "std": std}
    if seed is not None:
        prov["seed"] = seed
    return MlpParams(spec, weights, prov)


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def _as_batch(params, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xs = x[None, :] if single else x
    if xs.ndim != 2 or xs.shape[1] != params.spec.in_dim:
        raise ShapeError(f"input has shape {x.shape}, network expects dimension {params.spec.in_dim}")
    return xs, single


def _forward_cache(params, xs):
    # pre-activations of each hidden layer and the final linear output
    acts = [xs]
    pre = []
    h = xs
    last = len(params.weights) - 1
    for l, w in enumerate(params.weights):
        z = h @ w.T
        if l < last:
            pre.append(z)
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            out = z
    if params.spec.squash == "sigmoid":
        out = _sigmoid(out)
    return acts, pre, out


def forward(params, x):
    """Evaluate the network on one point or a batch of rows.

    Scalar-output networks return a float (single point) or a 1-D array
    (batch); vector-output networks return a vector or a 2-D array.
    """
    xs, single = _as_batch(params, x)
    _, _, out = _forward_cache(params, xs)
    if params.spec.out_dim == 1:
        out = out[:, 0]
        return float(out[0]) if single else out
    return out[0] if single else out


def vjp(params, xs, cotangent):
    """Pull an output cotangent back through the network.

    ``cotangent`` has shape ``(n,)`` for scalar networks or ``(n, D_out)``.
    Returns ``(param_grads, input_grads)`` where ``param_grads[l]`` is
    ``sum_i d<cot_i, f(x_i)>/dW_l`` and ``input_grads`` has the shape of ``xs``.
    The ReLU derivative at 0 is taken as 0.
    """
    xs, _ = _as_batch(params, xs)
    acts, pre, out = _forward_cache(params, xs)
    g = np.asarray(cotangent, dtype=np.float64).reshape(out.shape)
    if params.spec.squash == "sigmoid":
        g = g * out * (1.0 - out)
    grads = [None] * len(params.weights)
    for l in range(len(params.weights) - 1, -1, -1):
        grads[l] = g.T @ acts[l]
        g = g @ params.weights[l]
        if l > 0:
            g = g * (pre[l - 1] > 0.0)
    return grads, g


def backward(params, xs, signs):
    """Gradient of ``sum_i signs[i] * forward(params, xs[i])`` w.r.t. the weights."""
    xs, _ = _as_batch(params, xs)
    signs = np.asarray(signs, dtype=np.float64)
    if signs.shape[0] != xs.shape[0]:
        raise ShapeError("one sign per sample required")
    grads, _ = vjp(params, xs, signs)
    return grads


def f_norm(params):
    return math.sqrt(sum(float(np.sum(w * w)) for w in params.weights))


def max_spectral_norm(params, rng=None, iters=200):
    if rng is None:
        rng = make_rng(0)
    return max(spectral_norm(w, iters=iters, rng=rng) for w in params.weights)


def param_lipschitz(x, theta, gamma, a=None):
    """Pointwise Lipschitz constant in parameter space.

    ``|f(x; theta) - f(x; gamma)| <= c(x) ||theta - gamma||_F`` with
    ``c(x) = 2 a^L sqrt(L) ||x|| max_l prod_{j != l} max(s(W_j), s(V_j))``
    where ``s`` is the exact largest singular value.
    """
    spec = theta.spec
    if a is None:
        a = spec.act_lipschitz
    L = spec.depth
    s = [
        max(np.linalg.norm(w, 2), np.linalg.norm(v, 2))
        for w, v in zip(theta.weights, gamma.weights)
    ]
    best = max(math.prod(s[:l] + s[l + 1 :]) for l in range(len(s)))
    return 2.0 * a**L * math.sqrt(L) * float(np.linalg.norm(x)) * best


# -- checkpoints -----------------------------------------------------------


def params_to_dict(params):
    return {
        "spec": {
            "widths": list(params.spec.widths),
            "squash": params.spec.squash,
            "act_lipschitz": float(params.spec.act_lipschitz).hex(),
        },
        "weights": [[float(v).hex() for v in w.ravel()] for w in params.weights],
        "provenance": params.provenance,
    }


def params_from_dict(d):
    sd = d["spec"]
    a = sd.get("act_lipschitz", 1.0)
    spec = MlpSpec(
        widths=tuple(sd["widths"]),
        squash=sd.get("squash", "none"),
        act_lipschitz=float.fromhex(a) if isinstance(a, str) else float(a),
    )
    weights = []
    for shp, flat in zip(spec.shapes(), d["weights"]):
        vals = [float.fromhex(v) if isinstance(v, str) else float(v) for v in flat]
        if len(vals) != shp[0] * shp[1]:
            raise ShapeError(f"layer has {len(vals)} entries, spec needs {shp}")
        weights.append(np.array(vals, dtype=np.float64).reshape(shp))
    return MlpParams(spec, weights, dict(d.get("provenance", {})))


def save_checkpoint(path, **nets):
    """Write named networks (e.g. ``generator=..., discriminator=...``) as JSON.

    Extra non-network keyword values are stored under ``"meta"``.
    """
    doc = {"format": "momgan-checkpoint-v1", "networks": {}, "meta": {}}
    for name, value in nets.items():
        if isinstance(value, MlpParams):
            doc["networks"][name] = params_to_dict(value)
        else:
            doc["meta"][name] = value
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)


def load_checkpoint(path):
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "momgan-checkpoint-v1":
        raise ValueError(f"{path}: not a momgan checkpoint")
    nets = {k: params_from_dict(v) for k, v in doc["networks"].items()}
    return nets, doc.get("meta", {})
