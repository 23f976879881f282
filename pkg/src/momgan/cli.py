"""Command-line experiment driver.

Subcommands: ``train``, ``eval``, ``bounds``, ``ksearch`` and ``generate``.  An
experiment is a single JSON document::

    {
      "train": {"K": 4, "epochs": 300, ...},          # TrainConfig fields
      "data": {"source": "mixture"},                   # DatasetSpec fields
      "contamination": {"pi": 0.04, "noise": {...}},   # optional
      "seeds": [0, 1, 2],
      "out": "runs/demo",
      "workers": 1
    }

The output directory is taken from ``--out``, then ``$MOMGAN_OUT``, then the
config's ``"out"``.
"""

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds as bd
from .contamination import ContaminationSpec, DatasetSpec, NoiseSpec
from .network import forward, load_checkpoint, save_checkpoint
from .numerics import make_rng
from .trainer import (
    STREAM_EVAL,
    Evaluator,
    TrainConfig,
    TrainingDiverged,
    latent_batch,
    train,
)

log = logging.getLogger("momgan")

OUT_ENV = "MOMGAN_OUT"
METRIC_FIELDS = ("epoch", "mom_value", "gen_loss", "sliced_w1", "frechet")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3


class ConfigError(ValueError):
    pass


# -- configuration -------------------------------------------------------------


def _build(cls, d, what):
    if d is None:
        d = {}
    if not isinstance(d, dict):
        raise ConfigError(f"{what}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    extra = set(d) - names
    if extra:
        raise ConfigError(f"{what}: unknown keys {sorted(extra)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: {exc}") from exc


@dataclass(frozen=True)
class ExperimentConfig:
    train: TrainConfig
    data: DatasetSpec
    contamination: ContaminationSpec = None
    seeds: tuple = (0,)
    out: str = "runs"
    workers: int = 1
    raw: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_dict(cls, d):
        known = {"train", "data", "contamination", "seeds", "out", "workers"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown top-level keys {sorted(extra)}")
        poll = d.get("contamination")
        if poll is not None:
            poll = dict(poll)
            poll["noise"] = _build(NoiseSpec, poll.get("noise"), "contamination.noise")
            poll = _build(ContaminationSpec, poll, "contamination")
        seeds = tuple(int(s) for s in d.get("seeds", (0,)))
        if not seeds:
            raise ConfigError("seed list must be nonempty")
        workers = int(d.get("workers", 1))
        if workers < 1:
            raise ConfigError("workers must be >= 1")
        cfg = cls(
            train=_build(TrainConfig, d.get("train"), "train"),
            data=_build(DatasetSpec, d.get("data"), "data"),
            contamination=poll,
            seeds=seeds,
            out=str(d.get("out", "runs")),
            workers=workers,
            raw=d,
        )
        if cfg.train.K > cfg.train.batch_size:
            raise ConfigError("K exceeds batch size")
        return cfg

    def to_dict(self):
        d = {
            "train": dataclasses.asdict(self.train),
            "data": dataclasses.asdict(self.data),
            "contamination": None
            if self.contamination is None
            else dataclasses.asdict(self.contamination),
            "seeds": list(self.seeds),
            "out": self.out,
            "workers": self.workers,
        }
        d["train"]["gen_hidden"] = list(self.train.gen_hidden)
        d["train"]["disc_hidden"] = list(self.train.disc_hidden)
        return d


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: no such file") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def load_config(path):
    return ExperimentConfig.from_dict(load_json(path))


def resolve_out(cfg, cli_out=None):
    if cli_out:
        return cli_out
    return os.environ.get(OUT_ENV) or cfg.out


# -- output helpers ------------------------------------------------------------


def fmt(v):
    """Decimal with 17 significant digits, integers as-is."""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _mean_std(xs):
    xs = np.asarray(xs, dtype=np.float64)
    return {"mean": float(xs.mean()), "std": float(xs.std(ddof=1)) if xs.size > 1 else 0.0}


# -- training ------------------------------------------------------------------


def _run_one(args):
    tcfg, data, poll = args
    g, d, metrics = train(tcfg, data, poll)
    return g, d, metrics


def run_seeds(cfg, seeds, train_cfg=None, workers=None):
    """Train once per seed, in parallel when ``workers > 1``; results in seed order."""
    base = cfg.train if train_cfg is None else train_cfg
    jobs = [(replace(base, seed=s), cfg.data, cfg.contamination) for s in seeds]
    workers = cfg.workers if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            return list(ex.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def cmd_train(cfg, out):
    os.makedirs(out, exist_ok=True)
    results = run_seeds(cfg, cfg.seeds)
    finals = {"sliced_w1": [], "frechet": []}
    for seed, (g, d, metrics) in zip(cfg.seeds, results):
        recs = metrics.records
        write_csv(
            os.path.join(out, f"metrics_seed{seed}.csv"),
            METRIC_FIELDS,
            [[r[k] for k in METRIC_FIELDS] for r in recs],
        )
        write_csv(
            os.path.join(out, f"timing_seed{seed}.csv"),
            ("epoch", "seconds"),
            [[r["epoch"], r["seconds"]] for r in recs],
        )
        save_checkpoint(
            os.path.join(out, f"checkpoint_seed{seed}.json"),
            generator=g,
            discriminator=d,
            config=cfg.to_dict(),
            seed=seed,
            epsilon=metrics.epsilon,
        )
        if recs:
            finals["sliced_w1"].append(recs[-1]["sliced_w1"])
            finals["frechet"].append(recs[-1]["frechet"])
    summary = {
        "seeds": list(cfg.seeds),
        "K": cfg.train.K,
        "epochs": cfg.train.epochs,
        "pi": 0.0 if cfg.contamination is None else cfg.contamination.pi,
    }
    if finals["sliced_w1"]:
        summary["sliced_w1"] = _mean_std(finals["sliced_w1"])
        summary["frechet"] = _mean_std(finals["frechet"])
    write_json(os.path.join(out, "summary.json"), summary)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# -- K search ------------------------------------------------------------------


def ternary_search_int(score, lo, hi):
    """Minimise a unimodal ``score`` over the integers ``lo..hi``.

    Returns ``(argmin, probes)`` where ``probes`` maps each evaluated point to
    its score; ties resolve to the smaller argument.
    """
    if lo > hi:
        raise ValueError("empty interval")
    probes = {}

    def f(k):
        if k not in probes:
            probes[k] = score(k)
        return probes[k]

    while hi - lo > 2:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        f1, f2 = f(m1), f(m2)
        if f1 < f2:
            hi = m2 - 1
        elif f1 > f2:
            lo = m1 + 1
        else:
            lo, hi = m1, m2
    best = min(range(lo, hi + 1), key=lambda k: (f(k), k))
    return best, probes


def cmd_ksearch(cfg, out, k_min, k_max):
    w = cfg.train.batch_size
    if not 2 <= k_min < k_max <= w // 6:
        raise ConfigError(f"need 2 <= k_min < k_max <= floor(w/6) = {w // 6}")
    t_probe = max(1, cfg.train.epochs // 10)

    def score(k):
        tc = replace(cfg.train, K=k, epochs=t_probe, eval_every=0)
        res = run_seeds(cfg, cfg.seeds, train_cfg=tc)
        val = float(np.mean([m.records[-1]["sliced_w1"] for _, _, m in res]))
        log.info("K=%d: sliced_w1=%.6g", k, val)
        return val

    best, probes = ternary_search_int(score, k_min, k_max)
    report = {
        "K": best,
        "k_min": k_min,
        "k_max": k_max,
        "probe_epochs": t_probe,
        "seeds": list(cfg.seeds),
        "probes": {str(k): v for k, v in sorted(probes.items())},
    }
    os.makedirs(out, exist_ok=True)
    write_json(os.path.join(out, "ksearch.json"), report)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


# -- evaluation and sampling -----------------------------------------------------


def _checkpoint_experiment(path):
    nets, meta = load_checkpoint(path)
    if "generator" not in nets:
        raise ConfigError(f"{path}: checkpoint has no generator")
    if "config" not in meta:
        raise ConfigError(f"{path}: checkpoint carries no experiment config")
    cfg = ExperimentConfig.from_dict(meta["config"])
    g = nets["generator"]
    if g.spec.out_dim != cfg.data.p or g.spec.in_dim != cfg.train.generator_spec(cfg.data.p).in_dim:
        raise ConfigError(
            f"{path}: generator {g.spec.widths} does not fit data p={cfg.data.p}"
        )
    return g, cfg, meta


def evaluate_checkpoint(path, seed=None, n_eval=None):
    """Scores of a saved generator on the run's clean holdout.

    With the defaults this reproduces the final-epoch scores of the training
    record exactly.
    """
    g, cfg, meta = _checkpoint_experiment(path)
    tc = replace(cfg.train, seed=int(meta.get("seed", cfg.train.seed)))
    if seed is not None:
        tc = replace(tc, seed=seed)
    if n_eval is not None:
        tc = replace(tc, holdout_size=n_eval)
    scores = Evaluator(tc, cfg.data)(g)
    scores.update(seed=tc.seed, n_eval=tc.holdout_size)
    return scores


def cmd_eval(path, out, seed=None, n_eval=None):
    scores = evaluate_checkpoint(path, seed, n_eval)
    if out:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, "eval.json"), scores)
    print(json.dumps(scores, sort_keys=True))
    return EXIT_OK


def generate_samples(path, n, seed=0):
    g, cfg, _ = _checkpoint_experiment(path)
    tc = cfg.train
    z = latent_batch(make_rng(seed, STREAM_EVAL), n, tc.latent_dim, tc.latent_bias)
    x = forward(g, z)
    return x[:, None] if x.ndim == 1 else x


def cmd_generate(path, out, n, seed=0):
    x = generate_samples(path, n, seed)
    os.makedirs(out, exist_ok=True)
    dest = os.path.join(out, "samples.csv")
    write_csv(dest, [f"x{j}" for j in range(x.shape[1])], x.tolist())
    print(dest)
    return EXIT_OK


# -- bounds ----------------------------------------------------------------------


def bounds_reports(doc):
    """One report, or a list of reports when ``doc`` carries ``"sweep": {"n": [...]}``."""
    doc = dict(doc)
    sweep = doc.pop("sweep", None)
    try:
        base = bd.BoundInputs.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bounds inputs: {exc}") from exc
    if sweep is None:
        return bd.theorem_total_bound(base)
    out = []
    for n in sweep.get("n", []):
        kw = {"n": int(n)}
        if sweep.get("m_equals_n"):
            kw["m"] = int(n)
        rep = bd.theorem_total_bound(replace(base, **kw))
        out.append({"n": int(n), **rep.to_dict()})
    return out


def cmd_bounds(path, out=None):
    res = bounds_reports(load_json(path))
    obj = res if isinstance(res, list) else res.to_dict()
    if out:
        os.makedirs(out, exist_ok=True)
        write_json(os.path.join(out, "bounds.json"), obj)
    print(json.dumps(obj, indent=2, sort_keys=True))
    reps = obj if isinstance(obj, list) else [obj]
    if any(r["vacuous"] for r in reps):
        print("warning: probability guarantee is vacuous at these inputs", file=sys.stderr)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="momgan", description="MoM-GAN experiment driver")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one run per seed")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, action="append", help="override the seed list")
    p.add_argument("--out")

    p = sub.add_parser("ksearch", help="ternary search of the block count K")
    p.add_argument("--config", required=True)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--seed", type=int, action="append")
    p.add_argument("--out")

    p = sub.add_parser("eval", help="score a saved generator")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-eval", type=int)
    p.add_argument("--out")

    p = sub.add_parser("generate", help="write generator samples as CSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bounds", help="evaluate the error bound from a JSON of inputs")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command in ("train", "ksearch"):
            cfg = load_config(args.config)
            if args.seed:
                cfg = replace(cfg, seeds=tuple(args.seed))
            out = resolve_out(cfg, args.out)
            if args.command == "train":
                return cmd_train(cfg, out)
            return cmd_ksearch(cfg, out, args.k_min, args.k_max)
        if args.command == "eval":
            return cmd_eval(args.checkpoint, args.out, args.seed, args.n_eval)
        if args.command == "generate":
            return cmd_generate(args.checkpoint, args.out, args.n, args.seed)
        return cmd_bounds(args.config, args.out)
    except ConfigError as exc:
        print(f"momgan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDiverged as exc:
        print(f"momgan: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, ValueError) as exc:
        print(f"momgan: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
