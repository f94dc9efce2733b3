"""Command-line front end: model generation, sampling, learning, benchmarks.

Every subcommand is a pure function of its inputs and the master seed, so
reruns are byte-identical.  Config resolution: defaults < JSON config file
< command-line flags.  Exit codes: 0 success, 2 configuration or input
error, 3 algorithm failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time

import numpy as np

from ._rng import stream
from .descent import DescentConfig, learn_with_noise, learn_without_noise
from .hyperplanes import learn_hyperplanes
from .lowerbound import build_mlr_pair, moment_match_sigmas, moment_table
from .minvar import estimate_min_variance
from .model import (HyperplaneModel, HyperplaneSampler, MlrModel, MlrSampler,
                    ZeroMeanGmm, sample_hyperplanes, sample_mlr, score_recovery)

__all__ = ["main", "RunConfig"]

_DEFAULTS = {
    "seed": 0,
    "threads": 0,          # 0 = leave the BLAS pool alone
    "epsilon": 0.05,
    "delta": 0.1,
    "sigma_upper": 4.0,
    "sigma_lower": 0.01,
    "degree": 8,
    "p_min": 0.25,
}


@dataclasses.dataclass
class RunConfig:
    """Merged subcommand configuration; unknown config keys are rejected."""

    seed: int = 0
    threads: int = 0
    epsilon: float = 0.05
    delta: float = 0.1
    sigma_upper: float = 4.0
    sigma_lower: float = 0.01
    degree: int = 8
    p_min: float = 0.25

    @classmethod
    def resolve(cls, args) -> "RunConfig":
        merged = dict(_DEFAULTS)
        if getattr(args, "config", None):
            with open(args.config) as fh:
                loaded = json.load(fh)
            unknown = set(loaded) - set(merged)
            if unknown:
                raise ValueError("unknown config keys: %s" % sorted(unknown))
            merged.update(loaded)
        for key in merged:
            v = getattr(args, key, None)
            if v is not None:
                merged[key] = v
        if "FMD_SEED" in os.environ:
            merged["seed"] = int(os.environ["FMD_SEED"])
        cfg = cls(**merged)
        if cfg.seed < 0 or cfg.threads < 0:
            raise ValueError("seed and threads must be nonnegative")
        return cfg


def _load_model(path):
    with open(path) as fh:
        obj = json.load(fh)
    kind = obj.get("kind")
    vectors = np.asarray(obj["vectors"], dtype=float).reshape(obj["k"], obj["d"])
    if kind == "mlr":
        return MlrModel(np.asarray(obj["weights"], dtype=float), vectors,
                        noise_rate=float(obj.get("noise_rate", 0.0)),
                        norm_bound=float(np.max(np.linalg.norm(vectors, axis=1))))
    if kind == "hyperplanes":
        return HyperplaneModel(np.asarray(obj["weights"], dtype=float), vectors)
    raise ValueError("unknown model kind %r" % kind)


def _save_model(model, path):
    kind = "hyperplanes" if isinstance(model, HyperplaneModel) else "mlr"
    vecs = model.directions if kind == "hyperplanes" else model.regressors
    obj = {
        "kind": kind,
        "k": model.k,
        "d": model.d,
        "weights": model.weights.tolist(),
        "vectors": vecs.tolist(),
        "noise_rate": getattr(model, "noise_rate", 0.0),
    }
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def cmd_generate(args, cfg: RunConfig) -> int:
    rng = stream(cfg.seed, 90)
    for attempt in range(10_000):
        vecs = rng.standard_normal((args.k, args.d))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        if args.kind == "hyperplanes":
            model = HyperplaneModel(np.ones(args.k) / args.k, vecs)
        else:
            model = MlrModel(np.ones(args.k) / args.k, vecs,
                             noise_rate=args.noise)
        if args.k == 1 or model.separation >= args.sep:
            _save_model(model, args.out)
            return 0
    print("could not satisfy the separation constraint", file=sys.stderr)
    return 3


def cmd_sample(args, cfg: RunConfig) -> int:
    model = _load_model(args.model)
    header = ["x_%d" % (j + 1) for j in range(model.d)]
    rows = []
    if isinstance(model, HyperplaneModel):
        if args.n > 0:
            rows = sample_hyperplanes(model, args.n, cfg.seed, 91)
    else:
        header.append("y")
        if args.n > 0:
            s = sample_mlr(model, args.n, cfg.seed, 91)
            rows = np.column_stack([s.x, s.y])
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(["%.17g" % v for v in row])
    return 0


def _count_draws(sampler):
    """Wrap a sampler so the total points drawn are tallied."""
    counter = {"n": 0}
    base_draw = sampler.draw

    def draw(n, *path):
        counter["n"] += n
        return base_draw(n, *path)

    sampler.draw = draw
    return counter


def cmd_learn(args, cfg: RunConfig) -> int:
    model = _load_model(args.model)
    is_hyper = isinstance(model, HyperplaneModel)
    if (args.mode == "hyperplanes") != is_hyper:
        print("model kind does not match --mode %s" % args.mode, file=sys.stderr)
        return 2
    dcfg = DescentConfig(k=model.k, p_min=model.p_min,
                         separation=min(model.separation, 4.0),
                         noise_rate=getattr(model, "noise_rate", 0.0))
    t0 = time.time()
    if is_hyper:
        sampler = HyperplaneSampler(model, cfg.seed)
        counter = _count_draws(sampler)
        learner = lambda: learn_hyperplanes(sampler, cfg.delta, cfg.epsilon, dcfg)
    else:
        sampler = MlrSampler(model, cfg.seed)
        counter = _count_draws(sampler)
        if args.mode == "noisy":
            learner = lambda: learn_with_noise(sampler, cfg.delta, cfg.epsilon, dcfg)
        else:
            learner = lambda: learn_without_noise(sampler, cfg.delta, cfg.epsilon, dcfg)
    try:
        estimates = learner()
    except ValueError as exc:
        print("learning failed: %s" % exc, file=sys.stderr)
        return 3
    report = score_recovery(estimates, model, signed=is_hyper,
                            runtime=time.time() - t0,
                            sample_count=counter["n"])
    with open(args.out, "w") as fh:
        json.dump({"estimates": [np.asarray(e).tolist() for e in estimates]},
                  fh, indent=1)
        fh.write("\n")
    with open(args.report, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["component", "matched", "error"])
        for i, (p, e) in enumerate(zip(report.permutation, report.errors)):
            w.writerow([i, int(p), "%.12g" % e])
        w.writerow(["max_error", "", "%.12g" % report.max_error])
        w.writerow(["runtime_s", "", "%.3f" % report.runtime])
        w.writerow(["samples", "", report.sample_count])
    return 0


def cmd_minvar(args, cfg: RunConfig) -> int:
    with open(args.data) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        col = args.column if args.column is not None else len(header) - 1
        values = np.array([float(row[col]) for row in reader])
    if len(values) and np.ptp(values) == 0.0:
        print("degenerate input: column is constant", file=sys.stderr)
        return 2
    try:
        sigma = estimate_min_variance(values, cfg.sigma_upper, cfg.sigma_lower,
                                      cfg.degree, cfg.delta, p_min=cfg.p_min)
    except ValueError as exc:
        print("estimation failed: %s" % exc, file=sys.stderr)
        return 3
    print("%.12g" % sigma)
    return 0


def cmd_bench(args, cfg: RunConfig) -> int:
    with open(args.grid) as fh:
        cells = json.load(fh)
    if not isinstance(cells, list):
        print("grid file must hold a list of cells", file=sys.stderr)
        return 2
    writer = csv.writer(sys.stdout if args.out == "-" else open(args.out, "w", newline=""))
    writer.writerow(["k", "d", "sep", "noise", "epsilon", "trials",
                     "success_rate", "wall_time_s", "samples"])
    for ci, cell in enumerate(cells):
        k, d = int(cell["k"]), int(cell["d"])
        sep = float(cell.get("sep", 1.0))
        noise = float(cell.get("noise", 0.0))
        eps = float(cell.get("epsilon", cfg.epsilon))
        trials = int(cell.get("trials", 1))
        wins, t0, drawn = 0, time.time(), 0
        for trial in range(trials):
            rng = stream(cfg.seed, 92, ci, trial)
            while True:
                vecs = rng.standard_normal((k, d))
                vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
                model = MlrModel(np.ones(k) / k, vecs, noise_rate=noise)
                if k == 1 or model.separation >= sep:
                    break
            sampler = MlrSampler(model, int(stream(cfg.seed, 93, ci, trial).integers(2**31)))
            counter = _count_draws(sampler)
            dcfg = DescentConfig(k=k, p_min=1.0 / k,
                                 separation=min(model.separation, 4.0),
                                 noise_rate=noise)
            try:
                if noise > 0:
                    est = learn_with_noise(sampler, cfg.delta, eps, dcfg)
                else:
                    est = learn_without_noise(sampler, cfg.delta, eps, dcfg)
                rep = score_recovery(est, model)
                wins += rep.max_error <= eps
            except ValueError:
                pass
            drawn += counter["n"]
        writer.writerow([k, d, sep, noise, eps, trials,
                         "%.3f" % (wins / max(trials, 1)),
                         "%.2f" % (time.time() - t0), drawn])
    return 0


def cmd_lowerbound(args, cfg: RunConfig) -> int:
    if args.k < 2:
        print("k must be at least 2", file=sys.stderr)
        return 2
    try:
        sig, sig_p = moment_match_sigmas(args.k, args.alpha, cfg.seed)
    except ValueError as exc:
        print("construction failed: %s" % exc, file=sys.stderr)
        return 3
    k = args.k
    g1 = ZeroMeanGmm(np.ones(k) / k, sig)
    g2 = ZeroMeanGmm(np.ones(k) / k, sig_p)
    writer = csv.writer(sys.stdout)
    writer.writerow(["i", "sigma", "sigma_prime"])
    for i in range(k):
        writer.writerow([i + 1, "%.12g" % sig[i], "%.12g" % sig_p[i]])
    writer.writerow(["degree", "moment", "moment_prime"])
    m1 = moment_table(g1, 2 * k)
    m2 = moment_table(g2, 2 * k)
    for p, (a, b) in enumerate(zip(m1, m2), start=1):
        writer.writerow([p, "%.12g" % a, "%.12g" % b])
    return 0


def _build_parser():
    ap = argparse.ArgumentParser(prog="mixlearn")
    ap.add_argument("--config", help="JSON config file merged under the flags")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--print-config", action="store_true",
                    help="print the merged configuration and exit")
    sub = ap.add_subparsers(dest="command")

    g = sub.add_parser("generate")
    g.add_argument("--k", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--sep", type=float, default=1.0)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--kind", choices=["mlr", "hyperplanes"], default="mlr")
    g.add_argument("--out", required=True)

    s = sub.add_parser("sample")
    s.add_argument("--model", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--out", required=True)

    l = sub.add_parser("learn")
    l.add_argument("--model", required=True)
    l.add_argument("--mode", choices=["noiseless", "noisy", "hyperplanes"],
                   default="noiseless")
    l.add_argument("--epsilon", type=float, default=None)
    l.add_argument("--delta", type=float, default=None)
    l.add_argument("--out", required=True)
    l.add_argument("--report", required=True)

    m = sub.add_parser("minvar")
    m.add_argument("--data", required=True)
    m.add_argument("--column", type=int, default=None)
    m.add_argument("--sigma-upper", dest="sigma_upper", type=float, default=None)
    m.add_argument("--sigma-lower", dest="sigma_lower", type=float, default=None)
    m.add_argument("--degree", type=int, default=None)
    m.add_argument("--p-min", dest="p_min", type=float, default=None)
    m.add_argument("--delta", type=float, default=None)

    b = sub.add_parser("bench")
    b.add_argument("--grid", required=True, help="JSON list of sweep cells")
    b.add_argument("--out", default="-")

    lb = sub.add_parser("lowerbound")
    lb.add_argument("--k", type=int, required=True)
    lb.add_argument("--alpha", type=float, default=0.25)
    return ap


_DISPATCH = {
    "generate": cmd_generate,
    "sample": cmd_sample,
    "learn": cmd_learn,
    "minvar": cmd_minvar,
    "bench": cmd_bench,
    "lowerbound": cmd_lowerbound,
}


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = RunConfig.resolve(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return 2
    if cfg.threads > 0:
        os.environ.setdefault("OMP_NUM_THREADS", str(cfg.threads))
    if args.print_config:
        out = dataclasses.asdict(cfg)
        out["command"] = args.command
        print(json.dumps(out, indent=1, sort_keys=True))
        return 0
    if args.command is None:
        ap.print_usage(sys.stderr)
        return 2
    try:
        return _DISPATCH[args.command](args, cfg)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
