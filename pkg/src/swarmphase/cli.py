"""Command-line front end: optimize, sweep, evaluate, fit, export-tree.

Policies and run configurations persist as versioned JSON; tabular results
go to CSV for downstream scaling fits.  Every run is reproducible from
(config, master seed): reruns produce byte-identical outputs apart from
timestamps.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import NoiseModel, RngStream
from .evaluate import (EXACT_MAX_QUBITS, exact_sharpness, fit_scaling,
                       holevo_variance, sample_sharpness, SimulatorBackend)
from .gls import GlsPolicy, MAX_TREE_DEPTH, export_decision_tree, ls_policy
from .pso import PsoConfig, SweepAborted, optimize_policy, sweep
from .symstate import make_optimal_input_state, make_product_zero_state

POLICY_FORMAT_VERSION = 1
OUT_DIR_ENV = "SWARMPHASE_OUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_REFUSED = 3
EXIT_IO = 4


class RefusalError(RuntimeError):
    """Request is valid but exceeds a hard evaluation limit."""


STATE_KINDS = {
    "psi": make_optimal_input_state,
    "zero": make_product_zero_state,
}


def make_input_state(kind, n_qubits):
    try:
        factory = STATE_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown input state kind {kind!r}") from None
    return factory(n_qubits)


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a training run's outputs."""
    state_kind: str = "psi"
    noise: NoiseModel = field(default_factory=NoiseModel)
    pso: PsoConfig = field(default_factory=PsoConfig)
    master_seed: int = 0
    restarts: int = 1
    threads: int = 1

    def to_dict(self):
        return {
            "state_kind": self.state_kind,
            "noise": self.noise.to_dict(),
            "pso": self.pso.to_dict(),
            "master_seed": self.master_seed,
            "restarts": self.restarts,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            state_kind=d["state_kind"],
            noise=NoiseModel.from_dict(d["noise"]),
            pso=PsoConfig.from_dict(d["pso"]),
            master_seed=d["master_seed"],
            restarts=d["restarts"],
            threads=d.get("threads", 1),
        )


def policy_hash(deltas):
    payload = json.dumps([float(x) for x in deltas]).encode()
    return hashlib.sha256(payload).hexdigest()


def save_policy(path, policy, config: RunConfig, sharpness, trials_run,
                eval_record, parent=None):
    doc = {
        "format_version": POLICY_FORMAT_VERSION,
        "n_qubits": len(policy),
        "deltas": [float(x) for x in policy.deltas],
        "training": {
            "config": config.to_dict(),
            "iterations_run": config.pso.iterations,
            "trials_per_eval": config.pso.resolved_trials(len(policy)),
            "trials_run": trials_run,
            "sharpness_mean": sharpness.sharpness,
            "mean_count": sharpness.mean_count,
        },
        "eval": eval_record,
        "parent_sha256": parent,
        "sha256": policy_hash(policy.deltas),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return doc


def load_policy(path):
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("format_version")
    if version != POLICY_FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported policy format_version {version!r} "
            f"(expected {POLICY_FORMAT_VERSION})")
    policy = GlsPolicy(np.asarray(doc["deltas"], dtype=float))
    if len(policy) != doc["n_qubits"]:
        raise ValueError(f"{path}: deltas length does not match n_qubits")
    return policy, doc


def reproduction_record(policy, config: RunConfig, n_qubits):
    """Fixed-key evaluation stored with the policy; re-running it must
    reproduce the stored sharpness exactly."""
    trials = config.pso.resolved_trials(n_qubits)
    stream = RngStream(config.master_seed, "policy-eval", n_qubits)
    state = make_input_state(config.state_kind, n_qubits)
    est = sample_sharpness(policy, state, config.noise, trials, stream,
                           backend=SimulatorBackend(state, threads=config.threads))
    return {
        "seed_key": list(stream.key),
        "trials": trials,
        "sharpness": est.sharpness,
    }


def _config_from_args(args):
    noise_kind = "ideal"
    if args.skewness:
        noise_kind = "skew_normal"
    elif args.sigma_theta or args.sigma_n:
        noise_kind = "gaussian"
    noise = NoiseModel(kind=noise_kind, sigma_theta=args.sigma_theta,
                       sigma_n=args.sigma_n, skewness_gamma=args.skewness,
                       loss_eta=args.loss)
    pso_kwargs = {}
    if args.iterations is not None:
        pso_kwargs["iterations"] = args.iterations
    if args.swarm_size is not None:
        pso_kwargs["swarm_size"] = args.swarm_size
    if args.trials is not None:
        pso_kwargs["trials_per_eval"] = args.trials
    if args.ring_radius is not None:
        pso_kwargs["ring_radius"] = args.ring_radius
    return RunConfig(state_kind=args.state, noise=noise, pso=PsoConfig(**pso_kwargs),
                     master_seed=args.seed, restarts=args.restarts,
                     threads=args.threads)


def _default_out(args, fallback):
    if args.out:
        return args.out
    base = os.environ.get(OUT_DIR_ENV, ".")
    return os.path.join(base, fallback)


def cmd_optimize(args):
    config = _config_from_args(args)
    n = args.n
    state = make_input_state(config.state_kind, n)
    prev_policy = None
    parent_hash = None
    if args.parent:
        prev_policy, parent_doc = load_policy(args.parent)
        parent_hash = parent_doc["sha256"]
    start = time.perf_counter()
    best = None
    trials_total = 0
    for r in range(config.restarts):
        result = optimize_policy(
            n, state, config.noise, config.pso,
            RngStream(config.master_seed, n, r),
            prev_policy=prev_policy, threads=config.threads)
        trials_total += result.trials_run
        if best is None or result.sharpness.sharpness > best.sharpness.sharpness:
            best = result
    elapsed = time.perf_counter() - start
    out = _default_out(args, f"policy_n{n:02d}.json")
    eval_record = reproduction_record(best.policy, config, n)
    save_policy(out, best.policy, config, best.sharpness, trials_total,
                eval_record, parent=parent_hash)
    vh = best.sharpness.holevo_variance
    print(f"N={n}  S_bar={best.sharpness.sharpness:.6f}  V_H={vh:.6f}  "
          f"trials={trials_total}  wall={elapsed:.1f}s")
    print(f"wrote {out}")
    return EXIT_OK


def sweep_to_files(config: RunConfig, n_min, n_max, out_dir, resume=True,
                   progress=print):
    """Run a chained sweep, persisting one policy file per level and a
    results.csv; existing policy files are treated as completed levels."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    prev_policy = None
    start_n = n_min
    parent_hash = None
    if resume:
        for n in range(n_min, n_max + 1):
            path = os.path.join(out_dir, f"policy_n{n:02d}.json")
            if not os.path.exists(path):
                break
            prev_policy, doc = load_policy(path)
            parent_hash = doc["sha256"]
            vh = holevo_variance(doc["training"]["sharpness_mean"])
            rows.append((n, vh, doc["training"]["sharpness_mean"],
                         doc["training"]["trials_per_eval"], config.master_seed,
                         config.restarts))
            start_n = n + 1
            progress(f"N={n}: resumed from {path}")

    state_factory = STATE_KINDS[config.state_kind]
    parent_box = {"hash": parent_hash}

    def on_level(level):
        path = os.path.join(out_dir, f"policy_n{level.n_qubits:02d}.json")
        eval_record = reproduction_record(level.policy, config, level.n_qubits)
        doc = save_policy(path, level.policy, config, level.sharpness,
                          level.trials_run, eval_record,
                          parent=parent_box["hash"])
        parent_box["hash"] = doc["sha256"]
        rows.append((level.n_qubits, level.sharpness.holevo_variance,
                     level.sharpness.sharpness,
                     config.pso.resolved_trials(level.n_qubits),
                     config.master_seed, level.restarts_used))
        _write_results_csv(os.path.join(out_dir, "results.csv"), rows)
        progress(f"N={level.n_qubits}: S_bar={level.sharpness.sharpness:.6f} "
                 f"V_H={level.sharpness.holevo_variance:.6f}")

    if start_n <= n_max:
        try:
            sweep(start_n, n_max, state_factory, config.noise, config.pso,
                  config.restarts, RngStream(config.master_seed),
                  prev_policy=prev_policy, threads=config.threads,
                  on_level=on_level)
        except SweepAborted:
            _write_results_csv(os.path.join(out_dir, "results.csv"), rows)
            raise
    _write_results_csv(os.path.join(out_dir, "results.csv"), rows)
    return rows


def _write_results_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["N", "V_H", "S", "K", "seed", "restarts_used"])
        writer.writerows(rows)


def cmd_sweep(args):
    config = _config_from_args(args)
    out_dir = _default_out(args, "sweep")
    rows = sweep_to_files(config, args.n_min, args.n_max, out_dir,
                          resume=not args.no_resume)
    print(f"wrote {os.path.join(out_dir, 'results.csv')} ({len(rows)} rows)")
    return EXIT_OK


def cmd_evaluate(args):
    policy, doc = load_policy(args.policy)
    n = len(policy)
    config = _config_from_args(args)
    state = make_input_state(config.state_kind, n)
    trials = args.trials if args.trials is not None else 10 * n * n
    stream = RngStream(config.master_seed, "evaluate", n)
    est = sample_sharpness(policy, state, config.noise, trials, stream,
                           backend=SimulatorBackend(state, threads=config.threads))
    print(f"N={n}  K={trials}  S_tilde={est.sharpness:.6f}  "
          f"V_H={est.holevo_variance:.6f}  V_H*N={est.holevo_variance * n:.4f}")
    if args.exact:
        if n > EXACT_MAX_QUBITS:
            raise RefusalError(
                f"exact sharpness refused for N={n} > {EXACT_MAX_QUBITS}")
        if config.noise.kind.value != "ideal" or config.noise.loss_eta > 0:
            raise RefusalError(
                "exact sharpness is defined for the noiseless lossless channel; "
                "drop the noise/loss flags")
        s = exact_sharpness(policy, state)
        vh = holevo_variance(s)
        print(f"exact: S={s:.12f}  V_H={vh:.12f}  V_H*N={vh * n:.6f}")
    return EXIT_OK


def cmd_fit(args):
    points = []
    try:
        with open(args.csv) as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"N", "V_H"} <= set(reader.fieldnames):
                raise ValueError(f"{args.csv}: expected columns N and V_H")
            for row in reader:
                points.append((int(row["N"]), float(row["V_H"])))
    except (KeyError, csv.Error) as exc:
        raise ValueError(f"malformed CSV {args.csv}: {exc}") from exc
    fit = fit_scaling(points)
    print(f"alpha = {fit.alpha:.6f} +/- {fit.alpha_stderr:.6f}  "
          f"(V_H ~ exp({fit.log_prefactor:.4f}) * N^-alpha, "
          f"N in {fit.n_range[0]}..{fit.n_range[1]})")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["N", "V_H", "predicted", "log_residual"])
            for n, vh in points:
                pred = float(np.exp(fit.log_prefactor) * n ** (-fit.alpha))
                writer.writerow([n, vh, pred, float(np.log(vh) - np.log(pred))])
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_export_tree(args):
    policy, _ = load_policy(args.policy)
    depth = args.depth if args.depth is not None else len(policy)
    if depth > MAX_TREE_DEPTH:
        raise RefusalError(f"tree depth {depth} exceeds cap {MAX_TREE_DEPTH}")
    truncated = GlsPolicy(policy.deltas[:depth])
    dot = export_decision_tree(truncated, depth)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dot + "\n")
        print(f"wrote {args.out}")
    else:
        print(dot)
    return EXIT_OK


def _add_noise_args(parser):
    parser.add_argument("--sigma-theta", type=float, default=0.0)
    parser.add_argument("--sigma-n", type=float, default=0.0)
    parser.add_argument("--skewness", type=float, default=0.0)
    parser.add_argument("--loss", type=float, default=0.0)


def _add_run_args(parser):
    parser.add_argument("--state", choices=sorted(STATE_KINDS), default="psi")
    _add_noise_args(parser)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--restarts", type=int, default=1)
    parser.add_argument("--iterations", type=int, default=None)
    parser.add_argument("--swarm-size", type=int, default=None)
    parser.add_argument("--trials", type=int, default=None)
    parser.add_argument("--ring-radius", type=int, default=None)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--out", default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="swarmphase",
        description="Learn and benchmark adaptive phase-estimation policies")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="train a single N-qubit policy")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--parent", help="policy file to bootstrap from (N-1 qubits)")
    _add_run_args(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="chain policies over a range of N")
    p.add_argument("--n-min", type=int, required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--no-resume", action="store_true",
                   help="ignore existing policy files in the output directory")
    _add_run_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="benchmark a stored policy")
    p.add_argument("policy")
    p.add_argument("--exact", action="store_true",
                   help="also compute the exact noiseless sharpness (N <= 20)")
    _add_run_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fit", help="fit V_H ~ N^-alpha from a results CSV")
    p.add_argument("csv")
    p.add_argument("--out", default=None, help="residuals CSV path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("export-tree", help="decision tree of a policy as DOT")
    p.add_argument("policy")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_tree)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RefusalError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
