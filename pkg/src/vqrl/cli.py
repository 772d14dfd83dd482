"""Operator entry point: train, infer, search, compile-stats, env-check.

Configuration precedence is flags > config file (JSON) > built-in defaults.
Every run writes a resolved-config JSON next to its outputs so it can be
repeated bit-identically (for non-remote backends).

Exit codes: 0 ok, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .backend import BackendDescriptor
from .cartpole import CartPoleEnv, CartState, step_dynamics
from .genome import ALT5_GENOME, EQAS_GENOME, Genome, decode_genome
from .nsga2 import SearchConfig, evolve
from .reinforce import (
    TrainConfig,
    load_checkpoint,
    run_inference,
    save_checkpoint,
    train,
    write_metrics_csv,
)
from .sim import NoiseModel
from .transpile import lower, stats
from .genome import bind_parameters

# Defaults for the CartPole task: 4 qubits, 2 actions, reward +1,
# learning rates (phi, omega, lambda) = (0.01, 0.1, 0.1), gamma 1.0,
# beta 1.0, observable Z0 Z1 Z2 Z3.
CONFIG_KEYS = {
    "genome": str,
    "n_qubits": int,
    "backend": str,
    "shots": int,
    "noise_p1": float,
    "noise_p2": float,
    "endpoint": str,
    "token": str,
    "episodes": int,
    "episode_cap": int,
    "n_trajectories": int,
    "gamma": float,
    "beta": float,
    "lr_phi": float,
    "lr_omega": float,
    "lr_lambda": float,
    "optimizer": str,
    "encode_squash": str,
    "return_weighting": str,
    "seed": int,
    "out": str,
    "population": int,
    "generations": int,
    "eval_episodes": int,
    "eval_seeds": int,
    "checkpoint": str,
}

BASELINE_GENOMES = {"alt5": ALT5_GENOME, "eqas": EQAS_GENOME}


class UsageError(Exception):
    pass


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a flat JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return data


def _resolve(args: argparse.Namespace, file_cfg: dict, key: str, default):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in file_cfg and file_cfg[key] is not None:
        return CONFIG_KEYS[key](file_cfg[key])
    return default


def _backend_descriptor(args, cfg) -> BackendDescriptor:
    kind = _resolve(args, cfg, "backend", "exact")
    p1 = _resolve(args, cfg, "noise_p1", 0.0)
    p2 = _resolve(args, cfg, "noise_p2", 0.0)
    noise = NoiseModel(p1, p2) if (p1 > 0 or p2 > 0) else None
    return BackendDescriptor(
        kind=kind,
        shots=_resolve(args, cfg, "shots", 1000),
        noise=noise,
        endpoint=_resolve(args, cfg, "endpoint", ""),
        token=_resolve(args, cfg, "token", ""),
    )


def _out_dir(args, cfg) -> Path:
    out = Path(_resolve(args, cfg, "out", "runs"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved_config(out: Path, resolved: dict) -> None:
    with open(out / "resolved_config.json", "w", encoding="utf-8") as fh:
        json.dump(resolved, fh, indent=2, default=str)


def _descriptor_dict(desc: BackendDescriptor) -> dict:
    d = asdict(desc)
    d["noise"] = asdict(desc.noise) if desc.noise else None
    d["coupling"] = sorted(desc.coupling.edges) if desc.coupling else None
    return d


def cmd_train(args) -> int:
    cfg = _load_config_file(args.config)
    genome_text = _resolve(args, cfg, "genome", None)
    if not genome_text:
        raise UsageError("a genome is required (--genome or config file)")
    descriptor = _backend_descriptor(args, cfg)
    config = TrainConfig(
        genome=Genome.from_text(genome_text),
        n_qubits=_resolve(args, cfg, "n_qubits", 4),
        episodes=_resolve(args, cfg, "episodes", 500),
        episode_cap=_resolve(args, cfg, "episode_cap", 500),
        n_trajectories=_resolve(args, cfg, "n_trajectories", 10),
        gamma=_resolve(args, cfg, "gamma", 1.0),
        beta=_resolve(args, cfg, "beta", 1.0),
        lr_phi=_resolve(args, cfg, "lr_phi", 0.01),
        lr_omega=_resolve(args, cfg, "lr_omega", 0.1),
        lr_lambda=_resolve(args, cfg, "lr_lambda", 0.1),
        optimizer=_resolve(args, cfg, "optimizer", "adam"),
        encode_squash=_resolve(args, cfg, "encode_squash", None),
        return_weighting=_resolve(args, cfg, "return_weighting", "to_go"),
        seed=_resolve(args, cfg, "seed", 0),
        backend=descriptor,
    )
    out = _out_dir(args, cfg)
    result = train(config)
    write_metrics_csv(out / "metrics.csv", result.metrics)
    save_checkpoint(out / "checkpoint.json", result)
    resolved = {k: v for k, v in asdict(config).items() if k != "backend"}
    resolved["genome"] = config.genome.to_text()
    resolved["backend"] = _descriptor_dict(descriptor)
    resolved["command"] = "train"
    _write_resolved_config(out, resolved)
    print(f"trained {len(result.metrics)} episodes; artifacts in {out}/")
    return 0


def cmd_infer(args) -> int:
    cfg = _load_config_file(args.config)
    checkpoint = _resolve(args, cfg, "checkpoint", None) or args.checkpoint_path
    if not checkpoint:
        raise UsageError("a checkpoint path is required")
    try:
        params, genome, n_qubits, episode = load_checkpoint(checkpoint)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: cannot load checkpoint {checkpoint}: {exc}", file=sys.stderr)
        return 1
    descriptor = _backend_descriptor(args, cfg)
    episodes = _resolve(args, cfg, "episodes", 100)
    episode_cap = _resolve(args, cfg, "episode_cap", 500)
    seed = _resolve(args, cfg, "seed", 0)
    squash = _resolve(args, cfg, "encode_squash", None)
    out = _out_dir(args, cfg)
    metrics = run_inference(
        params, genome, n_qubits, descriptor, episodes, episode_cap, seed=seed, squash=squash
    )
    write_metrics_csv(out / "metrics.csv", metrics)
    _write_resolved_config(
        out,
        {
            "command": "infer",
            "checkpoint": str(checkpoint),
            "genome": genome.to_text(),
            "n_qubits": n_qubits,
            "checkpoint_episode": episode,
            "episodes": episodes,
            "episode_cap": episode_cap,
            "seed": seed,
            "encode_squash": squash,
            "backend": _descriptor_dict(descriptor),
        },
    )
    mean_reward = float(np.mean([m.reward for m in metrics]))
    print(f"inference over {episodes} episodes: mean reward {mean_reward:.2f}; artifacts in {out}/")
    return 0


def cmd_search(args) -> int:
    cfg = _load_config_file(args.config)
    config = SearchConfig(
        population=_resolve(args, cfg, "population", 20),
        generations=_resolve(args, cfg, "generations", 10),
        n_qubits=_resolve(args, cfg, "n_qubits", 4),
        eval_episodes=_resolve(args, cfg, "eval_episodes", 150),
        eval_seeds=_resolve(args, cfg, "eval_seeds", 2),
        seed=_resolve(args, cfg, "seed", 0),
    )
    out = _out_dir(args, cfg)

    def snapshot(gen: int, population) -> None:
        payload = [
            {"genome": ind.genome.to_text(), "f1": ind.objectives[0], "f2": ind.objectives[1],
             "rank": ind.rank}
            for ind in population
        ]
        with open(out / f"generation_{gen:03d}.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)

    result = evolve(config, on_generation=snapshot)
    with open(out / "pareto.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["genome", "mean_reward", "ent_count"])
        for ind in result.front:
            writer.writerow([ind.genome.to_text(), f"{-ind.objectives[0]:.4f}", int(ind.objectives[1])])
    resolved = asdict(config)
    resolved["command"] = "search"
    _write_resolved_config(out, resolved)
    print(f"search done: {len(result.front)} Pareto members, {result.n_evaluations} evaluations; "
          f"artifacts in {out}/")
    return 0


def _compile_row(name: str, genome: Genome, n_qubits: int) -> tuple:
    ir = decode_genome(genome, n_qubits)
    circuit = bind_parameters(ir, np.zeros(ir.n_phi), np.zeros(ir.n_lambda), np.zeros(n_qubits))
    st = stats(lower(circuit))
    return (name, genome.to_text(), st.total_gates, st.cnot_count, st.depth)


def cmd_compile_stats(args) -> int:
    cfg = _load_config_file(args.config)
    n_qubits = _resolve(args, cfg, "n_qubits", 4)
    rows = []
    for text in args.genomes:
        rows.append(_compile_row("given", Genome.from_text(text), n_qubits))
    for name, genome in BASELINE_GENOMES.items():
        rows.append(_compile_row(name, genome, n_qubits))
    header = ("name", "genome", "total_gates", "cnot_count", "depth")
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(len(header))]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in rows:
        print("  ".join(str(v).ljust(w) for v, w in zip(row, widths)))
    if args.out or "out" in cfg:
        out = _out_dir(args, cfg)
        with open(out / "compile_stats.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        print(f"wrote {out / 'compile_stats.csv'}")
    return 0


def cmd_env_check(args) -> int:
    """Check the environment dynamics against hand-derived oracle values."""
    failures = 0

    def check(name: str, ok: bool) -> None:
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += not ok

    nxt = step_dynamics(CartState(0.0, 0.0, 0.0, 0.0), 1)
    expected = (0.0, 0.195122, 0.0, -0.292683)
    got = (nxt.x, nxt.x_dot, nxt.theta, nxt.theta_dot)
    check("push-right Euler step matches closed form", all(abs(a - b) < 1e-6 for a, b in zip(got, expected)))

    mirror = step_dynamics(CartState(0.0, 0.0, 0.0, 0.0), 0)
    check("push-left step is the exact mirror",
          abs(mirror.x_dot + nxt.x_dot) < 1e-12 and abs(mirror.theta_dot + nxt.theta_dot) < 1e-12)

    rng = np.random.default_rng(0)
    ok = True
    for _ in range(1000):
        s = CartState(*(float(v) for v in rng.uniform(-1, 1, size=4)))
        a = int(rng.integers(2))
        fwd = step_dynamics(s, a)
        neg = step_dynamics(CartState(-s.x, -s.x_dot, -s.theta, -s.theta_dot), 1 - a)
        ok &= all(
            abs(u + v) < 1e-12
            for u, v in zip((fwd.x, fwd.x_dot, fwd.theta, fwd.theta_dot),
                            (neg.x, neg.x_dot, neg.theta, neg.theta_dot))
        )
    check("mirror symmetry on 1000 random states", ok)

    env = CartPoleEnv(episode_cap=10)
    env.reset(state=CartState(2.5, 0.0, 0.0, 0.0))
    check("out-of-bounds start is terminal", env.done)

    env = CartPoleEnv(episode_cap=5)
    env.reset(seed=1)
    results = []
    while not env.done:
        results.append(env.step(0) if env.state.theta > 0 else env.step(1))
    check("reward is +1 every step", all(r.reward == 1.0 for r in results))

    print("env-check:", "ok" if failures == 0 else f"{failures} failure(s)")
    return 0 if failures == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory (default: runs/)")
        p.add_argument("--backend", choices=["exact", "emulated", "remote"])
        p.add_argument("--shots", type=int)
        p.add_argument("--noise-p1", type=float, dest="noise_p1")
        p.add_argument("--noise-p2", type=float, dest="noise_p2")
        p.add_argument("--genome")
        p.add_argument("--episodes", type=int)
        p.add_argument("--episode-cap", type=int, dest="episode_cap")
        p.add_argument("--n-qubits", type=int, dest="n_qubits")
        p.add_argument("--encode-squash", choices=["arctan"], dest="encode_squash")

    p_train = sub.add_parser("train", help="train a policy with batched policy gradients")
    add_common(p_train)
    p_train.add_argument("--n-trajectories", type=int, dest="n_trajectories")
    p_train.add_argument("--optimizer", choices=["adam", "sgd"])
    p_train.add_argument("--return-weighting", choices=["to_go", "episode"], dest="return_weighting")
    p_train.add_argument("--lr-phi", type=float, dest="lr_phi")
    p_train.add_argument("--lr-omega", type=float, dest="lr_omega")
    p_train.add_argument("--lr-lambda", type=float, dest="lr_lambda")
    p_train.add_argument("--gamma", type=float)
    p_train.add_argument("--beta", type=float)
    p_train.set_defaults(func=cmd_train)

    p_infer = sub.add_parser("infer", help="run episodes with a frozen checkpoint")
    add_common(p_infer)
    p_infer.add_argument("checkpoint_path", nargs="?", help="checkpoint JSON from train")
    p_infer.set_defaults(func=cmd_infer)

    p_search = sub.add_parser("search", help="multi-objective architecture search")
    add_common(p_search)
    p_search.add_argument("--population", type=int)
    p_search.add_argument("--generations", type=int)
    p_search.add_argument("--eval-episodes", type=int, dest="eval_episodes")
    p_search.add_argument("--eval-seeds", type=int, dest="eval_seeds")
    p_search.set_defaults(func=cmd_search)

    p_stats = sub.add_parser("compile-stats", help="hardware cost table for architectures")
    add_common(p_stats)
    p_stats.add_argument("genomes", nargs="*", help="genome text forms, e.g. 3-1-1-2-0")
    p_stats.set_defaults(func=cmd_compile_stats)

    p_env = sub.add_parser("env-check", help="run the environment dynamics oracle")
    p_env.set_defaults(func=cmd_env_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.exit(2, f"error: {exc}\n")
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
