"""Experiment driver: seeded train/eval/plot/oracle commands.

Every run writes CSV metrics, a checkpoint, and a manifest (config echo,
seed, and content hashes) into its output directory, so a run is fully
reproducible from the manifest. Exit status: 0 success, 2 bad config or
checkpoint, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import checkpoint as ckpt
from .config import ConfigError, RunConfig
from .env import project_goal
from .hierarchy import build_agent, train_phase1
from .oracle import (exact_mi_quadrature, make_channel_sampler, reachable_bruteforce,
                     variational_bound_estimate)
from .hierarchy import box_at
from .phase2 import attach_task_level, evaluate, train_phase2
from .svgplot import emit_curve_svg, emit_goalspace_svg

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="\n") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, cfg: RunConfig, inputs: dict,
                    outputs: list[Path]) -> None:
    manifest = {
        "package_version": __version__,
        "command": command,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "input_hashes": inputs,
        "output_hashes": {p.name: _sha256(p) for p in outputs},
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_config(args) -> tuple[RunConfig, dict]:
    cfg = RunConfig.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out_dir = args.out
    if cfg.out_dir is None:
        raise ConfigError("no output directory: set 'out_dir' in the config or pass --out")
    inputs = {"config": _sha256(args.config)}
    return cfg, inputs


def _metrics_rows_to_csv(path, rows) -> None:
    if not rows:
        raise RuntimeError("no metrics rows were produced")
    header = list(rows[0].keys())
    write_csv(path, header, [[row[h] for h in header] for row in rows])


def cmd_train(args) -> int:
    cfg, inputs = _load_config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    if args.phase == 1:
        env = cfg.build_env()
        agent = build_agent(env, cfg.level_specs(), rng, tuple(cfg.hidden),
                            cfg.buffer_capacity, cfg.refresh_skills)
        rows: list[dict] = []
        train_phase1(agent, cfg.train_config(), cfg.epochs, rng, metrics_cb=rows.append)
        metrics_path = out / "metrics_phase1.csv"
        _metrics_rows_to_csv(metrics_path, rows)
        ck = out / "checkpoint_phase1.bin"
        ckpt.save_agent(ck, agent)
        _write_manifest(out, "train --phase 1", cfg, inputs, [metrics_path, ck])
        log.info("phase 1 done: %s", out)
        return EXIT_OK
    # phase 2 extends a phase-1 checkpoint
    if not args.checkpoint:
        raise ConfigError("phase 2 requires --checkpoint with a phase-1 agent")
    if not Path(args.checkpoint).exists():
        raise ConfigError(f"checkpoint not found: {args.checkpoint}")
    agent = ckpt.load_agent(args.checkpoint)
    inputs["checkpoint"] = _sha256(args.checkpoint)
    task = cfg.task_spec(len(agent.env.goal_dims))
    ext = attach_task_level(agent, task, rng, tuple(cfg.hidden))
    rows = []
    train_phase2(ext, cfg.phase2_rounds, rng,
                 episodes_per_round=cfg.phase2_episodes,
                 explore_noise=cfg.phase2_explore_noise,
                 grad_steps=cfg.phase2_grad_steps, batch_size=cfg.phase2_batch,
                 lr_actor=cfg.lr_task_actor, lr_critic=cfg.lr_task_critic,
                 distance=cfg.distance, metrics_cb=rows.append)
    metrics_path = Path(cfg.out_dir) / "metrics_phase2.csv"
    if rows:
        _metrics_rows_to_csv(metrics_path, rows)
    else:  # phase2_rounds could legitimately be tiny but is validated >= 1
        raise RuntimeError("phase 2 produced no metrics rows")
    ck = out / "checkpoint_phase2.bin"
    ckpt.save_extended(ck, ext)
    _write_manifest(out, "train --phase 2", cfg, inputs, [metrics_path, ck])
    log.info("phase 2 done: %s", out)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg, inputs = _load_config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not Path(args.checkpoint).exists():
        raise ConfigError(f"checkpoint not found: {args.checkpoint}")
    ext = ckpt.load_extended(args.checkpoint)
    inputs["checkpoint"] = _sha256(args.checkpoint)
    seeds = [cfg.seed + i for i in range(cfg.eval_seeds)]
    report = evaluate(ext, cfg.eval_episodes, seeds, distance=cfg.distance)
    d = len(ext.base.env.goal_dims)
    header = ["seed", "episode"] + [f"goal_{'xy'[i] if i < 2 else i}" for i in range(d)] + ["min_dist"]
    rows = [[seed, ep, *goal, dist] for seed, ep, goal, dist in report.rows()]
    eval_path = out / "eval.csv"
    write_csv(eval_path, header, rows)
    _write_manifest(out, "eval", cfg, inputs, [eval_path])
    print(f"min_dist mean={report.mean:.6g} std={report.std:.6g} "
          f"({cfg.eval_seeds} seeds x {cfg.eval_episodes} episodes)")
    return EXIT_OK


def _read_metrics(path) -> list[dict]:
    with open(path, newline="") as f:
        return [dict(r) for r in csv.DictReader(f)]


def cmd_plot(args) -> int:
    run = Path(args.run)
    out = Path(args.out) if args.out else run
    out.mkdir(parents=True, exist_ok=True)
    m1 = run / "metrics_phase1.csv"
    if not m1.exists():
        raise ConfigError(f"missing {m1}")
    rows = _read_metrics(m1)
    if not rows:
        raise RuntimeError(f"{m1} has no data rows")
    dims = sorted(int(k.split("_")[-1]) for k in rows[0] if k.startswith("center_"))
    snapshots = []
    levels = sorted({int(r["level"]) for r in rows})
    for level in levels:
        lv = [r for r in rows if int(r["level"]) == level]
        for r, dash, tag in ((lv[0], True, "first"), (lv[-1], False, "last")):
            center = [float(r[f"center_{i}"]) for i in dims]
            halfwidth = [float(np.exp(float(r[f"log_halfwidth_{i}"]))) for i in dims]
            snapshots.append({"level": level, "label": f"level{level}_{tag}",
                              "center": center, "halfwidth": halfwidth, "dash": dash})
    oracle_extent = None
    reach_csv = run / "oracle_reach.csv"
    if reach_csv.exists():
        pts = np.loadtxt(reach_csv, delimiter=",", skiprows=1, ndmin=2)
        oracle_extent = (pts.min(axis=0), pts.max(axis=0))
    emit_goalspace_svg(out / "goal_spaces.svg", snapshots, oracle_extent)
    made = [out / "goal_spaces.svg"]
    m2 = run / "metrics_phase2.csv"
    if m2.exists():
        rows2 = _read_metrics(m2)
        emit_curve_svg(out / "phase2_curve.svg",
                       [float(r["round"]) for r in rows2],
                       [float(r["min_dist_mean"]) for r in rows2],
                       "training round", "mean min distance to goal")
        made.append(out / "phase2_curve.svg")
    log.info("wrote %s", ", ".join(str(p) for p in made))
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg, inputs = _load_config(args)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    env = cfg.build_env()
    if env.noisy and args.checkpoint:
        # channel mode: exact MI and the variational bound for a checkpoint
        agent = ckpt.load_agent(args.checkpoint)
        inputs["checkpoint"] = _sha256(args.checkpoint)
        s0 = np.zeros(env.state_dim)
        level = agent.top
        n = agent.levels[level].spec.n
        box = box_at(agent, level, s0)
        policy = agent.levels[level].gc.policy
        mi = exact_mi_quadrature(agent.env, box, policy, n)
        rng = np.random.default_rng(cfg.seed)
        bound = variational_bound_estimate(
            agent, level, s0, 4096, rng,
            terminal_fn=make_channel_sampler(agent.env, policy, n))
        path = out / "oracle_mi.csv"
        write_csv(path, ["mi_nats", "bound_nats", "bound_stderr"],
                  [[mi, bound.value, bound.stderr]])
        print(f"exact MI={mi:.6g} nats, variational bound={bound.value:.6g} "
              f"(stderr {bound.stderr:.2g})")
    else:
        n_total = 1
        for ni in cfg.n:
            n_total *= int(ni)
        reach = reachable_bruteforce(env, env.start_region.center(), n_total,
                                     cfg.oracle_actions_per_dim,
                                     node_budget=cfg.oracle_node_budget)
        d = reach.points.shape[1]
        header = [f"{'xy'[i] if i < 2 else i}" for i in range(d)]
        path = out / "oracle_reach.csv"
        write_csv(path, header, reach.points.tolist())
        print(f"reachable set: {len(reach.points)} cells, "
              f"box [{reach.lo}, {reach.hi}] at n={n_total}")
    _write_manifest(out, "oracle", cfg, inputs, [path])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hiemp",
                                description="hierarchical empowerment experiments")
    p.add_argument("--verbose", action="store_true", help="INFO-level logging")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run phase-1 skill learning or phase-2 task training")
    t.add_argument("--config", required=True)
    t.add_argument("--phase", type=int, choices=(1, 2), required=True)
    t.add_argument("--checkpoint", help="phase-1 checkpoint (required for --phase 2)")
    t.add_argument("--seed", type=int, help="override the config seed")
    t.add_argument("--out", help="override the config output directory")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a phase-2 checkpoint")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--config", required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--out")
    e.set_defaults(fn=cmd_eval)

    pl = sub.add_parser("plot", help="emit SVG figures for a run directory")
    pl.add_argument("--run", required=True)
    pl.add_argument("--out")
    pl.set_defaults(fn=cmd_plot)

    o = sub.add_parser("oracle", help="dump brute-force reach or exact-MI CSVs")
    o.add_argument("--config", required=True)
    o.add_argument("--checkpoint")
    o.add_argument("--seed", type=int)
    o.add_argument("--out")
    o.set_defaults(fn=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as e:
        print(f"abort: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
