"""Operator entry point.

Subcommands: ``train`` (either learner), ``eval`` (checkpoints or fairness
baselines), ``sweep-alpha`` (fixed-offloading comparison), and ``export``
(plot-ready figure tables).  Every run directory gets a manifest written
before long work starts; every metrics table is byte-reproducible for a
fixed config and seed.

Exit codes: 0 success, 2 configuration problems (including checkpoint/config
mismatches), 3 missing artifacts, 4 runtime infeasibility.
"""

# Pin BLAS threading before numpy loads: keeps small-matrix math fast and
# runs byte-reproducible regardless of host core count.
import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

import argparse
import sys
import time

import numpy as np

from . import __version__
from . import trainer
from .alloc import AllocInfeasibleError
from .config import ConfigError, NetworkConfig, load_config
from .export import ExportError, export_run
from .metrics import write_csv, write_json
from .trainer import CheckpointError, EvalReport

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_RUNTIME = 4

BASELINES = ("fairness_all", "fairness_w", "fairness_p")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uavmec",
        description="Train, evaluate, and export the UAV edge-computing "
                    "resource learner.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--profile", help="named config profile "
                                          "(micro, table2, table2-full)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", required=True, help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", parents=[common],
                             help="run a training session")
    p_train.add_argument("--algo", choices=("rmappo", "gmappo"),
                         default="rmappo")
    p_train.add_argument("--episodes", type=int,
                         help="override the episode budget")

    p_eval = sub.add_parser("eval", parents=[common],
                            help="deterministic evaluation rollouts")
    p_eval.add_argument("--checkpoint", help="trained checkpoint file")
    p_eval.add_argument("--baseline", choices=BASELINES,
                        help="evaluate a fairness baseline instead of (or on "
                             "top of) the checkpoint policy")
    p_eval.add_argument("--episodes", type=int, default=1)

    p_sweep = sub.add_parser("sweep-alpha", parents=[common],
                             help="fixed-offloading-ratio comparison")
    p_sweep.add_argument("--checkpoint", help="trained checkpoint file")
    p_sweep.add_argument("--alphas", default="0.3,0.5,0.7",
                         help="comma-separated fixed ratios")
    p_sweep.add_argument("--episodes", type=int, default=1)

    p_export = sub.add_parser("export", help="flatten a run into plot-ready "
                                             "figure tables")
    p_export.add_argument("--run", required=True, help="finished run directory")
    p_export.add_argument("--out", help="destination (defaults to the run "
                                        "directory)")
    return parser


def _load_cfg(args, overrides=None) -> NetworkConfig:
    return load_config(path=getattr(args, "config", None),
                       profile=getattr(args, "profile", None),
                       overrides=overrides)


def _manifest(out_dir: str, args, cfg: NetworkConfig, status: str,
              outputs: list[str]) -> None:
    write_json(os.path.join(out_dir, "manifest.json"), {
        "command": args.command,
        "argv": sys.argv[1:],
        "seed": getattr(args, "seed", None),
        "config_hash": cfg.config_hash(),
        "config_ini": cfg.to_ini(),
        "package_version": __version__,
        "status": status,
        "written_unix": time.time(),
        "outputs": sorted(outputs),
    })


def _returns_rows(log: trainer.TrainLog, roles) -> list[dict]:
    rows = []
    for ep in log.episodes:
        for role in roles:
            rows.append({"episode": ep["episode"], "agent": role,
                         "return": ep[f"return_{role}"]})
        rows.append({"episode": ep["episode"], "agent": "total",
                     "return": ep["return_total"]})
    return rows


def _episode_rows(log: trainer.TrainLog) -> list[dict]:
    return [{"episode": ep["episode"], "mean_utility": ep["mean_utility"]}
            for ep in log.episodes]


def write_eval_tables(out_dir: str, reports: list[EvalReport]) -> None:
    slot_rows, mu_rows = [], []
    for report in reports:
        for row in report.slot_rows:
            row = dict(row)
            row["label"] = report.label
            slot_rows.append(row)
        for row in report.per_mu_rows:
            row = dict(row)
            row["label"] = report.label
            mu_rows.append(row)
    if slot_rows:
        fields = ["label", "episode"] + [
            k for k in slot_rows[0] if k not in ("label", "episode")]
        write_csv(os.path.join(out_dir, "eval_slots.csv"), slot_rows, fields)
    if mu_rows:
        fields = ["label", "episode"] + [
            k for k in mu_rows[0] if k not in ("label", "episode")]
        write_csv(os.path.join(out_dir, "eval_per_mu.csv"), mu_rows, fields)
    write_json(os.path.join(out_dir, "eval_summary.json"),
               {report.label: report.summary() for report in reports})


def cmd_train(args) -> int:
    overrides = {}
    if args.episodes is not None:
        overrides["episodes"] = args.episodes
    cfg = _load_cfg(args, overrides)
    os.makedirs(args.out, exist_ok=True)
    _manifest(args.out, args, cfg, "running", [])

    train_fn = trainer.train_rmappo if args.algo == "rmappo" \
        else trainer.train_gmappo
    bundle, log = train_fn(cfg, args.seed)

    ckpt = os.path.join(args.out, "checkpoint.bin")
    trainer.checkpoint_save(bundle, ckpt)
    write_csv(os.path.join(args.out, "returns.csv"),
              _returns_rows(log, bundle.roles),
              ["episode", "agent", "return"])
    write_csv(os.path.join(args.out, "episodes.csv"), _episode_rows(log),
              ["episode", "mean_utility"])
    if log.updates:
        fields = ["update", "episode", "agent", "loss", "surrogate",
                  "value_loss", "entropy", "clip_fraction", "approx_kl",
                  "minibatches", "stopped_early"]
        write_csv(os.path.join(args.out, "training.csv"), log.updates, fields)
    report = trainer.evaluate(bundle, cfg, episodes=1, seed=args.seed,
                              label="learned")
    write_eval_tables(args.out, [report])
    outputs = sorted(os.listdir(args.out))
    _manifest(args.out, args, cfg, "finished", outputs)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    os.makedirs(args.out, exist_ok=True)
    _manifest(args.out, args, cfg, "running", [])
    bundle = None
    if args.checkpoint:
        bundle = trainer.checkpoint_load(args.checkpoint, cfg)
    elif args.baseline != "fairness_all":
        if args.baseline is None:
            print("eval: need --checkpoint or --baseline", file=sys.stderr)
            return EXIT_MISSING
        # fairness_w / fairness_p overlay a policy; without a checkpoint an
        # untrained policy stands in
        bundle = trainer.PolicyBundle(cfg, seed=args.seed)
    label = args.baseline or "learned"
    report = trainer.evaluate(bundle, cfg, episodes=args.episodes,
                              seed=args.seed, baseline=args.baseline,
                              label=label)
    write_eval_tables(args.out, [report])
    _manifest(args.out, args, cfg, "finished", sorted(os.listdir(args.out)))
    return EXIT_OK


def cmd_sweep_alpha(args) -> int:
    cfg = _load_cfg(args)
    os.makedirs(args.out, exist_ok=True)
    _manifest(args.out, args, cfg, "running", [])
    try:
        alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
    except ValueError:
        print(f"sweep-alpha: cannot parse --alphas {args.alphas!r}",
              file=sys.stderr)
        return EXIT_CONFIG
    if args.checkpoint:
        bundle = trainer.checkpoint_load(args.checkpoint, cfg)
    else:
        bundle = trainer.PolicyBundle(cfg, seed=args.seed)
    reports = trainer.sweep_alpha_fixed(bundle, cfg, alphas, args.seed,
                                        episodes=args.episodes)
    curve_rows = []
    table_rows = []
    for report in reports:
        for slot, value in enumerate(report.utility_by_slot):
            curve_rows.append({"label": report.label, "slot": slot,
                               "utility": float(value)})
        table_rows.append({"label": report.label,
                           "mean_utility": report.mean_utility,
                           "mean_episode_cost": report.mean_episode_cost})
    write_csv(os.path.join(args.out, "sweep.csv"), curve_rows,
              ["label", "slot", "utility"])
    write_csv(os.path.join(args.out, "sweep_summary.csv"), table_rows,
              ["label", "mean_utility", "mean_episode_cost"])
    write_eval_tables(args.out, reports)
    _manifest(args.out, args, cfg, "finished", sorted(os.listdir(args.out)))
    return EXIT_OK


def cmd_export(args) -> int:
    out_dir = args.out or args.run
    written = export_run(args.run, out_dir)
    for family in sorted(written):
        print(f"{family}: {written[family]}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep-alpha": cmd_sweep_alpha,
    "export": cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointError as exc:
        print(f"checkpoint/config mismatch: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, ExportError) as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except AllocInfeasibleError as exc:
        print(f"infeasible instance: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
