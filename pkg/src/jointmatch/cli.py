"""Command-line entry points.

Subcommands: gen-data, train, eval, transfer, param-scale. Every error path
exits nonzero and names the offending flag or config key. The only
environment variable consulted is JOINTMATCH_OUT_DIR, which overrides the
configured output directory.

A training run is driven by one seed and one RNG stream, drawn in a fixed
order: dataset rows first, then parameter initialization, then the training
loop. `gen-data` with the same seed and pairing therefore writes exactly the
dataset a run with that seed trains on.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .data import (TEST_SIZE_DEFAULT, TRAIN_SIZE_DEFAULT, load_dataset,
                   make_dataset, make_domains, save_dataset)
from .ensemble import transfer
from .losses import NonFiniteLossError, report_columns
from .metrics import (MMD_NOTE, evaluate_ensemble, metric_rows_to_csv,
                      param_scale_table)
from .nets import ArchConfig, EnsembleParams
from .persistence import (OUT_DIR_ENV, CheckpointError, RunConfig,
                          atomic_write_bytes, config_digest, load_checkpoint,
                          load_run_config, restore_train_state,
                          save_checkpoint, write_history_csv)
from .svgplot import write_scatter_svg
from .training import TrainSink, init_train_state, train

__all__ = ["main", "entry"]


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


# ------------------------------------------------------------- gen-data

def _cmd_gen_data(args) -> int:
    try:
        specs = make_domains(args.m, args.seed)
    except ValueError as exc:
        return _fail(f"--m: {exc}")
    dataset = make_dataset(specs, args.seed, train_size=args.train_size,
                           test_size=args.test_size, paired=args.paired)
    out_dir = os.environ.get(OUT_DIR_ENV) or args.out
    written = save_dataset(out_dir, specs, dataset, seed=args.seed)
    for path in written:
        print(path)
    return 0


# ---------------------------------------------------------------- train

class _RunSink(TrainSink):
    """Writes checkpoints and rewrites the history CSV as training goes."""

    def __init__(self, out_dir: str, run_cfg: RunConfig, columns, carried=()):
        self.out_dir = out_dir
        self.run_cfg = run_cfg
        self.columns = columns
        self.carried = carried
        self.checkpoint_path = os.path.join(out_dir, "checkpoint.bin")
        self.history_path = os.path.join(out_dir, "loss_history.csv")

    def on_checkpoint(self, step, state, history):
        save_checkpoint(self.checkpoint_path, state, self.run_cfg)
        write_history_csv(self.history_path, self.columns, history,
                          carried=self.carried)


def _carried_history(resume_path: str, upto_step: int) -> list:
    """History lines an interrupted run wrote at or before the resume step.

    Read from the checkpoint's own directory so a moved out_dir keeps its
    rows. Rows past the resume step are dropped; the replay regenerates
    them bit-identically.
    """
    path = os.path.join(os.path.dirname(os.path.abspath(resume_path)),
                        "loss_history.csv")
    if not os.path.exists(path):
        return []
    kept = []
    with open(path, "r", encoding="utf-8") as fh:
        next(fh, None)  # header is rebuilt from the current columns
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                step = int(line.split(",", 1)[0])
            except ValueError:
                continue
            if step <= upto_step:
                kept.append(line)
    return kept


def _cmd_train(args) -> int:
    try:
        run_cfg = load_run_config(args.config)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: --config: {exc}", file=sys.stderr)
        print(f"see README section 'Run configuration' for the key schema",
              file=sys.stderr)
        return 2
    out_dir = run_cfg.out_dir
    os.makedirs(out_dir, exist_ok=True)

    rng = np.random.default_rng(run_cfg.seed)
    specs = make_domains(run_cfg.m, run_cfg.seed)
    paired = run_cfg.objective.mode == "supervised"
    dataset = make_dataset(specs, rng, train_size=run_cfg.train_size,
                           test_size=run_cfg.test_size, paired=paired)
    save_dataset(os.path.join(out_dir, "data"), specs, dataset, seed=run_cfg.seed)

    if args.resume:
        try:
            ckpt = load_checkpoint(args.resume)
            state = restore_train_state(ckpt, run_cfg)
        except (FileNotFoundError, CheckpointError) as exc:
            return _fail(f"--resume: {exc}")
        if state.step >= run_cfg.train.steps:
            print(f"run already complete at step {state.step}; nothing to do")
            return 0
        carried = _carried_history(args.resume, state.step)
        print(f"resuming from step {state.step}")
    else:
        params = EnsembleParams.build(run_cfg.m, run_cfg.arch, rng)
        state = init_train_state(params, rng)
        carried = []

    columns = report_columns(run_cfg.m, run_cfg.objective)
    sink = _RunSink(out_dir, run_cfg, columns, carried)
    print(f"training m={run_cfg.m} mode={run_cfg.objective.mode} "
          f"steps={run_cfg.train.steps} out={out_dir}")
    try:
        history = train(state, dataset, run_cfg.objective, run_cfg.train, sink)
    except (NonFiniteLossError, ValueError) as exc:
        print(f"error: training aborted: {exc}", file=sys.stderr)
        if os.path.exists(sink.checkpoint_path):
            print(f"last checkpoint preserved at {sink.checkpoint_path}",
                  file=sys.stderr)
        return 1
    save_checkpoint(sink.checkpoint_path, state, run_cfg)
    write_history_csv(sink.history_path, columns, history, carried=carried)
    print(f"checkpoint: {sink.checkpoint_path}")
    print(f"history:    {sink.history_path}")
    return 0


# ----------------------------------------------------------------- eval

def _load_model(checkpoint_path: str):
    ckpt = load_checkpoint(checkpoint_path)
    from .persistence import run_config_from_dict

    run_cfg = run_config_from_dict(ckpt.config)
    state = restore_train_state(ckpt, run_cfg)
    return run_cfg, state


def _cmd_eval(args) -> int:
    try:
        run_cfg, state = _load_model(args.checkpoint)
    except (FileNotFoundError, CheckpointError, ValueError) as exc:
        return _fail(f"--checkpoint: {exc}")
    try:
        specs, dataset = load_dataset(args.data)
    except (FileNotFoundError, ValueError) as exc:
        return _fail(f"--data: {exc}")
    if dataset.m != run_cfg.m:
        return _fail(f"--data: dataset has {dataset.m} domains, checkpoint has {run_cfg.m}")
    out_dir = os.environ.get(OUT_DIR_ENV) or args.out
    os.makedirs(out_dir, exist_ok=True)

    rng = np.random.default_rng(args.seed)
    rows = evaluate_ensemble(state.params, specs, dataset, rng)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    metric_rows_to_csv(rows, metrics_path)
    print(f"metrics: {metrics_path}  (distribution match column: {MMD_NOTE})")

    for i in range(run_cfg.m):
        for j in range(run_cfg.m):
            if i == j:
                continue
            x = dataset.test[i]
            noise = rng.standard_normal((x.shape[0], run_cfg.arch.latent))
            moved, _ = transfer(state.params, i, j, x, noise)
            svg_path = os.path.join(out_dir, f"transfer_{i}_to_{j}.svg")
            write_scatter_svg(
                svg_path,
                [(f"true domain {j}", dataset.test[j], None),
                 (f"transferred {i} to {j}", moved.data, None)],
                title=f"Transfer {i} to {j} at step {state.step}",
                subtitle=MMD_NOTE,
            )
    by_metric = {}
    for r in rows:
        if r.metric in ("mmd2_transfer", "mse_ground_truth"):
            by_metric.setdefault(r.metric, []).append(r.value)
    for name, values in sorted(by_metric.items()):
        print(f"{name}: worst {max(values):.6g}, mean {np.mean(values):.6g}")
    print(f"plots:   {out_dir}/transfer_<i>_to_<j>.svg")
    return 0


# -------------------------------------------------------------- transfer

def _cmd_transfer(args) -> int:
    try:
        run_cfg, state = _load_model(args.checkpoint)
    except (FileNotFoundError, CheckpointError, ValueError) as exc:
        return _fail(f"--checkpoint: {exc}")
    try:
        specs, dataset = load_dataset(args.data)
    except (FileNotFoundError, ValueError) as exc:
        return _fail(f"--data: {exc}")
    m = run_cfg.m
    if not 0 <= args.source < m:
        return _fail(f"--source: index {args.source} out of range [0, {m})")
    if not 0 <= args.target < m:
        return _fail(f"--target: index {args.target} out of range [0, {m})")
    if args.source == args.target:
        return _fail("--target: must differ from --source")
    x = dataset.test[args.source] if args.split == "test" else dataset.train[args.source]
    rng = np.random.default_rng(args.seed)
    noise = rng.standard_normal((x.shape[0], run_cfg.arch.latent))
    moved, _ = transfer(state.params, args.source, args.target, x, noise)

    out_dir = os.environ.get(OUT_DIR_ENV) or args.out
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"transfer_{args.source}_to_{args.target}.csv")
    lines = ["source,target,idx,x0,x1"]
    for idx, row in enumerate(moved.data):
        lines.append(f"{args.source},{args.target},{idx},{row[0]:.17g},{row[1]:.17g}")
    atomic_write_bytes(csv_path, ("\n".join(lines) + "\n").encode())
    svg_path = os.path.join(out_dir, f"transfer_{args.source}_to_{args.target}.svg")
    write_scatter_svg(
        svg_path,
        [(f"true domain {args.target}", dataset.test[args.target], None),
         (f"transferred {args.source} to {args.target}", moved.data, None)],
        title=f"Transfer {args.source} to {args.target}",
    )
    print(csv_path)
    print(svg_path)
    return 0


# ------------------------------------------------------------ param-scale

def _cmd_param_scale(args) -> int:
    if args.m_max < args.m_min:
        return _fail("--m-max: must be >= --m-min")
    try:
        arch = ArchConfig(data_dim=args.data_dim, hidden=args.hidden,
                          latent=args.latent)
    except ValueError as exc:
        return _fail(f"--hidden/--latent/--data-dim: {exc}")
    rows = param_scale_table(arch, range(args.m_min, args.m_max + 1))
    if args.out:
        out = os.environ.get(OUT_DIR_ENV)
        path = os.path.join(out, os.path.basename(args.out)) if out else args.out
        metric_rows_to_csv(rows, path)
        print(path)
    else:
        print("model,m,param_count")
        for r in rows:
            print(f"{r.model},{r.m},{int(r.value)}")
    return 0


# ----------------------------------------------------------------- main

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointmatch",
        description="Multi-domain adversarially learned inference ensembles.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write the synthetic multi-domain dataset")
    p.add_argument("--m", type=int, required=True, help="number of domains (2..6)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--train-size", type=int, default=TRAIN_SIZE_DEFAULT)
    p.add_argument("--test-size", type=int, default=TEST_SIZE_DEFAULT)
    p.add_argument("--paired", action="store_true",
                   help="push one base sample through every domain map")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", help="train an ensemble from a JSON run config")
    p.add_argument("--config", required=True, help="path to the run config JSON")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="metrics and transfer plots for a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset directory (gen-data or a run's data/)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0, help="seed for evaluation noise")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("transfer", help="map one domain's samples to another domain")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--source", type=int, required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_transfer)

    p = sub.add_parser("param-scale", help="analytic parameter-count table")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--latent", type=int, default=8)
    p.add_argument("--data-dim", type=int, default=2)
    p.add_argument("--m-min", type=int, default=2)
    p.add_argument("--m-max", type=int, default=6)
    p.add_argument("--out", help="write CSV here instead of printing")
    p.set_defaults(func=_cmd_param_scale)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


def entry() -> None:
    raise SystemExit(main())
