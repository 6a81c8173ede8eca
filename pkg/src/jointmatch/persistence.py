"""Run configuration files, checkpoints, and loss-history CSVs.

Run configs are JSON with a fixed, fully validated key schema (unknown keys
are rejected at every level). Checkpoints are a versioned binary container:
a magic line, a JSON text header (format version, config, config digest,
step, RNG state, array directory), then raw little-endian float64 blocks.
Loads refuse unknown format versions and, on resume, configs whose digest
differs from the checkpoint's. All writes go through a temp file plus rename.

Config key schema (see also the README):

    m              int, 2..6        number of domains
    seed           int              single seed for data, init, and training
    out_dir        str              output directory (env override: JOINTMATCH_OUT_DIR)
    arch.data_dim  int >= 1         data dimension (default 2)
    arch.hidden    int >= 1         MLP hidden width (default 64)
    arch.latent    int >= 1         feature dimension (default 8)
    arch.sigma     float >= 0       encoder noise scale (default 0.01)
    arch.share_latent_layers bool   share feature-adjacent layers (default false)
    objective.gamma        float in [0, 1]   mixture-vs-ALI blend (default 0.5)
    objective.beta         float >= 0        regularizer weight (default 1.0)
    objective.pi           list or null      donor weights, sum 1 (default null = uniform)
    objective.mode         "unsupervised" | "supervised"
    objective.norm         "l1" | "l2"       (default "l2")
    objective.clamp_eps    float in (0, .5)  critic clamp (default 1e-7)
    objective.feature_cycle "per_pair" | "per_domain"
    train.steps            int >= 0          generator updates
    train.batch_size       int >= 1          (default 128)
    train.critic_steps     int >= 1          critic updates per step (default 1)
    train.lr_gen           float > 0         (default 1e-4)
    train.lr_critic        float > 0         (default 1e-4)
    train.beta1 train.beta2 float in [0,1)   Adam (defaults 0.5, 0.999)
    train.eps              float > 0         Adam epsilon (default 1e-8)
    train.eval_every       int >= 1          history cadence (default 100)
    train.checkpoint_every int >= 0          0 = final checkpoint only
    data.train_size        int >= 1          rows per domain (default 2048)
    data.test_size         int >= 1          rows per domain (default 1024)
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np

from .losses import ObjectiveConfig
from .nets import ArchConfig, EnsembleParams
from .training import TrainConfig, TrainState, init_train_state

__all__ = [
    "RunConfig",
    "CheckpointError",
    "run_config_from_dict",
    "run_config_to_dict",
    "load_run_config",
    "config_digest",
    "save_checkpoint",
    "load_checkpoint",
    "restore_train_state",
    "write_history_csv",
    "atomic_write_bytes",
    "OUT_DIR_ENV",
    "CHECKPOINT_FORMAT_VERSION",
]

OUT_DIR_ENV = "JOINTMATCH_OUT_DIR"
CHECKPOINT_MAGIC = b"JMCHK"
CHECKPOINT_FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Checkpoint file is unreadable, wrong version, or config-mismatched."""


@dataclass(frozen=True)
class RunConfig:
    m: int
    seed: int
    out_dir: str
    arch: ArchConfig
    objective: ObjectiveConfig
    train: TrainConfig
    train_size: int = 2048
    test_size: int = 1024


def _take(section: dict, where: str, known: dict) -> dict:
    """Pop known keys with type coercion; reject unknown keys."""
    unknown = sorted(set(section) - set(known))
    if unknown:
        raise ValueError(f"unknown config key '{where}.{unknown[0]}'"
                         if where else f"unknown config key '{unknown[0]}'")
    out = {}
    for key, (kind, required, default) in known.items():
        label = f"{where}.{key}" if where else key
        if key not in section:
            if required:
                raise ValueError(f"missing config key '{label}'")
            out[key] = default
            continue
        value = section[key]
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ValueError(f"config key '{label}' must be an integer, got {value!r}")
        elif kind == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"config key '{label}' must be a number, got {value!r}")
            value = float(value)
        elif kind == "str":
            if not isinstance(value, str):
                raise ValueError(f"config key '{label}' must be a string, got {value!r}")
        elif kind == "bool":
            if not isinstance(value, bool):
                raise ValueError(f"config key '{label}' must be a boolean, got {value!r}")
        elif kind == "pi":
            if value is not None:
                if not isinstance(value, list) or not all(
                    isinstance(p, (int, float)) and not isinstance(p, bool) for p in value
                ):
                    raise ValueError(f"config key '{label}' must be null or a list of numbers")
                value = tuple(float(p) for p in value)
        out[key] = value
    return out


def run_config_from_dict(raw: dict, config_path: str | None = None) -> RunConfig:
    """Validate a parsed config dict; raises ValueError naming the bad key."""
    if not isinstance(raw, dict):
        raise ValueError("config root must be a JSON object")
    top = _take(raw, "", {
        "m": ("int", True, None),
        "seed": ("int", True, None),
        "out_dir": ("str", True, None),
        "arch": ("section", False, {}),
        "objective": ("section", False, {}),
        "train": ("section", True, None),
        "data": ("section", False, {}),
    })
    if not 2 <= top["m"] <= 6:
        raise ValueError(f"config key 'm' must be in 2..6, got {top['m']}")
    for name in ("arch", "objective", "train", "data"):
        if top[name] is not None and not isinstance(top[name], dict):
            raise ValueError(f"config key '{name}' must be an object")

    arch_kw = _take(top["arch"], "arch", {
        "data_dim": ("int", False, 2),
        "hidden": ("int", False, 64),
        "latent": ("int", False, 8),
        "sigma": ("float", False, 0.01),
        "share_latent_layers": ("bool", False, False),
    })
    obj_kw = _take(top["objective"], "objective", {
        "gamma": ("float", False, 0.5),
        "beta": ("float", False, 1.0),
        "pi": ("pi", False, None),
        "mode": ("str", False, "unsupervised"),
        "norm": ("str", False, "l2"),
        "clamp_eps": ("float", False, 1e-7),
        "feature_cycle": ("str", False, "per_pair"),
    })
    train_kw = _take(top["train"], "train", {
        "steps": ("int", True, None),
        "batch_size": ("int", False, 128),
        "critic_steps": ("int", False, 1),
        "lr_gen": ("float", False, 1e-4),
        "lr_critic": ("float", False, 1e-4),
        "beta1": ("float", False, 0.5),
        "beta2": ("float", False, 0.999),
        "eps": ("float", False, 1e-8),
        "eval_every": ("int", False, 100),
        "checkpoint_every": ("int", False, 0),
    })
    data_kw = _take(top["data"], "data", {
        "train_size": ("int", False, 2048),
        "test_size": ("int", False, 1024),
    })
    for key, value in data_kw.items():
        if value < 1:
            raise ValueError(f"config key 'data.{key}' must be >= 1, got {value}")
    try:
        arch = ArchConfig(**arch_kw)
        objective = ObjectiveConfig(**obj_kw)
        train = TrainConfig(**train_kw)
    except ValueError as exc:
        raise ValueError(f"invalid config value: {exc}") from exc
    if objective.pi is not None and len(objective.pi) != top["m"]:
        raise ValueError(
            f"config key 'objective.pi' has {len(objective.pi)} entries for m={top['m']}"
        )
    out_dir = os.environ.get(OUT_DIR_ENV) or top["out_dir"]
    if config_path is not None and not os.path.isabs(out_dir):
        out_dir = os.path.join(os.path.dirname(os.path.abspath(config_path)), out_dir)
    return RunConfig(m=top["m"], seed=top["seed"], out_dir=out_dir,
                     arch=arch, objective=objective, train=train,
                     train_size=data_kw["train_size"], test_size=data_kw["test_size"])


def load_run_config(path: str) -> RunConfig:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {path} is not valid JSON: {exc}") from exc
    return run_config_from_dict(raw, config_path=path)


def run_config_to_dict(cfg: RunConfig) -> dict:
    return {
        "m": cfg.m,
        "seed": cfg.seed,
        "out_dir": cfg.out_dir,
        "arch": {
            "data_dim": cfg.arch.data_dim,
            "hidden": cfg.arch.hidden,
            "latent": cfg.arch.latent,
            "sigma": cfg.arch.sigma,
            "share_latent_layers": cfg.arch.share_latent_layers,
        },
        "objective": {
            "gamma": cfg.objective.gamma,
            "beta": cfg.objective.beta,
            "pi": list(cfg.objective.pi) if cfg.objective.pi is not None else None,
            "mode": cfg.objective.mode,
            "norm": cfg.objective.norm,
            "clamp_eps": cfg.objective.clamp_eps,
            "feature_cycle": cfg.objective.feature_cycle,
        },
        "train": {
            "steps": cfg.train.steps,
            "batch_size": cfg.train.batch_size,
            "critic_steps": cfg.train.critic_steps,
            "lr_gen": cfg.train.lr_gen,
            "lr_critic": cfg.train.lr_critic,
            "beta1": cfg.train.beta1,
            "beta2": cfg.train.beta2,
            "eps": cfg.train.eps,
            "eval_every": cfg.train.eval_every,
            "checkpoint_every": cfg.train.checkpoint_every,
        },
        "data": {"train_size": cfg.train_size, "test_size": cfg.test_size},
    }


def config_digest(cfg: RunConfig) -> str:
    """sha256 over the canonical config JSON, ignoring out_dir.

    out_dir does not change the computation, so moving a run's outputs must
    not block resuming it.
    """
    payload = run_config_to_dict(cfg)
    payload.pop("out_dir")
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def atomic_write_bytes(path: str, payload: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


# ------------------------------------------------------------ checkpoints

def _rng_state_to_json(rng: np.random.Generator) -> dict:
    return json.loads(json.dumps(rng.bit_generator.state))


def _rng_from_state(state: dict) -> np.random.Generator:
    bitgen_name = state.get("bit_generator")
    if bitgen_name != "PCG64":
        raise CheckpointError(f"unsupported RNG in checkpoint: {bitgen_name!r}")
    bitgen = np.random.PCG64()
    bitgen.state = state
    return np.random.Generator(bitgen)


def save_checkpoint(path: str, state: TrainState, run_cfg: RunConfig) -> None:
    """Serialize the full train state; atomic, deterministic bytes."""
    arrays = []
    blobs = []

    def put(name: str, arr: np.ndarray) -> None:
        data = np.ascontiguousarray(arr, dtype=np.float64)
        arrays.append({"name": name, "shape": list(data.shape)})
        blobs.append(data.astype("<f8", copy=False).tobytes())

    for name, t in state.params.named_parameters():
        put(f"param/{name}", t.data)
    for group, opt in (("gen", state.gen_opt), ("critic", state.critic_opt)):
        for moment in ("m", "v"):
            store = getattr(opt, moment)
            for name in store:
                put(f"adam_{group}/{moment}/{name}", store[name])

    header = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": run_config_to_dict(run_cfg),
        "config_digest": config_digest(run_cfg),
        "step": state.step,
        "adam_steps": {"gen": state.gen_opt.step, "critic": state.critic_opt.step},
        "rng_state": _rng_state_to_json(state.rng),
        "arrays": arrays,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [
        CHECKPOINT_MAGIC + b" %d\n" % CHECKPOINT_FORMAT_VERSION,
        b"%d\n" % len(header_bytes),
        header_bytes,
        b"\n",
    ]
    parts.extend(blobs)
    atomic_write_bytes(path, b"".join(parts))


@dataclass
class Checkpoint:
    format_version: int
    config: dict
    config_digest: str
    step: int
    adam_steps: dict
    rng_state: dict
    arrays: dict


def load_checkpoint(path: str) -> Checkpoint:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        blob = fh.read()
    newline = blob.find(b"\n")
    if newline < 0 or not blob.startswith(CHECKPOINT_MAGIC + b" "):
        raise CheckpointError(f"{path}: not a checkpoint container (bad magic)")
    try:
        version = int(blob[len(CHECKPOINT_MAGIC) + 1:newline])
    except ValueError as exc:
        raise CheckpointError(f"{path}: unreadable format version") from exc
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version} is not supported by this build "
            f"(expected {CHECKPOINT_FORMAT_VERSION}); re-run training or use a "
            "matching build to migrate"
        )
    rest = blob[newline + 1:]
    newline2 = rest.find(b"\n")
    try:
        header_len = int(rest[:newline2])
        header = json.loads(rest[newline2 + 1:newline2 + 1 + header_len])
    except (ValueError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupted header ({exc})") from exc
    offset = newline2 + 1 + header_len + 1
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(int(d) for d in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * 8
        chunk = rest[offset:offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: truncated array block for {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(rest):
        raise CheckpointError(f"{path}: {len(rest) - offset} trailing bytes")
    return Checkpoint(
        format_version=version,
        config=header["config"],
        config_digest=header["config_digest"],
        step=int(header["step"]),
        adam_steps=header["adam_steps"],
        rng_state=header["rng_state"],
        arrays=arrays,
    )


def restore_train_state(ckpt: Checkpoint, run_cfg: RunConfig) -> TrainState:
    """Rebuild a TrainState; refuses when the config digest does not match."""
    digest = config_digest(run_cfg)
    if digest != ckpt.config_digest:
        raise CheckpointError(
            "config digest mismatch: checkpoint was written with "
            f"{ckpt.config_digest[:12]}..., current config is {digest[:12]}...; "
            "resume needs the identical run config"
        )
    throwaway = np.random.default_rng(0)
    params = EnsembleParams.build(run_cfg.m, run_cfg.arch, throwaway)
    values = {}
    for key, arr in ckpt.arrays.items():
        if key.startswith("param/"):
            values[key[len("param/"):]] = arr
    params.load_values(values)
    state = init_train_state(params, _rng_from_state(ckpt.rng_state))
    state.step = ckpt.step
    state.gen_opt.step = int(ckpt.adam_steps["gen"])
    state.critic_opt.step = int(ckpt.adam_steps["critic"])
    for group, opt in (("gen", state.gen_opt), ("critic", state.critic_opt)):
        for moment in ("m", "v"):
            store = getattr(opt, moment)
            for name in list(store):
                key = f"adam_{group}/{moment}/{name}"
                if key not in ckpt.arrays:
                    raise CheckpointError(f"checkpoint missing array {key}")
                if ckpt.arrays[key].shape != store[name].shape:
                    raise CheckpointError(f"checkpoint array {key} has wrong shape")
                store[name] = ckpt.arrays[key].copy()
    return state


# ------------------------------------------------------------- history

def write_history_csv(path: str, columns, rows, carried=()) -> None:
    """Loss history with floats at 17 significant digits (lossless for f64).

    carried: pre-rendered data lines from an interrupted run, inserted
    verbatim between the header and the new rows.
    """
    lines = ["step," + ",".join(columns)]
    lines.extend(carried)
    for step, report in rows:
        values = report.row(columns)
        rendered = [f"{v:.17g}" if v is not None else "" for v in values]
        lines.append(f"{step}," + ",".join(rendered))
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())
