"""Config schema, checkpoint container, and history CSV."""

import json
import os

import numpy as np
import pytest

from conftest import tiny_arch
from jointmatch.data import make_dataset, make_domains
from jointmatch.losses import LossReport, ObjectiveConfig
from jointmatch.nets import ArchConfig, EnsembleParams
from jointmatch.persistence import (CHECKPOINT_FORMAT_VERSION, OUT_DIR_ENV,
                                    CheckpointError, atomic_write_bytes,
                                    config_digest, load_checkpoint,
                                    load_run_config, restore_train_state,
                                    run_config_from_dict, run_config_to_dict,
                                    save_checkpoint, write_history_csv)
from jointmatch.training import TrainConfig, init_train_state, train

MINIMAL = {"m": 2, "seed": 1, "out_dir": "/tmp/run", "train": {"steps": 10}}


def minimal(**overrides) -> dict:
    raw = json.loads(json.dumps(MINIMAL))
    raw.update(overrides)
    return raw


# --------------------------------------------------------------- config

def test_minimal_config_fills_documented_defaults():
    cfg = run_config_from_dict(minimal())
    assert cfg.m == 2 and cfg.seed == 1 and cfg.out_dir == "/tmp/run"
    assert cfg.arch == ArchConfig()
    assert cfg.objective == ObjectiveConfig()
    assert cfg.train == TrainConfig(steps=10)
    assert (cfg.train_size, cfg.test_size) == (2048, 1024)


def test_unknown_keys_are_named_at_every_level():
    with pytest.raises(ValueError, match="unknown config key 'bogus'"):
        run_config_from_dict(minimal(bogus=1))
    with pytest.raises(ValueError, match="unknown config key 'arch.widht'"):
        run_config_from_dict(minimal(arch={"widht": 3}))
    with pytest.raises(ValueError, match="unknown config key 'train.step'"):
        run_config_from_dict(minimal(train={"steps": 1, "step": 2}))


def test_missing_required_keys_are_named():
    raw = minimal()
    del raw["seed"]
    with pytest.raises(ValueError, match="missing config key 'seed'"):
        run_config_from_dict(raw)
    with pytest.raises(ValueError, match="missing config key 'train.steps'"):
        run_config_from_dict(minimal(train={}))
    raw = minimal()
    del raw["train"]
    with pytest.raises(ValueError, match="missing config key 'train'"):
        run_config_from_dict(raw)


def test_type_errors_are_specific():
    with pytest.raises(ValueError, match="'m' must be an integer"):
        run_config_from_dict(minimal(m=2.0))
    with pytest.raises(ValueError, match="'m' must be an integer"):
        run_config_from_dict(minimal(m=True))
    with pytest.raises(ValueError, match="'out_dir' must be a string"):
        run_config_from_dict(minimal(out_dir=3))
    with pytest.raises(ValueError, match="'arch.share_latent_layers' must be a boolean"):
        run_config_from_dict(minimal(arch={"share_latent_layers": 1}))
    with pytest.raises(ValueError, match="'objective.pi' must be null or a list"):
        run_config_from_dict(minimal(objective={"pi": "uniform"}))


def test_m_range_and_pi_length_checks():
    with pytest.raises(ValueError, match="'m' must be in 2..6"):
        run_config_from_dict(minimal(m=1))
    with pytest.raises(ValueError, match="'m' must be in 2..6"):
        run_config_from_dict(minimal(m=7))
    with pytest.raises(ValueError, match="'objective.pi' has 3 entries for m=2"):
        run_config_from_dict(minimal(objective={"pi": [0.2, 0.3, 0.5]}))


def test_invalid_values_bubble_with_context():
    with pytest.raises(ValueError, match="invalid config value: gamma"):
        run_config_from_dict(minimal(objective={"gamma": 1.5}))
    with pytest.raises(ValueError, match="invalid config value: batch_size"):
        run_config_from_dict(minimal(train={"steps": 1, "batch_size": 0}))
    with pytest.raises(ValueError, match="'data.train_size' must be >= 1"):
        run_config_from_dict(minimal(data={"train_size": 0}))


def test_out_dir_env_override_and_relative_resolution(monkeypatch, tmp_path):
    monkeypatch.setenv(OUT_DIR_ENV, str(tmp_path / "elsewhere"))
    cfg = run_config_from_dict(minimal())
    assert cfg.out_dir == str(tmp_path / "elsewhere")
    monkeypatch.delenv(OUT_DIR_ENV)

    cfg_file = tmp_path / "sub" / "run.json"
    cfg_file.parent.mkdir()
    cfg_file.write_text(json.dumps(minimal(out_dir="runs/a")))
    cfg = load_run_config(str(cfg_file))
    assert cfg.out_dir == str(tmp_path / "sub" / "runs" / "a")


def test_load_run_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_run_config(str(tmp_path / "nope.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValueError, match="not valid JSON"):
        load_run_config(str(bad))


def test_config_dict_round_trip_and_digest():
    cfg = run_config_from_dict(minimal(
        objective={"gamma": 0.25, "pi": [0.75, 0.25], "mode": "supervised"},
        arch={"hidden": 32},
    ))
    again = run_config_from_dict(run_config_to_dict(cfg))
    assert again == cfg

    moved = run_config_from_dict(minimal(out_dir="/somewhere/else"))
    base = run_config_from_dict(minimal())
    assert config_digest(moved) == config_digest(base)
    reseeded = run_config_from_dict(minimal(seed=2))
    assert config_digest(reseeded) != config_digest(base)


# ---------------------------------------------------------- checkpoints

def trained_state(tmp_path, steps=3):
    raw = minimal(out_dir=str(tmp_path),
                  arch={"data_dim": 2, "hidden": 5, "latent": 3},
                  train={"steps": steps, "batch_size": 8},
                  data={"train_size": 64, "test_size": 16})
    cfg = run_config_from_dict(raw)
    rng = np.random.default_rng(cfg.seed)
    specs = make_domains(cfg.m)
    ds = make_dataset(specs, rng, train_size=cfg.train_size,
                      test_size=cfg.test_size, paired=False)
    state = init_train_state(EnsembleParams.build(cfg.m, cfg.arch, rng), rng)
    train(state, ds, cfg.objective, cfg.train)
    return cfg, ds, state


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    cfg, ds, state = trained_state(tmp_path)
    path = str(tmp_path / "ck.bin")
    save_checkpoint(path, state, cfg)
    restored = restore_train_state(load_checkpoint(path), cfg)

    assert restored.step == state.step
    assert restored.gen_opt.step == state.gen_opt.step
    assert restored.critic_opt.step == state.critic_opt.step
    assert restored.rng.bit_generator.state == state.rng.bit_generator.state
    for (name_a, a), (name_b, b) in zip(state.params.named_parameters(),
                                        restored.params.named_parameters()):
        assert name_a == name_b
        assert np.array_equal(a.data, b.data)
    for opt_a, opt_b in ((state.gen_opt, restored.gen_opt),
                         (state.critic_opt, restored.critic_opt)):
        for moment in ("m", "v"):
            store_a, store_b = getattr(opt_a, moment), getattr(opt_b, moment)
            assert store_a.keys() == store_b.keys()
            for key in store_a:
                assert np.array_equal(store_a[key], store_b[key])


def test_resumed_training_continues_bit_exactly(tmp_path):
    cfg, ds, state = trained_state(tmp_path, steps=3)
    path = str(tmp_path / "ck.bin")
    save_checkpoint(path, state, cfg)

    longer = TrainConfig(steps=6, batch_size=8)
    train(state, ds, cfg.objective, longer)

    restored = restore_train_state(load_checkpoint(path), cfg)
    train(restored, ds, cfg.objective, longer)
    for (name, a), (_, b) in zip(state.params.named_parameters(),
                                 restored.params.named_parameters()):
        assert np.array_equal(a.data, b.data), name


def test_checkpoint_bytes_are_deterministic(tmp_path):
    cfg, _, state = trained_state(tmp_path)
    p1, p2 = str(tmp_path / "a.bin"), str(tmp_path / "b.bin")
    save_checkpoint(p1, state, cfg)
    save_checkpoint(p2, state, cfg)
    assert open(p1, "rb").read() == open(p2, "rb").read()


def test_restore_refuses_mismatched_config_but_not_moved_out_dir(tmp_path):
    cfg, _, state = trained_state(tmp_path)
    path = str(tmp_path / "ck.bin")
    save_checkpoint(path, state, cfg)
    ckpt = load_checkpoint(path)

    changed = run_config_from_dict({**run_config_to_dict(cfg), "seed": 99})
    with pytest.raises(CheckpointError, match="digest mismatch"):
        restore_train_state(ckpt, changed)

    moved = run_config_from_dict({**run_config_to_dict(cfg),
                                  "out_dir": str(tmp_path / "moved")})
    restored = restore_train_state(ckpt, moved)
    assert restored.step == state.step


def test_checkpoint_container_corruption_errors(tmp_path):
    cfg, _, state = trained_state(tmp_path)
    path = str(tmp_path / "ck.bin")
    save_checkpoint(path, state, cfg)
    blob = open(path, "rb").read()

    def rewrite(payload: bytes) -> str:
        out = str(tmp_path / "bad.bin")
        atomic_write_bytes(out, payload)
        return out

    with pytest.raises(CheckpointError, match="bad magic"):
        load_checkpoint(rewrite(b"XX" + blob[2:]))
    with pytest.raises(CheckpointError, match="format version 2 is not supported"):
        load_checkpoint(rewrite(blob.replace(b"JMCHK 1\n", b"JMCHK 2\n", 1)))
    with pytest.raises(CheckpointError, match="truncated array block"):
        load_checkpoint(rewrite(blob[:-16]))
    with pytest.raises(CheckpointError, match="trailing bytes"):
        load_checkpoint(rewrite(blob + b"XTRA"))
    with pytest.raises(CheckpointError, match="corrupted header"):
        load_checkpoint(rewrite(b"JMCHK 1\n5\nnotjs\n"))
    with pytest.raises(FileNotFoundError):
        load_checkpoint(str(tmp_path / "missing.bin"))


def test_restore_rejects_missing_or_misshapen_arrays(tmp_path):
    cfg, _, state = trained_state(tmp_path)
    path = str(tmp_path / "ck.bin")
    save_checkpoint(path, state, cfg)

    ckpt = load_checkpoint(path)
    victim = next(k for k in ckpt.arrays if k.startswith("adam_gen/m/"))
    del ckpt.arrays[victim]
    with pytest.raises(CheckpointError, match="missing array"):
        restore_train_state(ckpt, cfg)

    ckpt = load_checkpoint(path)
    victim = next(k for k in ckpt.arrays if k.startswith("adam_critic/v/"))
    ckpt.arrays[victim] = np.zeros((1, 1))
    with pytest.raises(CheckpointError, match="wrong shape"):
        restore_train_state(ckpt, cfg)

    ckpt = load_checkpoint(path)
    ckpt.rng_state = {"bit_generator": "MT19937"}
    with pytest.raises(CheckpointError, match="unsupported RNG"):
        restore_train_state(ckpt, cfg)


# -------------------------------------------------------------- history

def test_history_csv_format_and_precision(tmp_path):
    columns = ["generator_total", "critic_total", "ali_0", "never_computed"]
    value = 1.0 / 3.0
    rows = [
        (100, LossReport(terms={"ali_0": value}, generator_total=-2.5,
                         critic_total=2.5)),
        (200, LossReport(terms={}, generator_total=None, critic_total=0.125)),
    ]
    path = str(tmp_path / "history.csv")
    write_history_csv(path, columns, rows)
    lines = open(path).read().splitlines()
    assert lines[0] == "step,generator_total,critic_total,ali_0,never_computed"
    first = lines[1].split(",")
    assert first[0] == "100"
    assert float(first[3]) == value  # 17 significant digits round-trips f64
    assert lines[2].split(",") == ["200", "", "0.125", "", ""]
    assert open(path).read().endswith("\n")
