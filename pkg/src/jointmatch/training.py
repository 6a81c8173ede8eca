"""Alternating minimax training with per-group Adam.

One training step is: for each of `critic_steps` sub-steps, sample batches
and a prior block, then descend critic_loss over critic parameters only;
afterwards reuse the last batches and prior for one generator update,
descending generator_loss over encoder/decoder parameters only. Graphs are
rebuilt per phase, so the generator phase sees the freshly updated critics.

RNG draw order per step (one global stream): per critic sub-step, batch
indices (one draw in supervised mode because the index block is shared;
per domain ascending otherwise), the prior block, then the noise draws of
`full_objective` without the regularizer; for the generator phase, only the
noise draws of `full_objective` with the regularizer (batches and prior are
reused).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import backward
from .data import Dataset
from .losses import LossReport, ObjectiveConfig, full_objective, report_columns
from .nets import EnsembleParams

__all__ = [
    "TrainConfig",
    "AdamState",
    "adam_step",
    "TrainState",
    "init_train_state",
    "train",
    "TrainSink",
]


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule. `steps` counts generator updates."""

    steps: int
    batch_size: int = 128
    critic_steps: int = 1
    lr_gen: float = 1e-4
    lr_critic: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    eval_every: int = 100
    checkpoint_every: int = 0

    def __post_init__(self):
        if not isinstance(self.steps, int) or self.steps < 0:
            raise ValueError(f"steps must be an int >= 0, got {self.steps!r}")
        if not isinstance(self.batch_size, int) or self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size!r}")
        if not isinstance(self.critic_steps, int) or self.critic_steps < 1:
            raise ValueError(f"critic_steps must be >= 1, got {self.critic_steps!r}")
        for name in ("lr_gen", "lr_critic", "eps"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        for name in ("beta1", "beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {getattr(self, name)!r}")
        if not isinstance(self.eval_every, int) or self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every!r}")
        if not isinstance(self.checkpoint_every, int) or self.checkpoint_every < 0:
            raise ValueError(f"checkpoint_every must be >= 0, got {self.checkpoint_every!r}")


class AdamState:
    """First/second-moment accumulators keyed by parameter name."""

    def __init__(self, named_params):
        self.step = 0
        self.m = {name: np.zeros_like(t.data) for name, t in named_params}
        self.v = {name: np.zeros_like(t.data) for name, t in named_params}


def adam_step(named_params, state: AdamState, lr: float, beta1: float,
              beta2: float, eps: float) -> None:
    """One bias-corrected Adam update, in place on the parameter data."""
    state.step += 1
    c1 = 1.0 - beta1 ** state.step
    c2 = 1.0 - beta2 ** state.step
    for name, p in named_params:
        g = p.grad
        if g is None:
            raise ValueError(f"adam_step: parameter {name} has no gradient")
        if not np.all(np.isfinite(g)):
            raise ValueError(f"adam_step: non-finite gradient for parameter {name}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


@dataclass
class TrainState:
    """Everything a checkpoint must capture to resume bit-exactly."""

    params: EnsembleParams
    gen_opt: AdamState
    critic_opt: AdamState
    rng: np.random.Generator
    step: int = 0


def init_train_state(params: EnsembleParams, rng: np.random.Generator) -> TrainState:
    return TrainState(
        params=params,
        gen_opt=AdamState(params.generator_parameters()),
        critic_opt=AdamState(params.critic_parameters()),
        rng=rng,
        step=0,
    )


class TrainSink:
    """Callback hooks; the default implementation ignores everything."""

    def on_eval(self, step: int, report: LossReport) -> None:
        pass

    def on_checkpoint(self, step: int, state: TrainState, history) -> None:
        pass


def _sample_batches(dataset: Dataset, batch_size: int, supervised: bool,
                    rng: np.random.Generator):
    if supervised:
        idx = rng.integers(0, dataset.train[0].shape[0], size=batch_size)
        return [block[idx] for block in dataset.train]
    batches = []
    for block in dataset.train:
        idx = rng.integers(0, block.shape[0], size=batch_size)
        batches.append(block[idx])
    return batches


def train(state: TrainState, dataset: Dataset, obj_cfg: ObjectiveConfig,
          train_cfg: TrainConfig, sink: TrainSink | None = None) -> list:
    """Run (or continue) training to `train_cfg.steps` generator updates.

    Returns the loss history as (step, LossReport) tuples collected at
    `eval_every`. Raises on non-finite losses or gradients; checkpoints
    already handed to the sink stay on disk.
    """
    supervised = obj_cfg.mode == "supervised"
    if supervised and not dataset.paired:
        raise ValueError("supervised mode needs a paired dataset")
    if not supervised and dataset.paired:
        raise ValueError("unsupervised mode expects an unpaired dataset")
    obj_cfg.mixture_weights(state.params.m)  # fail fast on a bad pi length
    sink = sink or TrainSink()
    params = state.params
    rng = state.rng
    latent = params.arch.latent
    leaves = params.parameter_tensors()
    gen_named = params.generator_parameters()
    critic_named = params.critic_parameters()
    history: list = []

    for step in range(state.step + 1, train_cfg.steps + 1):
        batches = prior = None
        for _ in range(train_cfg.critic_steps):
            batches = _sample_batches(dataset, train_cfg.batch_size, supervised, rng)
            prior = rng.standard_normal((train_cfg.batch_size, latent))
            _, critic_loss, _ = full_objective(params, batches, prior, obj_cfg, rng,
                                               with_regularizer=False)
            params.zero_grads()
            backward(critic_loss, leaves)
            adam_step(critic_named, state.critic_opt, train_cfg.lr_critic,
                      train_cfg.beta1, train_cfg.beta2, train_cfg.eps)
        generator_loss, _, report = full_objective(params, batches, prior, obj_cfg,
                                                   rng, with_regularizer=True)
        params.zero_grads()
        backward(generator_loss, leaves)
        adam_step(gen_named, state.gen_opt, train_cfg.lr_gen,
                  train_cfg.beta1, train_cfg.beta2, train_cfg.eps)
        state.step = step
        if step % train_cfg.eval_every == 0 or step == train_cfg.steps:
            history.append((step, report))
            sink.on_eval(step, report)
        if train_cfg.checkpoint_every and step % train_cfg.checkpoint_every == 0:
            sink.on_checkpoint(step, state, history)
    return history
