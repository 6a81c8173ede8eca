"""Trainer: Adam oracle, phase wiring, resume continuity, failure paths."""

import numpy as np
import pytest

from conftest import tiny_arch, tiny_params
from jointmatch.autodiff import Tensor, backward
from jointmatch.data import Dataset, make_dataset, make_domains
from jointmatch.losses import (NonFiniteLossError, ObjectiveConfig, ali_loss,
                               report_columns)
from jointmatch.nets import EnsembleParams
from jointmatch.training import (AdamState, TrainConfig, TrainSink, TrainState,
                                 adam_step, init_train_state, train)


def snapshot(params):
    return {name: t.data.copy() for name, t in params.named_parameters()}


def assert_same_params(params, snap, *, exact=True):
    current = snapshot(params)
    assert current.keys() == snap.keys()
    for name in snap:
        if exact:
            assert np.array_equal(current[name], snap[name]), name
        else:
            np.testing.assert_allclose(current[name], snap[name], atol=1e-12, rtol=0)


# ----------------------------------------------------------------- Adam

def test_adam_step_matches_hand_formula():
    w = Tensor(np.array([[1.0, -2.0]]))
    w.grad = np.array([[0.5, -1.5]])
    named = [("w", w)]
    st = AdamState(named)
    lr, b1, b2, eps = 0.1, 0.9, 0.999, 1e-8

    m = np.zeros((1, 2))
    v = np.zeros((1, 2))
    data = np.array([[1.0, -2.0]])
    for t, grad in enumerate((np.array([[0.5, -1.5]]), np.array([[-0.25, 4.0]])), start=1):
        w.grad = grad
        adam_step(named, st, lr, b1, b2, eps)
        m = m * b1 + (1.0 - b1) * grad
        v = v * b2 + (1.0 - b2) * (grad * grad)
        c1 = 1.0 - b1 ** t
        c2 = 1.0 - b2 ** t
        data = data - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        assert np.array_equal(w.data, data)
    assert st.step == 2


def test_adam_first_step_moves_by_almost_lr():
    # bias correction: the first update is lr * g / (|g| + eps), near lr
    w = Tensor(np.array([10.0]))
    w.grad = np.array([1e-6])
    st = AdamState([("w", w)])
    adam_step([("w", w)], st, 0.05, 0.9, 0.999, 1e-8)
    assert w.data[0] == pytest.approx(10.0 - 0.05 * 1e-6 / (1e-6 + 1e-8), abs=1e-12)


def test_adam_step_rejects_missing_and_nonfinite_grads():
    w = Tensor(np.ones(3))
    st = AdamState([("w", w)])
    with pytest.raises(ValueError, match="no gradient"):
        adam_step([("w", w)], st, 0.1, 0.9, 0.999, 1e-8)
    w.grad = np.array([1.0, np.nan, 0.0])
    with pytest.raises(ValueError, match="non-finite"):
        adam_step([("w", w)], st, 0.1, 0.9, 0.999, 1e-8)


def test_train_config_validation():
    with pytest.raises(ValueError, match="steps"):
        TrainConfig(steps=-1)
    with pytest.raises(ValueError, match="batch_size"):
        TrainConfig(steps=1, batch_size=0)
    with pytest.raises(ValueError, match="critic_steps"):
        TrainConfig(steps=1, critic_steps=0)
    with pytest.raises(ValueError, match="lr_gen"):
        TrainConfig(steps=1, lr_gen=0.0)
    with pytest.raises(ValueError, match="beta1"):
        TrainConfig(steps=1, beta1=1.0)
    with pytest.raises(ValueError, match="eval_every"):
        TrainConfig(steps=1, eval_every=0)
    with pytest.raises(ValueError, match="checkpoint_every"):
        TrainConfig(steps=1, checkpoint_every=-1)


def test_init_train_state_accumulators_cover_the_right_groups():
    params = tiny_params(m=2, seed=1)
    state = init_train_state(params, np.random.default_rng(0))
    gen_names = {name for name, _ in params.generator_parameters()}
    critic_names = {name for name, _ in params.critic_parameters()}
    assert set(state.gen_opt.m) == gen_names
    assert set(state.critic_opt.m) == critic_names
    assert all(np.all(a == 0.0) for a in state.gen_opt.m.values())
    assert all(np.all(a == 0.0) for a in state.critic_opt.v.values())
    assert state.step == 0


# -------------------------------------------------------------- train()

def small_run(m=2, seed=0, paired=False, train_size=64, test_size=16):
    specs = make_domains(m)
    ds = make_dataset(specs, seed=seed, train_size=train_size,
                      test_size=test_size, paired=paired)
    params = tiny_params(m=m, seed=seed)
    state = init_train_state(params, np.random.default_rng(seed))
    return ds, state


def test_train_zero_steps_is_a_no_op():
    ds, state = small_run()
    before = snapshot(state.params)
    history = train(state, ds, ObjectiveConfig(beta=0.0), TrainConfig(steps=0))
    assert history == []
    assert state.step == 0
    assert_same_params(state.params, before)


def test_train_moves_both_parameter_groups():
    ds, state = small_run()
    before = snapshot(state.params)
    train(state, ds, ObjectiveConfig(), TrainConfig(steps=3, batch_size=16))
    after = snapshot(state.params)
    gen_names = [name for name, _ in state.params.generator_parameters()]
    critic_names = [name for name, _ in state.params.critic_parameters()]
    assert any(not np.array_equal(after[n], before[n]) for n in gen_names)
    assert any(not np.array_equal(after[n], before[n]) for n in critic_names)
    assert state.step == 3
    assert state.gen_opt.step == 3
    assert state.critic_opt.step == 3


def test_train_critic_steps_multiplies_critic_updates_only():
    ds, state = small_run()
    train(state, ds, ObjectiveConfig(beta=0.0),
          TrainConfig(steps=4, batch_size=16, critic_steps=3))
    assert state.gen_opt.step == 4
    assert state.critic_opt.step == 12


def test_train_resume_is_bit_identical_to_one_run():
    ds, state_a = small_run(seed=7)
    train(state_a, ds, ObjectiveConfig(), TrainConfig(steps=6, batch_size=16))

    ds_b, state_b = small_run(seed=7)
    train(state_b, ds_b, ObjectiveConfig(), TrainConfig(steps=3, batch_size=16))
    assert state_b.step == 3
    train(state_b, ds_b, ObjectiveConfig(), TrainConfig(steps=6, batch_size=16))

    assert state_b.step == 6
    assert_same_params(state_b.params, snapshot(state_a.params))
    assert state_a.rng.bit_generator.state == state_b.rng.bit_generator.state


def test_train_reruns_are_bit_identical():
    results = []
    for _ in range(2):
        ds, state = small_run(seed=3)
        history = train(state, ds, ObjectiveConfig(),
                        TrainConfig(steps=5, batch_size=8, eval_every=2))
        results.append((snapshot(state.params), [(s, r.critic_total) for s, r in history]))
    assert results[0][1] == results[1][1]
    for name in results[0][0]:
        assert np.array_equal(results[0][0][name], results[1][0][name])


def test_train_history_and_sink_schedule():
    class Recorder(TrainSink):
        def __init__(self):
            self.evals = []
            self.checkpoints = []

        def on_eval(self, step, report):
            self.evals.append(step)

        def on_checkpoint(self, step, state, history):
            self.checkpoints.append((step, state.step, len(history)))

    ds, state = small_run()
    sink = Recorder()
    cfg = ObjectiveConfig()
    history = train(state, ds, cfg,
                    TrainConfig(steps=10, batch_size=8, eval_every=4,
                                checkpoint_every=3),
                    sink=sink)
    assert sink.evals == [4, 8, 10]
    assert [s for s, _ in history] == [4, 8, 10]
    assert [c[0] for c in sink.checkpoints] == [3, 6, 9]
    assert all(step == live for step, live, _ in sink.checkpoints)
    columns = report_columns(state.params.m, cfg)
    for _, report in history:
        row = report.row(columns)
        assert all(v is not None and np.isfinite(v) for v in row)


def test_train_supervised_requires_paired_dataset_and_vice_versa():
    ds_unpaired, state = small_run(paired=False)
    with pytest.raises(ValueError, match="paired"):
        train(state, ds_unpaired, ObjectiveConfig(mode="supervised"),
              TrainConfig(steps=1))
    ds_paired, state = small_run(paired=True)
    with pytest.raises(ValueError, match="unpaired"):
        train(state, ds_paired, ObjectiveConfig(mode="unsupervised"),
              TrainConfig(steps=1))


def test_train_rejects_bad_pi_length_before_any_update():
    ds, state = small_run()
    before = snapshot(state.params)
    with pytest.raises(ValueError, match="pi has"):
        train(state, ds, ObjectiveConfig(pi=(0.2, 0.3, 0.5)), TrainConfig(steps=2))
    assert_same_params(state.params, before)


def test_train_raises_on_nonfinite_loss():
    ds, state = small_run()
    name, tensor = state.params.named_parameters()[0]
    tensor.data[0, 0] = np.nan
    with pytest.raises(NonFiniteLossError):
        train(state, ds, ObjectiveConfig(), TrainConfig(steps=1))


# ------------------------------------------- straight-line trainer mirror

def test_single_domain_ali_training_matches_inline_trainer():
    """train() with m=1, gamma=0, beta=0 is plain single-domain ALI.

    The mirror below re-implements the whole loop straight-line: batch
    sampling, prior and encoder-noise draws, both phases, and Adam. Every
    array it produces must equal the trainer's bit for bit.
    """
    arch = tiny_arch()
    rng_data = np.random.default_rng(42)
    x_train = rng_data.standard_normal((96, arch.data_dim))
    x_test = rng_data.standard_normal((16, arch.data_dim))
    ds = Dataset(train=[x_train], test=[x_test], paired=False)
    cfg = ObjectiveConfig(gamma=0.0, beta=0.0)
    tc = TrainConfig(steps=4, batch_size=12, lr_gen=1e-3, lr_critic=2e-3)

    params = EnsembleParams.build(1, arch, np.random.default_rng(5))
    state = init_train_state(params, np.random.default_rng(6))
    train(state, ds, cfg, tc)

    mirror = EnsembleParams.build(1, arch, np.random.default_rng(5))
    rng = np.random.default_rng(6)
    leaves = mirror.parameter_tensors()
    gen_named = mirror.generator_parameters()
    critic_named = mirror.critic_parameters()
    opt = {
        "gen": {"t": 0,
                "m": {n: np.zeros_like(p.data) for n, p in gen_named},
                "v": {n: np.zeros_like(p.data) for n, p in gen_named}},
        "critic": {"t": 0,
                   "m": {n: np.zeros_like(p.data) for n, p in critic_named},
                   "v": {n: np.zeros_like(p.data) for n, p in critic_named}},
    }

    def inline_adam(named, st, lr):
        st["t"] += 1
        c1 = 1.0 - tc.beta1 ** st["t"]
        c2 = 1.0 - tc.beta2 ** st["t"]
        for n, p in named:
            st["m"][n] = st["m"][n] * tc.beta1 + (1.0 - tc.beta1) * p.grad
            st["v"][n] = st["v"][n] * tc.beta2 + (1.0 - tc.beta2) * (p.grad * p.grad)
            p.data -= lr * (st["m"][n] / c1) / (np.sqrt(st["v"][n] / c2) + tc.eps)

    for _ in range(tc.steps):
        idx = rng.integers(0, x_train.shape[0], size=tc.batch_size)
        xb = x_train[idx]
        prior = rng.standard_normal((tc.batch_size, arch.latent))
        eps = rng.standard_normal((tc.batch_size, arch.latent))
        value = ali_loss(mirror, 0, xb, prior, eps).mul(1.0)
        mirror.zero_grads()
        backward(value.mul(-1.0), leaves)
        inline_adam(critic_named, opt["critic"], tc.lr_critic)

        eps = rng.standard_normal((tc.batch_size, arch.latent))
        value = ali_loss(mirror, 0, xb, prior, eps).mul(1.0)
        mirror.zero_grads()
        backward(value, leaves)
        inline_adam(gen_named, opt["gen"], tc.lr_gen)

    assert_same_params(state.params, snapshot(mirror))
    assert state.rng.bit_generator.state == rng.bit_generator.state


def test_unsupervised_batches_draw_per_domain_in_ascending_order():
    # consume the stream the way train() documents, then confirm positions
    ds, state = small_run(m=3, seed=9)
    rng_mirror = np.random.default_rng(9)
    n = ds.train[0].shape[0]
    for block in ds.train:
        rng_mirror.integers(0, block.shape[0], size=4)
    prior_mirror = rng_mirror.standard_normal((4, state.params.arch.latent))

    rng = np.random.default_rng(9)
    from jointmatch.training import _sample_batches
    batches = _sample_batches(ds, 4, False, rng)
    prior = rng.standard_normal((4, state.params.arch.latent))
    assert len(batches) == 3
    assert np.array_equal(prior, prior_mirror)

    rng_sup = np.random.default_rng(9)
    idx = rng_sup.integers(0, n, size=4)
    paired_ds, _ = small_run(m=2, seed=9, paired=True)
    rng_sup2 = np.random.default_rng(9)
    sup = _sample_batches(paired_ds, 4, True, rng_sup2)
    assert np.array_equal(sup[0], paired_ds.train[0][idx])
    assert np.array_equal(sup[1], paired_ds.train[1][idx])
