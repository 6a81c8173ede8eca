"""Training losses for the adversarial ensemble.

Sign convention: `ali_loss` and `domain_mixture_loss` are the quantities the
critics ascend and the encoders/decoders descend. `full_objective` combines
them into A = (1 - gamma) * sum_i ali_i + gamma * sum_i mixture_i and returns

    generator_loss = A + beta * regularizer   (descended over encoders/decoders)
    critic_loss    = -A                       (descended over critics)

The regularizer never appears in the critic loss, so its gradients cannot
touch critic parameters.

Stochastic encodes draw caller-supplied noise; reconstruction-side encodes
(the comparison leg inside a norm) use the encoder mean, which is the exact
negative-log-likelihood surrogate for a fixed-variance Gaussian encoder.

Norms: "l2" is the squared Euclidean norm per row, "l1" the absolute sum per
row, both averaged over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .ensemble import transfer
from .nets import EnsembleParams, decode, encode, encode_mean, criticize, _wrap_batch

__all__ = [
    "ObjectiveConfig",
    "LossReport",
    "NonFiniteLossError",
    "ali_loss",
    "domain_mixture_loss",
    "condition_loss",
    "cycle_loss_data",
    "cycle_loss_feature",
    "cycle_loss_cross",
    "regularizer",
    "full_objective",
    "report_columns",
]

MODES = ("unsupervised", "supervised")
NORMS = ("l1", "l2")
FEATURE_CYCLE_MODES = ("per_pair", "per_domain")


class NonFiniteLossError(ArithmeticError):
    """A loss value left the finite floats."""


@dataclass(frozen=True)
class ObjectiveConfig:
    """Weights and modes of the full objective.

    gamma blends the per-domain ALI losses against the domain-mixture losses;
    beta scales the consistency regularizer; pi are the donor-domain mixture
    weights (None = uniform). feature_cycle controls whether the feature
    round-trip penalty is added once per ordered pair or once per domain.
    """

    gamma: float = 0.5
    beta: float = 1.0
    pi: tuple | None = None
    mode: str = "unsupervised"
    norm: str = "l2"
    clamp_eps: float = 1e-7
    feature_cycle: str = "per_pair"

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma!r}")
        if not self.beta >= 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if not 0.0 < self.clamp_eps < 0.5:
            raise ValueError(f"clamp_eps must be in (0, 0.5), got {self.clamp_eps!r}")
        if self.feature_cycle not in FEATURE_CYCLE_MODES:
            raise ValueError(
                f"feature_cycle must be one of {FEATURE_CYCLE_MODES}, got {self.feature_cycle!r}"
            )
        if self.pi is not None:
            pi = tuple(float(p) for p in self.pi)
            object.__setattr__(self, "pi", pi)
            if any(p < 0.0 for p in pi):
                raise ValueError(f"pi entries must be >= 0, got {pi}")
            total = float(np.sum(pi))
            if abs(total - 1.0) > 1e-12:
                raise ValueError(f"pi must sum to 1 within 1e-12, got {total!r}")

    def mixture_weights(self, m: int) -> np.ndarray:
        if self.pi is None:
            return np.full(m, 1.0 / m)
        if len(self.pi) != m:
            raise ValueError(f"pi has {len(self.pi)} entries for {m} domains")
        return np.asarray(self.pi)


@dataclass
class LossReport:
    """Scalar values of every computed term, keyed by canonical column name."""

    terms: dict
    generator_total: float | None
    critic_total: float

    def row(self, columns) -> list:
        out = []
        for name in columns:
            if name == "generator_total":
                out.append(self.generator_total)
            elif name == "critic_total":
                out.append(self.critic_total)
            else:
                out.append(self.terms.get(name))
        return out


def report_columns(m: int, cfg: ObjectiveConfig) -> list:
    """Stable column order for loss-history rows under this config."""
    cols = [f"ali_{i}" for i in range(m)] if cfg.gamma < 1.0 else []
    if cfg.gamma > 0.0:
        cols += [f"mixture_{i}" for i in range(m)]
    if cfg.beta > 0.0:
        pair_term = "condition" if cfg.mode == "supervised" else "cycle_data"
        for i in range(m):
            for j in range(m):
                if i == j:
                    continue
                cols.append(f"{pair_term}_{i}_{j}")
                if cfg.feature_cycle == "per_pair":
                    cols.append(f"cycle_feature_{i}_{j}")
                cols.append(f"cycle_cross_{i}_{j}")
        if cfg.feature_cycle == "per_domain":
            cols += [f"cycle_feature_{i}" for i in range(m)]
    cols += ["generator_total", "critic_total"]
    return cols


def _require_finite(name: str, t: Tensor) -> Tensor:
    if not np.all(np.isfinite(t.data)):
        raise NonFiniteLossError(f"{name}: non-finite value {t.data!r}")
    return t


def _mean_norm(diff: Tensor, norm: str) -> Tensor:
    """Mean over the batch of per-row norms (l2 = squared Euclidean)."""
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {NORMS}, got {norm!r}")
    n = diff.shape[0]
    total = diff.square().sum() if norm == "l2" else diff.abs().sum()
    return total.mul(1.0 / n)


def _noise_like(x, latent: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0] if hasattr(x, "shape") else len(x)
    return rng.standard_normal((n, latent))


def ali_loss(params: EnsembleParams, i: int, x, z_prior, noise,
             clamp_eps: float = 1e-7) -> Tensor:
    """Adversarially learned inference value for one domain.

    E[log f(x, encode(x))] + E[log(1 - f(decode(z), z))] with z from the
    prior batch. A constant 0.5 critic gives exactly -2 ln 2.
    """
    xt = _wrap_batch(x, params.arch.data_dim, "ali_loss data batch")
    zt = _wrap_batch(z_prior, params.arch.latent, "ali_loss prior batch")
    z_hat = encode(params, i, xt, noise)
    real = criticize(params, i, xt, z_hat, clamp_eps).log().mean()
    x_hat = decode(params, i, zt)
    fake = (1.0 - criticize(params, i, x_hat, zt, clamp_eps)).log().mean()
    return _require_finite(f"ali_loss[{i}]", real.add(fake))


def domain_mixture_loss(params: EnsembleParams, i: int, x_i, donor_batches,
                        noise, donor_noises, cfg: ObjectiveConfig) -> Tensor:
    """Adversarial value where critic i's fakes come from every donor domain.

    E[log f_i(x_i, encode_i(x_i))]
      + sum_j pi_j E[log(1 - f_i(decode_i(z_j), z_j))],  z_j = encode_j(x_j).

    The donor sum includes j = i. Each fake pair hands the critic the same
    feature sample the decode consumed.
    """
    m = params.m
    if len(donor_batches) != m or len(donor_noises) != m:
        raise ValueError(
            f"domain_mixture_loss: need one donor batch and noise per domain "
            f"({m}), got {len(donor_batches)} and {len(donor_noises)}"
        )
    pi = cfg.mixture_weights(m)
    xt = _wrap_batch(x_i, params.arch.data_dim, "domain_mixture_loss data batch")
    z_hat = encode(params, i, xt, noise)
    value = criticize(params, i, xt, z_hat, cfg.clamp_eps).log().mean()
    for j in range(m):
        z_j = encode(params, j, donor_batches[j], donor_noises[j])
        fake = decode(params, i, z_j)
        term = (1.0 - criticize(params, i, fake, z_j, cfg.clamp_eps)).log().mean()
        value = value.add(term.mul(float(pi[j])))
    return _require_finite(f"domain_mixture_loss[{i}]", value)


def condition_loss(params: EnsembleParams, i: int, j: int, x_i, x_j, noise,
                   cfg: ObjectiveConfig) -> Tensor:
    """Supervised pairing penalty: reconstruct x_i from its paired x_j."""
    if cfg.mode != "supervised":
        raise ValueError("condition_loss needs cfg.mode == 'supervised' (paired data)")
    xt_i = _wrap_batch(x_i, params.arch.data_dim, "condition_loss x_i")
    z = encode(params, j, x_j, noise)
    recon = decode(params, i, z)
    return _require_finite(f"condition_loss[{i},{j}]",
                           _mean_norm(xt_i.sub(recon), cfg.norm))


def cycle_loss_data(params: EnsembleParams, i: int, j: int, x_i, noise,
                    cfg: ObjectiveConfig) -> Tensor:
    """Unsupervised data round trip i -> j -> i.

    The outbound leg uses a stochastic encode (noise); the return leg uses
    the encoder mean of the transferred batch.
    """
    if i == j:
        raise ValueError(f"cycle_loss_data: i == j == {i}; the round trip needs two domains")
    xt_i = _wrap_batch(x_i, params.arch.data_dim, "cycle_loss_data x_i")
    x_hat_j, _ = transfer(params, i, j, xt_i, noise)
    recon = decode(params, i, encode_mean(params, j, x_hat_j))
    return _require_finite(f"cycle_loss_data[{i},{j}]",
                           _mean_norm(xt_i.sub(recon), cfg.norm))


def cycle_loss_feature(params: EnsembleParams, i: int, z, cfg: ObjectiveConfig) -> Tensor:
    """Feature round trip z -> decode_i -> encode_i mean -> compare to z."""
    zt = _wrap_batch(z, params.arch.latent, "cycle_loss_feature z")
    z_back = encode_mean(params, i, decode(params, i, zt))
    return _require_finite(f"cycle_loss_feature[{i}]",
                           _mean_norm(zt.sub(z_back), cfg.norm))


def cycle_loss_cross(params: EnsembleParams, i: int, j: int, z,
                     cfg: ObjectiveConfig) -> Tensor:
    """Two decodes of one feature must stay consistent across the i leg.

    decode_j(z) is compared with decode_j(encode_i mean(decode_i(z))).
    """
    zt = _wrap_batch(z, params.arch.latent, "cycle_loss_cross z")
    x_hat_i = decode(params, i, zt)
    x_hat_j = decode(params, j, zt)
    recon = decode(params, j, encode_mean(params, i, x_hat_i))
    return _require_finite(f"cycle_loss_cross[{i},{j}]",
                           _mean_norm(x_hat_j.sub(recon), cfg.norm))


def regularizer(params: EnsembleParams, batches, prior_batch, cfg: ObjectiveConfig,
                rng: np.random.Generator):
    """Sum of consistency terms over ordered domain pairs.

    Supervised: condition + feature cycle + cross cycle per pair (batches
    must be row-paired). Unsupervised: data cycle + feature cycle + cross
    cycle per pair. With feature_cycle == "per_domain" the feature term is
    added once per domain instead of once per pair.

    Draw order: ordered pairs (i, j), i != j, ascending lexicographic; one
    (batch, latent) standard-normal array per pair, consumed by the
    condition encode (supervised) or the outbound transfer (unsupervised).

    Returns (total, {column name: float}).
    """
    m = params.m
    if len(batches) != m:
        raise ValueError(f"regularizer: need one batch per domain ({m}), got {len(batches)}")
    latent = params.arch.latent
    supervised = cfg.mode == "supervised"
    total = None
    terms = {}

    def _accumulate(key, tensor):
        nonlocal total
        terms[key] = tensor.item()
        total = tensor if total is None else total.add(tensor)

    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            eps = _noise_like(batches[i], latent, rng)
            if supervised:
                _accumulate(f"condition_{i}_{j}",
                            condition_loss(params, i, j, batches[i], batches[j], eps, cfg))
            else:
                _accumulate(f"cycle_data_{i}_{j}",
                            cycle_loss_data(params, i, j, batches[i], eps, cfg))
            if cfg.feature_cycle == "per_pair":
                _accumulate(f"cycle_feature_{i}_{j}",
                            cycle_loss_feature(params, i, prior_batch, cfg))
            _accumulate(f"cycle_cross_{i}_{j}",
                        cycle_loss_cross(params, i, j, prior_batch, cfg))
    if cfg.feature_cycle == "per_domain":
        for i in range(m):
            _accumulate(f"cycle_feature_{i}",
                        cycle_loss_feature(params, i, prior_batch, cfg))
    if total is None:
        raise ValueError("regularizer: need at least two domains")
    return _require_finite("regularizer", total), terms


def full_objective(params: EnsembleParams, batches, prior_batch,
                   cfg: ObjectiveConfig, rng: np.random.Generator,
                   with_regularizer: bool = True):
    """Build both sides of the minimax objective from one batch set.

    Returns (generator_loss, critic_loss, LossReport). Only terms with
    nonzero weight are computed, and only computed terms draw noise. Draw
    order: (1) if gamma < 1, one ALI encoder noise per domain ascending;
    (2) if gamma > 0, per domain ascending: the real-pair noise, then one
    donor noise per donor domain ascending; (3) if beta > 0 and
    with_regularizer, the regularizer pair draws.
    """
    m = params.m
    if len(batches) != m:
        raise ValueError(f"full_objective: need one batch per domain ({m}), got {len(batches)}")
    latent = params.arch.latent
    terms = {}
    adv = None

    if cfg.gamma < 1.0:
        ali_sum = None
        for i in range(m):
            eps = _noise_like(batches[i], latent, rng)
            term = ali_loss(params, i, batches[i], prior_batch, eps, cfg.clamp_eps)
            terms[f"ali_{i}"] = term.item()
            ali_sum = term if ali_sum is None else ali_sum.add(term)
        adv = ali_sum.mul(1.0 - cfg.gamma)
    if cfg.gamma > 0.0:
        mix_sum = None
        for i in range(m):
            eps = _noise_like(batches[i], latent, rng)
            donor_eps = [_noise_like(batches[j], latent, rng) for j in range(m)]
            term = domain_mixture_loss(params, i, batches[i], batches, eps, donor_eps, cfg)
            terms[f"mixture_{i}"] = term.item()
            mix_sum = term if mix_sum is None else mix_sum.add(term)
        weighted = mix_sum.mul(cfg.gamma)
        adv = weighted if adv is None else adv.add(weighted)

    critic_loss = adv.mul(-1.0)
    generator_loss = adv
    if with_regularizer and cfg.beta > 0.0:
        reg, reg_terms = regularizer(params, batches, prior_batch, cfg, rng)
        terms.update(reg_terms)
        generator_loss = adv.add(reg.mul(cfg.beta))

    _require_finite("full_objective generator side", generator_loss)
    _require_finite("full_objective critic side", critic_loss)
    report = LossReport(terms=terms,
                        generator_total=generator_loss.item(),
                        critic_total=critic_loss.item())
    return generator_loss, critic_loss, report
