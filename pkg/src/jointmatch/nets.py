"""Per-domain inference, generation, and critic networks.

Every domain i owns three two-layer MLPs sharing one feature space:

* encoder: data -> feature mean; a stochastic feature is mean + sigma * noise
  with caller-supplied standard-normal noise,
* decoder: feature -> data (deterministic),
* critic: (data, feature) -> score in (0, 1) through a sigmoid, clamped away
  from 0 and 1 so downstream logs stay finite.

With `share_latent_layers` the feature-adjacent layers (encoder output layer
and decoder input layer) are one storage shared by all domains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat

__all__ = [
    "ArchConfig",
    "MLP",
    "EnsembleParams",
    "encode",
    "encode_mean",
    "decode",
    "criticize",
    "param_count",
    "glorot_uniform",
    "identity_mlp",
    "identity_ensemble",
]

DEFAULT_CLAMP_EPS = 1e-7


@dataclass(frozen=True)
class ArchConfig:
    """Layer dimensions and encoder noise scale for one ensemble."""

    data_dim: int = 2
    hidden: int = 64
    latent: int = 8
    sigma: float = 0.01
    share_latent_layers: bool = False

    def __post_init__(self):
        for field in ("data_dim", "hidden", "latent"):
            value = getattr(self, field)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"ArchConfig.{field} must be a positive int, got {value!r}")
        if not (isinstance(self.sigma, (int, float)) and self.sigma >= 0.0):
            raise ValueError(f"ArchConfig.sigma must be >= 0, got {self.sigma!r}")
        if not isinstance(self.share_latent_layers, bool):
            raise ValueError("ArchConfig.share_latent_layers must be a bool")


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class MLP:
    """Fully connected stack: x @ W + b per layer, relu between layers.

    `out_activation` is "identity" or "sigmoid"; sigmoid is reserved for
    critics.
    """

    def __init__(self, layers, out_activation: str = "identity"):
        if out_activation not in ("identity", "sigmoid"):
            raise ValueError(f"unknown out_activation {out_activation!r}")
        self.layers = [(w, b) for w, b in layers]
        if not self.layers:
            raise ValueError("MLP needs at least one layer")
        for w, b in self.layers:
            if w.data.ndim != 2 or b.data.shape != (w.data.shape[1],):
                raise ValueError(
                    f"layer shapes do not chain: weight {w.shape}, bias {b.shape}"
                )
        for (w1, _), (w2, _) in zip(self.layers, self.layers[1:]):
            if w1.data.shape[1] != w2.data.shape[0]:
                raise ValueError(
                    f"layer shapes do not chain: {w1.shape} then {w2.shape}"
                )
        self.out_activation = out_activation

    @property
    def in_dim(self) -> int:
        return self.layers[0][0].data.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1][0].data.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        h = x
        last = len(self.layers) - 1
        for k, (w, b) in enumerate(self.layers):
            h = h.matmul(w).add(b)
            if k < last:
                h = h.relu()
        if self.out_activation == "sigmoid":
            h = h.sigmoid()
        return h

    def tensors(self):
        for w, b in self.layers:
            yield w
            yield b


def _fresh_mlp(rng, dims, out_activation="identity") -> MLP:
    layers = []
    for fan_in, fan_out in zip(dims, dims[1:]):
        w = Tensor(glorot_uniform(rng, fan_in, fan_out))
        b = Tensor(np.zeros(fan_out))
        layers.append((w, b))
    return MLP(layers, out_activation)


class EnsembleParams:
    """Encoders, decoders, and critics for every domain.

    Construction draw order (one Glorot matrix per draw; biases are zeros and
    draw nothing): domain 0 encoder layers input-to-output, decoder layers,
    critic layers; then domain 1, and so on. With `share_latent_layers` the
    shared encoder output layer and decoder input layer are drawn once inside
    domain 0 and reused by every later domain, whose draws skip them.
    """

    def __init__(self, arch: ArchConfig, encoders, decoders, critics):
        if not (len(encoders) == len(decoders) == len(critics)):
            raise ValueError("encoders, decoders, critics must have equal length")
        if len(encoders) < 1:
            raise ValueError("ensemble needs at least one domain")
        self.arch = arch
        self.encoders = list(encoders)
        self.decoders = list(decoders)
        self.critics = list(critics)

    @property
    def m(self) -> int:
        return len(self.encoders)

    @classmethod
    def build(cls, m: int, arch: ArchConfig, rng: np.random.Generator) -> "EnsembleParams":
        if m < 1:
            raise ValueError(f"domain count must be >= 1, got {m}")
        d, h, k = arch.data_dim, arch.hidden, arch.latent
        encoders, decoders, critics = [], [], []
        shared_enc_out = None
        shared_dec_in = None
        for _ in range(m):
            enc_w0 = Tensor(glorot_uniform(rng, d, h))
            enc_b0 = Tensor(np.zeros(h))
            if arch.share_latent_layers:
                if shared_enc_out is None:
                    shared_enc_out = (Tensor(glorot_uniform(rng, h, k)), Tensor(np.zeros(k)))
                enc_w1, enc_b1 = shared_enc_out
            else:
                enc_w1 = Tensor(glorot_uniform(rng, h, k))
                enc_b1 = Tensor(np.zeros(k))
            encoders.append(MLP([(enc_w0, enc_b0), (enc_w1, enc_b1)]))

            if arch.share_latent_layers:
                if shared_dec_in is None:
                    shared_dec_in = (Tensor(glorot_uniform(rng, k, h)), Tensor(np.zeros(h)))
                dec_w0, dec_b0 = shared_dec_in
            else:
                dec_w0 = Tensor(glorot_uniform(rng, k, h))
                dec_b0 = Tensor(np.zeros(h))
            dec_w1 = Tensor(glorot_uniform(rng, h, d))
            dec_b1 = Tensor(np.zeros(d))
            decoders.append(MLP([(dec_w0, dec_b0), (dec_w1, dec_b1)]))

            crit_w0 = Tensor(glorot_uniform(rng, d + k, h))
            crit_b0 = Tensor(np.zeros(h))
            crit_w1 = Tensor(glorot_uniform(rng, h, 1))
            crit_b1 = Tensor(np.zeros(1))
            critics.append(MLP([(crit_w0, crit_b0), (crit_w1, crit_b1)], "sigmoid"))
        return cls(arch, encoders, decoders, critics)

    # ------------------------------------------------------- parameters

    def _named_all(self):
        for i in range(self.m):
            for group, mlp in (("enc", self.encoders[i]),
                               ("dec", self.decoders[i]),
                               ("crit", self.critics[i])):
                for layer_idx, (w, b) in enumerate(mlp.layers):
                    yield f"{group}{i}_w{layer_idx}", w
                    yield f"{group}{i}_b{layer_idx}", b

    def named_parameters(self) -> list:
        """(name, tensor) pairs in a stable order; shared storage once."""
        out, seen = [], set()
        for name, t in self._named_all():
            if id(t) in seen:
                continue
            seen.add(id(t))
            out.append((name, t))
        return out

    def parameter_tensors(self) -> list:
        return [t for _, t in self.named_parameters()]

    def generator_parameters(self) -> list:
        return [(n, t) for n, t in self.named_parameters() if not n.startswith("crit")]

    def critic_parameters(self) -> list:
        return [(n, t) for n, t in self.named_parameters() if n.startswith("crit")]

    def zero_grads(self) -> None:
        for _, t in self.named_parameters():
            t.grad = np.zeros_like(t.data)

    def snapshot(self) -> dict:
        return {name: t.data.copy() for name, t in self.named_parameters()}

    def load_values(self, values: dict) -> None:
        named = dict(self.named_parameters())
        missing = sorted(set(named) - set(values))
        extra = sorted(set(values) - set(named))
        if missing or extra:
            raise ValueError(
                f"parameter name mismatch: missing {missing}, unexpected {extra}"
            )
        for name, t in named.items():
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(
                    f"parameter {name}: shape {arr.shape} != expected {t.data.shape}"
                )
            t.data = arr.copy()


def _check_domain(params: EnsembleParams, i: int, what: str) -> None:
    if not isinstance(i, (int, np.integer)) or not 0 <= i < params.m:
        raise ValueError(f"{what}: domain index {i!r} out of range [0, {params.m})")


def _wrap_batch(x, dim: int, what: str) -> Tensor:
    t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if t.data.ndim != 2 or t.data.shape[1] != dim:
        raise ValueError(f"{what}: expected shape (batch, {dim}), got {t.shape}")
    return t


def encode(params: EnsembleParams, i: int, x, noise) -> Tensor:
    """Stochastic feature: encoder mean plus sigma * noise.

    `noise` is a caller-drawn standard-normal array of shape (batch, latent);
    it is treated as a constant, no gradient flows through it.
    """
    _check_domain(params, i, "encode")
    xt = _wrap_batch(x, params.arch.data_dim, "encode input")
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != (xt.shape[0], params.arch.latent):
        raise ValueError(
            f"encode noise: expected shape ({xt.shape[0]}, {params.arch.latent}), "
            f"got {noise.shape}"
        )
    mean = params.encoders[i](xt)
    if params.arch.sigma == 0.0:
        return mean
    return mean.add(Tensor(params.arch.sigma * noise))


def encode_mean(params: EnsembleParams, i: int, x) -> Tensor:
    """Deterministic encoder output (the conditional mean feature)."""
    _check_domain(params, i, "encode_mean")
    xt = _wrap_batch(x, params.arch.data_dim, "encode_mean input")
    return params.encoders[i](xt)


def decode(params: EnsembleParams, j: int, z) -> Tensor:
    _check_domain(params, j, "decode")
    zt = _wrap_batch(z, params.arch.latent, "decode input")
    return params.decoders[j](zt)


def criticize(params: EnsembleParams, i: int, x, z, clamp_eps: float = DEFAULT_CLAMP_EPS) -> Tensor:
    """Critic score for (data, feature) pairs, clamped to [eps, 1 - eps]."""
    _check_domain(params, i, "criticize")
    if not 0.0 < clamp_eps < 0.5:
        raise ValueError(f"clamp_eps must be in (0, 0.5), got {clamp_eps!r}")
    xt = _wrap_batch(x, params.arch.data_dim, "criticize data input")
    zt = _wrap_batch(z, params.arch.latent, "criticize feature input")
    if xt.shape[0] != zt.shape[0]:
        raise ValueError(
            f"criticize: batch sizes differ, data {xt.shape[0]} vs feature {zt.shape[0]}"
        )
    joint = concat([xt, zt], axis=1)
    score = params.critics[i](joint)
    return score.clip(clamp_eps, 1.0 - clamp_eps)


def param_count(params: EnsembleParams) -> int:
    """Total scalar parameters; shared storage is counted once."""
    return int(sum(t.data.size for _, t in params.named_parameters()))


def identity_mlp(dim: int) -> MLP:
    """Exact identity map as a two-layer relu MLP of hidden width 2 * dim.

    Uses x = relu(x) - relu(-x) columnwise.
    """
    eye = np.eye(dim)
    w0 = Tensor(np.concatenate([eye, -eye], axis=1))
    b0 = Tensor(np.zeros(2 * dim))
    w1 = Tensor(np.concatenate([eye, -eye], axis=0))
    b1 = Tensor(np.zeros(dim))
    return MLP([(w0, b0), (w1, b1)])


def identity_ensemble(m: int, data_dim: int = 2, sigma: float = 0.01) -> EnsembleParams:
    """Ensemble whose encoders and decoders are exact identities.

    Requires latent == data_dim. Critics have all-zero weights, so every
    critic score is 0.5 before clamping. Layer shapes match
    `EnsembleParams.build` for the same ArchConfig, so checkpoints round-trip.
    """
    arch = ArchConfig(data_dim=data_dim, hidden=2 * data_dim, latent=data_dim,
                      sigma=sigma, share_latent_layers=False)
    encoders = [identity_mlp(data_dim) for _ in range(m)]
    decoders = [identity_mlp(data_dim) for _ in range(m)]
    critics = []
    for _ in range(m):
        w0 = Tensor(np.zeros((2 * data_dim, arch.hidden)))
        b0 = Tensor(np.zeros(arch.hidden))
        w1 = Tensor(np.zeros((arch.hidden, 1)))
        b1 = Tensor(np.zeros(1))
        critics.append(MLP([(w0, b0), (w1, b1)], "sigmoid"))
    return EnsembleParams(arch, encoders, decoders, critics)
