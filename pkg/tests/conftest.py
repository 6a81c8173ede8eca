"""Shared helpers: finite-difference gradient checking and tiny builders.

The gradient checker uses central differences with step 1e-5 and accepts an
analytic/numeric pair when |a - f| <= 1e-4 * max(1, |a|, |f|). The absolute
floor covers relu kink crossings, whose worst-case central-difference error
at this step size is orders of magnitude below the floor.
"""

from __future__ import annotations

import numpy as np
import pytest

from jointmatch.autodiff import Tensor, backward
from jointmatch.nets import ArchConfig, EnsembleParams

FD_STEP = 1e-5
FD_TOL = 1e-4


def fd_agrees(analytic: float, numeric: float, tol: float = FD_TOL) -> bool:
    return abs(analytic - numeric) <= tol * max(1.0, abs(analytic), abs(numeric))


def gradcheck(build_loss, leaves, step: float = FD_STEP, tol: float = FD_TOL,
              max_entries: int | None = None, rng=None) -> None:
    """Compare backward() gradients of a scalar against central differences.

    build_loss() must return a fresh scalar Tensor computed from the current
    .data of every leaf, with no randomness of its own. Perturbs every entry
    of every leaf (or a random subset of max_entries per leaf).
    """
    root = build_loss()
    assert root.shape == (), f"gradcheck needs a scalar root, got {root.shape}"
    backward(root, leaves=leaves)
    grads = [leaf.grad.copy() for leaf in leaves]

    for leaf, grad in zip(leaves, grads):
        flat = leaf.data.reshape(-1)
        idxs = range(flat.size)
        if max_entries is not None and flat.size > max_entries:
            assert rng is not None
            idxs = rng.choice(flat.size, size=max_entries, replace=False)
        gflat = grad.reshape(-1)
        for k in idxs:
            orig = flat[k]
            flat[k] = orig + step
            hi = build_loss().data.item()
            flat[k] = orig - step
            lo = build_loss().data.item()
            flat[k] = orig
            numeric = (hi - lo) / (2.0 * step)
            analytic = gflat[k]
            assert fd_agrees(analytic, numeric, tol), (
                f"grad mismatch at entry {k}: analytic {analytic!r} vs "
                f"central difference {numeric!r}")


def tiny_arch(data_dim: int = 2, hidden: int = 5, latent: int = 3,
              sigma: float = 0.01, share: bool = False) -> ArchConfig:
    return ArchConfig(data_dim=data_dim, hidden=hidden, latent=latent,
                      sigma=sigma, share_latent_layers=share)


def tiny_params(m: int = 2, seed: int = 0, **arch_kwargs) -> EnsembleParams:
    rng = np.random.default_rng(seed)
    return EnsembleParams.build(m, tiny_arch(**arch_kwargs), rng)


def generic_params(m: int = 2, seed: int = 0, **arch_kwargs) -> EnsembleParams:
    """Tiny ensemble with biases moved off zero, for gradient checking.

    Fresh builds keep biases at exactly 0, where a fully dead relu row makes
    the next layer's pre-activation exactly 0 too. That puts the whole
    function on a relu kink: backward returns a one-sided subgradient while
    central differences average the two sides, and the two legitimately
    disagree. Nonzero biases keep every pre-activation away from 0 so the
    check runs at a differentiable point.
    """
    params = tiny_params(m, seed, **arch_kwargs)
    rng = np.random.default_rng(seed + 90001)
    for name, t in params.named_parameters():
        if "_b" in name:
            t.data = rng.uniform(-0.4, 0.4, size=t.data.shape)
    return params


def np_sigmoid(x: np.ndarray) -> np.ndarray:
    t = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))


def np_mlp(layers, x: np.ndarray, out_activation: str = "identity") -> np.ndarray:
    """Straight-line numpy forward pass mirroring nets.MLP."""
    h = np.asarray(x, dtype=np.float64)
    for idx, (w, b) in enumerate(layers):
        h = h @ w + b
        if idx < len(layers) - 1:
            h = np.maximum(h, 0.0)
    if out_activation == "sigmoid":
        h = np_sigmoid(h)
    return h


def mlp_values(mlp) -> list:
    return [(w.data, b.data) for w, b in mlp.layers]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
