"""Cross-domain transfer through the shared feature space.

A transfer encodes once in the source domain and decodes in any number of
target domains; all targets of one call share the same stochastic feature
sample, which is what makes multi-target outputs jointly consistent rather
than just marginally plausible.
"""

from __future__ import annotations

from .autodiff import Tensor
from .nets import EnsembleParams, _check_domain, decode, encode

__all__ = ["transfer", "transfer_all", "reconstruct", "generate_from_prior"]


def transfer(params: EnsembleParams, i: int, j: int, x_i, noise):
    """Map a batch from domain i to domain j. Returns (x_hat_j, z_hat)."""
    _check_domain(params, i, "transfer source")
    _check_domain(params, j, "transfer target")
    if i == j:
        raise ValueError(
            f"transfer: source and target are both {i}; use reconstruct for a round trip"
        )
    z_hat = encode(params, i, x_i, noise)
    return decode(params, j, z_hat), z_hat


def transfer_all(params: EnsembleParams, i: int, x_i, noise):
    """Map a batch from domain i to every other domain at once.

    Returns ({j: x_hat_j for j != i}, z_hat); every target is decoded from
    the single shared feature sample z_hat.
    """
    _check_domain(params, i, "transfer_all source")
    z_hat = encode(params, i, x_i, noise)
    outputs = {j: decode(params, j, z_hat) for j in range(params.m) if j != i}
    return outputs, z_hat


def reconstruct(params: EnsembleParams, i: int, x_i, noise):
    """Encode and decode within one domain. Returns (x_hat_i, z_hat)."""
    _check_domain(params, i, "reconstruct")
    z_hat = encode(params, i, x_i, noise)
    return decode(params, i, z_hat), z_hat


def generate_from_prior(params: EnsembleParams, j: int, z) -> Tensor:
    """Decode prior feature draws into domain j."""
    return decode(params, j, z)
