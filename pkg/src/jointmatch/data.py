"""Synthetic multi-domain data: affine-related 2-D Gaussian mixtures.

The base domain (index 0) is a 5-component mixture with means on a radius-2
circle at angles 2*pi*k/5 and isotropic component covariance 0.2*I. Domain j
is the base pushed through an invertible affine map: rotation by j*pi/m
followed by translation (4*j, 0). Because the maps are invertible, the exact
domain-to-domain map x_j = A_j(A_i^{-1}(x_i)) is available for evaluation,
and paired datasets can be built by pushing one set of base draws through
every map.

Domain indices are 0-based everywhere, including CSV files.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AffineMap",
    "DomainSpec",
    "Dataset",
    "make_domains",
    "sample_domain",
    "sample_prior",
    "ground_truth_transfer",
    "make_dataset",
    "save_dataset",
    "load_dataset",
]

COMPONENT_COUNT = 5
COMPONENT_VAR = 0.2
MEAN_RADIUS = 2.0
DOMAIN_SPACING = 4.0
DATASET_CSV_HEADER = ["domain", "split", "idx", "x0", "x1"]
TRAIN_SIZE_DEFAULT = 2048
TEST_SIZE_DEFAULT = 1024


@dataclass(frozen=True)
class AffineMap:
    """x -> R(angle) @ x + translation, with exact inverse."""

    angle: float
    translation: tuple

    @property
    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        return np.array([[c, -s], [s, c]])

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return x @ self.matrix.T + np.asarray(self.translation)

    def invert(self) -> "AffineMap":
        rt = self.matrix.T
        t = -rt @ np.asarray(self.translation)
        return AffineMap(-self.angle, (float(t[0]), float(t[1])))


@dataclass(frozen=True)
class DomainSpec:
    """One Gaussian-mixture domain plus the affine map from the base domain."""

    index: int
    means: np.ndarray
    component_var: float
    weights: np.ndarray
    affine: AffineMap

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64)
        weights = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)
        if means.ndim != 2 or means.shape[1] != 2:
            raise ValueError(f"means must have shape (k, 2), got {means.shape}")
        if weights.shape != (means.shape[0],):
            raise ValueError("weights must match the number of components")
        if not np.isclose(weights.sum(), 1.0, atol=1e-12):
            raise ValueError(f"component weights must sum to 1, got {weights.sum()!r}")
        if self.component_var <= 0:
            raise ValueError("component_var must be positive")

    @property
    def k(self) -> int:
        return self.means.shape[0]


def make_domains(m: int, seed: int = 0) -> list:
    """Deterministic layout of m affine-related mixture domains, m in 2..6."""
    if not isinstance(m, (int, np.integer)) or not 2 <= m <= 6:
        raise ValueError(f"domain count m must be an int in 2..6, got {m!r}")
    angles = 2.0 * np.pi * np.arange(COMPONENT_COUNT) / COMPONENT_COUNT
    base_means = MEAN_RADIUS * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    weights = np.full(COMPONENT_COUNT, 1.0 / COMPONENT_COUNT)
    specs = []
    for j in range(m):
        affine = AffineMap(angle=j * np.pi / m, translation=(DOMAIN_SPACING * j, 0.0))
        specs.append(DomainSpec(
            index=j,
            means=affine.apply(base_means),
            component_var=COMPONENT_VAR,
            weights=weights,
            affine=affine,
        ))
    return specs


def _rng_of(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _draw_mixture(rng, means, var, weights, n):
    # draw order: component indices first, then one (n, 2) normal block
    comps = rng.choice(len(weights), size=n, p=weights)
    noise = rng.standard_normal((n, 2))
    return means[comps] + np.sqrt(var) * noise


def sample_domain(spec: DomainSpec, n: int, seed) -> np.ndarray:
    """n draws from one domain: uniform component, then isotropic noise."""
    if n < 0:
        raise ValueError(f"sample size must be >= 0, got {n}")
    rng = _rng_of(seed)
    return _draw_mixture(rng, spec.means, spec.component_var, spec.weights, n)


def sample_prior(latent: int, n: int, seed) -> np.ndarray:
    """n standard-normal feature draws of dimension `latent`."""
    if latent < 1:
        raise ValueError(f"latent dimension must be >= 1, got {latent}")
    rng = _rng_of(seed)
    return rng.standard_normal((n, latent))


def ground_truth_transfer(specs, i: int, j: int, x: np.ndarray) -> np.ndarray:
    """Exact domain-i-to-domain-j map through the base domain."""
    m = len(specs)
    for idx, name in ((i, "source"), (j, "target")):
        if not 0 <= idx < m:
            raise ValueError(f"ground_truth_transfer: {name} index {idx} out of range [0, {m})")
    base = specs[i].affine.invert().apply(x)
    return specs[j].affine.apply(base)


@dataclass
class Dataset:
    """Per-domain train/test arrays; `paired` means rows correspond across domains."""

    train: list
    test: list
    paired: bool

    def __post_init__(self):
        if len(self.train) != len(self.test) or not self.train:
            raise ValueError("train and test must list one array per domain")
        if self.paired:
            if len({a.shape[0] for a in self.train}) != 1 or len({a.shape[0] for a in self.test}) != 1:
                raise ValueError("paired datasets need equal row counts across domains")

    @property
    def m(self) -> int:
        return len(self.train)


def make_dataset(specs, seed, train_size: int = TRAIN_SIZE_DEFAULT,
                 test_size: int = TEST_SIZE_DEFAULT, paired: bool = True) -> Dataset:
    """Sample a dataset for every domain.

    Paired: one set of base-domain draws (train components, train noise, test
    components, test noise, in that order) pushed through every domain's
    affine map, so row k of domain j is exactly AffineMap_j(base row k).
    Unpaired: domains are sampled independently in ascending domain order
    (train then test per domain) from the same stream.
    """
    specs = list(specs)
    rng = _rng_of(seed)
    if paired:
        base = specs[0]
        inverse = specs[0].affine.invert()
        base_means = inverse.apply(base.means)
        train_base = _draw_mixture(rng, base_means, base.component_var, base.weights, train_size)
        test_base = _draw_mixture(rng, base_means, base.component_var, base.weights, test_size)
        train = [s.affine.apply(train_base) for s in specs]
        test = [s.affine.apply(test_base) for s in specs]
    else:
        train, test = [], []
        for s in specs:
            train.append(_draw_mixture(rng, s.means, s.component_var, s.weights, train_size))
            test.append(_draw_mixture(rng, s.means, s.component_var, s.weights, test_size))
    return Dataset(train=train, test=test, paired=paired)


# ---------------------------------------------------------------- files

def _spec_to_dict(spec: DomainSpec) -> dict:
    return {
        "index": spec.index,
        "means": [[float(v) for v in row] for row in spec.means],
        "component_var": float(spec.component_var),
        "weights": [float(w) for w in spec.weights],
        "affine": {
            "angle": float(spec.affine.angle),
            "translation": [float(v) for v in spec.affine.translation],
        },
    }


def _spec_from_dict(d: dict) -> DomainSpec:
    affine = AffineMap(angle=float(d["affine"]["angle"]),
                       translation=tuple(float(v) for v in d["affine"]["translation"]))
    return DomainSpec(
        index=int(d["index"]),
        means=np.asarray(d["means"], dtype=np.float64),
        component_var=float(d["component_var"]),
        weights=np.asarray(d["weights"], dtype=np.float64),
        affine=affine,
    )


def save_dataset(out_dir: str, specs, dataset: Dataset, seed: int | None = None) -> list:
    """Write one CSV per domain plus a manifest.json; returns file paths.

    CSV columns: domain,split,idx,x0,x1 with floats at 17 significant digits.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for i in range(dataset.m):
        path = os.path.join(out_dir, f"domain_{i}.csv")
        rows = [",".join(DATASET_CSV_HEADER)]
        for split, block in (("train", dataset.train[i]), ("test", dataset.test[i])):
            for idx, row in enumerate(block):
                rows.append(f"{i},{split},{idx},{row[0]:.17g},{row[1]:.17g}")
        payload = ("\n".join(rows) + "\n").encode()
        _atomic_write_bytes(path, payload)
        written.append(path)
    manifest = {
        "m": dataset.m,
        "paired": dataset.paired,
        "train_size": int(dataset.train[0].shape[0]),
        "test_size": int(dataset.test[0].shape[0]),
        "seed": seed,
        "domains": [_spec_to_dict(s) for s in specs],
    }
    manifest_path = os.path.join(out_dir, "manifest.json")
    _atomic_write_bytes(manifest_path, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    written.append(manifest_path)
    return written


def load_dataset(data_dir: str):
    """Read back what save_dataset wrote. Returns (specs, dataset)."""
    manifest_path = os.path.join(data_dir, "manifest.json")
    if not os.path.isfile(manifest_path):
        raise FileNotFoundError(f"dataset manifest not found: {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    specs = [_spec_from_dict(d) for d in manifest["domains"]]
    train, test = [], []
    for i in range(int(manifest["m"])):
        path = os.path.join(data_dir, f"domain_{i}.csv")
        if not os.path.isfile(path):
            raise FileNotFoundError(f"dataset file not found: {path}")
        blocks = {"train": [], "test": []}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != DATASET_CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {header!r}")
            for row in reader:
                blocks[row[1]].append((float(row[3]), float(row[4])))
        train.append(np.asarray(blocks["train"], dtype=np.float64))
        test.append(np.asarray(blocks["test"], dtype=np.float64))
    dataset = Dataset(train=train, test=test, paired=bool(manifest["paired"]))
    return specs, dataset


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)
