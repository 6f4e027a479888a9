"""Synthetic perception data for concept-bottleneck tasks.

Each concept bit is rendered into its own block of ``d`` pixels: the block
sits at ``-separation/2`` for a 0 and ``+separation/2`` for a 1, plus a
style term ``U @ s`` and i.i.d. Gaussian pixel noise. ``U`` is drawn once
per dataset and has zero mean inside every block, so style never moves a
block's mean and the nearest-prototype decoder inverts noiseless renders
exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .logic import Program, concept_to_index
from .shortcuts import Support


@dataclass(frozen=True)
class SceneSpec:
    k: int = 2
    style_dim: int = 2
    pixels_per_bit: int = 8
    separation: float = 2.0
    noise_sigma: float = 0.25
    style_scale: float = 0.5

    def __post_init__(self):
        if self.separation <= 0:
            raise ValueError("separation must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.pixels_per_bit < 1:
            raise ValueError("pixels_per_bit must be at least 1")
        if self.style_dim < 0:
            raise ValueError("style_dim must be non-negative")

    @property
    def input_dim(self) -> int:
        return self.k * self.pixels_per_bit


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    g: tuple
    y: int


@dataclass
class Dataset:
    """Columnar samples: ``x`` is ``(n, k*d)``, ``g`` is ``(n, k)``, ``y`` is ``(n,)``."""

    spec: SceneSpec
    x: np.ndarray
    g: np.ndarray
    y: np.ndarray

    def __len__(self) -> int:
        return len(self.y)

    def __getitem__(self, i: int) -> Sample:
        return Sample(self.x[i], tuple(int(b) for b in self.g[i]), int(self.y[i]))

    def subset(self, index) -> "Dataset":
        return Dataset(self.spec, self.x[index], self.g[index], self.y[index])

    def split(self, n_first: int) -> tuple["Dataset", "Dataset"]:
        """Disjoint index split: ``[0, n_first)`` and ``[n_first, n)``."""
        if not 0 < n_first < len(self):
            raise ValueError("split point must leave both parts non-empty")
        return self.subset(slice(0, n_first)), self.subset(slice(n_first, None))


def _style_basis(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    u = rng.normal(size=(spec.k, spec.pixels_per_bit, spec.style_dim))
    u -= u.mean(axis=1, keepdims=True)
    return spec.style_scale * u.reshape(spec.input_dim, spec.style_dim)


def render(spec: SceneSpec, g: np.ndarray, s: np.ndarray, basis: np.ndarray,
           noise: Optional[np.ndarray] = None) -> np.ndarray:
    proto = (np.asarray(g, dtype=float) - 0.5) * spec.separation  # (n, k)
    x = np.repeat(proto, spec.pixels_per_bit, axis=1) + s @ basis.T
    if noise is not None:
        x = x + noise
    return x


def generate_dataset(spec: SceneSpec, p: Program, support: Support, n: int, seed: int) -> Dataset:
    if n < 1:
        raise ValueError("n must be at least 1")
    if len(support) == 0:
        raise ValueError("empty support")
    if support.k != spec.k or p.k != spec.k:
        raise ValueError("scene, program and support arities differ")
    rng = np.random.default_rng(seed)
    basis = _style_basis(spec, rng)
    concepts = np.array(support.concepts, dtype=int)
    pick = rng.choice(len(concepts), size=n, p=support.probabilities())
    g = concepts[pick]
    s = rng.normal(size=(n, spec.style_dim))
    noise = spec.noise_sigma * rng.normal(size=(n, spec.input_dim))
    x = render(spec, g, s, basis, noise)
    y = np.array([p.table[concept_to_index(row)] for row in g], dtype=int)
    return Dataset(spec, x, g, y)


def oracle_invert(spec: SceneSpec, x: np.ndarray) -> np.ndarray:
    """Nearest-prototype decoding per block; a tie decodes to 0."""
    x = np.asarray(x, dtype=float)
    blocks = x.reshape(*x.shape[:-1], spec.k, spec.pixels_per_bit)
    return (blocks.mean(axis=-1) > 0).astype(int)


def save_dataset(data: Dataset, path: Union[str, Path]) -> None:
    """CSV with ``x_0..x_{kd-1}, g, y`` plus a ``.json`` sidecar holding the scene spec."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{i}" for i in range(data.x.shape[1])] + ["g", "y"])
        for xi, gi, yi in zip(data.x, data.g, data.y):
            writer.writerow([repr(float(v)) for v in xi] + ["".join(map(str, gi)), int(yi)])
    path.with_suffix(".json").write_text(json.dumps(asdict(data.spec), indent=2))


def load_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    spec = SceneSpec(**json.loads(path.with_suffix(".json").read_text()))
    xs, gs, ys = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            xs.append([float(v) for v in row[:-2]])
            gs.append([int(ch) for ch in row[-2]])
            ys.append(int(row[-1]))
    return Dataset(spec, np.array(xs), np.array(gs, dtype=int), np.array(ys, dtype=int))
