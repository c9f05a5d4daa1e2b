"""Deterministic synthetic dataset generators.

Three regression/classification benchmarks with known relevant features
(`f1-toy`, `synthetic1`, `synthetic2`) plus a set of 2-D point-cloud
shapes used for visualizing reinforced inputs.  Labels are pure functions
of the features, so stored targets can always be re-derived from stored
coordinates; all sampling randomness lives in the feature draw.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Schema
from .exceptions import ConfigError
from .rng import substream

Array = np.ndarray

# per-kind default sample counts
DEFAULT_N = {
    "f1-toy": 7500,
    "synthetic1": 30000,
    "synthetic2": 60000,
    "gauss2d": 400,
    "two-moons": 373,
    "rings": 1000,
    "two-disks": 800,
    "dense-disk": 3000,
    "chainlink2d": 1000,
    "five-spheres": 250,
}

KINDS = tuple(DEFAULT_N)

# ground-truth relevant feature columns (0-based), where defined
RELEVANT = {
    "f1-toy": (0, 1),
    "synthetic1-low": (0, 1),   # x5 <= 0 regime
    "synthetic1-high": (2, 3),  # x5 > 0 regime
    "synthetic2": (0, 1),
}


@dataclass
class SynthResult:
    kind: str
    X: Array
    y: Array
    task: str  # binary | regression

    @property
    def feature_names(self) -> list[str]:
        return [f"x{i + 1}" for i in range(self.X.shape[1])]

    def schema(self) -> Schema:
        return Schema.numeric(self.feature_names)


# -- label functions (pure, reused by tests to re-derive targets) ----------


def f1_label(X: Array) -> Array:
    """y = 1[F1 > 0] with F1 = 5*x1 - 5*x2*1[x1 > 0]; boundary goes to 0."""
    x1, x2 = X[:, 0], X[:, 1]
    f1 = 5.0 * x1 - 5.0 * x2 * (x1 > 0.0)
    return (f1 > 0.0).astype(np.float64)


def synthetic1_target(X: Array) -> Array:
    """y = (5x1-5x2)*1[x5<=0] + (5x3-5x4)*1[x5>0]."""
    low = X[:, 4] <= 0.0
    return np.where(low, 5.0 * X[:, 0] - 5.0 * X[:, 1], 5.0 * X[:, 2] - 5.0 * X[:, 3])


def synthetic2_label(X: Array) -> Array:
    """Union of two unit disks at (-2.5, 0) and (2.5, 1.5); x3..x5 inert."""
    x1, x2 = X[:, 0], X[:, 1]
    inside = ((x1 + 2.5) ** 2 + x2**2 < 1.0) | ((x1 - 2.5) ** 2 + (x2 - 1.5) ** 2 < 1.0)
    return inside.astype(np.float64)


# -- generators -------------------------------------------------------------


def _normal_features(kind: str, n: int, seed: int, p: int) -> Array:
    return substream(seed, f"synth/{kind}").standard_normal((n, p))


def _gen_f1(n: int, seed: int, noise: float) -> SynthResult:
    X = _normal_features("f1-toy", n, seed, 2)
    return SynthResult("f1-toy", X, f1_label(X), "binary")


def _gen_synthetic1(n: int, seed: int, noise: float) -> SynthResult:
    X = _normal_features("synthetic1", n, seed, 5)
    return SynthResult("synthetic1", X, synthetic1_target(X), "regression")


def _gen_synthetic2(n: int, seed: int, noise: float) -> SynthResult:
    X = _normal_features("synthetic2", n, seed, 5)
    return SynthResult("synthetic2", X, synthetic2_label(X), "binary")


def _split_counts(n: int, parts: int) -> list[int]:
    base, rem = divmod(n, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def _gen_gauss2d(n: int, seed: int, noise: float) -> SynthResult:
    """Two linearly separable Gaussian blobs at (-2, 0) and (2, 0)."""
    rng = substream(seed, "synth/gauss2d")
    sigma = noise if noise is not None else 0.5
    n0, n1 = _split_counts(n, 2)
    pts0 = rng.normal(size=(n0, 2)) * sigma + [-2.0, 0.0]
    pts1 = rng.normal(size=(n1, 2)) * sigma + [2.0, 0.0]
    X = np.vstack([pts0, pts1])
    y = np.concatenate([np.zeros(n0), np.ones(n1)])
    return SynthResult("gauss2d", X, y, "binary")


def _gen_two_moons(n: int, seed: int, noise: float) -> SynthResult:
    """Two interleaved half circles: class 0 on the upper unit arc at the
    origin, class 1 on the lower unit arc at (1, 0.5)."""
    rng = substream(seed, "synth/two-moons")
    sigma = noise if noise is not None else 0.08
    n0, n1 = _split_counts(n, 2)
    t0 = rng.uniform(0.0, np.pi, n0)
    t1 = rng.uniform(0.0, np.pi, n1)
    pts0 = np.column_stack([np.cos(t0), np.sin(t0)])
    pts1 = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.vstack([pts0, pts1])
    if sigma > 0.0:
        X = X + rng.normal(scale=sigma, size=X.shape)
    y = np.concatenate([np.zeros(n0), np.ones(n1)])
    return SynthResult("two-moons", X, y, "binary")


def _annulus(rng, n: int, r_lo: float, r_hi: float) -> Array:
    # area-uniform radius in the band
    r = np.sqrt(rng.uniform(r_lo**2, r_hi**2, n))
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _gen_rings(n: int, seed: int, noise: float) -> SynthResult:
    """Two concentric annuli: class 1 inside radius .4-.6, class 0 at .9-1.1."""
    rng = substream(seed, "synth/rings")
    n0, n1 = _split_counts(n, 2)
    inner = _annulus(rng, n1, 0.4, 0.6)
    outer = _annulus(rng, n0, 0.9, 1.1)
    X = np.vstack([outer, inner])
    y = np.concatenate([np.zeros(n0), np.ones(n1)])
    return SynthResult("rings", X, y, "binary")


def _gen_two_disks(n: int, seed: int, noise: float) -> SynthResult:
    """Two offset filled unit disks centered at (-1.5, 0) and (1.5, 0)."""
    rng = substream(seed, "synth/two-disks")
    n0, n1 = _split_counts(n, 2)
    d0 = _annulus(rng, n0, 0.0, 1.0) + [-1.5, 0.0]
    d1 = _annulus(rng, n1, 0.0, 1.0) + [1.5, 0.0]
    X = np.vstack([d0, d1])
    y = np.concatenate([np.zeros(n0), np.ones(n1)])
    return SynthResult("two-disks", X, y, "binary")


def _gen_dense_disk(n: int, seed: int, noise: float) -> SynthResult:
    """Small dense positive disk (r <= 0.5) inside a sparse background
    annulus reaching radius 3."""
    rng = substream(seed, "synth/dense-disk")
    n0, n1 = _split_counts(n, 2)
    background = _annulus(rng, n0, 0.8, 3.0)
    dense = _annulus(rng, n1, 0.0, 0.5)
    X = np.vstack([background, dense])
    y = np.concatenate([np.zeros(n0), np.ones(n1)])
    return SynthResult("dense-disk", X, y, "binary")


def _gen_chainlink2d(n: int, seed: int, noise: float) -> SynthResult:
    """Flat projection of two interlocked rings: unit circles offset
    horizontally so they overlap like chain links."""
    rng = substream(seed, "synth/chainlink2d")
    sigma = noise if noise is not None else 0.05
    n0, n1 = _split_counts(n, 2)
    t0 = rng.uniform(0.0, 2.0 * np.pi, n0)
    t1 = rng.uniform(0.0, 2.0 * np.pi, n1)
    ring0 = np.column_stack([np.cos(t0) - 0.6, np.sin(t0)])
    ring1 = np.column_stack([np.cos(t1) + 0.6, np.sin(t1)])
    X = np.vstack([ring0, ring1])
    if sigma > 0.0:
        X = X + rng.normal(scale=sigma, size=X.shape)
    y = np.concatenate([np.zeros(n0), np.ones(n1)])
    return SynthResult("chainlink2d", X, y, "binary")


def _gen_five_spheres(n: int, seed: int, noise: float) -> SynthResult:
    """Five Gaussian blobs; the central one is the positive class."""
    rng = substream(seed, "synth/five-spheres")
    sigma = noise if noise is not None else 0.3
    centers = [(0.0, 0.0), (-2.0, -2.0), (-2.0, 2.0), (2.0, -2.0), (2.0, 2.0)]
    counts = _split_counts(n, 5)
    parts, labels = [], []
    for (cx, cy), cnt in zip(centers, counts):
        parts.append(rng.normal(scale=sigma, size=(cnt, 2)) + [cx, cy])
        labels.append(np.full(cnt, 1.0 if (cx, cy) == (0.0, 0.0) else 0.0))
    return SynthResult("five-spheres", np.vstack(parts), np.concatenate(labels), "binary")


_GENERATORS = {
    "f1-toy": _gen_f1,
    "synthetic1": _gen_synthetic1,
    "synthetic2": _gen_synthetic2,
    "gauss2d": _gen_gauss2d,
    "two-moons": _gen_two_moons,
    "rings": _gen_rings,
    "two-disks": _gen_two_disks,
    "dense-disk": _gen_dense_disk,
    "chainlink2d": _gen_chainlink2d,
    "five-spheres": _gen_five_spheres,
}


def generate(kind: str, n: int | None = None, seed: int = 0,
             noise: float | None = None) -> SynthResult:
    """Generate one dataset; same arguments give bit-identical arrays."""
    if kind not in _GENERATORS:
        raise ConfigError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
    if n is None:
        n = DEFAULT_N[kind]
    if n < 1:
        raise ConfigError(f"sample count must be >= 1, got {n}")
    return _GENERATORS[kind](int(n), seed, noise)


def write_csv(result: SynthResult, path) -> None:
    """Emit `x1..xp,y`; floats via repr so parsing returns the exact bits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(result.feature_names + ["y"]) + "\n")
        binary = result.task == "binary"
        for row, target in zip(result.X, result.y):
            cells = [repr(float(v)) for v in row]
            cells.append(str(int(target)) if binary else repr(float(target)))
            fh.write(",".join(cells) + "\n")
