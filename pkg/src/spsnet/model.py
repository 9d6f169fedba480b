"""Linear field model sampled by a sensor network.

Each node i sits at a planar position x_i, owns a regressor vector
phi_i = phi(x_i) and takes one scalar measurement

    y_i = phi_i . p_true + w_i

with noise w_i drawn independently from a distribution symmetric about zero.
Symmetry of the noise is the only distributional assumption the confidence
region construction needs, so several noise families are provided, including
a discrete one that produces exact ties.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

NOISE_KINDS = ("gaussian", "uniform", "laplace", "two-point")
REGRESSOR_FAMILIES = ("polynomial-basis", "seeded-random")


@dataclass(frozen=True)
class NoiseSpec:
    """Symmetric measurement-noise law.

    ``scale`` is the standard deviation for ``gaussian``, the half-width for
    ``uniform``, the diversity parameter for ``laplace`` and the magnitude of
    the two support points for ``two-point`` (+scale/-scale with probability
    1/2 each). ``scale == 0`` degenerates to the noiseless model.
    """

    kind: str = "gaussian"
    scale: float = 0.1

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}, expected one of {NOISE_KINDS}")
        if not np.isfinite(self.scale) or self.scale < 0:
            raise ValueError("noise scale must be a finite non-negative real")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.scale == 0:
            return np.zeros(size)
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale, size)
        if self.kind == "uniform":
            return rng.uniform(-self.scale, self.scale, size)
        if self.kind == "laplace":
            return rng.laplace(0.0, self.scale, size)
        # two-point: +-scale with equal probability
        return self.scale * (2.0 * rng.integers(0, 2, size) - 1.0)


@dataclass(frozen=True, eq=False)
class FieldConfig:
    """Model configuration: parameter dimension, true parameter, regressor family."""

    n_p: int
    p_true: np.ndarray
    n_x: int = 2
    regressor_family: str = "polynomial-basis"
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    regressor_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p_true", np.asarray(self.p_true, dtype=float))
        if self.n_p < 1:
            raise ValueError("n_p must be at least 1")
        if self.n_x < 1:
            raise ValueError("n_x must be at least 1")
        if self.p_true.shape != (self.n_p,):
            raise ValueError(f"p_true must have shape ({self.n_p},), got {self.p_true.shape}")
        if self.regressor_family not in REGRESSOR_FAMILIES:
            raise ValueError(
                f"unknown regressor family {self.regressor_family!r}, "
                f"expected one of {REGRESSOR_FAMILIES}"
            )


@dataclass(frozen=True, eq=False)
class RegressorSample:
    """One node's (position, regressor, measurement) triple."""

    node_id: int
    position: np.ndarray
    phi: np.ndarray
    y: float

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "phi", np.asarray(self.phi, dtype=float))
        if not np.isfinite(self.y):
            raise ValueError("measurement must be finite")
        if not np.all(np.isfinite(self.phi)):
            raise ValueError("regressor entries must be finite")


def _monomial_exponents(n_x: int, n_p: int) -> list[tuple[int, ...]]:
    """First n_p monomial index tuples in graded order, constant term first.

    Within a degree the tuples are lexicographic, e.g. n_x=2 gives
    (), (0,), (1,), (0,0), (0,1), (1,1), ... meaning 1, x1, x2, x1^2, x1*x2, x2^2.
    """
    out: list[tuple[int, ...]] = []
    degree = 0
    while len(out) < n_p:
        out.extend(combinations_with_replacement(range(n_x), degree))
        degree += 1
    return out[:n_p]


def regressor(position, config: FieldConfig) -> np.ndarray:
    """Regressor vector phi(x) of length n_p for one position."""
    x = np.asarray(position, dtype=float)
    if x.shape != (config.n_x,):
        raise ValueError(f"position must have shape ({config.n_x},), got {x.shape}")
    if config.regressor_family == "polynomial-basis":
        phi = np.empty(config.n_p)
        for k, idx in enumerate(_monomial_exponents(config.n_x, config.n_p)):
            phi[k] = np.prod(x[list(idx)]) if idx else 1.0
        return phi
    # seeded-random: i.i.d. uniform [-1, 1], a pure function of (x, seed)
    h = hashlib.blake2s(digest_size=16)
    h.update(int(config.regressor_seed).to_bytes(16, "little", signed=True))
    h.update(x.tobytes())
    rng = np.random.default_rng(int.from_bytes(h.digest(), "little"))
    return rng.uniform(-1.0, 1.0, config.n_p)


def eval_field(phi, p) -> float:
    """Noiseless field value phi . p."""
    phi = np.asarray(phi, dtype=float)
    p = np.asarray(p, dtype=float)
    if phi.shape != p.shape:
        raise ValueError("phi and p must have the same shape")
    return float(phi @ p)


def generate_measurements(
    positions, config: FieldConfig, rng: np.random.Generator
) -> list[RegressorSample]:
    """Draw one noisy measurement per position.

    Regressors are a deterministic function of positions and config; only the
    noise consumes ``rng``. Returns samples in node-id order.
    """
    pos = np.asarray(positions, dtype=float)
    if pos.ndim != 2 or pos.shape[1] != config.n_x:
        raise ValueError(f"positions must have shape (N, {config.n_x})")
    if pos.shape[0] == 0:
        raise ValueError("at least one position is required")
    noise = config.noise.sample(rng, pos.shape[0])
    samples = []
    for i in range(pos.shape[0]):
        phi = regressor(pos[i], config)
        samples.append(
            RegressorSample(node_id=i, position=pos[i], phi=phi, y=eval_field(phi, config.p_true) + noise[i])
        )
    return samples
