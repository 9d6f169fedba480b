"""Sign-perturbed sums: exact, non-asymptotic confidence regions.

Given samples (phi_i, y_i) and an m x N matrix A of random signs whose first
row is all +1, define for a candidate parameter p

    S_j(p) = sum_i c_i * A[j, i] * phi_i * (y_i - phi_i . p),    Z_j(p) = ||S_j(p)||^2

with per-node weights c_i in [0, 1] (all ones for complete data). The region
keeps the points p where Z_0 is not among the q largest of the m values, with
ties broken uniformly at random. For the true parameter the residuals reduce
to symmetric noise, making each ordering of the Z values equally likely, so

    Prob(p_true in region) = 1 - q/m        exactly,

for any fixed weight vector, any sample size and any noise symmetric about
zero. The aggregate sums S_j are linear in per-node terms, which is what lets
diffusion protocols assemble them from partial information.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import RegressorSample


class SingularMatrixError(np.linalg.LinAlgError):
    """Normal-equations matrix too ill-conditioned to solve."""


@dataclass(frozen=True)
class SpsConfig:
    """Sign-perturbation parameters: m sums, q discarded ranks, sign seed."""

    m: int
    q: int
    sign_seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be at least 2")
        if not 1 <= self.q <= self.m - 1:
            raise ValueError("q must satisfy 1 <= q <= m-1")

    @property
    def confidence(self) -> float:
        return 1.0 - self.q / self.m


@dataclass(eq=False)
class SignMatrix:
    """m x N matrix of +-1 perturbation signs; row 0 is the all-ones row."""

    entries: np.ndarray

    def __post_init__(self):
        self.entries = np.asarray(self.entries)
        if self.entries.ndim != 2:
            raise ValueError("sign matrix must be two-dimensional")
        if not np.all(np.abs(self.entries) == 1):
            raise ValueError("sign matrix entries must be +1 or -1")
        if not np.all(self.entries[0] == 1):
            raise ValueError("sign matrix row 0 must be all +1")

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.entries.shape[1]

    def column(self, i: int) -> np.ndarray:
        return self.entries[:, i]


def draw_sign_matrix(m: int, n_nodes: int, sign_seed) -> SignMatrix:
    """Draw the shared sign matrix: row 0 all +1, rest i.i.d. uniform signs.

    ``sign_seed`` may be an int or a sequence of ints; the same seed yields the
    same matrix, which is how every node ends up with identical signs.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    if n_nodes < 1:
        raise ValueError("need at least one node")
    rng = np.random.default_rng(np.random.SeedSequence(sign_seed))
    entries = np.ones((m, n_nodes), dtype=np.int8)
    entries[1:] = 2 * rng.integers(0, 2, size=(m - 1, n_nodes), dtype=np.int8) - 1
    return SignMatrix(entries)


@dataclass(eq=False)
class AggregateSums:
    """The m sign-perturbed sum pairs.

    vec[j] = sum_i c_i A[j,i] phi_i y_i            shape (m, n_p)
    mat[j] = sum_i c_i A[j,i] phi_i phi_i^T        shape (m, n_p, n_p), symmetric

    This is the payload a node needs to evaluate every Z_j(p); its scalar size
    on the wire is m * (n_p + n_p (n_p + 1) / 2) counting each symmetric
    matrix once per distinct entry.
    """

    vec: np.ndarray
    mat: np.ndarray

    def __post_init__(self):
        self.vec = np.asarray(self.vec, dtype=float)
        self.mat = np.asarray(self.mat, dtype=float)
        if self.vec.ndim != 2:
            raise ValueError("vec must have shape (m, n_p)")
        m, n_p = self.vec.shape
        if self.mat.shape != (m, n_p, n_p):
            raise ValueError("mat must have shape (m, n_p, n_p)")

    @property
    def m(self) -> int:
        return self.vec.shape[0]

    @property
    def n_p(self) -> int:
        return self.vec.shape[1]

    @property
    def payload_scalar_count(self) -> int:
        n_p = self.n_p
        return self.m * (n_p + n_p * (n_p + 1) // 2)

    def copy(self) -> "AggregateSums":
        return AggregateSums(self.vec.copy(), self.mat.copy())

    def iadd(self, other: "AggregateSums") -> "AggregateSums":
        self.vec += other.vec
        self.mat += other.mat
        return self

    def isub(self, other: "AggregateSums") -> "AggregateSums":
        self.vec -= other.vec
        self.mat -= other.mat
        return self

    def __add__(self, other: "AggregateSums") -> "AggregateSums":
        return self.copy().iadd(other)

    def scaled(self, factor: float) -> "AggregateSums":
        return AggregateSums(self.vec * factor, self.mat * factor)

    def allclose(self, other: "AggregateSums", rtol: float = 1e-9, atol: float = 1e-12) -> bool:
        return np.allclose(self.vec, other.vec, rtol=rtol, atol=atol) and np.allclose(
            self.mat, other.mat, rtol=rtol, atol=atol
        )

    @classmethod
    def zeros(cls, m: int, n_p: int) -> "AggregateSums":
        return cls(np.zeros((m, n_p)), np.zeros((m, n_p, n_p)))


def local_aggregate(sample: RegressorSample, sign_column) -> AggregateSums:
    """Single-node contribution: vec[j] = A[j,i] phi_i y_i, mat[j] = A[j,i] phi_i phi_i^T."""
    signs = np.asarray(sign_column, dtype=float)
    if signs.ndim != 1:
        raise ValueError("sign column must be one-dimensional")
    outer = np.outer(sample.phi, sample.phi)
    return AggregateSums(
        vec=signs[:, None] * (sample.phi * sample.y)[None, :],
        mat=signs[:, None, None] * outer[None, :, :],
    )


def sum_aggregates(a: AggregateSums, b: AggregateSums) -> AggregateSums:
    """Elementwise sum; aggregation over nodes is exactly this fold."""
    if a.vec.shape != b.vec.shape:
        raise ValueError("aggregate shapes differ")
    return a + b


def truncated_aggregate(samples, signs: SignMatrix, weights) -> AggregateSums:
    """Weighted aggregate with per-node weights c_i.

    ``weights`` is a length-N array (or WrapUpWeights); all-ones reproduces the
    complete-data aggregate, a one-hot vector reproduces one node's local
    aggregate, zeros give the degenerate zero payload.
    """
    c = np.asarray(getattr(weights, "c", weights), dtype=float)
    n = len(samples)
    if c.shape != (n,):
        raise ValueError(f"weights must have shape ({n},)")
    if signs.n_nodes != n:
        raise ValueError("sign matrix width must match the number of samples")
    phi = np.stack([s.phi for s in samples])
    y = np.array([s.y for s in samples])
    coeff = signs.entries.astype(float) * c[None, :]
    vec = coeff @ (phi * y[:, None])
    mat = np.einsum("ji,ik,il->jkl", coeff, phi, phi)
    return AggregateSums(vec, mat)


def batch_aggregate(samples, signs: SignMatrix) -> AggregateSums:
    """Complete-data aggregate (all weights one)."""
    return truncated_aggregate(samples, signs, np.ones(len(samples)))


@dataclass(eq=False)
class WrapUpWeights:
    """Per-node contribution weights c in [0, 1]^N.

    Values within 1e-9 outside the box are clamped; anything further out is
    rejected. c_i = 1 means node i's data contributes exactly once, fractional
    values mean partial use, 0 means unused.
    """

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1:
            raise ValueError("weights must be one-dimensional")
        tol = 1e-9
        if np.any(c < -tol) or np.any(c > 1 + tol):
            raise ValueError("weights must lie in [0, 1] (within 1e-9)")
        self.c = np.clip(c, 0.0, 1.0)

    @property
    def complete(self) -> bool:
        return bool(np.all(self.c == 1.0))


def z_values(agg: AggregateSums, p) -> np.ndarray:
    """Z_j(p) = ||vec_j - mat_j p||^2 for j = 0..m-1."""
    p = np.asarray(p, dtype=float)
    if p.shape != (agg.n_p,):
        raise ValueError(f"p must have shape ({agg.n_p},)")
    s = agg.vec - agg.mat @ p
    return np.einsum("jk,jk->j", s, s)


def _z_values_grid(agg: AggregateSums, points: np.ndarray) -> np.ndarray:
    """Z values for many points at once; returns shape (m, n_points)."""
    s = agg.vec[:, None, :] - np.einsum("jkl,cl->jck", agg.mat, points)
    return np.einsum("jck,jck->jc", s, s)


def uniform_order(values, rng: np.random.Generator) -> np.ndarray:
    """Ascending ordering of ``values`` with ties broken uniformly at random.

    Each value gets an independent uniform tie key; sorting by (value, key)
    makes every ordering of a tied group equally likely, which keeps the
    region's coverage exact even for discrete data where exact ties occur.
    Returns the permutation of indices, smallest first.
    """
    v = np.asarray(values, dtype=float)
    u = rng.uniform(size=v.shape[0])
    return np.lexsort((u, v))


def _count_above(z: np.ndarray, u: np.ndarray) -> int:
    """How many of z[1:] rank strictly above z[0] under (value, tie-key) order."""
    return int(np.sum((z[1:] > z[0]) | ((z[1:] == z[0]) & (u[1:] > u[0]))))


def membership(z, q: int, tie_rng: np.random.Generator) -> bool:
    """Is a point with these Z values inside the confidence region?

    True iff, after ranking with uniform tie-breaking, at least q of the
    perturbed values lie strictly above Z_0, i.e. Z_0 is not among the q
    largest. Consumes exactly m uniforms from ``tie_rng``.
    """
    z = np.asarray(z, dtype=float)
    m = z.shape[0]
    if not 1 <= q <= m - 1:
        raise ValueError("q must satisfy 1 <= q <= m-1")
    u = tie_rng.uniform(size=m)
    return _count_above(z, u) >= q


@dataclass(eq=False)
class RegionResult:
    """Grid evaluation of a confidence region over an axis-aligned box.

    ``member_mask`` marks cells whose center passed the membership test;
    ``volume`` is member count times cell volume; ``bounding_box`` is the hull
    of member cells per dimension (None when the region is empty).
    """

    box: list[tuple[float, float]]
    grid_shape: tuple[int, ...]
    member_mask: np.ndarray
    volume: float
    bounding_box: list[tuple[float, float]] | None
    q: int
    m: int
    tie_seed: int

    @property
    def cell_widths(self) -> np.ndarray:
        return np.array([(hi - lo) / n for (lo, hi), n in zip(self.box, self.grid_shape)])

    @property
    def member_count(self) -> int:
        return int(self.member_mask.sum())

    def to_json_dict(self) -> dict:
        flat = self.member_mask.ravel(order="C")
        return {
            "box": [[lo, hi] for lo, hi in self.box],
            "grid_shape": list(self.grid_shape),
            "q": self.q,
            "m": self.m,
            "tie_seed": self.tie_seed,
            "volume": self.volume,
            "bounding_box": None
            if self.bounding_box is None
            else [[lo, hi] for lo, hi in self.bounding_box],
            "member_count": self.member_count,
            # run lengths of the C-order flattened mask, first run is False
            "mask_rle": _encode_rle(flat),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "RegionResult":
        shape = tuple(d["grid_shape"])
        mask = _decode_rle(d["mask_rle"], int(np.prod(shape))).reshape(shape)
        return cls(
            box=[tuple(b) for b in d["box"]],
            grid_shape=shape,
            member_mask=mask,
            volume=d["volume"],
            bounding_box=None
            if d["bounding_box"] is None
            else [tuple(b) for b in d["bounding_box"]],
            q=d["q"],
            m=d["m"],
            tie_seed=d["tie_seed"],
        )

    def csv_summary_rows(self) -> list[tuple]:
        """One row per dimension: (volume, dim, lo, hi) with empty-region sentinel."""
        rows = []
        for dim in range(len(self.box)):
            if self.bounding_box is None:
                rows.append((self.volume, dim, "", ""))
            else:
                lo, hi = self.bounding_box[dim]
                rows.append((self.volume, dim, lo, hi))
        return rows


def _encode_rle(flat: np.ndarray) -> list[int]:
    runs = []
    current = False
    count = 0
    for bit in flat:
        if bool(bit) == current:
            count += 1
        else:
            runs.append(count)
            current = not current
            count = 1
    runs.append(count)
    return runs


def _decode_rle(runs, total: int) -> np.ndarray:
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in runs:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    if pos != total:
        raise ValueError("run lengths do not match the grid size")
    return flat


def evaluate_region(
    agg: AggregateSums,
    box,
    grid_per_dim,
    q: int,
    tie_seed: int,
    allow_high_dim: bool = False,
) -> RegionResult:
    """Evaluate region membership on a dense grid of cell centers.

    The box is a list of (lo, hi) per parameter dimension; ``grid_per_dim`` is
    an int or per-dimension list of cell counts. Cell i's tie randomness is
    derived deterministically from (tie_seed, flat cell index), so results are
    bit-reproducible and cells are independent. Dimensions above 3 are
    rejected unless ``allow_high_dim`` is set, because the grid size explodes.
    """
    n_p = agg.n_p
    box = [(float(lo), float(hi)) for lo, hi in box]
    if len(box) != n_p:
        raise ValueError(f"box must have {n_p} dimensions")
    if any(hi <= lo for lo, hi in box):
        raise ValueError("box must have positive extent in every dimension")
    if n_p > 3 and not allow_high_dim:
        raise ValueError(
            f"grid evaluation over {n_p} dimensions is rejected by default "
            "(cell count grows exponentially); pass allow_high_dim=True to override"
        )
    if np.isscalar(grid_per_dim):
        shape = (int(grid_per_dim),) * n_p
    else:
        shape = tuple(int(g) for g in grid_per_dim)
    if len(shape) != n_p or any(g < 1 for g in shape):
        raise ValueError("grid_per_dim must give a positive cell count per dimension")
    if not 1 <= q <= agg.m - 1:
        raise ValueError("q must satisfy 1 <= q <= m-1")

    axes = [
        lo + (np.arange(g) + 0.5) * (hi - lo) / g for (lo, hi), g in zip(box, shape)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel(order="C") for m in mesh], axis=1)
    n_cells = points.shape[0]

    z = _z_values_grid(agg, points)
    # row i of this matrix is cell i's tie stream
    u = np.random.default_rng(np.random.SeedSequence(int(tie_seed))).uniform(
        size=(n_cells, agg.m)
    )
    above = (z[1:] > z[0]) | ((z[1:] == z[0]) & (u[:, 1:].T > u[:, 0]))
    member = (above.sum(axis=0) >= q).reshape(shape)

    widths = [(hi - lo) / g for (lo, hi), g in zip(box, shape)]
    volume = float(member.sum()) * float(np.prod(widths))
    if member.any():
        bounding = []
        for dim in range(n_p):
            idx = np.nonzero(member.any(axis=tuple(d for d in range(n_p) if d != dim)))[0]
            lo, _ = box[dim]
            bounding.append((lo + idx[0] * widths[dim], lo + (idx[-1] + 1) * widths[dim]))
    else:
        bounding = None
    return RegionResult(
        box=box,
        grid_shape=shape,
        member_mask=member,
        volume=volume,
        bounding_box=bounding,
        q=q,
        m=agg.m,
        tie_seed=int(tie_seed),
    )


def ls_estimate(agg: AggregateSums, max_condition: float = 1e12) -> np.ndarray:
    """Least-squares parameter from the unperturbed sums: solve mat_0 p = vec_0.

    Raises SingularMatrixError (with the condition number) when mat_0 is
    singular or its condition number exceeds ``max_condition``.
    """
    mat0 = agg.mat[0]
    vec0 = agg.vec[0]
    cond = np.linalg.cond(mat0)
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularMatrixError(
            f"normal-equations matrix is ill-conditioned (cond={cond:.3e})"
        )
    return np.linalg.solve(mat0, vec0)
