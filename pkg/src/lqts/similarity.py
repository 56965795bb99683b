"""Baseline set similarities and the modes through which they are attained.

Two interchangeable baselines over descriptor sets: the max-maximorum
absolute cosine between raw exemplars, and the first canonical
correlation between low-dimensional linear subspaces fitted per set.
Every comparison also exposes the pair of unit "modes" (exemplars or
canonical vectors) that realized the score; the transitivity features
are built from those modes.

Absolute cosine is used throughout: principal and canonical directions
are sign-ambiguous, so signed similarity would be non-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import FaceSet
from .errors import DegenerateProjectionError, DimensionMismatchError, ZeroVectorError

DEFAULT_SUBSPACE_DIM = 6
# singular values below this fraction of the largest are treated as rank deficiency
RANK_RTOL = 1e-10
PROJECTION_FLOOR = 1e-12


@dataclass(frozen=True)
class SubspaceModel:
    """Orthonormal basis (d x k) spanning a set's dominant variation."""

    set_id: str
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def k(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class MatchResult:
    """A similarity score plus the unit mode vectors that attained it."""

    score: float
    mode_a: np.ndarray
    mode_b: np.ndarray
    index_a: int | None = None
    index_b: int | None = None


def _unit(v: np.ndarray, what: str = "vector") -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v)
    if not np.isfinite(n) or n == 0.0:
        raise ZeroVectorError(f"{what} has zero or non-finite norm")
    return v / n


def cosine_sim(u: np.ndarray, v: np.ndarray) -> float:
    """Absolute cosine of the angle between two nonzero vectors, in [0, 1]."""
    uu = _unit(u, "first argument")
    vv = _unit(v, "second argument")
    if uu.shape != vv.shape:
        raise DimensionMismatchError(f"vector dims differ: {uu.shape[0]} vs {vv.shape[0]}")
    return float(min(abs(float(uu @ vv)), 1.0))


def normalized_exemplars(s: FaceSet) -> np.ndarray:
    """Exemplars scaled to unit norm, one per row."""
    norms = np.linalg.norm(s.exemplars, axis=1, keepdims=True)
    return s.exemplars / norms


def max_max_sim(a: FaceSet, b: FaceSet) -> MatchResult:
    """Largest absolute cosine over all exemplar pairs (a_i, b_j).

    Ties resolve to the lexicographically smallest (i, j) pair.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"set dims differ: {a.dim} vs {b.dim}")
    ua = normalized_exemplars(a)
    ub = normalized_exemplars(b)
    cos = np.abs(ua @ ub.T)
    flat = int(np.argmax(cos))  # row-major argmax = smallest (i, j) on ties
    ia, ib = divmod(flat, cos.shape[1])
    return MatchResult(
        score=float(min(cos[ia, ib], 1.0)),
        mode_a=ua[ia],
        mode_b=ub[ib],
        index_a=ia,
        index_b=ib,
    )


def fit_subspace(s: FaceSet, k: int = DEFAULT_SUBSPACE_DIM) -> SubspaceModel:
    """Orthonormal basis for the top-k principal directions of the raw
    (uncentered) exemplar matrix, ordered by descending singular value.

    k is silently clipped to the numerical rank so small sets never fail.
    Column signs are fixed so each column's largest-magnitude entry is
    positive.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    _, sing, vt = np.linalg.svd(s.exemplars, full_matrices=False)
    rank = int(np.sum(sing > RANK_RTOL * sing[0]))
    k_eff = min(k, rank)
    basis = vt[:k_eff].T.copy()
    for col in range(k_eff):
        j = int(np.argmax(np.abs(basis[:, col])))
        if basis[j, col] < 0:
            basis[:, col] = -basis[:, col]
    basis.setflags(write=False)
    return SubspaceModel(set_id=s.set_id, basis=basis)


def max_corr(a: SubspaceModel, b: SubspaceModel) -> MatchResult:
    """First canonical correlation between two subspaces, with the
    canonical vector pair that attains it.

    Signs are canonicalized (largest-magnitude entry of mode_a positive,
    mode_b oriented so the mutual cosine is nonnegative).
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"subspace ambient dims differ: {a.dim} vs {b.dim}")
    u, sing, vt = np.linalg.svd(a.basis.T @ b.basis)
    score = float(min(max(sing[0], 0.0), 1.0))
    mode_a = a.basis @ u[:, 0]
    mode_b = b.basis @ vt[0]
    j = int(np.argmax(np.abs(mode_a)))
    if mode_a[j] < 0:
        mode_a = -mode_a
    if float(mode_a @ mode_b) < 0:
        mode_b = -mode_b
    return MatchResult(score=score, mode_a=mode_a, mode_b=mode_b)


def vector_subspace_sim(v: np.ndarray, s: SubspaceModel) -> MatchResult:
    """Cosine between a vector and its projection onto a subspace.

    mode_b is the unit projection; a projection norm below 1e-12 (vector
    numerically orthogonal to the subspace) raises
    DegenerateProjectionError.
    """
    unit_v = _unit(v, "query vector")
    if unit_v.shape[0] != s.dim:
        raise DimensionMismatchError(f"vector dim {unit_v.shape[0]} vs subspace dim {s.dim}")
    coords = s.basis.T @ unit_v
    proj = s.basis @ coords
    pnorm = float(np.linalg.norm(proj))
    if pnorm < PROJECTION_FLOOR:
        raise DegenerateProjectionError(
            f"vector is numerically orthogonal to subspace {s.set_id!r}"
        )
    return MatchResult(score=float(min(pnorm, 1.0)), mode_a=unit_v, mode_b=proj / pnorm)
