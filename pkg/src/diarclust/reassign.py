"""Mapping a window's local speakers onto global clusters.

A soft score matrix holds the cosine similarity between each local
speaker's embedding and every global cluster centroid. Three assignment
policies turn it into a hard mapping:

* unconstrained: each active local speaker takes its best-scoring
  cluster, so two locals may collapse onto one global identity;
* constrained: a one-to-one mapping over the active local speakers that
  maximizes the summed score (rectangular assignment problem);
* legacy compatibility mode: the constrained solve is run over all rows,
  inactive ones included, and the inactive rows' assignments are then
  discarded. This reproduces a historical pipeline behavior in which
  inactive-speaker rows entered the score matrices; it exists for A/B
  experiments and is never the default.

Among equal-total optima, the constrained modes return the
lexicographically smallest mapping in row order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InfeasibleAssignmentError, ValidationError

_TIE_RTOL = 1e-9
_TIE_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class SoftScoreMatrix:
    """Cosine similarities of one window's local speakers vs global centroids.

    ``scores[l, g]`` is in [-1, 1] for active rows; inactive rows carry no
    meaning and are excluded from assignment (except in legacy mode).
    """

    window_index: int
    scores: np.ndarray
    active_rows: np.ndarray

    def __post_init__(self) -> None:
        scores = np.array(self.scores, dtype=np.float64)
        active = np.array(self.active_rows, dtype=bool)
        if scores.ndim != 2 or scores.shape[1] == 0:
            raise ValidationError(f"scores must be an L x G matrix with G >= 1, got shape {scores.shape}")
        if active.shape != (scores.shape[0],):
            raise ValidationError("active_rows must have one flag per score row")
        if not np.all(np.isfinite(scores)):
            raise ValidationError("scores contain non-finite values")
        scores.flags.writeable = False
        active.flags.writeable = False
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "active_rows", active)

    @property
    def num_local(self) -> int:
        return int(self.scores.shape[0])

    @property
    def num_global(self) -> int:
        return int(self.scores.shape[1])


@dataclass(frozen=True)
class Assignment:
    """Hard mapping from active local speakers to global cluster ids."""

    mapping: dict[int, int]
    mode: str

    def total_score(self, matrix: SoftScoreMatrix) -> float:
        return float(sum(matrix.scores[l, g] for l, g in self.mapping.items()))


def score_matrix(
    window_embeddings: Sequence[np.ndarray | None],
    centroids: np.ndarray,
    window_index: int = 0,
) -> SoftScoreMatrix:
    """Build the soft score matrix for one window.

    ``window_embeddings`` holds one entry per local speaker row; ``None``
    marks an inactive speaker (its score row is zero-filled and flagged
    inactive). Zero-norm embeddings or centroids are rejected.
    """
    cents = np.asarray(centroids, dtype=np.float64)
    if cents.ndim != 2 or cents.shape[0] == 0:
        raise ValidationError(f"centroids must be a non-empty (G, D) array, got shape {cents.shape}")
    cent_norms = np.linalg.norm(cents, axis=1)
    if np.any(cent_norms < 1e-12):
        raise ValidationError("zero-norm centroid in score matrix")

    num_local = len(window_embeddings)
    scores = np.zeros((num_local, cents.shape[0]))
    active = np.zeros(num_local, dtype=bool)
    for row, emb in enumerate(window_embeddings):
        if emb is None:
            continue
        vec = np.asarray(emb, dtype=np.float64)
        if vec.shape != (cents.shape[1],):
            raise ValidationError(
                f"embedding dimension {vec.shape} does not match centroid dimension {cents.shape[1]}"
            )
        norm = np.linalg.norm(vec)
        if norm < 1e-12:
            raise ValidationError("zero-norm embedding in score matrix")
        scores[row] = (cents @ vec) / (cent_norms * norm)
        active[row] = True
    return SoftScoreMatrix(window_index=window_index, scores=scores, active_rows=active)


def assign_unconstrained(matrix: SoftScoreMatrix) -> Assignment:
    """Every active local speaker takes its highest-scoring cluster
    (ties to the lowest column)."""
    mapping = {
        int(row): int(np.argmax(matrix.scores[row]))
        for row in np.flatnonzero(matrix.active_rows)
    }
    return Assignment(mapping=mapping, mode="unconstrained")


def assign_constrained(matrix: SoftScoreMatrix) -> Assignment:
    """One-to-one mapping of active local speakers maximizing total score.

    Raises InfeasibleAssignmentError when more local speakers are active
    than global clusters exist.
    """
    rows = np.flatnonzero(matrix.active_rows)
    mapping = _constrained_mapping(matrix.scores, rows, matrix.num_global)
    return Assignment(mapping=mapping, mode="constrained")


def assign_legacy_pyac(matrix: SoftScoreMatrix) -> Assignment:
    """Constrained solve over ALL rows, then discard inactive rows.

    Inactive rows compete for clusters exactly like active ones, which
    can divert an active speaker away from its best cluster; only the
    active rows' assignments are returned.
    """
    rows = np.arange(matrix.num_local)
    mapping = _constrained_mapping(matrix.scores, rows, matrix.num_global)
    active = set(int(r) for r in np.flatnonzero(matrix.active_rows))
    mapping = {row: g for row, g in mapping.items() if row in active}
    return Assignment(mapping=mapping, mode="legacy_pyac")


def _constrained_mapping(scores: np.ndarray, rows: np.ndarray, num_global: int) -> dict[int, int]:
    if rows.size > num_global:
        raise InfeasibleAssignmentError(
            f"{rows.size} rows cannot be injectively assigned to {num_global} clusters"
        )
    if rows.size == 0:
        return {}
    sub = scores[rows]
    best = _optimal_total(sub)
    tol = _TIE_RTOL * max(1.0, abs(best)) + _TIE_ATOL

    # walk rows in order, fixing the smallest column that still permits an
    # optimal completion; this yields the lexicographically smallest optimum
    columns: list[int] = []
    used: set[int] = set()
    fixed_total = 0.0
    for pos in range(rows.size):
        remaining = rows.size - pos - 1
        for col in range(num_global):
            if col in used:
                continue
            free_cols = [c for c in range(num_global) if c not in used and c != col]
            if remaining > len(free_cols):
                continue
            candidate = fixed_total + float(sub[pos, col])
            if remaining:
                candidate += _optimal_total(sub[np.ix_(range(pos + 1, rows.size), free_cols)])
            if candidate >= best - tol:
                columns.append(col)
                used.add(col)
                fixed_total += float(sub[pos, col])
                break
        else:
            raise InfeasibleAssignmentError("no feasible assignment found")
    return {int(row): col for row, col in zip(rows, columns)}


def _optimal_total(scores: np.ndarray) -> float:
    row_ind, col_ind = linear_sum_assignment(scores, maximize=True)
    return float(scores[row_ind, col_ind].sum())
