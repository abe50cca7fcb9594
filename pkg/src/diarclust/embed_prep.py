"""Embedding preparation: extraction planning, filtering, and projection.

The extraction planner mirrors how embeddings are taken from a window's
binarized activity: frames where a speaker is the only active one are
preferred; a speaker active solely inside overlapped regions falls back
to all of its active frames and is flagged ``overlap_only``.

Filtering splits embeddings by the duration of their concatenated source
segments: only embeddings strictly longer than the threshold take part in
clustering, the rest are re-inserted later at reassignment time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .plda import PldaModel
from .timeline import EmbeddingRecord, LocalWindowActivity


@dataclass(frozen=True)
class ExtractionPlan:
    """Which frame ranges of a window feed one speaker's embedding.

    ``segments`` are disjoint, sorted, half-open ``(start, stop)`` frame
    ranges; ``total_duration`` is their combined length in seconds.
    """

    window_index: int
    local_speaker: int
    segments: tuple[tuple[int, int], ...]
    overlap_only: bool
    total_duration: float


@dataclass(frozen=True)
class FilterSplit:
    """Partition of embedding indices into kept and held-out sets."""

    kept: tuple[int, ...]
    held_out: tuple[int, ...]
    threshold: float


def plan_extraction(window: LocalWindowActivity, window_index: int = 0) -> list[ExtractionPlan]:
    """Derive per-speaker extraction plans from a window's activity.

    Speakers with at least one solo-active frame use exactly the maximal
    runs of those frames; speakers active only under overlap use all their
    active frames and are flagged ``overlap_only``. Inactive speakers
    yield no plan.
    """
    activity = window.activity
    solo_frames = activity.sum(axis=0) == 1
    plans: list[ExtractionPlan] = []
    for speaker in range(window.num_tracks):
        active = activity[speaker] == 1
        if not active.any():
            continue
        solo = active & solo_frames
        if solo.any():
            frames, overlap_only = solo, False
        else:
            frames, overlap_only = active, True
        segments = _frame_runs(frames)
        total = float(frames.sum()) * window.frame_step
        plans.append(
            ExtractionPlan(
                window_index=window_index,
                local_speaker=speaker,
                segments=segments,
                overlap_only=overlap_only,
                total_duration=total,
            )
        )
    return plans


def _frame_runs(mask: np.ndarray) -> tuple[tuple[int, int], ...]:
    """Maximal runs of True as half-open (start, stop) index ranges."""
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return tuple((int(edges[i]), int(edges[i + 1])) for i in range(0, len(edges), 2))


def filter_embeddings(records: Sequence[EmbeddingRecord], threshold: float) -> FilterSplit:
    """Split embedding indices by source duration strictly above ``threshold``.

    Order within each side follows the input order. Raises ValidationError
    when nothing survives, since clustering needs at least one embedding;
    the caller should lower the threshold.
    """
    if threshold < 0:
        raise ValidationError(f"filter threshold must be >= 0, got {threshold}")
    kept = tuple(i for i, rec in enumerate(records) if rec.source_duration > threshold)
    held_out = tuple(i for i, rec in enumerate(records) if rec.source_duration <= threshold)
    if not kept:
        raise ValidationError(
            f"all {len(records)} embeddings have source_duration <= {threshold}; "
            "lower the filter threshold to keep at least one embedding"
        )
    return FilterSplit(kept=kept, held_out=held_out, threshold=threshold)


def length_normalize(vectors: np.ndarray) -> np.ndarray:
    """Scale vectors (rows of a 2-D array, or a single 1-D vector) to unit L2 norm."""
    arr = np.asarray(vectors, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValidationError(f"expected a 1-D vector or 2-D batch, got shape {arr.shape}")
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms < 1e-12):
        raise ValidationError("cannot length-normalize a zero-norm vector")
    out = arr / norms[:, np.newaxis]
    return out[0] if single else out


def plda_project(vectors: np.ndarray, model: PldaModel) -> np.ndarray:
    """Center by the model mean and project into the diagonalized space.

    Output rows live in the model's rank-R' space where the within-class
    covariance of the training data is (approximately) identity.
    """
    arr = np.asarray(vectors, dtype=np.float64)
    single = arr.ndim == 1
    if single:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[1] != model.dim:
        raise ValidationError(
            f"vector dimension {arr.shape[-1] if arr.ndim else '?'} does not match model dimension {model.dim}"
        )
    out = (arr - model.mean) @ model.transform.T
    return out[0] if single else out
