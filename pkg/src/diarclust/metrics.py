"""Diarization scoring: DER, macro-average DER, speaker count error, purity.

DER is computed by an exact boundary-event sweep over interval endpoints
(no frame discretization), with overlap regions scored and no collar by
default. Reference and hypothesis speakers are matched by the one-to-one
mapping that maximizes total co-occurrence duration; unmapped hypothesis
speech counts as false alarm, unmapped reference speech as miss, and the
denominator is the total reference speaker time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError
from .timeline import Diarization


@dataclass(frozen=True)
class DerBreakdown:
    """DER components in seconds plus the resulting rate."""

    missed_speech: float
    false_alarm: float
    speaker_confusion: float
    total_reference_speech: float

    def __post_init__(self) -> None:
        for name in ("missed_speech", "false_alarm", "speaker_confusion", "total_reference_speech"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0")

    @property
    def der(self) -> float:
        return (self.missed_speech + self.false_alarm + self.speaker_confusion) / self.total_reference_speech


@dataclass(frozen=True)
class MsceReport:
    """Per-recording true/estimated speaker counts and their mean absolute error."""

    per_recording: tuple[tuple[int, int], ...]
    msce: float


def _boundaries_and_actives(
    diarization: Diarization,
) -> dict[str, list[tuple[float, float]]]:
    by_speaker: dict[str, list[tuple[float, float]]] = {}
    for label, seg in diarization.turns:
        by_speaker.setdefault(label, []).append((seg.onset, seg.end))
    return by_speaker


def der(reference: Diarization, hypothesis: Diarization, collar: float = 0.0) -> DerBreakdown:
    """Score a hypothesis against a reference for one recording.

    ``collar`` excludes a window of that total width centered on every
    reference turn boundary from scoring (0, the default, scores the full
    timeline). Raises if the recordings differ or the reference contains
    no scored speech.
    """
    if reference.recording_id != hypothesis.recording_id:
        raise ValidationError(
            f"recording mismatch: reference {reference.recording_id!r} vs "
            f"hypothesis {hypothesis.recording_id!r}"
        )
    if collar < 0:
        raise ValidationError(f"collar must be >= 0, got {collar}")

    ref = _boundaries_and_actives(reference)
    hyp = _boundaries_and_actives(hypothesis)
    ref_speakers = sorted(ref)
    hyp_speakers = sorted(hyp)

    excluded: list[tuple[float, float]] = []
    if collar > 0:
        for intervals in ref.values():
            for onset, end in intervals:
                excluded.append((onset - collar / 2, onset + collar / 2))
                excluded.append((end - collar / 2, end + collar / 2))

    points: set[float] = set()
    for intervals in list(ref.values()) + list(hyp.values()) + [excluded]:
        for onset, end in intervals:
            points.add(onset)
            points.add(end)
    timeline = sorted(points)
    if len(timeline) < 2:
        raise ValidationError("reference contains no speech; DER is undefined")

    spans: list[tuple[float, list[int], list[int]]] = []
    for start, stop in zip(timeline[:-1], timeline[1:]):
        mid = (start + stop) / 2
        if any(a < mid < b for a, b in excluded):
            continue
        ref_active = [i for i, spk in enumerate(ref_speakers) if any(a <= mid < b for a, b in ref[spk])]
        hyp_active = [j for j, spk in enumerate(hyp_speakers) if any(a <= mid < b for a, b in hyp[spk])]
        if ref_active or hyp_active:
            spans.append((stop - start, ref_active, hyp_active))

    overlap = np.zeros((len(ref_speakers), len(hyp_speakers)))
    for length, ref_active, hyp_active in spans:
        for i in ref_active:
            for j in hyp_active:
                overlap[i, j] += length
    if overlap.size:
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        matched = set(zip(rows.tolist(), cols.tolist()))
    else:
        matched = set()

    missed = false_alarm = confusion = total_ref = 0.0
    for length, ref_active, hyp_active in spans:
        n_ref, n_hyp = len(ref_active), len(hyp_active)
        correct = sum(1 for i in ref_active for j in hyp_active if (i, j) in matched)
        missed += max(0, n_ref - n_hyp) * length
        false_alarm += max(0, n_hyp - n_ref) * length
        confusion += (min(n_ref, n_hyp) - correct) * length
        total_ref += n_ref * length

    if total_ref <= 0:
        raise ValidationError("reference contains no scored speech; DER is undefined")
    return DerBreakdown(
        missed_speech=missed,
        false_alarm=false_alarm,
        speaker_confusion=confusion,
        total_reference_speech=total_ref,
    )


def macro_der(breakdowns_by_dataset: Mapping[str, Sequence[DerBreakdown]]) -> float:
    """Mean of per-dataset DERs, each pooled over the dataset's durations."""
    if not breakdowns_by_dataset:
        raise ValidationError("macro DER needs at least one dataset group")
    dataset_ders = []
    for name, breakdowns in breakdowns_by_dataset.items():
        if not breakdowns:
            raise ValidationError(f"dataset {name!r} has no recordings")
        errors = sum(b.missed_speech + b.false_alarm + b.speaker_confusion for b in breakdowns)
        total = sum(b.total_reference_speech for b in breakdowns)
        if total <= 0:
            raise ValidationError(f"dataset {name!r} has no reference speech")
        dataset_ders.append(errors / total)
    return float(np.mean(dataset_ders))


def msce(pairs: Sequence[tuple[int, int]]) -> MsceReport:
    """Mean absolute difference between true and estimated speaker counts.

    ``pairs`` holds (true_count, estimated_count) per recording.
    """
    if not pairs:
        raise ValidationError("MSCE needs at least one recording")
    value = float(np.mean([abs(est - true) for true, est in pairs]))
    return MsceReport(per_recording=tuple((int(t), int(e)) for t, e in pairs), msce=value)


def purity(labels: Sequence, ground_truth_labels: Sequence) -> float:
    """Fraction of items whose cluster's majority class matches their own."""
    if len(labels) != len(ground_truth_labels):
        raise ValidationError(
            f"label sequences differ in length: {len(labels)} vs {len(ground_truth_labels)}"
        )
    if not labels:
        raise ValidationError("purity needs at least one item")
    clusters: dict = {}
    for cluster, truth in zip(labels, ground_truth_labels):
        clusters.setdefault(cluster, {}).setdefault(truth, 0)
        clusters[cluster][truth] += 1
    return sum(max(counts.values()) for counts in clusters.values()) / len(labels)
