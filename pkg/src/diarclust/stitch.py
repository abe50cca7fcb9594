"""Aggregating relabeled windows into one global diarization.

Every window that covers a frame casts two votes: how many speakers are
active there, and which (globally relabeled) speakers those are. The
majority speaker count n_f wins (ties go to the smaller count), the n_f
most-voted speakers are retained (ties to the lower global id), and the
surviving per-speaker frames are fused into contiguous segments.

A separate pass can fill within-speaker silence gaps strictly shorter
than a duration delta, which repairs over-segmented output.

Window starts must lie on the global frame grid; a window reaching past
the stated recording duration is rejected.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .timeline import Diarization, LocalWindowActivity, Segment

_GRID_TOL = 1e-6


@dataclass(frozen=True)
class FrameVote:
    """Vote tallies for one global frame.

    ``n_votes`` maps a speaker count k to the number of covering windows
    that voted for it; ``n_f`` is the winning count and ``selected`` the
    n_f retained speakers.
    """

    frame_index: int
    count_per_speaker: dict[int, int]
    n_votes: dict[int, int]
    n_f: int
    selected: tuple[int, ...]


LabeledWindow = tuple[LocalWindowActivity, Mapping[int, int]]


def _frame_tallies(
    labeled_windows: Sequence[LabeledWindow],
    frame_step: float,
    recording_duration: float,
) -> tuple[int, dict[int, np.ndarray], dict[int, np.ndarray]]:
    if frame_step <= 0:
        raise ValidationError(f"frame_step must be > 0, got {frame_step}")
    if recording_duration <= 0:
        raise ValidationError(f"recording_duration must be > 0, got {recording_duration}")
    num_frames = int(np.ceil(recording_duration / frame_step - _GRID_TOL))

    speaker_counts: dict[int, np.ndarray] = {}
    k_votes: dict[int, np.ndarray] = {}
    for window, mapping in labeled_windows:
        if abs(window.frame_step - frame_step) > _GRID_TOL:
            raise ValidationError(
                f"window frame_step {window.frame_step} does not match global frame_step {frame_step}"
            )
        offset = window.window_start / frame_step
        start = int(round(offset))
        if abs(offset - start) > _GRID_TOL:
            raise ValidationError(
                f"window start {window.window_start} is not aligned to the {frame_step}s frame grid"
            )
        if window.window_end > recording_duration + frame_step * _GRID_TOL:
            raise ValidationError(
                f"window [{window.window_start}, {window.window_end}) extends past "
                f"recording duration {recording_duration}"
            )
        active_rows = window.active_tracks()
        missing = [row for row in active_rows if row not in mapping]
        if missing:
            raise ValidationError(f"active local speakers {missing} have no global label")

        span = slice(start, start + window.num_frames)
        per_frame_k = window.activity.sum(axis=0)
        for k in np.unique(per_frame_k):
            tally = k_votes.setdefault(int(k), np.zeros(num_frames, dtype=np.int64))
            tally[span] += per_frame_k == k
        for row in active_rows:
            speaker = int(mapping[row])
            tally = speaker_counts.setdefault(speaker, np.zeros(num_frames, dtype=np.int64))
            tally[span] += window.activity[row]
    return num_frames, speaker_counts, k_votes


def _winning_counts(k_votes: dict[int, np.ndarray], num_frames: int) -> np.ndarray:
    """Majority speaker count per frame; ties break toward the smaller count."""
    n_f = np.zeros(num_frames, dtype=np.int64)
    best = np.zeros(num_frames, dtype=np.int64)
    for k in sorted(k_votes):
        votes = k_votes[k]
        wins = votes > best  # strict: earlier (smaller) k keeps ties
        n_f[wins] = k
        best[wins] = votes[wins]
    return n_f


def frame_votes(
    labeled_windows: Sequence[LabeledWindow],
    frame_step: float,
    recording_duration: float,
) -> list[FrameVote]:
    """Per-frame vote breakdown; mainly a diagnostic/testing surface."""
    num_frames, speaker_counts, k_votes = _frame_tallies(
        labeled_windows, frame_step, recording_duration
    )
    winning = _winning_counts(k_votes, num_frames)
    votes: list[FrameVote] = []
    for f in range(num_frames):
        counts = {spk: int(t[f]) for spk, t in sorted(speaker_counts.items()) if t[f] > 0}
        per_k = {k: int(t[f]) for k, t in sorted(k_votes.items()) if t[f] > 0}
        n_f = int(winning[f])
        ranked = sorted(counts, key=lambda spk: (-counts[spk], spk))
        votes.append(
            FrameVote(
                frame_index=f,
                count_per_speaker=counts,
                n_votes=per_k,
                n_f=n_f,
                selected=tuple(ranked[:n_f]),
            )
        )
    return votes


def stitch(
    labeled_windows: Sequence[LabeledWindow],
    frame_step: float,
    recording_duration: float,
    recording_id: str | None = None,
) -> Diarization:
    """Fuse overlapping relabeled windows into one Diarization.

    Frames covered by no window produce no speech. Global cluster g is
    emitted as speaker label ``spk{g}``. The recording id is taken from
    the windows unless given explicitly.
    """
    if recording_id is None:
        ids = {window.recording_id for window, _ in labeled_windows}
        if len(ids) != 1:
            raise ValidationError(f"expected windows from exactly one recording, got ids {sorted(ids)}")
        recording_id = ids.pop()

    num_frames, speaker_counts, k_votes = _frame_tallies(
        labeled_windows, frame_step, recording_duration
    )
    winning = _winning_counts(k_votes, num_frames)

    speakers = sorted(speaker_counts)
    active = {spk: np.zeros(num_frames, dtype=bool) for spk in speakers}
    count_matrix = np.vstack([speaker_counts[spk] for spk in speakers]) if speakers else None
    for f in np.flatnonzero(winning):
        n_f = int(winning[f])
        counts = count_matrix[:, f]
        candidates = np.flatnonzero(counts > 0)
        # stable sort on -count keeps lower speaker ids first at equal counts
        ranked = candidates[np.argsort(-counts[candidates], kind="stable")]
        for idx in ranked[:n_f]:
            active[speakers[idx]][f] = True

    turns: list[tuple[str, Segment]] = []
    for spk in speakers:
        mask = active[spk]
        padded = np.concatenate(([False], mask, [False]))
        edges = np.flatnonzero(padded[1:] != padded[:-1])
        for i in range(0, len(edges), 2):
            start, stop = int(edges[i]), int(edges[i + 1])
            turns.append((f"spk{spk}", Segment(start * frame_step, (stop - start) * frame_step)))
    return Diarization(recording_id, turns)


def fill_gaps(diarization: Diarization, delta: float) -> Diarization:
    """Merge same-speaker turns separated by silences strictly shorter than delta.

    Gaps of at least delta are untouched; delta = 0 leaves the input
    unchanged. Idempotent, and monotone in delta.
    """
    if delta < 0:
        raise ValidationError(f"delta must be >= 0, got {delta}")
    if delta == 0:
        return diarization

    turns: list[tuple[str, Segment]] = []
    for spk in diarization.speakers:
        segments = sorted(diarization.speaker_segments(spk), key=lambda s: s.onset)
        current = segments[0]
        for seg in segments[1:]:
            if seg.onset - current.end < delta:
                end = max(current.end, seg.end)
                current = Segment(current.onset, end - current.onset)
            else:
                turns.append((spk, current))
                current = seg
        turns.append((spk, current))
    return Diarization(diarization.recording_id, turns)
