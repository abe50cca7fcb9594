"""Core annotation types and file I/O.

Defines the time-domain types the clustering stage operates on (segments,
per-recording diarizations, binarized window activity, speaker embeddings
with provenance) and the readers/writers for their exchange formats:
RTTM for diarizations, JSONL for window activity and embeddings, and the
PLDA model JSON handled in :mod:`diarclust.plda`.

All types are immutable after construction and safe to share across
threads. Times are real seconds internally; RTTM serialization quantizes
onsets and durations to 3 decimal places.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, ValidationError

RTTM_DECIMALS = 3

# Gap below this is treated as zero when merging same-speaker turns; it is
# well under the 1e-3 s RTTM quantum so serialization cannot resurrect it.
_MERGE_EPS = 1e-9


@dataclass(frozen=True, order=True)
class Segment:
    """A speech interval given by onset and duration, in seconds."""

    onset: float
    duration: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.onset) or self.onset < 0:
            raise ValidationError(f"segment onset must be finite and >= 0, got {self.onset}")
        if not np.isfinite(self.duration) or self.duration <= 0:
            raise ValidationError(f"segment duration must be finite and > 0, got {self.duration}")

    @property
    def end(self) -> float:
        return self.onset + self.duration

    def quantized(self, decimals: int = RTTM_DECIMALS) -> "Segment":
        return Segment(round(self.onset, decimals), round(self.duration, decimals))


@dataclass(frozen=True)
class Diarization:
    """All speaker turns of one recording.

    Turns are normalized on construction: per speaker, overlapping or
    zero-gap adjacent turns are merged, and the result is sorted by
    (onset, speaker_label). Construction is therefore idempotent.
    """

    recording_id: str
    turns: tuple[tuple[str, Segment], ...]

    def __init__(self, recording_id: str, turns: Iterable[tuple[str, Segment]]) -> None:
        object.__setattr__(self, "recording_id", recording_id)
        object.__setattr__(self, "turns", _normalize_turns(turns))

    @property
    def speakers(self) -> tuple[str, ...]:
        return tuple(sorted({label for label, _ in self.turns}))

    @property
    def num_speakers(self) -> int:
        return len({label for label, _ in self.turns})

    def total_speech(self) -> float:
        """Total speaker time (overlap counted once per speaker)."""
        return sum(seg.duration for _, seg in self.turns)

    def speaker_segments(self, label: str) -> tuple[Segment, ...]:
        return tuple(seg for spk, seg in self.turns if spk == label)

    def quantized(self, decimals: int = RTTM_DECIMALS) -> "Diarization":
        return Diarization(
            self.recording_id,
            [(label, seg.quantized(decimals)) for label, seg in self.turns],
        )


def _normalize_turns(turns: Iterable[tuple[str, Segment]]) -> tuple[tuple[str, Segment], ...]:
    by_speaker: dict[str, list[Segment]] = {}
    for label, seg in turns:
        if not isinstance(label, str) or not label:
            raise ValidationError(f"speaker label must be a non-empty string, got {label!r}")
        by_speaker.setdefault(label, []).append(seg)

    merged: list[tuple[str, Segment]] = []
    for label, segs in by_speaker.items():
        segs.sort(key=lambda s: (s.onset, s.duration))
        current = segs[0]
        for seg in segs[1:]:
            if seg.onset <= current.end + _MERGE_EPS:
                end = max(current.end, seg.end)
                current = Segment(current.onset, end - current.onset)
            else:
                merged.append((label, current))
                current = seg
        merged.append((label, current))
    merged.sort(key=lambda t: (t[1].onset, t[0], t[1].duration))
    return tuple(merged)


@dataclass(frozen=True, eq=False)
class LocalWindowActivity:
    """Binarized frame-level speaker activity for one analysis window.

    ``activity`` has one row per local speaker track and one column per
    frame; every entry is 0 or 1. The row count is the configured maximum
    number of local speakers (4 in the default setup).
    """

    recording_id: str
    window_start: float
    frame_step: float
    activity: np.ndarray

    def __post_init__(self) -> None:
        act = np.asarray(self.activity)
        if act.ndim != 2 or act.shape[1] == 0:
            raise ValidationError(f"activity must be a non-empty 2-D matrix, got shape {act.shape}")
        if not np.all(np.isin(act, (0, 1))):
            bad = act[~np.isin(act, (0, 1))].flat[0]
            raise ValidationError(f"activity entries must be 0 or 1, got {bad}")
        if not np.isfinite(self.window_start) or self.window_start < 0:
            raise ValidationError(f"window_start must be finite and >= 0, got {self.window_start}")
        if not np.isfinite(self.frame_step) or self.frame_step <= 0:
            raise ValidationError(f"frame_step must be finite and > 0, got {self.frame_step}")
        act = act.astype(np.int8)
        act.flags.writeable = False
        object.__setattr__(self, "activity", act)

    @property
    def num_tracks(self) -> int:
        return self.activity.shape[0]

    @property
    def num_frames(self) -> int:
        return self.activity.shape[1]

    @property
    def duration(self) -> float:
        return self.num_frames * self.frame_step

    @property
    def window_end(self) -> float:
        return self.window_start + self.duration

    def active_tracks(self) -> tuple[int, ...]:
        """Local speaker rows with at least one active frame."""
        return tuple(int(i) for i in np.flatnonzero(self.activity.any(axis=1)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LocalWindowActivity):
            return NotImplemented
        return (
            self.recording_id == other.recording_id
            and self.window_start == other.window_start
            and self.frame_step == other.frame_step
            and np.array_equal(self.activity, other.activity)
        )


@dataclass(frozen=True, eq=False)
class EmbeddingRecord:
    """One speaker embedding with its provenance.

    ``source_duration`` is the total concatenated waveform length the
    embedding was extracted from; ``overlap_only`` marks embeddings whose
    source frames all lie in overlapped speech.
    """

    recording_id: str
    window_index: int
    local_speaker: int
    vector: np.ndarray
    source_duration: float
    overlap_only: bool

    def __post_init__(self) -> None:
        vec = np.array(self.vector, dtype=np.float64)
        if vec.ndim != 1 or vec.size == 0:
            raise ValidationError(f"embedding vector must be a non-empty 1-D array, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ValidationError("embedding vector contains non-finite entries")
        if self.window_index < 0:
            raise ValidationError(f"window_index must be >= 0, got {self.window_index}")
        if self.local_speaker < 0:
            raise ValidationError(f"local_speaker must be >= 0, got {self.local_speaker}")
        if not np.isfinite(self.source_duration) or self.source_duration < 0:
            raise ValidationError(f"source_duration must be finite and >= 0, got {self.source_duration}")
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.recording_id == other.recording_id
            and self.window_index == other.window_index
            and self.local_speaker == other.local_speaker
            and self.source_duration == other.source_duration
            and self.overlap_only == other.overlap_only
            and np.array_equal(self.vector, other.vector)
        )


# ---------------------------------------------------------------------------
# RTTM


def read_rttm(path: str | Path) -> list[Diarization]:
    """Read an RTTM file into one Diarization per recording.

    Each non-blank line must be a 10-field SPEAKER record. Recordings are
    returned sorted by recording_id; turn normalization (same-speaker
    merge) is applied by construction.

    Raises
    ------
    ParseError
        On a malformed line (names the line number).
    ValidationError
        On a non-positive duration or negative onset.
    """
    path = Path(path)
    turns_by_recording: dict[str, list[tuple[str, Segment]]] = {}
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 10 or parts[0] != "SPEAKER":
                raise ParseError(f"{path}:{lineno}: expected a 10-field SPEAKER record, got: {line!r}")
            try:
                onset = float(parts[3])
                duration = float(parts[4])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric onset/duration: {line!r}") from exc
            if duration <= 0:
                raise ValidationError(f"{path}:{lineno}: duration must be > 0, got {duration}")
            if onset < 0:
                raise ValidationError(f"{path}:{lineno}: onset must be >= 0, got {onset}")
            turns_by_recording.setdefault(parts[1], []).append((parts[7], Segment(onset, duration)))
    return [Diarization(rec, turns) for rec, turns in sorted(turns_by_recording.items())]


def write_rttm(diarizations: Sequence[Diarization], path: str | Path) -> None:
    """Write diarizations as RTTM; inverse of :func:`read_rttm` at 1e-3 s.

    Raises ValidationError if a speaker label cannot survive the
    space-separated format or a turn quantizes to zero duration.
    """
    lines: list[str] = []
    for diarization in diarizations:
        for label, seg in diarization.turns:
            if any(ch.isspace() for ch in label):
                raise ValidationError(f"speaker label {label!r} contains whitespace; not representable in RTTM")
            if round(seg.duration, RTTM_DECIMALS) <= 0:
                raise ValidationError(
                    f"turn duration {seg.duration} quantizes to 0 at RTTM precision ({RTTM_DECIMALS} decimals)"
                )
            lines.append(
                f"SPEAKER {diarization.recording_id} 1 {seg.onset:.3f} {seg.duration:.3f} "
                f"<NA> <NA> {label} <NA> <NA>\n"
            )
    Path(path).write_text("".join(lines), encoding="utf-8")


# ---------------------------------------------------------------------------
# Windows JSONL


def read_windows(path: str | Path, max_local_speakers: int = 4) -> list[LocalWindowActivity]:
    """Read window activity JSONL, sorted by (recording_id, window_start).

    Each line is ``{"recording_id": str, "window_start": float,
    "frame_step": float, "activity": [[0|1, ...], ...]}``. The activity
    matrix must have exactly ``max_local_speakers`` rows.
    """
    path = Path(path)
    windows: list[LocalWindowActivity] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                recording_id = obj["recording_id"]
                window_start = obj["window_start"]
                frame_step = obj["frame_step"]
                activity = obj["activity"]
            except (KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: missing window field: {exc}") from exc
            rows = np.asarray(activity, dtype=np.float64)
            if rows.ndim != 2:
                raise ValidationError(f"{path}:{lineno}: activity must be a 2-D matrix")
            if rows.shape[0] != max_local_speakers:
                raise ValidationError(
                    f"{path}:{lineno}: activity has {rows.shape[0]} rows, expected {max_local_speakers}"
                )
            try:
                windows.append(LocalWindowActivity(recording_id, window_start, frame_step, rows))
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    windows.sort(key=lambda w: (w.recording_id, w.window_start))
    return windows


def write_windows(windows: Sequence[LocalWindowActivity], path: str | Path) -> None:
    """Write window activity JSONL; inverse of :func:`read_windows`."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for window in windows:
            handle.write(
                json.dumps(
                    {
                        "recording_id": window.recording_id,
                        "window_start": window.window_start,
                        "frame_step": window.frame_step,
                        "activity": window.activity.tolist(),
                    }
                )
                + "\n"
            )


# ---------------------------------------------------------------------------
# Embeddings JSONL


def read_embeddings(path: str | Path) -> list[EmbeddingRecord]:
    """Read embedding JSONL, grouped per recording and ordered stably by
    (window_index, local_speaker).

    All vectors must share one dimension and contain only finite values.
    """
    path = Path(path)
    records: list[EmbeddingRecord] = []
    dim: int | None = None
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                record = EmbeddingRecord(
                    recording_id=obj["recording_id"],
                    window_index=obj["window_index"],
                    local_speaker=obj["local_speaker"],
                    vector=np.asarray(obj["vector"], dtype=np.float64),
                    source_duration=obj["source_duration"],
                    overlap_only=obj["overlap_only"],
                )
            except (KeyError, TypeError) as exc:
                raise ParseError(f"{path}:{lineno}: missing embedding field: {exc}") from exc
            except ValidationError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
            if dim is None:
                dim = record.dim
            elif record.dim != dim:
                raise ValidationError(
                    f"{path}:{lineno}: vector dimension {record.dim} differs from earlier dimension {dim}"
                )
            records.append(record)
    records.sort(key=lambda r: (r.recording_id, r.window_index, r.local_speaker))
    return records


def write_embeddings(records: Sequence[EmbeddingRecord], path: str | Path) -> None:
    """Write embedding JSONL; inverse of :func:`read_embeddings`."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(
                json.dumps(
                    {
                        "recording_id": record.recording_id,
                        "window_index": record.window_index,
                        "local_speaker": record.local_speaker,
                        "vector": record.vector.tolist(),
                        "source_duration": record.source_duration,
                        "overlap_only": record.overlap_only,
                    }
                )
                + "\n"
            )
