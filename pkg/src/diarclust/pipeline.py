"""End-to-end driver for the clustering stage.

Per recording: split embeddings by the duration filter, cluster the kept
ones (AHC with minimum-cluster-size, AHC with the alternative stopping
criterion, or AHC-initialized VBx), build soft score matrices over ALL
embeddings against the final centroids (this re-inserts the held-out
short-segment embeddings), map local speakers to global clusters per the
configured assignment policy, stitch the relabeled windows, and
optionally fill short within-speaker gaps.

Embeddings are length-normalized before clustering; in VBx mode both the
kept embeddings and the scoring space are additionally PLDA-projected.
Recordings are independent and may be processed by a small worker pool;
output order is by recording id regardless of completion order.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .ahc import AhcConfig, ahc_asc, ahc_upgmc, apply_mcs
from .embed_prep import filter_embeddings, length_normalize, plda_project
from .errors import DiarclustError, ValidationError
from .plda import PldaModel
from .reassign import (
    Assignment,
    SoftScoreMatrix,
    assign_constrained,
    assign_legacy_pyac,
    assign_unconstrained,
    score_matrix,
)
from .stitch import fill_gaps, stitch
from .timeline import Diarization, EmbeddingRecord, LocalWindowActivity
from .vbx import VbxConfig, gmm_vbx

logger = logging.getLogger("diarclust")

CLUSTERING_MODES = ("ahc", "ahc_asc", "vbx")
REASSIGNMENT_MODES = ("unconstrained", "constrained", "legacy_pyac")


@dataclass(frozen=True)
class PipelineConfig:
    """Pipeline-wide knobs; ``ahc`` and ``vbx`` carry the stage-specific ones.

    ``filter_threshold`` is the minimum source duration (strict) for an
    embedding to take part in clustering; ``gap_fill`` is the
    post-processing gap duration (0 disables it). ``frame_step``, when
    set, is validated against the input windows.
    """

    clustering: str = "vbx"
    reassignment: str = "constrained"
    filter_threshold: float = 1.6
    gap_fill: float = 0.0
    frame_step: float | None = None
    ahc: AhcConfig = field(default_factory=AhcConfig)
    vbx: VbxConfig = field(default_factory=VbxConfig)
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.clustering not in CLUSTERING_MODES:
            raise ValidationError(f"clustering must be one of {CLUSTERING_MODES}, got {self.clustering!r}")
        if self.reassignment not in REASSIGNMENT_MODES:
            raise ValidationError(
                f"reassignment must be one of {REASSIGNMENT_MODES}, got {self.reassignment!r}"
            )
        if self.filter_threshold < 0:
            raise ValidationError(f"filter_threshold must be >= 0, got {self.filter_threshold}")
        if self.gap_fill < 0:
            raise ValidationError(f"gap_fill must be >= 0, got {self.gap_fill}")
        if self.frame_step is not None and self.frame_step <= 0:
            raise ValidationError(f"frame_step must be > 0, got {self.frame_step}")
        if self.jobs < 1:
            raise ValidationError(f"jobs must be >= 1, got {self.jobs}")

    @classmethod
    def from_json_dict(cls, payload: dict) -> "PipelineConfig":
        """Build from a JSON object; unknown keys are rejected."""
        if not isinstance(payload, dict):
            raise ValidationError("pipeline config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in payload:
            if key not in known:
                raise ValidationError(f"unknown pipeline config field: {key}")
        kwargs = dict(payload)
        for name, sub_cls in (("ahc", AhcConfig), ("vbx", VbxConfig)):
            if name in kwargs:
                sub = kwargs[name]
                if not isinstance(sub, dict):
                    raise ValidationError(f"{name} config must be a JSON object")
                sub_known = {f.name for f in fields(sub_cls)}
                for key in sub:
                    if key not in sub_known:
                        raise ValidationError(f"unknown {name} config field: {name}.{key}")
                kwargs[name] = sub_cls(**sub)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ValidationError(f"invalid pipeline config: {exc}") from exc


@dataclass(frozen=True)
class RecordingDiagnostics:
    """Per-recording audit trail of the pipeline run.

    ``kept``, ``held_out``, and ``embedding_labels`` index the recording's
    embedding records in (window_index, local_speaker) order.
    """

    recording_id: str
    num_embeddings: int
    kept: tuple[int, ...]
    held_out: tuple[int, ...]
    estimated_speakers: int
    embedding_labels: tuple[int, ...]
    window_assignments: dict[int, dict[int, int]]
    init_clusters: int | None
    elbo_trace: tuple[float, ...] | None
    inactive_rows_in_assignment: int

    def as_dict(self) -> dict:
        return {
            "recording_id": self.recording_id,
            "num_embeddings": self.num_embeddings,
            "kept": list(self.kept),
            "held_out": list(self.held_out),
            "estimated_speakers": self.estimated_speakers,
            "embedding_labels": list(self.embedding_labels),
            "window_assignments": {
                str(w): {str(l): g for l, g in mapping.items()}
                for w, mapping in self.window_assignments.items()
            },
            "init_clusters": self.init_clusters,
            "elbo_trace": list(self.elbo_trace) if self.elbo_trace is not None else None,
            "inactive_rows_in_assignment": self.inactive_rows_in_assignment,
        }


@contextmanager
def _stage(recording_id: str, name: str):
    try:
        yield
    except DiarclustError as exc:
        raise type(exc)(f"[{recording_id}/{name}] {exc}") from exc


def run_pipeline(
    windows: Sequence[LocalWindowActivity],
    embeddings: Sequence[EmbeddingRecord],
    plda: PldaModel | None = None,
    config: PipelineConfig | None = None,
) -> tuple[list[Diarization], dict[str, RecordingDiagnostics]]:
    """Run the clustering stage over all recordings in the inputs.

    ``plda`` is required when ``config.clustering == "vbx"``. Embedding
    records reference windows by the position of the window in its
    recording's start-sorted window list.
    """
    config = config or PipelineConfig()
    if config.clustering == "vbx" and plda is None:
        raise ValidationError("VBx clustering requires a PLDA model")
    if not windows:
        raise ValidationError("no windows given")

    windows_by_rec: dict[str, list[LocalWindowActivity]] = {}
    for window in windows:
        windows_by_rec.setdefault(window.recording_id, []).append(window)
    for rec_windows in windows_by_rec.values():
        rec_windows.sort(key=lambda w: w.window_start)

    records_by_rec: dict[str, list[EmbeddingRecord]] = {}
    for record in embeddings:
        if record.recording_id not in windows_by_rec:
            raise ValidationError(f"embedding references unknown recording {record.recording_id!r}")
        records_by_rec.setdefault(record.recording_id, []).append(record)
    for rec_records in records_by_rec.values():
        rec_records.sort(key=lambda r: (r.window_index, r.local_speaker))

    recording_ids = sorted(windows_by_rec)

    def process(recording_id: str) -> tuple[Diarization, RecordingDiagnostics]:
        return _process_recording(
            recording_id,
            windows_by_rec[recording_id],
            records_by_rec.get(recording_id, []),
            plda,
            config,
        )

    if config.jobs > 1 and len(recording_ids) > 1:
        with ThreadPoolExecutor(max_workers=config.jobs) as pool:
            outputs = list(pool.map(process, recording_ids))
    else:
        outputs = [process(recording_id) for recording_id in recording_ids]

    diarizations = [diar for diar, _ in outputs]
    diagnostics = {diag.recording_id: diag for _, diag in outputs}
    return diarizations, diagnostics


def _process_recording(
    recording_id: str,
    rec_windows: list[LocalWindowActivity],
    rec_records: list[EmbeddingRecord],
    plda: PldaModel | None,
    config: PipelineConfig,
) -> tuple[Diarization, RecordingDiagnostics]:
    if config.frame_step is not None:
        for window in rec_windows:
            if abs(window.frame_step - config.frame_step) > 1e-9:
                raise ValidationError(
                    f"[{recording_id}] window frame_step {window.frame_step} does not match "
                    f"configured frame_step {config.frame_step}"
                )
    if not rec_records:
        raise ValidationError(f"[{recording_id}] recording has no embeddings")

    with _stage(recording_id, "filter"):
        raw = np.vstack([record.vector for record in rec_records])
        normalized = length_normalize(raw)
        split = filter_embeddings(rec_records, config.filter_threshold)
    kept_idx = np.asarray(split.kept, dtype=np.int64)
    kept_vectors = normalized[kept_idx]

    init_clusters: int | None = None
    elbo_trace: tuple[float, ...] | None = None
    with _stage(recording_id, "clustering"):
        if config.clustering == "ahc":
            ahc_cfg = replace(config.ahc, stopping="threshold")
            base = ahc_upgmc(kept_vectors, ahc_cfg)
            result = apply_mcs(base, kept_vectors, ahc_cfg.min_cluster_size)
            space = normalized
        elif config.clustering == "ahc_asc":
            result = ahc_asc(kept_vectors, config.ahc)
            space = normalized
        else:
            init = ahc_upgmc(kept_vectors, replace(config.ahc, stopping="threshold"))
            init_clusters = init.num_clusters
            projected_kept = plda_project(kept_vectors, plda)
            result, state = gmm_vbx(projected_kept, plda.phi, init.labels, config.vbx)
            elbo_trace = state.elbo_trace
            space = plda_project(normalized, plda)
        logger.debug(
            "%s: %d kept / %d embeddings -> %d clusters%s",
            recording_id,
            kept_idx.size,
            len(rec_records),
            result.num_clusters,
            f" (AHC init {init_clusters})" if init_clusters is not None else "",
        )
        if elbo_trace is not None:
            logger.debug("%s: ELBO trace %s", recording_id, [round(v, 3) for v in elbo_trace])

    slots_by_window: dict[int, dict[int, int]] = {}
    for index, record in enumerate(rec_records):
        if record.window_index >= len(rec_windows):
            raise ValidationError(
                f"[{recording_id}] embedding references window {record.window_index}, "
                f"but only {len(rec_windows)} windows exist"
            )
        slot = slots_by_window.setdefault(record.window_index, {})
        if record.local_speaker in slot:
            raise ValidationError(
                f"[{recording_id}] duplicate embedding for window {record.window_index}, "
                f"local speaker {record.local_speaker}"
            )
        slot[record.local_speaker] = index

    assignments: dict[int, Assignment] = {}
    labeled: list[tuple[LocalWindowActivity, dict[int, int]]] = []
    inactive_rows = 0
    with _stage(recording_id, "reassignment"):
        for window_index, window in enumerate(rec_windows):
            active = set(window.active_tracks())
            slots = slots_by_window.get(window_index, {})
            stray = sorted(set(slots) - active)
            if stray:
                raise ValidationError(
                    f"window {window_index} has embeddings for inactive local speakers {stray}"
                )
            missing = sorted(active - set(slots))
            if missing:
                raise ValidationError(
                    f"window {window_index} is missing embeddings for active local speakers {missing}"
                )
            rows = [
                space[slots[row]] if row in active else None for row in range(window.num_tracks)
            ]
            matrix = score_matrix(rows, result.centroids, window_index=window_index)
            if config.reassignment == "unconstrained":
                assignment = assign_unconstrained(matrix)
            elif config.reassignment == "constrained":
                assignment = assign_constrained(matrix)
            else:
                scores = matrix.scores.copy()
                idle = ~matrix.active_rows
                if idle.any():
                    # historical behavior: inactive-speaker rows take part in the
                    # one-to-one assignment; they carry the lowest active score so
                    # they soak up leftover clusters
                    fill = scores[matrix.active_rows].min() if matrix.active_rows.any() else -1.0
                    scores[idle] = fill
                    inactive_rows += int(idle.sum())
                full = SoftScoreMatrix(
                    window_index=window_index, scores=scores, active_rows=matrix.active_rows
                )
                assignment = assign_legacy_pyac(full)
            assignments[window_index] = assignment
            labeled.append((window, dict(assignment.mapping)))

    embedding_labels = tuple(
        int(assignments[record.window_index].mapping[record.local_speaker])
        for record in rec_records
    )

    with _stage(recording_id, "stitching"):
        frame_step = rec_windows[0].frame_step
        duration = max(window.window_end for window in rec_windows)
        diarization = stitch(labeled, frame_step, duration, recording_id)
        if config.gap_fill > 0:
            diarization = fill_gaps(diarization, config.gap_fill)

    diagnostics = RecordingDiagnostics(
        recording_id=recording_id,
        num_embeddings=len(rec_records),
        kept=split.kept,
        held_out=split.held_out,
        estimated_speakers=result.num_clusters,
        embedding_labels=embedding_labels,
        window_assignments={w: dict(a.mapping) for w, a in assignments.items()},
        init_clusters=init_clusters,
        elbo_trace=elbo_trace,
        inactive_rows_in_assignment=inactive_rows,
    )
    return diarization, diagnostics
