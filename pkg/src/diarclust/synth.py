"""Generative oracle: recordings with known ground truth, no audio needed.

Produces, per recording, a ground-truth diarization, binarized window
activity tiled over the recording, and speaker embeddings sampled from a
two-covariance model (speaker latent ``y ~ N(0, I)``, observation
``x = mean + A (sqrt(phi) * y + eps)``), so the whole clustering stage
can be verified end to end against known speaker identities.

The shipped PLDA model is fit on a large labeled calibration sample drawn
from the same generative process (after length normalization, matching
the pipeline's preprocessing), which keeps model and data consistent.

Turn lengths follow a truncated exponential; overlap is injected by
shifting a fraction of turn starts back into the previous turn. A
configurable fraction of embeddings is forced to short source durations
(< 1.6 s) with within-class noise inflated by ``short_noise_factor``,
modeling the unreliable short-segment embeddings the filtering stage is
meant to remove.

Determinism: all randomness comes from counter-based 64-bit Philox
streams keyed as (seed, 0) for the model/calibration stage and
(seed, 1000 + recording_index) per recording, so fixed seeds reproduce
byte-identical outputs and recordings can be generated in parallel.

Frame activity uses the frame-midpoint convention: a frame is active for
a speaker when its midpoint falls inside one of that speaker's turns.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
import numpy as np

from .embed_prep import length_normalize, plan_extraction
from .errors import ValidationError
from .plda import PldaModel, fit_plda
from .timeline import Diarization, EmbeddingRecord, LocalWindowActivity, Segment

_CALIBRATION_CLASSES = 48
_CALIBRATION_PER_CLASS = 40
_MAX_ATTEMPTS = 100


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic corpus."""

    n_recordings: int = 5
    speakers_per_recording: tuple[int, int] = (2, 4)
    recording_duration: float = 60.0
    window_size: float = 8.0
    window_hop: float = 4.0
    frame_step: float = 0.25
    embedding_dim: int = 16
    phi_scale: float = 10.0
    turn_mean: float = 3.0
    turn_min: float = 1.0
    turn_max: float = 8.0
    overlap_fraction: float = 0.15
    short_segment_fraction: float = 0.0
    short_noise_factor: float = 3.0
    max_local_speakers: int = 4
    seed: int = 0

    def __post_init__(self) -> None:
        lo, hi = self.speakers_per_recording
        checks = [
            (self.n_recordings >= 1, "n_recordings must be >= 1"),
            (1 <= lo <= hi, "speakers_per_recording must be a (min, max) range with 1 <= min <= max"),
            (self.recording_duration > 0, "recording_duration must be > 0"),
            (0 < self.window_hop <= self.window_size, "window_hop must be in (0, window_size]"),
            (self.window_size <= self.recording_duration, "window_size must fit in the recording"),
            (self.frame_step > 0, "frame_step must be > 0"),
            (self.embedding_dim >= 2, "embedding_dim must be >= 2"),
            (self.phi_scale > 0, "phi_scale must be > 0"),
            (0 < self.turn_min <= self.turn_max, "turn_min must be in (0, turn_max]"),
            (self.turn_mean > 0, "turn_mean must be > 0"),
            (0 <= self.overlap_fraction < 1, "overlap_fraction must be in [0, 1)"),
            (0 <= self.short_segment_fraction < 1, "short_segment_fraction must be in [0, 1)"),
            (self.short_noise_factor >= 1, "short_noise_factor must be >= 1"),
            (self.max_local_speakers >= 2, "max_local_speakers must be >= 2"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValidationError(message)
        for name, value in (("window_size", self.window_size), ("window_hop", self.window_hop)):
            ratio = value / self.frame_step
            if abs(ratio - round(ratio)) > 1e-9:
                raise ValidationError(f"{name} must be an integer multiple of frame_step")

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SynthSpec":
        if not isinstance(payload, dict):
            raise ValidationError("synth spec must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in payload:
            if key not in known:
                raise ValidationError(f"unknown synth spec field: {key}")
        kwargs = dict(payload)
        if "speakers_per_recording" in kwargs:
            value = kwargs["speakers_per_recording"]
            if not (isinstance(value, (list, tuple)) and len(value) == 2):
                raise ValidationError("speakers_per_recording must be a [min, max] pair")
            kwargs["speakers_per_recording"] = (int(value[0]), int(value[1]))
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ValidationError(f"invalid synth spec: {exc}") from exc


@dataclass(frozen=True)
class SynthResult:
    """Everything :func:`generate` produces.

    ``embedding_speakers`` gives the true speaker label behind each
    embedding record (parallel to ``embeddings``), for verification.
    """

    ground_truth: list[Diarization]
    windows: list[LocalWindowActivity]
    embeddings: list[EmbeddingRecord]
    plda: PldaModel
    embedding_speakers: list[str]


def _recording_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def _truncated_exponential(rng: np.random.Generator, mean: float, lo: float, hi: float) -> float:
    span = -np.expm1(-(hi - lo) / mean)  # 1 - exp(-(hi-lo)/mean)
    u = rng.random()
    return lo - mean * np.log1p(-u * span)


def sample_plda_vectors(
    rng: np.random.Generator,
    n_classes: int,
    per_class: int,
    phi: np.ndarray,
    mixing: np.ndarray | None = None,
    mean: np.ndarray | None = None,
    noise_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw labeled vectors from the two-covariance model.

    Returns raw (unnormalized) vectors and integer class labels; useful
    for fitting/recovery experiments against a known ``phi``.
    """
    phi = np.asarray(phi, dtype=np.float64)
    dim = phi.shape[0]
    mixing = np.eye(dim) if mixing is None else np.asarray(mixing, dtype=np.float64)
    mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=np.float64)
    vectors = np.empty((n_classes * per_class, dim))
    labels = np.repeat(np.arange(n_classes), per_class)
    sqrt_phi = np.sqrt(phi)
    for k in range(n_classes):
        latent = rng.standard_normal(dim)
        noise = noise_scale * rng.standard_normal((per_class, dim))
        vectors[k * per_class : (k + 1) * per_class] = mean + (sqrt_phi * latent + noise) @ mixing.T
    return vectors, labels


def _sample_turns(
    rng: np.random.Generator, spec: SynthSpec, n_speakers: int
) -> list[tuple[int, float, float]]:
    turns: list[tuple[int, float, float]] = []
    cursor = 0.0
    order: list[int] = []
    prev_speaker = -1
    while cursor + spec.turn_min <= spec.recording_duration:
        duration = _truncated_exponential(rng, spec.turn_mean, spec.turn_min, spec.turn_max)
        duration = min(duration, spec.recording_duration - cursor)
        if duration < spec.turn_min:
            break
        if not order:
            order = [int(i) for i in rng.permutation(n_speakers)]
            if n_speakers > 1 and order[0] == prev_speaker:
                order[0], order[-1] = order[-1], order[0]
        speaker = order.pop(0)
        onset = cursor
        # overlap: pull this turn's start back into the previous turn
        if turns and speaker != prev_speaker and rng.random() < spec.overlap_fraction:
            shift = rng.uniform(0.15, 0.5) * min(turns[-1][2], duration)
            onset = max(0.0, onset - shift)
        turns.append((speaker, onset, duration))
        prev_speaker = speaker
        cursor = onset + duration
    return turns


def _window_starts(spec: SynthSpec) -> list[float]:
    starts = []
    start = 0.0
    while start + spec.window_size <= spec.recording_duration + 1e-9:
        starts.append(start)
        start += spec.window_hop
    return starts


def _window_activity(
    spec: SynthSpec, turns: list[tuple[int, float, float]], window_start: float
) -> tuple[np.ndarray, list[int]]:
    """Activity matrix for one window plus the speaker behind each used row.

    Rows are assigned to the window's speakers in order of first active
    frame; a speaker with no active frame midpoint gets no row.
    """
    num_frames = int(round(spec.window_size / spec.frame_step))
    midpoints = window_start + (np.arange(num_frames) + 0.5) * spec.frame_step
    per_speaker: dict[int, np.ndarray] = {}
    for speaker, onset, duration in turns:
        hits = (midpoints >= onset) & (midpoints < onset + duration)
        if hits.any():
            mask = per_speaker.setdefault(speaker, np.zeros(num_frames, dtype=bool))
            mask |= hits
    ordered = sorted(per_speaker, key=lambda s: (int(np.argmax(per_speaker[s])), s))
    activity = np.zeros((spec.max_local_speakers, num_frames), dtype=np.int8)
    for row, speaker in enumerate(ordered[: spec.max_local_speakers]):
        activity[row] = per_speaker[speaker]
    return activity, ordered


def generate(spec: SynthSpec) -> SynthResult:
    """Sample a synthetic corpus with known ground truth.

    Retries a recording's turn layout (up to 100 times) when a window
    would need more simultaneous speakers than there are local tracks or
    a sampled speaker ends up with no turn at all.
    """
    model_rng = _recording_rng(spec.seed, 0)
    dim = spec.embedding_dim
    phi_star = np.full(dim, spec.phi_scale)
    rotation, _ = np.linalg.qr(model_rng.standard_normal((dim, dim)))
    mixing = rotation @ np.diag(model_rng.uniform(0.8, 1.25, size=dim))
    mean = np.zeros(dim)

    calib_vectors, calib_labels = sample_plda_vectors(
        model_rng, _CALIBRATION_CLASSES, _CALIBRATION_PER_CLASS, phi_star, mixing, mean
    )
    plda_model = fit_plda(length_normalize(calib_vectors), calib_labels, rank=dim)

    ground_truth: list[Diarization] = []
    windows: list[LocalWindowActivity] = []
    embeddings: list[EmbeddingRecord] = []
    embedding_speakers: list[str] = []
    sqrt_phi = np.sqrt(phi_star)

    lo, hi = spec.speakers_per_recording
    for rec_index in range(spec.n_recordings):
        rng = _recording_rng(spec.seed, 1000 + rec_index)
        recording_id = f"rec{rec_index:03d}"

        for attempt in range(_MAX_ATTEMPTS):
            n_speakers = int(rng.integers(lo, hi + 1))
            turns = _sample_turns(rng, spec, n_speakers)
            if len({speaker for speaker, _, _ in turns}) != n_speakers:
                continue
            layouts = [_window_activity(spec, turns, start) for start in _window_starts(spec)]
            if all(len(ordered) <= spec.max_local_speakers for _, ordered in layouts):
                break
        else:
            raise ValidationError(
                f"could not lay out {recording_id} within {_MAX_ATTEMPTS} attempts; "
                "lower overlap_fraction or speakers_per_recording"
            )

        ground_truth.append(
            Diarization(
                recording_id,
                [(f"spk{speaker}", Segment(onset, duration)) for speaker, onset, duration in turns],
            )
        )

        latents = rng.standard_normal((n_speakers, dim))
        for window_index, (start, (activity, ordered)) in enumerate(zip(_window_starts(spec), layouts)):
            window = LocalWindowActivity(recording_id, start, spec.frame_step, activity)
            windows.append(window)
            for plan in plan_extraction(window, window_index):
                speaker = ordered[plan.local_speaker]
                duration = plan.total_duration
                noise_scale = 1.0
                if rng.random() < spec.short_segment_fraction:
                    duration = float(rng.uniform(0.2, 1.5))
                    noise_scale = spec.short_noise_factor
                latent_part = sqrt_phi * latents[speaker]
                noise = noise_scale * rng.standard_normal(dim)
                vector = mean + mixing @ (latent_part + noise)
                embeddings.append(
                    EmbeddingRecord(
                        recording_id=recording_id,
                        window_index=window_index,
                        local_speaker=plan.local_speaker,
                        vector=vector,
                        source_duration=duration,
                        overlap_only=plan.overlap_only,
                    )
                )
                embedding_speakers.append(f"{recording_id}:spk{speaker}")

    return SynthResult(
        ground_truth=ground_truth,
        windows=windows,
        embeddings=embeddings,
        plda=plda_model,
        embedding_speakers=embedding_speakers,
    )
