"""Clustering stage of a two-stage speaker diarization pipeline.

Consumes binarized window-level speaker activity and per-speaker
embeddings, clusters the embeddings into global speaker identities
(AHC or AHC-initialized VBx), maps each window's local speakers onto the
global clusters, and stitches the relabeled windows into one diarization
per recording. Ships a DER/MSCE scorer and a synthetic-data generator
for end-to-end verification.
"""

from .ahc import AhcConfig, ClusteringResult, ahc_asc, ahc_upgmc, apply_mcs, cosine_distances
from .embed_prep import (
    ExtractionPlan,
    FilterSplit,
    filter_embeddings,
    length_normalize,
    plan_extraction,
    plda_project,
)
from .errors import (
    DiarclustError,
    InfeasibleAssignmentError,
    NumericalError,
    ParseError,
    ValidationError,
)
from .metrics import DerBreakdown, MsceReport, der, macro_der, msce, purity
from .pipeline import PipelineConfig, RecordingDiagnostics, run_pipeline
from .plda import PldaModel, fit_plda, load_plda, save_plda
from .reassign import (
    Assignment,
    SoftScoreMatrix,
    assign_constrained,
    assign_legacy_pyac,
    assign_unconstrained,
    score_matrix,
)
from .stitch import FrameVote, fill_gaps, frame_votes, stitch
from .synth import SynthResult, SynthSpec, generate, sample_plda_vectors
from .timeline import (
    Diarization,
    EmbeddingRecord,
    LocalWindowActivity,
    Segment,
    read_embeddings,
    read_rttm,
    read_windows,
    write_embeddings,
    write_rttm,
    write_windows,
)
from .vbx import VbxConfig, VbxState, elbo, gmm_vbx

__version__ = "0.1.0"

__all__ = [
    "AhcConfig",
    "Assignment",
    "ClusteringResult",
    "DerBreakdown",
    "Diarization",
    "DiarclustError",
    "EmbeddingRecord",
    "ExtractionPlan",
    "FilterSplit",
    "FrameVote",
    "InfeasibleAssignmentError",
    "LocalWindowActivity",
    "MsceReport",
    "NumericalError",
    "ParseError",
    "PipelineConfig",
    "PldaModel",
    "RecordingDiagnostics",
    "Segment",
    "SoftScoreMatrix",
    "SynthResult",
    "SynthSpec",
    "ValidationError",
    "VbxConfig",
    "VbxState",
    "ahc_asc",
    "ahc_upgmc",
    "apply_mcs",
    "assign_constrained",
    "assign_legacy_pyac",
    "assign_unconstrained",
    "cosine_distances",
    "der",
    "elbo",
    "fill_gaps",
    "filter_embeddings",
    "fit_plda",
    "frame_votes",
    "generate",
    "gmm_vbx",
    "length_normalize",
    "load_plda",
    "macro_der",
    "msce",
    "plan_extraction",
    "plda_project",
    "purity",
    "read_embeddings",
    "read_rttm",
    "read_windows",
    "run_pipeline",
    "sample_plda_vectors",
    "save_plda",
    "score_matrix",
    "stitch",
    "write_embeddings",
    "write_rttm",
    "write_windows",
]
