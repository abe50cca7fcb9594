"""Command-line interface.

Subcommands: ``pipeline`` (run the clustering stage over windows +
embeddings and write RTTM), ``score`` (DER/MSCE report for a hypothesis
RTTM against a reference), ``synth`` (write a synthetic corpus with
ground truth), and ``plda-fit`` (fit a PLDA model on labeled vectors).

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import NumericalError, ValidationError
from .metrics import der, macro_der, msce
from .pipeline import PipelineConfig, run_pipeline
from .plda import fit_plda, load_plda, save_plda
from .synth import SynthSpec, generate
from .timeline import (
    Diarization,
    read_embeddings,
    read_rttm,
    read_windows,
    write_embeddings,
    write_rttm,
    write_windows,
)

logger = logging.getLogger("diarclust")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="diarclust", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_pipe = sub.add_parser("pipeline", help="run the clustering stage and write RTTM")
    p_pipe.add_argument("--windows", required=True, help="window activity JSONL")
    p_pipe.add_argument("--embeddings", required=True, help="embedding JSONL")
    p_pipe.add_argument("--plda", help="PLDA model JSON (required for VBx clustering)")
    p_pipe.add_argument("--config", help="pipeline config JSON (defaults used when omitted)")
    p_pipe.add_argument("--out", required=True, help="output RTTM path")
    p_pipe.add_argument("--diagnostics", help="optional diagnostics JSON path")
    p_pipe.add_argument("--max-local-speakers", type=int, default=4, help="rows per window matrix")
    p_pipe.set_defaults(func=cmd_pipeline)

    p_score = sub.add_parser("score", help="score a hypothesis RTTM against a reference")
    p_score.add_argument("--ref", required=True, help="reference RTTM")
    p_score.add_argument("--hyp", required=True, help="hypothesis RTTM")
    p_score.add_argument("--groups", help="JSON mapping dataset name -> list of recording ids")
    p_score.add_argument("--collar", type=float, default=0.0, help="scoring collar in seconds")
    p_score.add_argument("--out", help="write the JSON report here instead of stdout")
    p_score.set_defaults(func=cmd_score)

    p_synth = sub.add_parser("synth", help="generate a synthetic corpus with ground truth")
    p_synth.add_argument("--spec", required=True, help="synth spec JSON")
    p_synth.add_argument("--out-dir", required=True, help="output directory")
    p_synth.set_defaults(func=cmd_synth)

    p_fit = sub.add_parser("plda-fit", help="fit a PLDA model on labeled vectors")
    p_fit.add_argument("--vectors", required=True, help='JSONL of {"vector": [...]} lines')
    p_fit.add_argument("--labels", required=True, help='JSONL of {"label": ...} lines')
    p_fit.add_argument("--rank", type=int, default=None, help="projection rank (default min(D, 128))")
    p_fit.add_argument("--out", required=True, help="output PLDA model JSON")
    p_fit.set_defaults(func=cmd_plda_fit)

    return parser


def _load_json(path: str) -> object:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from exc


def cmd_pipeline(args: argparse.Namespace) -> int:
    config = PipelineConfig()
    if args.config:
        payload = _load_json(args.config)
        config = PipelineConfig.from_json_dict(payload)
    windows = read_windows(args.windows, max_local_speakers=args.max_local_speakers)
    embeddings = read_embeddings(args.embeddings)
    plda_model = load_plda(args.plda) if args.plda else None

    diarizations, diagnostics = run_pipeline(windows, embeddings, plda=plda_model, config=config)
    write_rttm(diarizations, args.out)
    logger.info("wrote %d recordings to %s", len(diarizations), args.out)
    for recording_id in sorted(diagnostics):
        diag = diagnostics[recording_id]
        logger.debug(
            "%s: %d speakers, %d/%d embeddings kept",
            recording_id,
            diag.estimated_speakers,
            len(diag.kept),
            diag.num_embeddings,
        )
    if args.diagnostics:
        payload = {rec: diag.as_dict() for rec, diag in sorted(diagnostics.items())}
        Path(args.diagnostics).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    references = {d.recording_id: d for d in read_rttm(args.ref)}
    hypotheses = {d.recording_id: d for d in read_rttm(args.hyp)}
    if not references:
        raise ValidationError(f"{args.ref}: reference RTTM contains no recordings")

    errors = [
        {"recording_id": rec, "error": "present in hypothesis but not in reference"}
        for rec in sorted(set(hypotheses) - set(references))
    ]

    recordings = []
    breakdowns = {}
    count_pairs = []
    for recording_id in sorted(references):
        reference = references[recording_id]
        hypothesis = hypotheses.get(recording_id, Diarization(recording_id, []))
        breakdown = der(reference, hypothesis, collar=args.collar)
        breakdowns[recording_id] = breakdown
        recordings.append(
            {
                "recording_id": recording_id,
                "der": breakdown.der,
                "missed": breakdown.missed_speech,
                "falarm": breakdown.false_alarm,
                "confusion": breakdown.speaker_confusion,
            }
        )
        count_pairs.append((reference.num_speakers, hypothesis.num_speakers))

    if args.groups:
        groups_payload = _load_json(args.groups)
        if not isinstance(groups_payload, dict):
            raise ValidationError(f"{args.groups}: groups file must map dataset name -> recording ids")
        grouped: dict[str, list] = {}
        seen = set()
        for name, ids in groups_payload.items():
            members = [breakdowns[r] for r in ids if r in breakdowns]
            if members:
                grouped[name] = members
            seen.update(ids)
        leftover = [breakdowns[r] for r in sorted(set(breakdowns) - seen)]
        if leftover:
            grouped["ungrouped"] = leftover
    else:
        grouped = {"all": list(breakdowns.values())}

    datasets = {}
    for name, members in grouped.items():
        errors_sum = sum(b.missed_speech + b.false_alarm + b.speaker_confusion for b in members)
        total = sum(b.total_reference_speech for b in members)
        datasets[name] = {"der": errors_sum / total, "total_reference_speech": total}

    report = {
        "recordings": recordings,
        "datasets": datasets,
        "macro_der": macro_der(grouped),
        "msce": msce(count_pairs).msce,
        "errors": errors,
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    payload = _load_json(args.spec)
    spec = SynthSpec.from_json_dict(payload)
    result = generate(spec)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_windows(result.windows, out_dir / "windows.jsonl")
    write_embeddings(result.embeddings, out_dir / "embeddings.jsonl")
    write_rttm(result.ground_truth, out_dir / "reference.rttm")
    save_plda(result.plda, out_dir / "plda.json")
    logger.info(
        "wrote %d recordings, %d windows, %d embeddings to %s",
        len(result.ground_truth),
        len(result.windows),
        len(result.embeddings),
        out_dir,
    )
    return 0


def cmd_plda_fit(args: argparse.Namespace) -> int:
    vectors = []
    with Path(args.vectors).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "vector" not in obj:
                raise ValidationError(f"{args.vectors}:{lineno}: missing 'vector' field")
            vectors.append(obj["vector"])
    labels = []
    with Path(args.labels).open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "label" not in obj:
                raise ValidationError(f"{args.labels}:{lineno}: missing 'label' field")
            labels.append(str(obj["label"]))
    if len(vectors) != len(labels):
        raise ValidationError(f"{len(vectors)} vectors but {len(labels)} labels")
    model = fit_plda(np.asarray(vectors, dtype=np.float64), labels, rank=args.rank)
    save_plda(model, args.out)
    logger.info("fit PLDA rank %d on %d vectors -> %s", model.rank, len(vectors), args.out)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
