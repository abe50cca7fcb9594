import json

import numpy as np
import pytest

from diarclust.cli import main
from diarclust.plda import load_plda
from diarclust.timeline import read_rttm


SPEC = {
    "n_recordings": 2,
    "speakers_per_recording": [3, 3],
    "recording_duration": 48.0,
    "window_size": 8.0,
    "window_hop": 4.0,
    "frame_step": 0.25,
    "embedding_dim": 12,
    "phi_scale": 16.0,
    "turn_mean": 4.0,
    "turn_min": 2.0,
    "turn_max": 8.0,
    "overlap_fraction": 0.1,
    "short_segment_fraction": 0.2,
    "seed": 4,
}

CONFIG = {
    "clustering": "vbx",
    "reassignment": "constrained",
    "filter_threshold": 1.6,
    "ahc": {"distance_threshold": 0.3},
    "vbx": {"fb": 11.0, "max_iters": 40},
}


@pytest.fixture
def synth_dir(tmp_path):
    spec_path = tmp_path / "spec.json"
    spec_path.write_text(json.dumps(SPEC))
    out_dir = tmp_path / "data"
    assert main(["synth", "--spec", str(spec_path), "--out-dir", str(out_dir)]) == 0
    return out_dir


class TestSynthCommand:
    def test_writes_four_files(self, synth_dir):
        names = sorted(p.name for p in synth_dir.iterdir())
        assert names == ["embeddings.jsonl", "plda.json", "reference.rttm", "windows.jsonl"]

    def test_fixed_seed_gives_identical_bytes(self, tmp_path, synth_dir):
        spec_path = tmp_path / "spec2.json"
        spec_path.write_text(json.dumps(SPEC))
        again = tmp_path / "data2"
        assert main(["synth", "--spec", str(spec_path), "--out-dir", str(again)]) == 0
        for name in ("windows.jsonl", "embeddings.jsonl", "reference.rttm", "plda.json"):
            assert (synth_dir / name).read_bytes() == (again / name).read_bytes()

    def test_five_speaker_spec_yields_five_labels(self, tmp_path):
        spec = dict(SPEC)
        spec.update({"speakers_per_recording": [5, 5], "recording_duration": 96.0, "n_recordings": 1})
        spec_path = tmp_path / "spec5.json"
        spec_path.write_text(json.dumps(spec))
        out = tmp_path / "five"
        assert main(["synth", "--spec", str(spec_path), "--out-dir", str(out)]) == 0
        (diarization,) = read_rttm(out / "reference.rttm")
        assert diarization.num_speakers == 5

    def test_invalid_spec_exits_one(self, tmp_path, capsys):
        spec_path = tmp_path / "bad.json"
        spec_path.write_text(json.dumps({"window_hop": 16.0}))
        assert main(["synth", "--spec", str(spec_path), "--out-dir", str(tmp_path / "x")]) == 1
        assert "error" in capsys.readouterr().err


class TestPipelineCommand:
    def test_end_to_end_run(self, synth_dir, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(CONFIG))
        out = tmp_path / "hyp.rttm"
        diag = tmp_path / "diag.json"
        code = main(
            [
                "pipeline",
                "--windows", str(synth_dir / "windows.jsonl"),
                "--embeddings", str(synth_dir / "embeddings.jsonl"),
                "--plda", str(synth_dir / "plda.json"),
                "--config", str(config_path),
                "--out", str(out),
                "--diagnostics", str(diag),
            ]
        )
        assert code == 0
        hypotheses = read_rttm(out)
        assert [d.recording_id for d in hypotheses] == ["rec000", "rec001"]
        payload = json.loads(diag.read_text())
        assert set(payload) == {"rec000", "rec001"}
        assert payload["rec000"]["estimated_speakers"] == 3
        assert payload["rec000"]["elbo_trace"]

    def test_two_runs_identical_bytes(self, synth_dir, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(CONFIG))
        args = [
            "pipeline",
            "--windows", str(synth_dir / "windows.jsonl"),
            "--embeddings", str(synth_dir / "embeddings.jsonl"),
            "--plda", str(synth_dir / "plda.json"),
            "--config", str(config_path),
        ]
        out1, out2 = tmp_path / "a.rttm", tmp_path / "b.rttm"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_vbx_without_plda_exits_one(self, synth_dir, tmp_path, capsys):
        code = main(
            [
                "pipeline",
                "--windows", str(synth_dir / "windows.jsonl"),
                "--embeddings", str(synth_dir / "embeddings.jsonl"),
                "--out", str(tmp_path / "x.rttm"),
            ]
        )
        assert code == 1
        assert "PLDA" in capsys.readouterr().err

    def test_unknown_config_key_exits_one(self, synth_dir, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps({"mystery": 1}))
        code = main(
            [
                "pipeline",
                "--windows", str(synth_dir / "windows.jsonl"),
                "--embeddings", str(synth_dir / "embeddings.jsonl"),
                "--plda", str(synth_dir / "plda.json"),
                "--config", str(config_path),
                "--out", str(tmp_path / "x.rttm"),
            ]
        )
        assert code == 1
        assert "mystery" in capsys.readouterr().err

    def test_unwritable_output_exits_two(self, synth_dir, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(CONFIG))
        code = main(
            [
                "pipeline",
                "--windows", str(synth_dir / "windows.jsonl"),
                "--embeddings", str(synth_dir / "embeddings.jsonl"),
                "--plda", str(synth_dir / "plda.json"),
                "--config", str(config_path),
                "--out", str(tmp_path / "missing-dir" / "x.rttm"),
            ]
        )
        assert code == 2


class TestScoreCommand:
    def test_identical_files_score_zero(self, synth_dir, tmp_path, capsys):
        ref = synth_dir / "reference.rttm"
        code = main(["score", "--ref", str(ref), "--hyp", str(ref)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert all(entry["der"] == 0.0 for entry in report["recordings"])
        assert report["macro_der"] == 0.0
        assert report["msce"] == 0.0
        assert report["errors"] == []

    def test_grouped_scoring_macro_is_mean(self, tmp_path, capsys):
        ref = tmp_path / "ref.rttm"
        hyp = tmp_path / "hyp.rttm"
        ref.write_text(
            "SPEAKER r1 1 0.000 10.000 <NA> <NA> a <NA> <NA>\n"
            "SPEAKER r2 1 0.000 10.000 <NA> <NA> a <NA> <NA>\n"
        )
        hyp.write_text(
            "SPEAKER r1 1 0.000 9.000 <NA> <NA> x <NA> <NA>\n"
            "SPEAKER r2 1 0.000 8.000 <NA> <NA> x <NA> <NA>\n"
        )
        groups = tmp_path / "groups.json"
        groups.write_text(json.dumps({"g1": ["r1"], "g2": ["r2"]}))
        code = main(["score", "--ref", str(ref), "--hyp", str(hyp), "--groups", str(groups)])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["datasets"]["g1"]["der"] == pytest.approx(0.1)
        assert report["datasets"]["g2"]["der"] == pytest.approx(0.2)
        assert report["macro_der"] == pytest.approx(0.15)

    def test_hyp_only_recording_listed_as_error(self, tmp_path, capsys):
        ref = tmp_path / "ref.rttm"
        hyp = tmp_path / "hyp.rttm"
        ref.write_text("SPEAKER r1 1 0.000 10.000 <NA> <NA> a <NA> <NA>\n")
        hyp.write_text(
            "SPEAKER r1 1 0.000 10.000 <NA> <NA> a <NA> <NA>\n"
            "SPEAKER ghost 1 0.000 1.000 <NA> <NA> a <NA> <NA>\n"
        )
        assert main(["score", "--ref", str(ref), "--hyp", str(hyp)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["errors"] == [
            {"recording_id": "ghost", "error": "present in hypothesis but not in reference"}
        ]
        assert [e["recording_id"] for e in report["recordings"]] == ["r1"]

    def test_missing_hyp_recording_scores_as_fully_missed(self, tmp_path, capsys):
        ref = tmp_path / "ref.rttm"
        hyp = tmp_path / "hyp.rttm"
        ref.write_text(
            "SPEAKER r1 1 0.000 10.000 <NA> <NA> a <NA> <NA>\n"
            "SPEAKER r2 1 0.000 10.000 <NA> <NA> a <NA> <NA>\n"
        )
        hyp.write_text("SPEAKER r1 1 0.000 10.000 <NA> <NA> a <NA> <NA>\n")
        assert main(["score", "--ref", str(ref), "--hyp", str(hyp)]) == 0
        report = json.loads(capsys.readouterr().out)
        by_id = {e["recording_id"]: e for e in report["recordings"]}
        assert by_id["r2"]["der"] == 1.0
        assert report["msce"] == pytest.approx(0.5)  # r2 estimated 0 vs true 1

    def test_report_written_to_file(self, synth_dir, tmp_path):
        ref = synth_dir / "reference.rttm"
        out = tmp_path / "report.json"
        assert main(["score", "--ref", str(ref), "--hyp", str(ref), "--out", str(out)]) == 0
        assert json.loads(out.read_text())["macro_der"] == 0.0


class TestPldaFitCommand:
    def test_fit_and_load(self, tmp_path):
        rng = np.random.default_rng(0)
        vectors_path = tmp_path / "vectors.jsonl"
        labels_path = tmp_path / "labels.jsonl"
        with vectors_path.open("w") as vh, labels_path.open("w") as lh:
            for klass in range(6):
                center = rng.normal(size=4) * 4
                for _ in range(10):
                    vh.write(json.dumps({"vector": (center + rng.normal(size=4)).tolist()}) + "\n")
                    lh.write(json.dumps({"label": f"class{klass}"}) + "\n")
        out = tmp_path / "plda.json"
        code = main(
            ["plda-fit", "--vectors", str(vectors_path), "--labels", str(labels_path),
             "--rank", "3", "--out", str(out)]
        )
        assert code == 0
        model = load_plda(out)
        assert model.rank == 3 and model.dim == 4

    def test_count_mismatch_exits_one(self, tmp_path, capsys):
        vectors_path = tmp_path / "v.jsonl"
        labels_path = tmp_path / "l.jsonl"
        vectors_path.write_text('{"vector": [1.0, 2.0]}\n{"vector": [2.0, 1.0]}\n')
        labels_path.write_text('{"label": "a"}\n')
        assert main(["plda-fit", "--vectors", str(vectors_path), "--labels", str(labels_path),
                     "--out", str(tmp_path / "o.json")]) == 1
        assert "labels" in capsys.readouterr().err
