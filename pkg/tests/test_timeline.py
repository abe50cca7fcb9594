import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diarclust.errors import ParseError, ValidationError
from diarclust.timeline import (
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

# strategies producing values already at RTTM precision so round trips are exact
onsets = st.integers(min_value=0, max_value=100_000).map(lambda n: n / 1000)
durations = st.integers(min_value=10, max_value=20_000).map(lambda n: n / 1000)
labels = st.sampled_from(["spkA", "spkB", "spkC", "s1"])
turns_lists = st.lists(st.tuples(labels, onsets, durations), min_size=0, max_size=25)


def make_diarization(recording_id, turns):
    return Diarization(recording_id, [(label, Segment(onset, dur)) for label, onset, dur in turns])


class TestSegment:
    def test_fields(self):
        seg = Segment(1.5, 2.0)
        assert seg.end == 3.5

    @pytest.mark.parametrize("onset,duration", [(-0.1, 1.0), (0.0, 0.0), (0.0, -1.0), (np.nan, 1.0)])
    def test_invalid(self, onset, duration):
        with pytest.raises(ValidationError):
            Segment(onset, duration)


class TestDiarization:
    def test_merges_adjacent_same_speaker_turns(self):
        d = make_diarization("rec", [("spkA", 0.0, 2.0), ("spkA", 2.0, 1.0)])
        assert d.turns == (("spkA", Segment(0.0, 3.0)),)

    def test_merges_overlapping_same_speaker_turns(self):
        d = make_diarization("rec", [("spkA", 0.0, 2.0), ("spkA", 1.0, 3.0)])
        assert d.turns == (("spkA", Segment(0.0, 4.0)),)

    def test_keeps_distinct_speakers(self):
        d = make_diarization("rec", [("spkB", 0.0, 2.0), ("spkA", 0.0, 2.0)])
        assert [label for label, _ in d.turns] == ["spkA", "spkB"]

    def test_sorted_by_onset_then_label(self):
        d = make_diarization("rec", [("spkB", 5.0, 1.0), ("spkA", 1.0, 1.0)])
        assert d.turns[0][0] == "spkA"

    @given(turns_lists)
    @settings(max_examples=150)
    def test_construction_idempotent(self, turns):
        d = make_diarization("rec", turns)
        again = Diarization("rec", list(d.turns))
        assert again.turns == d.turns


class TestRttm:
    def test_reads_spec_line(self, tmp_path):
        path = tmp_path / "a.rttm"
        path.write_text("SPEAKER rec1 1 0.00 2.50 <NA> <NA> spkA <NA> <NA>\n")
        diarizations = read_rttm(path)
        assert diarizations == [make_diarization("rec1", [("spkA", 0.0, 2.5)])]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.rttm"
        path.write_text("")
        assert read_rttm(path) == []

    def test_adjacent_turns_merge_on_read(self, tmp_path):
        path = tmp_path / "a.rttm"
        path.write_text(
            "SPEAKER rec 1 0.000 2.000 <NA> <NA> spkA <NA> <NA>\n"
            "SPEAKER rec 1 2.000 1.000 <NA> <NA> spkA <NA> <NA>\n"
        )
        (d,) = read_rttm(path)
        assert d.turns == (("spkA", Segment(0.0, 3.0)),)

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "bad.rttm"
        path.write_text("SPEAKER rec 1 0.0 1.0 <NA> <NA> spkA <NA> <NA>\nnot an rttm line\n")
        with pytest.raises(ParseError, match=":2"):
            read_rttm(path)

    def test_negative_duration_rejected(self, tmp_path):
        path = tmp_path / "bad.rttm"
        path.write_text("SPEAKER rec 1 0.0 -1.0 <NA> <NA> spkA <NA> <NA>\n")
        with pytest.raises(ValidationError):
            read_rttm(path)

    def test_write_emits_exact_line(self, tmp_path):
        path = tmp_path / "out.rttm"
        write_rttm([make_diarization("rec1", [("spkA", 0.0, 2.5)])], path)
        assert path.read_text() == "SPEAKER rec1 1 0.000 2.500 <NA> <NA> spkA <NA> <NA>\n"

    def test_write_empty_list(self, tmp_path):
        path = tmp_path / "out.rttm"
        write_rttm([], path)
        assert path.read_text() == ""

    def test_whitespace_label_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            write_rttm([make_diarization("rec", [("spk A", 0.0, 1.0)])], tmp_path / "x.rttm")

    @given(st.lists(st.tuples(st.sampled_from(["recA", "recB"]), turns_lists), min_size=0, max_size=3))
    @settings(max_examples=150, deadline=None)
    def test_round_trip(self, tmp_path_factory, per_recording):
        diarizations = {}
        for rec, turns in per_recording:
            existing = list(diarizations[rec].turns) if rec in diarizations else []
            diarizations[rec] = Diarization(
                rec, existing + [(label, Segment(o, d)) for label, o, d in turns]
            )
        originals = [diarizations[rec] for rec in sorted(diarizations)]
        path = tmp_path_factory.mktemp("rttm") / "round.rttm"
        write_rttm(originals, path)
        recovered = read_rttm(path)
        # identity holds at RTTM precision (1e-3 s quantization)
        assert recovered == [d.quantized() for d in originals if d.turns]


class TestWindowsIo:
    def window(self, rec="rec", start=0.0, step=0.25, activity=None):
        if activity is None:
            activity = np.zeros((4, 10), dtype=int)
        return LocalWindowActivity(rec, start, step, activity)

    def test_round_trip_and_sorting(self, tmp_path):
        act = np.zeros((4, 10), dtype=int)
        act[0, :5] = 1
        windows = [self.window(start=4.0, activity=act), self.window(start=0.0)]
        path = tmp_path / "w.jsonl"
        write_windows(windows, path)
        recovered = read_windows(path)
        assert recovered == [windows[1], windows[0]]

    def test_single_window_all_inactive(self, tmp_path):
        path = tmp_path / "w.jsonl"
        write_windows([self.window()], path)
        (w,) = read_windows(path)
        assert w.activity.sum() == 0

    def test_wrong_row_count_rejected(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text(
            '{"recording_id": "r", "window_start": 0.0, "frame_step": 0.25, "activity": [[0, 1]]}\n'
        )
        with pytest.raises(ValidationError, match="rows"):
            read_windows(path, max_local_speakers=4)

    def test_non_binary_entry_rejected(self, tmp_path):
        path = tmp_path / "w.jsonl"
        rows = [[0.7, 0], [0, 0], [0, 0], [0, 0]]
        path.write_text(
            '{"recording_id": "r", "window_start": 0.0, "frame_step": 0.25, "activity": %s}\n'
            % rows
        )
        with pytest.raises(ValidationError, match="0 or 1"):
            read_windows(path)

    def test_bad_json_names_line(self, tmp_path):
        path = tmp_path / "w.jsonl"
        path.write_text("{}\n{nope}\n")
        with pytest.raises(ParseError, match=":1|:2"):
            read_windows(path)

    def test_mutation_blocked(self):
        w = self.window()
        with pytest.raises(ValueError):
            w.activity[0, 0] = 1


class TestEmbeddingsIo:
    def record(self, rec="rec", window=0, local=0, vec=(1.0, 2.0), dur=3.0, overlap=False):
        return EmbeddingRecord(rec, window, local, np.asarray(vec), dur, overlap)

    def test_round_trip(self, tmp_path):
        records = [self.record(window=1), self.record(window=0, local=2)]
        path = tmp_path / "e.jsonl"
        write_embeddings(records, path)
        assert read_embeddings(path) == [records[1], records[0]]

    def test_dimension_mismatch_rejected(self, tmp_path):
        path = tmp_path / "e.jsonl"
        write_embeddings([self.record(vec=(1.0, 2.0)), self.record(local=1, vec=(1.0, 2.0, 3.0))], path)
        with pytest.raises(ValidationError, match="dimension"):
            read_embeddings(path)

    def test_nan_rejected(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text(
            '{"recording_id": "r", "window_index": 0, "local_speaker": 0, '
            '"vector": [1.0, null], "source_duration": 1.0, "overlap_only": false}\n'
        )
        with pytest.raises(ValidationError):
            read_embeddings(path)

    def test_large_parse_is_order_stable(self, tmp_path):
        rng = np.random.default_rng(0)
        records = [
            self.record(rec=f"rec{r:02d}", window=w, local=l, vec=tuple(rng.normal(size=3)), dur=float(w))
            for r in range(10)
            for w in range(200)
            for l in range(5)
        ]
        shuffled = list(records)
        rng.shuffle(shuffled)
        path = tmp_path / "big.jsonl"
        write_embeddings(shuffled, path)
        recovered = read_embeddings(path)
        assert [(r.recording_id, r.window_index, r.local_speaker) for r in recovered] == [
            (r.recording_id, r.window_index, r.local_speaker) for r in records
        ]
        assert recovered == records
