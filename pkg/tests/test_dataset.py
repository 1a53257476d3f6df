import dataclasses
import json
import logging
import os
from collections import Counter

import numpy as np
import pytest

from porte.dataset import (
    FIELD_TYPES,
    MixtureRecord,
    build_corpus_manifest,
    read_manifest,
    read_speaker_table,
    scan_corpus,
    speaker_of,
    split_dataset,
    validate_record,
    write_manifest,
)
from porte.exceptions import CorpusError, ManifestParseError
from porte.mixgen import OVERLAP_BINS
from porte.toycorpus import make_toy_corpus


def fake_record(i, ratio=0.4, rng=None, **kw):
    rng = rng or np.random.default_rng(i)
    base = dict(
        id=f"{i:06d}_deadbeef", split="train", mixture_path=f"wav/{i}_mix.wav", target_path=f"wav/{i}_tgt.wav",
        interferer_path=f"wav/{i}_itf.wav", sample_rate=16000, duration_s=float(rng.uniform(5, 21)),
        overlap_ratio_requested=ratio, overlap_ratio_measured=ratio, delay_s=1.5, overlap_s=2.0,
        snr_db=float(rng.normal(0, 4)), snr_clamped=False, lufs_first=-30.0, lufs_second=-27.5,
        interferer_gain_db=-1.25, clip_gain_db=0.0, target_role="first", target_t_start=0.0, target_t_end=7.0,
        interferer_t_start=1.5, interferer_t_end=8.0, prompt_type="order",
        prompt_text="Extract the voice of the speaker who spoke first.", target_speaker=f"s{i % 5}",
        target_gender="male", interferer_speaker=f"s{(i + 1) % 5}", interferer_gender="female",
        first_source="a/a_000.wav", second_source="b/b_001.wav", seed=int(rng.integers(2**63)), master_seed=0,
    )
    base.update(kw)
    return MixtureRecord(**base)


@pytest.fixture(scope="module")
def eight_file_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("eight")
    tsv = make_toy_corpus(str(root), seed=5, speakers=(("201", "male"), ("202", "female")),
                          utterances_per_speaker=4, n_short=2)
    return str(root), tsv


class TestSpeakerTable:
    def test_aliases(self, tmp_path):
        p = tmp_path / "s.tsv"
        p.write_text("# comment\n1\tM\n2\tfemale\n\n3\tF\n")
        assert read_speaker_table(p) == {"1": "male", "2": "female", "3": "female"}

    def test_bad_gender(self, tmp_path):
        p = tmp_path / "s.tsv"
        p.write_text("1\tX\n")
        with pytest.raises(CorpusError):
            read_speaker_table(p)

    def test_speaker_of(self):
        assert speaker_of("/x/84/84_121123_000007_000001.wav") == "84"
        assert speaker_of("/x/84/utt.wav") == "84"


class TestCorpusScan:
    def test_filters_short(self, eight_file_corpus):
        root, tsv = eight_file_corpus
        scan = scan_corpus(root, tsv)
        assert len(scan.records) == 6
        assert scan.too_short == 2
        assert all(r.duration_s >= 5.0 for r in scan.records)
        assert {r.gender for r in scan.records} == {"male", "female"}

    def test_unknown_speaker_counted(self, eight_file_corpus, tmp_path):
        root, _ = eight_file_corpus
        tsv = tmp_path / "partial.tsv"
        tsv.write_text("201\tmale\n")
        scan = scan_corpus(root, str(tsv))
        assert scan.unknown_speaker == 4
        assert {r.speaker_id for r in scan.records} == {"201"}

    def test_duplicates_deduplicated(self, eight_file_corpus):
        root, tsv = eight_file_corpus
        scan = scan_corpus([root, os.path.join(root, "201"), root], tsv)
        paths = [r.path for r in scan.records]
        assert len(paths) == len(set(paths)) == 6
        assert scan.duplicates == 8 + 4

    def test_empty_corpus(self, tmp_path):
        tsv = tmp_path / "s.tsv"
        tsv.write_text("1\tmale\n")
        with pytest.raises(CorpusError):
            build_corpus_manifest(str(tmp_path), str(tsv))

    def test_scan_order_is_deterministic(self, eight_file_corpus):
        root, tsv = eight_file_corpus
        assert scan_corpus(root, tsv).records == scan_corpus(root, tsv).records


class TestManifest:
    def test_round_trip(self, tmp_path):
        recs = [fake_record(i, OVERLAP_BINS[i % 6]) for i in range(100)]
        path = tmp_path / "m.jsonl"
        write_manifest(recs, path)
        assert read_manifest(path) == recs

    def test_field_order_stable(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_manifest([fake_record(0)], path)
        assert list(json.loads(path.read_text())) == list(FIELD_TYPES)

    def test_utf8(self, tmp_path):
        path = tmp_path / "m.jsonl"
        rec = fake_record(0, first_source="spk/ünïcode_000.wav")
        write_manifest([rec], path)
        assert read_manifest(path) == [rec]

    def test_missing_field(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_manifest([fake_record(0), fake_record(1)], path)
        lines = path.read_text().splitlines()
        obj = json.loads(lines[1])
        del obj["snr_db"]
        path.write_text(lines[0] + "\n" + json.dumps(obj) + "\n")
        with pytest.raises(ManifestParseError) as info:
            read_manifest(path)
        assert info.value.line_number == 2
        assert info.value.field == "snr_db"
        assert "snr_db" in str(info.value) and "2" in str(info.value)

    def test_wrong_type(self, tmp_path):
        path = tmp_path / "m.jsonl"
        obj = fake_record(0).to_dict()
        obj["seed"] = "12"
        path.write_text(json.dumps(obj) + "\n")
        with pytest.raises(ManifestParseError) as info:
            read_manifest(path)
        assert info.value.field == "seed"

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps(fake_record(0).to_dict()) + "\n{not json\n")
        with pytest.raises(ManifestParseError) as info:
            read_manifest(path)
        assert info.value.line_number == 2

    def test_empty_file(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text("")
        assert read_manifest(path) == []

    def test_append_safe(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        first = [fake_record(i) for i in range(5)]
        second = [fake_record(i) for i in range(5, 9)]
        write_manifest(first, a)
        write_manifest(second, b)
        joined = tmp_path / "ab.jsonl"
        joined.write_bytes(a.read_bytes() + b.read_bytes())
        assert read_manifest(joined) == first + second
        write_manifest(second, a, append=True)
        assert read_manifest(a) == first + second


class TestSplit:
    def test_default_fraction(self):
        recs = [fake_record(i, OVERLAP_BINS[i % 6]) for i in range(600)]
        out = split_dataset(recs, 3 / 39, seed=0)
        per_bin = Counter(r.overlap_ratio_requested for r in out if r.split == "test")
        for b in OVERLAP_BINS:
            assert per_bin[b] in (7, 8)

    def test_half(self):
        recs = [fake_record(i, OVERLAP_BINS[i % 6]) for i in range(60)]
        per_bin = Counter(r.overlap_ratio_requested for r in split_dataset(recs, 0.5, 1) if r.split == "test")
        assert all(per_bin[b] == 5 for b in OVERLAP_BINS)

    def test_deterministic(self):
        recs = [fake_record(i, OVERLAP_BINS[i % 6]) for i in range(120)]
        assert split_dataset(recs, 0.2, 7) == split_dataset(recs, 0.2, 7)
        assert split_dataset(recs, 0.2, 7) != split_dataset(recs, 0.2, 8)

    def test_order_preserved(self):
        recs = [fake_record(i, OVERLAP_BINS[i % 6]) for i in range(30)]
        assert [r.id for r in split_dataset(recs, 0.3, 0)] == [r.id for r in recs]

    def test_tiny_bin_stays_in_train(self, caplog):
        recs = [fake_record(i, 0.2) for i in range(10)] + [fake_record(99, 0.8)]
        with caplog.at_level(logging.WARNING, logger="porte"):
            out = split_dataset(recs, 0.5, 0)
        assert next(r for r in out if r.id.startswith("000099")).split == "train"
        assert "kept whole in train" in caplog.text

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.1, 1.5])
    def test_bad_fraction(self, frac):
        with pytest.raises(ValueError):
            split_dataset([fake_record(0)], frac, 0)

    def test_speaker_disjoint(self):
        rng = np.random.default_rng(0)
        recs = []
        for i in range(200):
            a, b = rng.choice(10, size=2, replace=False)
            recs.append(fake_record(i, OVERLAP_BINS[i % 6], target_speaker=f"s{a}", interferer_speaker=f"s{b}"))
        out = split_dataset(recs, 0.2, 0, speaker_disjoint=True)
        train = {s for r in out if r.split == "train" for s in (r.target_speaker, r.interferer_speaker)}
        test = {s for r in out if r.split == "test" for s in (r.target_speaker, r.interferer_speaker)}
        assert train and test and train.isdisjoint(test)


class TestValidate:
    def test_generated_records_validate(self, small_dataset):
        root, records = small_dataset
        for rec in records:
            assert validate_record(rec, root) == []

    def test_detects_tampering(self, small_dataset):
        root, records = small_dataset
        rec = records[0]
        bad = dataclasses.replace(rec, overlap_ratio_measured=rec.overlap_ratio_measured + 0.01,
                                  target_t_end=rec.duration_s + 1.0)
        problems = validate_record(bad, root)
        assert any("timestamps" in p for p in problems)

    def test_missing_files(self, tmp_path):
        assert validate_record(fake_record(0), str(tmp_path))[0].startswith("missing file")

    def test_manifest_on_disk_matches(self, small_dataset):
        root, records = small_dataset
        assert read_manifest(os.path.join(root, "manifest.jsonl")) == records
