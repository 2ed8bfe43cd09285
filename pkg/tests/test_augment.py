"""Paraphrase augmentation: replay, retry rules, and count arithmetic."""

import json

import pytest

from shoptraj.augment import (
    ParaphraseError,
    augment_dataset,
    build_paraphrase_request,
    paraphrase,
)
from shoptraj.gateway import BackendConfig, Gateway, write_fixture
from shoptraj.translate import DatasetRecord, render_model_input


def record(sample_id, split="train", caption=None, lineage="original"):
    return DatasetRecord(
        input_text=render_model_input(["fruit"], ["Apples"]),
        reference_caption=caption or f"caption for {sample_id}",
        sample_id=sample_id,
        split=split,
        lineage=lineage,
        map_id="market-a",
    )


class TestParaphrase:
    def test_replays_fixture_verbatim(self, tmp_path):
        req = build_paraphrase_request("Original caption.", 2)
        write_fixture(tmp_path, req, json.dumps(["Rewrite one.", "Rewrite two."]))
        gw = Gateway(BackendConfig(kind="mock", fixture_dir=str(tmp_path)))
        assert paraphrase(gw, "Original caption.", 2) == ["Rewrite one.", "Rewrite two."]

    def test_equal_to_original_retries_then_fails(self, tmp_path):
        from shoptraj.gateway import retry_request

        caption = "Stubborn caption."
        first = build_paraphrase_request(caption, 1)
        write_fixture(tmp_path, first, json.dumps([caption]))
        second = retry_request(first, "a rewrite equals the original")
        write_fixture(tmp_path, second, json.dumps([caption]))
        gw = Gateway(BackendConfig(kind="mock", fixture_dir=str(tmp_path)))
        with pytest.raises(ParaphraseError):
            paraphrase(gw, caption, 1)

    def test_duplicates_accepted_with_warning_after_retry(self, tmp_path, caplog):
        from shoptraj.gateway import retry_request

        caption = "Original."
        first = build_paraphrase_request(caption, 2)
        write_fixture(tmp_path, first, json.dumps(["Twin.", "Twin."]))
        second = retry_request(first, "duplicate rewrites")
        write_fixture(tmp_path, second, json.dumps(["Twin.", "Twin."]))
        gw = Gateway(BackendConfig(kind="mock", fixture_dir=str(tmp_path)))
        with caplog.at_level("WARNING"):
            got = paraphrase(gw, caption, 2)
        assert got == ["Twin.", "Twin."]
        assert "remaining issues" in caplog.text

    def test_sweep_over_mock_corpus(self, mock_gateway, corpus_summary):
        flagged = 0
        total = 0
        for spec in corpus_summary.specs[:40]:
            got = paraphrase(mock_gateway, spec.profile.caption, 8)
            assert len(got) == 8
            assert all(got)
            assert all(g.lower() != spec.profile.caption.lower() for g in got)
            total += 8
            flagged += 8 - len({g.lower() for g in got})
        assert flagged <= 0.05 * total


class TestAugmentDataset:
    def fixtures_for(self, tmp_path, captions, k):
        for caption in captions:
            req = build_paraphrase_request(caption, k)
            write_fixture(
                tmp_path, req, json.dumps([f"{caption} (variant {i})" for i in range(1, k + 1)])
            )
        return Gateway(BackendConfig(kind="mock", fixture_dir=str(tmp_path)))

    def test_64_train_times_9(self, tmp_path):
        records = [record(f"s{i:04d}") for i in range(64)]
        gw = self.fixtures_for(tmp_path, [r.reference_caption for r in records], 8)
        out = augment_dataset(gw, records, 8)
        assert len([r for r in out if r.split == "train"]) == 576

    def test_k4_on_64_gives_320(self, tmp_path):
        records = [record(f"s{i:04d}") for i in range(64)]
        gw = self.fixtures_for(tmp_path, [r.reference_caption for r in records], 4)
        out = augment_dataset(gw, records, 4)
        assert len(out) == 320

    def test_empty_train_split_untouched(self, tmp_path):
        gw = self.fixtures_for(tmp_path, [], 4)
        assert augment_dataset(gw, [], 4) == []

    def test_val_split_never_expanded(self, tmp_path):
        records = [record("s0", split="train"), record("s1", split="val")]
        gw = self.fixtures_for(tmp_path, [records[0].reference_caption], 2)
        out = augment_dataset(gw, records, 2)
        assert len([r for r in out if r.split == "val"]) == 1
        assert len([r for r in out if r.split == "train"]) == 3

    def test_input_text_and_ids_preserved(self, tmp_path):
        records = [record("s0")]
        gw = self.fixtures_for(tmp_path, [records[0].reference_caption], 3)
        out = augment_dataset(gw, records, 3)
        assert {r.input_text for r in out} == {records[0].input_text}
        assert [r.sample_id for r in out] == ["s0"] * 4
        assert [r.lineage for r in out] == [
            "original",
            "paraphrase(1)",
            "paraphrase(2)",
            "paraphrase(3)",
        ]

    def test_multiplicity_is_k_plus_one(self, tmp_path):
        records = [record(f"s{i}") for i in range(5)]
        gw = self.fixtures_for(tmp_path, [r.reference_caption for r in records], 2)
        out = augment_dataset(gw, records, 2)
        counts = {}
        for r in out:
            counts[r.sample_id] = counts.get(r.sample_id, 0) + 1
        assert counts == {f"s{i}": 3 for i in range(5)}

    def test_failed_sample_skipped_with_report(self, tmp_path, caplog):
        from shoptraj.gateway import retry_request

        good, bad = record("s0", caption="Fine caption."), record("s1", caption="Bad caption.")
        gw = self.fixtures_for(tmp_path, ["Fine caption."], 1)
        first = build_paraphrase_request("Bad caption.", 1)
        write_fixture(tmp_path, first, json.dumps(["Bad caption."]))
        second = retry_request(first, "a rewrite equals the original")
        write_fixture(tmp_path, second, json.dumps(["Bad caption."]))
        with caplog.at_level("WARNING"):
            out = augment_dataset(gw, [good, bad], 1)
        assert len(out) == 3  # good + its paraphrase + bad original
        assert "skipped" in caplog.text
