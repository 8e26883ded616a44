import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mangasearch.embeddings import ReferenceTextEmbedder
from mangasearch.errors import AnnotationParseError, ValidationError
from mangasearch.queryset import (
    PROMPT_NAMES,
    QueryRecord,
    build_dialog_queryset,
    load_prompt,
    load_queryset,
    max_other_similarities,
    render_prompt,
    save_queryset,
)
from oracles import oracle_retained_indices

EMBEDDER = ReferenceTextEmbedder(dim=64)
WIDE_EMBEDDER = ReferenceTextEmbedder(dim=384)


def _random_transcripts(rng, n):
    letters = list("abcdefghijklmnopqrstuvwxyz")
    lines = []
    for i in range(n):
        words = [
            "".join(rng.choice(letters, size=rng.integers(4, 9)))
            for _ in range(rng.integers(3, 7))
        ]
        lines.append((" ".join(words), int(rng.integers(0, 50))))
    return lines


class TestDedupFilter:
    def test_identical_pair_excluded_distinct_retained(self):
        transcripts = [
            ("the quick brown fox", 0),
            ("zzz yyy xxx unrelated", 1),
            ("the quick brown fox", 2),
        ]
        records = build_dialog_queryset(transcripts, EMBEDDER, threshold=0.5, n=1, seed=0)
        assert len(records) == 1
        assert records[0].query_text == "zzz yyy xxx unrelated"
        assert records[0].gold_page_index == 1

    def test_single_transcript_survives_vacuously(self):
        records = build_dialog_queryset([("alone here", 4)], EMBEDDER, n=1, seed=0)
        assert records == [QueryRecord("alone here", 4, "exact")]

    def test_too_few_survivors_reports_count(self):
        transcripts = [("dup dup dup", 0), ("dup dup dup", 1)]
        with pytest.raises(ValidationError, match="only 0 of 2"):
            build_dialog_queryset(transcripts, EMBEDDER, n=1, seed=0)

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(7)
        transcripts = _random_transcripts(rng, 60)
        first = build_dialog_queryset(transcripts, WIDE_EMBEDDER, n=10, seed=42)
        second = build_dialog_queryset(transcripts, WIDE_EMBEDDER, n=10, seed=42)
        assert first == second
        assert build_dialog_queryset(transcripts, WIDE_EMBEDDER, n=10, seed=43) != first

    def test_origin_is_exact(self):
        records = build_dialog_queryset([("solo line", 3)], EMBEDDER, n=1, seed=1)
        assert records[0].origin == "exact"

    @given(seed=st.integers(0, 5_000), threshold=st.sampled_from([0.3, 0.5, 0.7]))
    @settings(max_examples=40, deadline=None)
    def test_retained_set_matches_pairwise_oracle(self, seed, threshold):
        rng = np.random.default_rng(seed)
        transcripts = _random_transcripts(rng, int(rng.integers(2, 40)))
        vectors = EMBEDDER.embed_texts([t for t, _ in transcripts])
        max_other = max_other_similarities(vectors)
        retained = [i for i in range(len(vectors)) if max_other[i] < threshold]
        assert retained == oracle_retained_indices([v.values for v in vectors], threshold)

    def test_bad_threshold_rejected(self):
        with pytest.raises(ValidationError):
            build_dialog_queryset([("x y", 0)], EMBEDDER, threshold=1.5, n=1)


class TestQuerysetFiles:
    def test_round_trip(self, tmp_path):
        records = [
            QueryRecord("first line", 3, "exact"),
            QueryRecord("a hand holds a broken watch", 9, "scene_manual"),
            QueryRecord("日本語のクエリ", 1, "translated"),
        ]
        path = tmp_path / "qs.jsonl"
        save_queryset(records, path)
        assert load_queryset(path) == records

    def test_fifty_scene_rows(self, tmp_path):
        path = tmp_path / "scenes.jsonl"
        save_queryset([QueryRecord(f"scene {i}", i, "scene_manual") for i in range(50)], path)
        records = load_queryset(path)
        assert len(records) == 50
        assert all(r.origin == "scene_manual" for r in records)

    def test_default_origin_applied(self, tmp_path):
        path = tmp_path / "qs.jsonl"
        path.write_text('{"query": "no origin", "gold_page": 2}\n')
        assert load_queryset(path)[0].origin == "scene_manual"

    def test_missing_gold_page_names_row(self, tmp_path):
        path = tmp_path / "qs.jsonl"
        path.write_text('{"query": "ok", "gold_page": 1}\n{"query": "broken"}\n')
        with pytest.raises(ValidationError, match=":2"):
            load_queryset(path)

    def test_malformed_line_names_row(self, tmp_path):
        path = tmp_path / "qs.jsonl"
        path.write_text('{"query": "ok", "gold_page": 1}\nnot json\n')
        with pytest.raises(AnnotationParseError, match=":2"):
            load_queryset(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "qs.jsonl"
        path.write_text("")
        assert load_queryset(path) == []

    def test_gold_page_validated_against_book(self, tmp_path):
        path = tmp_path / "qs.jsonl"
        save_queryset([QueryRecord("query", 10, "exact")], path)
        with pytest.raises(ValidationError, match="gold page 10"):
            load_queryset(path, valid_pages={0, 1, 2})


class TestPromptAssets:
    @pytest.mark.parametrize("name", PROMPT_NAMES)
    def test_templates_load_and_carry_slot(self, name):
        template = load_prompt(name)
        assert "[query]" in template

    def test_render_substitutes_query(self):
        rendered = render_prompt(load_prompt("paraphrase_ja"), "こんにちは")
        assert "こんにちは" in rendered
        assert "[query]" not in rendered

    def test_unknown_prompt_rejected(self):
        with pytest.raises(ValidationError):
            load_prompt("summarize")
