from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from argaspect import (
    Corpus,
    CorpusError,
    NestedLabel,
    Sentence,
    Span,
    Stance,
    Token,
    encode_labels,
    extract_spans,
    parse_corpus,
    write_jsonl,
    write_tsv,
)
from argaspect.corpus import read_label_file, write_label_file

from conftest import random_legal_labels


def labels(spec: str) -> list[NestedLabel]:
    """'N p P c C' shorthand: N=NON, p/c=PRO/CON, upper=with ASP."""
    table = {
        "N": NestedLabel(Stance.NON),
        "p": NestedLabel(Stance.PRO),
        "P": NestedLabel(Stance.PRO, True),
        "c": NestedLabel(Stance.CON),
        "C": NestedLabel(Stance.CON, True),
    }
    return [table[ch] for ch in spec.replace(" ", "")]


MINIMAL_TSV = """\
# comment line
T1\ts1\t0\tA\tDT\ta\tNON\tO
T1\ts1\t1\tgood\tJJ\tgood\tPRO\tO
T1\ts1\t2\tthing\tNN\tthing\tPRO\tASP
T1\ts1\t3\thappened\tVBD\thappen\tPRO\tO
T1\ts1\t4\t.\t.\t.\tNON\tO
"""


class TestTypes:
    def test_token_requires_surface_and_pos(self):
        with pytest.raises(CorpusError):
            Token("", "NN")
        with pytest.raises(CorpusError):
            Token("word", "")

    def test_stance_is_closed(self):
        with pytest.raises(CorpusError, match="unknown stance label"):
            Stance.parse("PR0")

    def test_non_asp_unrepresentable(self):
        with pytest.raises(CorpusError):
            NestedLabel(Stance.NON, True)
        assert NestedLabel.parse("NON", "O").tag == "NON|O"

    def test_exactly_five_nested_labels(self):
        legal = set()
        for stance in Stance:
            for aspect in (False, True):
                try:
                    legal.add(NestedLabel(stance, aspect).tag)
                except CorpusError:
                    pass
        assert legal == {"NON|O", "PRO|O", "PRO|ASP", "CON|O", "CON|ASP"}

    def test_span_bounds(self):
        with pytest.raises(CorpusError):
            Span(3, 3, "PRO")
        with pytest.raises(CorpusError):
            Span(0, 2, "PRO")  # below SEG_MIN
        with pytest.raises(CorpusError):
            Span(0, 6, "ASP")  # above ASP_MAX
        assert len(Span(0, 3, "PRO")) == 3

    def test_sentence_rejects_aspect_crossing_segments(self):
        with pytest.raises(CorpusError, match="crosses"):
            Sentence("T1", "x", tuple(Token(f"w{i}", "NN") for i in range(6)),
                     tuple(labels("ppPCcc")))

    def test_sentence_rejects_long_aspect_run(self):
        with pytest.raises(CorpusError, match="exceeds"):
            Sentence("T1", "x", tuple(Token(f"w{i}", "NN") for i in range(7)),
                     tuple(labels("PPPPPPp")))

    def test_corpus_rejects_duplicate_ids(self):
        s = Sentence("T1", "dup", (Token("a", "DT"),), (NestedLabel(Stance.NON),))
        with pytest.raises(CorpusError, match="duplicate"):
            Corpus((s, s))


class TestParse:
    def test_minimal_sentence_at_seg_min(self):
        corpus = parse_corpus(io.StringIO(MINIMAL_TSV))
        assert len(corpus) == 1
        sentence = corpus.sentences[0]
        assert sentence.segments() == [Span(1, 4, "PRO")]
        assert sentence.aspects() == [Span(2, 3, "ASP")]

    def test_unknown_stance_label(self):
        bad = MINIMAL_TSV.replace("PRO\tO", "PR0\tO")
        with pytest.raises(CorpusError, match="unknown stance label"):
            parse_corpus(io.StringIO(bad))

    def test_unknown_aspect_flag(self):
        bad = MINIMAL_TSV.replace("\tASP", "\tASPECT")
        with pytest.raises(CorpusError, match="unknown aspect flag"):
            parse_corpus(io.StringIO(bad))

    def test_wrong_column_count(self):
        with pytest.raises(CorpusError, match="columns"):
            parse_corpus(io.StringIO("T1\ts1\t0\tword\tNN\tlemma\tPRO\n"))

    def test_error_carries_location(self):
        bad = MINIMAL_TSV.replace("2\tthing\tNN\tthing\tPRO\tASP",
                                  "2\tthing\tNN\tthing\tNON\tASP")
        with pytest.raises(CorpusError) as err:
            parse_corpus(io.StringIO(bad))
        assert "T1" in str(err.value) and "s1" in str(err.value) and "token 2" in str(err.value)

    def test_invariant_violation_reported(self):
        # two-token PRO segment
        bad = MINIMAL_TSV.replace("T1\ts1\t3\thappened\tVBD\thappen\tPRO\tO",
                                  "T1\ts1\t3\thappened\tVBD\thappen\tNON\tO")
        with pytest.raises(CorpusError, match="fewer than 3"):
            parse_corpus(io.StringIO(bad))

    def test_token_index_must_be_sequential(self):
        bad = MINIMAL_TSV.replace("T1\ts1\t4\t.", "T1\ts1\t9\t.")
        with pytest.raises(CorpusError, match="out of order"):
            parse_corpus(io.StringIO(bad))

    def test_empty_input_gives_empty_corpus(self):
        assert len(parse_corpus(io.StringIO(""))) == 0


class TestRoundTrip:
    def test_tsv_round_trip_identity(self, fixture_corpus):
        out = io.StringIO()
        write_tsv(fixture_corpus, out)
        assert parse_corpus(io.StringIO(out.getvalue())) == fixture_corpus

    def test_jsonl_round_trip_identity(self, fixture_corpus):
        out = io.StringIO()
        write_jsonl(fixture_corpus, out)
        assert parse_corpus(io.StringIO(out.getvalue())) == fixture_corpus

    def test_jsonl_mirror_field_names(self, fixture_corpus):
        out = io.StringIO()
        write_jsonl(fixture_corpus, out)
        import json

        record = json.loads(out.getvalue().splitlines()[0])
        assert set(record) == {"topic_id", "sentence_id", "tokens"}
        assert set(record["tokens"][0]) == {
            "token_index", "surface", "pos", "lemma", "stance", "aspect",
        }

    def test_label_file_round_trip_without_validation(self, fixture_corpus):
        # a decoded prediction may break SEG_MIN; the label reader accepts it
        preds = {
            (s.topic_id, s.sentence_id): [NestedLabel(Stance.NON)] * len(s)
            for s in fixture_corpus
        }
        key = ("T1", "s1")
        preds[key] = labels("NppNNNN")  # two-token "segment": illegal as a corpus
        out = io.StringIO()
        write_label_file(fixture_corpus, preds, out)
        read = read_label_file(io.StringIO(out.getvalue()))
        assert read[key] == preds[key]
        with pytest.raises(CorpusError):
            parse_corpus(io.StringIO(out.getvalue()))


def brute_force_spans(seq: list[NestedLabel]) -> set[Span]:
    """Oracle: test every interval for being a maximal same-kind run."""
    out = set()
    n = len(seq)
    for start in range(n):
        for end in range(start + 1, n + 1):
            for kind in ("PRO", "CON", "ASP"):
                if kind == "ASP":
                    inside = all(seq[i].aspect for i in range(start, end))
                    left = start > 0 and seq[start - 1].aspect
                    right = end < n and seq[end].aspect
                else:
                    inside = all(seq[i].stance.value == kind for i in range(start, end))
                    left = start > 0 and seq[start - 1].stance.value == kind
                    right = end < n and seq[end].stance.value == kind
                if inside and not left and not right:
                    out.add(Span(start, end, kind))
    return out


class TestSpans:
    def test_all_non_has_no_spans(self):
        assert extract_spans(labels("NNNNN")) == []

    def test_forced_maximal_runs(self):
        spans = extract_spans(labels("pPPp"))
        assert spans == [Span(0, 4, "PRO"), Span(1, 3, "ASP")]

    def test_adjacent_segments_stay_separate(self):
        spans = extract_spans(labels("pppccc"))
        assert spans == [Span(0, 3, "PRO"), Span(3, 6, "CON")]

    def test_matches_brute_force_on_random_sequences(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            seq = random_legal_labels(rng, int(rng.integers(1, 21)))
            assert set(extract_spans(seq)) == brute_force_spans(seq)

    def test_round_trip_through_encoding(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            seq = random_legal_labels(rng, 12)
            assert encode_labels(extract_spans(seq), 12) == seq

    @given(st.integers(min_value=1, max_value=20), st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, n, seed):
        seq = random_legal_labels(np.random.default_rng(seed), n)
        assert encode_labels(extract_spans(seq), n) == seq
