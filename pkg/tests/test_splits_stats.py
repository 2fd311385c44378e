from __future__ import annotations

import numpy as np
import pytest

from argaspect import Corpus, CorpusError, NestedLabel, Sentence, Stance, Token
from argaspect.splits import (
    ATE,
    CROSS,
    INNER,
    INNER_TARGETS,
    NS,
    SplitSpec,
    ate_samples,
    make_splits,
    split_counts,
)
from argaspect.stats import corpus_stats, top_aspects, topic_top_aspects

from conftest import synthetic_corpus


class TestCrossSplits:
    def test_topic_assignment(self, synth_corpus):
        spec = make_splits(synth_corpus, CROSS, NS, seed=1)
        assert {t for t, _ in spec.train} == {"T1", "T2", "T3", "T4", "T5"}
        assert {t for t, _ in spec.dev} == {"T6"}
        assert {t for t, _ in spec.test} == {"T7", "T8"}

    def test_exhaustive_over_selected_topics(self, synth_corpus):
        spec = make_splits(synth_corpus, CROSS, ATE, seed=1)
        assigned = set(spec.train) | set(spec.dev) | set(spec.test)
        everything = {(s.topic_id, s.sentence_id) for s in synth_corpus}
        assert assigned == everything

    def test_seed_irrelevant_for_cross(self, synth_corpus):
        a = make_splits(synth_corpus, CROSS, NS, seed=1)
        b = make_splits(synth_corpus, CROSS, NS, seed=99)
        assert a.sets() == b.sets()

    def test_missing_topic_is_an_error(self, fixture_corpus):
        partial = Corpus(tuple(s for s in fixture_corpus if s.topic_id != "T7"))
        with pytest.raises(CorpusError, match="missing topics"):
            make_splits(partial, CROSS, NS, seed=1)


class TestInnerSplits:
    def test_partition_of_t1_t6(self, synth_corpus):
        spec = make_splits(synth_corpus, INNER, NS, seed=3)
        assigned = set(spec.train) | set(spec.dev) | set(spec.test)
        expected = {
            (s.topic_id, s.sentence_id)
            for s in synth_corpus
            if s.topic_id in ("T1", "T2", "T3", "T4", "T5", "T6")
        }
        assert assigned == expected
        assert len(spec.train) + len(spec.dev) + len(spec.test) == len(expected)

    def test_deterministic_per_seed(self, synth_corpus):
        assert make_splits(synth_corpus, INNER, ATE, seed=5) == make_splits(
            synth_corpus, INNER, ATE, seed=5
        )
        assert make_splits(synth_corpus, INNER, ATE, seed=5) != make_splits(
            synth_corpus, INNER, ATE, seed=6
        )

    def test_counts_track_published_proportions(self, synth_corpus):
        for task in (ATE, NS):
            spec = make_splits(synth_corpus, INNER, task, seed=2)
            counts = split_counts(spec, synth_corpus)
            total = sum(counts.values())
            targets = INNER_TARGETS[task]
            fractions = [t / sum(targets) for t in targets]
            for name, frac in zip(("train", "dev", "test"), fractions):
                # generous bound: quotas are per topic, overshoot lands in test
                assert abs(counts[name] / total - frac) < 0.05

    def test_ate_counts_are_segments(self, synth_corpus):
        spec = make_splits(synth_corpus, INNER, ATE, seed=2)
        counts = split_counts(spec, synth_corpus)
        assert counts["train"] == len(ate_samples(synth_corpus, spec.train))

    def test_spec_round_trip(self, synth_corpus):
        spec = make_splits(synth_corpus, INNER, NS, seed=4)
        assert SplitSpec.from_dict(spec.to_dict()) == spec

    def test_overlapping_sets_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            SplitSpec(INNER, NS, 0, (("T1", "a"),), (("T1", "a"),), ())


def sent(topic, sid, words, stance="PRO", aspects=()):
    tokens = tuple(Token(w, "NN", w.lower()) for w in words)
    labels = []
    for i in range(len(words)):
        flagged = any(a <= i < b for a, b in aspects)
        labels.append(NestedLabel(Stance(stance), flagged))
    return Sentence(topic, sid, tokens, tuple(labels))


class TestCorpusStats:
    def test_fixture_totals(self, fixture_corpus):
        stats = corpus_stats(fixture_corpus)
        assert stats.sentences == 20
        assert stats.segments == 20  # T1 s3 has none, T8 s3 has two
        assert stats.sentences == sum(t.sentences for t in stats.per_topic.values())
        assert stats.segments == sum(t.segments for t in stats.per_topic.values())
        assert stats.aspects_total == sum(t.aspects_total for t in stats.per_topic.values())
        assert stats.aspects_unique_topic_sum == sum(
            t.aspects_unique for t in stats.per_topic.values()
        )
        assert sum(stats.length_hist.values()) == stats.aspects_total

    def test_unique_counts_lemma_keyed_across_topics(self):
        corpus = Corpus((
            sent("T1", "a", ("Workers", "rise", "up"), aspects=((0, 1),)),
            sent("T1", "b", ("worker", "wins", "case"), aspects=((0, 1),)),
            sent("T2", "a", ("workers", "see", "gains"), aspects=((0, 1),)),
        ))
        # lemma column lowercases to "workers"/"worker": fall back is per token lemma
        stats = corpus_stats(corpus)
        assert stats.per_topic["T1"].aspects_total == 2
        assert stats.per_topic["T1"].aspects_unique == 2  # "workers" vs "worker"
        assert stats.aspects_unique == 2
        assert stats.aspects_unique_topic_sum == 3  # "workers" counted in T1 and T2

    def test_lemma_fallback_to_surface(self):
        s = Sentence(
            "T1", "x",
            (Token("Costs", "NNS", ""), Token("grow", "VBP", "grow"), Token("fast", "RB", "fast")),
            (NestedLabel(Stance.PRO, True), NestedLabel(Stance.PRO), NestedLabel(Stance.PRO)),
        )
        stats = corpus_stats(Corpus((s,)))
        assert stats.aspects_unique == 1
        report = top_aspects(Corpus((s,)), 1)
        assert report.per_topic["T1"] == [("costs", 1)]

    def test_length_histogram(self, fixture_corpus):
        stats = corpus_stats(fixture_corpus)
        assert set(stats.length_hist) == {1, 2, 3, 4, 5}
        pct = stats.length_percentages()
        assert sum(pct.values()) == pytest.approx(100.0)

    def test_empty_corpus_all_zero(self):
        stats = corpus_stats(Corpus(()))
        assert stats.sentences == stats.segments == stats.aspects_total == 0
        assert stats.aspects_unique == 0
        assert all(v == 0 for v in stats.length_hist.values())


class TestTopAspects:
    def test_single_aspect(self):
        corpus = Corpus((sent("T1", "a", ("cost", "grows", "fast"), aspects=((0, 1),)),))
        assert topic_top_aspects(corpus, "T1", 1) == [("cost", 1)]

    def test_fixture_minimum_wage_top(self, fixture_corpus):
        # "worker" appears twice in T4, everything else once
        assert topic_top_aspects(fixture_corpus, "minimum wage", 1) == [("worker", 2)]
        assert topic_top_aspects(fixture_corpus, "T4", 1) == [("worker", 2)]

    def test_ties_break_lexicographically(self):
        corpus = Corpus((
            sent("T1", "a", ("beta", "x", "y"), aspects=((0, 1),)),
            sent("T1", "b", ("alpha", "x", "y"), aspects=((0, 1),)),
        ))
        assert topic_top_aspects(corpus, "T1", 2) == [("alpha", 1), ("beta", 1)]

    def test_common_aspects_threshold(self):
        sentences = []
        for i, topic in enumerate(("T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8")):
            sentences.append(sent(topic, "a", ("life", "goes", "on"), aspects=((0, 1),)))
            if topic != "T8":
                sentences.append(sent(topic, "b", ("cost", "grows", "fast"), aspects=((0, 1),)))
            if i < 3:
                sentences.append(sent(topic, "c", ("niche", "topic", "word"), aspects=((0, 1),)))
        report = top_aspects(Corpus(tuple(sentences)), 5)
        by_key = {c.key: c for c in report.common}
        assert set(by_key) == {"life", "cost"}
        assert by_key["life"].topic_count == 8
        assert by_key["life"].occurrences == 8
        assert by_key["cost"].topic_count == 7
        assert report.common[0].key == "life"  # 8-topic aspects rank first

    def test_k_must_be_positive(self, fixture_corpus):
        with pytest.raises(ValueError):
            top_aspects(fixture_corpus, 0)
