"""Descriptive corpus statistics: counts, aspect-length histogram, top aspects.

Aspect identity is the lowercased lemma sequence of the span (per-token
fallback to the lowercased surface when the lemma column is empty), so
"Worker" and "workers" count as one aspect. Unique counts are reported per
topic and across the whole corpus; the per-topic unique counts do not sum
to the overall one because aspects recur across topics.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .corpus import ASP_MAX, Corpus, Sentence, Span, TOPIC_NAMES


def aspect_key(sentence: Sentence, span: Span) -> str:
    return " ".join(t.lemma_or_surface for t in sentence.tokens[span.start:span.end])


@dataclass(frozen=True)
class TopicStats:
    sentences: int
    segments: int
    aspects_total: int
    aspects_unique: int


@dataclass(frozen=True)
class CorpusStats:
    per_topic: dict[str, TopicStats]
    sentences: int
    segments: int
    aspects_total: int
    aspects_unique: int          # distinct lemma keys across the whole corpus
    aspects_unique_topic_sum: int
    length_hist: dict[int, int]  # aspect length in tokens -> count

    def length_percentages(self) -> dict[int, float]:
        total = sum(self.length_hist.values())
        if not total:
            return {n: 0.0 for n in self.length_hist}
        return {n: 100.0 * c / total for n, c in self.length_hist.items()}

    def to_dict(self) -> dict:
        return {
            "per_topic": {
                t: {
                    "topic": TOPIC_NAMES.get(t, t),
                    "sentences": s.sentences,
                    "segments": s.segments,
                    "aspects_total": s.aspects_total,
                    "aspects_unique": s.aspects_unique,
                }
                for t, s in self.per_topic.items()
            },
            "total": {
                "sentences": self.sentences,
                "segments": self.segments,
                "aspects_total": self.aspects_total,
                "aspects_unique": self.aspects_unique,
                "aspects_unique_topic_sum": self.aspects_unique_topic_sum,
            },
            "aspect_length_hist": dict(self.length_hist),
            "aspect_length_pct": self.length_percentages(),
        }


def corpus_stats(corpus: Corpus) -> CorpusStats:
    per_topic = {}
    all_keys = set()
    hist = Counter()
    totals = Counter()
    for topic_id, sentences in corpus.by_topic().items():
        keys = set()
        n_segments = n_aspects = 0
        for sentence in sentences:
            n_segments += len(sentence.segments())
            for span in sentence.aspects():
                n_aspects += 1
                hist[len(span)] += 1
                keys.add(aspect_key(sentence, span))
        per_topic[topic_id] = TopicStats(
            sentences=len(sentences),
            segments=n_segments,
            aspects_total=n_aspects,
            aspects_unique=len(keys),
        )
        all_keys |= keys
        totals["sentences"] += len(sentences)
        totals["segments"] += n_segments
        totals["aspects"] += n_aspects
    return CorpusStats(
        per_topic=per_topic,
        sentences=totals["sentences"],
        segments=totals["segments"],
        aspects_total=totals["aspects"],
        aspects_unique=len(all_keys),
        aspects_unique_topic_sum=sum(t.aspects_unique for t in per_topic.values()),
        length_hist={n: hist.get(n, 0) for n in range(1, ASP_MAX + 1)},
    )


@dataclass(frozen=True)
class CommonAspect:
    key: str
    topic_count: int
    occurrences: int
    topics: tuple[str, ...]


@dataclass(frozen=True)
class TopAspects:
    per_topic: dict[str, list[tuple[str, int]]]
    common: list[CommonAspect]  # aspects found in >= `common_min` topics
    common_min: int


def _resolve_topic(corpus_topics, requested: str) -> str:
    if requested in corpus_topics:
        return requested
    for tid, name in TOPIC_NAMES.items():
        if name == requested and tid in corpus_topics:
            return tid
    raise KeyError(f"unknown topic {requested!r}")


def top_aspects(corpus: Corpus, k: int, common_min: int = 7) -> TopAspects:
    """Top-k aspects per topic plus the aspects shared by many topics.

    Ranking is by descending occurrence count, ties broken lexicographically
    by the aspect key. The cross-topic report lists aspects occurring in at
    least ``common_min`` topics, with their total occurrence counts.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    counts: dict[str, Counter] = {}
    for topic_id, sentences in corpus.by_topic().items():
        counter = counts.setdefault(topic_id, Counter())
        for sentence in sentences:
            for span in sentence.aspects():
                counter[aspect_key(sentence, span)] += 1

    def ranked(counter: Counter) -> list[tuple[str, int]]:
        return sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))

    per_topic = {t: ranked(c)[:k] for t, c in counts.items()}

    topics_of: dict[str, set[str]] = {}
    occurrences: Counter = Counter()
    for topic_id, counter in counts.items():
        for key, n in counter.items():
            topics_of.setdefault(key, set()).add(topic_id)
            occurrences[key] += n
    common = [
        CommonAspect(key, len(tset), occurrences[key], tuple(sorted(tset)))
        for key, tset in topics_of.items()
        if len(tset) >= common_min
    ]
    common.sort(key=lambda c: (-c.topic_count, -c.occurrences, c.key))
    return TopAspects(per_topic=per_topic, common=common, common_min=common_min)


def topic_top_aspects(corpus: Corpus, topic: str, k: int) -> list[tuple[str, int]]:
    """Top-k list for one topic, addressable by id ("T4") or name."""
    report = top_aspects(corpus, k)
    return report.per_topic[_resolve_topic(report.per_topic, topic)]
