"""Train/dev/test splits and task-specific sample extraction.

Two evaluation regimes:

* CROSS: assignment is by topic and fully deterministic — train on T1-T5,
  tune on T6, test on the unseen topics T7+T8.
* INNER: T1-T6 sentences are shuffled per topic with a seeded RNG and
  packed into train/dev/test using largest-remainder quotas so the totals
  track the published sample proportions. The same seed always yields the
  same split.

Task units differ: ATE samples are argument-unit segments, NS samples are
whole sentences. A sentence is assigned to exactly one set; its segments
inherit the assignment.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .corpus import ASPECT_FLAG, NO_ASPECT_FLAG, Corpus, CorpusError, Sentence, Span

ATE = "ate"
NS = "ns"
INNER = "inner"
CROSS = "cross"

INNER_TOPICS = ("T1", "T2", "T3", "T4", "T5", "T6")
CROSS_TRAIN_TOPICS = ("T1", "T2", "T3", "T4", "T5")
CROSS_DEV_TOPICS = ("T6",)
CROSS_TEST_TOPICS = ("T7", "T8")

# Published sample counts per set for the inner-topic regime; used as the
# target proportions (ATE counts are in segments, NS counts in sentences).
INNER_TARGETS = {
    ATE: (2447, 333, 693),
    NS: (2268, 307, 636),
}

DEFAULT_SEED = 13

SentencePointer = tuple[str, str]


@dataclass(frozen=True)
class SplitSpec:
    domain: str
    task: str
    seed: int
    train: tuple[SentencePointer, ...]
    dev: tuple[SentencePointer, ...]
    test: tuple[SentencePointer, ...]

    def __post_init__(self):
        sets = [set(self.train), set(self.dev), set(self.test)]
        if sum(len(s) for s in sets) != len(set().union(*sets)):
            raise ValueError("train/dev/test overlap")

    def sets(self) -> dict[str, tuple[SentencePointer, ...]]:
        return {"train": self.train, "dev": self.dev, "test": self.test}

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "task": self.task,
            "seed": self.seed,
            "train": [list(p) for p in self.train],
            "dev": [list(p) for p in self.dev],
            "test": [list(p) for p in self.test],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SplitSpec":
        return cls(
            domain=data["domain"],
            task=data["task"],
            seed=data["seed"],
            train=tuple((t, s) for t, s in data["train"]),
            dev=tuple((t, s) for t, s in data["dev"]),
            test=tuple((t, s) for t, s in data["test"]),
        )


def _require_topics(by_topic: dict, topics) -> None:
    missing = [t for t in topics if t not in by_topic]
    if missing:
        raise CorpusError(f"corpus is missing topics: {', '.join(missing)}")


def _weight(sentence: Sentence, task: str) -> int:
    return len(sentence.segments()) if task == ATE else 1


def _largest_remainder(total: int, fractions: list[float]) -> list[int]:
    raw = [total * f for f in fractions]
    counts = [int(x) for x in raw]
    short = total - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - counts[i], reverse=True)
    for i in order[:short]:
        counts[i] += 1
    return counts


def make_splits(corpus: Corpus, domain: str, task: str, seed: int = DEFAULT_SEED) -> SplitSpec:
    """Build a deterministic SplitSpec for the given regime and task."""
    if domain not in (INNER, CROSS):
        raise ValueError(f"unknown domain {domain!r}")
    if task not in (ATE, NS):
        raise ValueError(f"unknown task {task!r}")
    by_topic = corpus.by_topic()

    def pointers(topics) -> tuple[SentencePointer, ...]:
        return tuple(
            (s.topic_id, s.sentence_id) for t in topics for s in by_topic[t]
        )

    if domain == CROSS:
        _require_topics(by_topic, CROSS_TRAIN_TOPICS + CROSS_DEV_TOPICS + CROSS_TEST_TOPICS)
        return SplitSpec(
            domain, task, seed,
            pointers(CROSS_TRAIN_TOPICS),
            pointers(CROSS_DEV_TOPICS),
            pointers(CROSS_TEST_TOPICS),
        )

    _require_topics(by_topic, INNER_TOPICS)
    targets = INNER_TARGETS[task]
    fractions = [t / sum(targets) for t in targets]
    rng = np.random.default_rng(seed)
    train, dev, test = [], [], []
    for topic in INNER_TOPICS:
        sentences = list(by_topic[topic])
        order = rng.permutation(len(sentences))
        shuffled = [sentences[i] for i in order]
        weights = [_weight(s, task) for s in shuffled]
        quota_train, quota_dev, _ = _largest_remainder(sum(weights), fractions)
        filled = 0
        for s, w in zip(shuffled, weights):
            if filled + w <= quota_train:
                train.append((s.topic_id, s.sentence_id))
                filled += w
            elif filled + w <= quota_train + quota_dev:
                dev.append((s.topic_id, s.sentence_id))
                filled += w
            else:
                test.append((s.topic_id, s.sentence_id))
                filled += w
    return SplitSpec(domain, task, seed, tuple(train), tuple(dev), tuple(test))


# --- sample extraction ------------------------------------------------------

AteSample = tuple[Sentence, Span]


def ate_samples(corpus: Corpus, pointers) -> list[AteSample]:
    """One sample per argument-unit segment of the pointed-at sentences."""
    out = []
    for topic_id, sentence_id in pointers:
        sentence = corpus.get(topic_id, sentence_id)
        for segment in sentence.segments():
            out.append((sentence, segment))
    return out


def ns_samples(corpus: Corpus, pointers) -> list[Sentence]:
    return [corpus.get(t, s) for t, s in pointers]


def ate_sequences(samples) -> tuple[list[list], list[list[str]]]:
    """(token sequences, gold ASP/O flag sequences) for ATE samples."""
    tokens, flags = [], []
    for sentence, segment in samples:
        tokens.append(list(sentence.tokens[segment.start:segment.end]))
        flags.append(
            [
                ASPECT_FLAG if lab.aspect else NO_ASPECT_FLAG
                for lab in sentence.labels[segment.start:segment.end]
            ]
        )
    return tokens, flags


def split_counts(spec: SplitSpec, corpus: Corpus) -> dict[str, int]:
    """Sample counts per set, in the split's task units."""
    counts = {}
    for name, pointers in spec.sets().items():
        if spec.task == ATE:
            counts[name] = len(ate_samples(corpus, pointers))
        else:
            counts[name] = len(pointers)
    return counts
