from __future__ import annotations

import shutil
from pathlib import Path

import numpy as np
import pytest

from argaspect import NestedLabel, Sentence, Stance, Token, Corpus, parse_corpus
from argaspect.annotation import AnnotationStore, build_tasks
from argaspect.corpus import ASP_MAX, SEG_MIN, check_labels
from argaspect.patterns import default_patterns

FIXTURES = Path(__file__).parent / "fixtures"

# Tags drawn by the random generators: the six used by the pattern table
# plus distractors that never match.
PATTERN_TAGS = ("NN", "NNS", "JJ", "IN", "HYPH", "POS")
OTHER_TAGS = ("DT", "VB", "VBZ", "VBP", "RB", "PRP", "MD", "CC", ".")


@pytest.fixture(scope="session")
def fixture_corpus() -> Corpus:
    return parse_corpus(FIXTURES / "mini_corpus.tsv")


@pytest.fixture()
def fixture_store(fixture_corpus, tmp_path) -> AnnotationStore:
    """Store primed with the fixture tasks and the checked-in responses."""
    store = AnnotationStore(tmp_path / "store")
    store.save_tasks(build_tasks(fixture_corpus, default_patterns()))
    shutil.copy(FIXTURES / "mini_responses.jsonl", store.responses_path)
    return AnnotationStore(store.directory)


def random_legal_labels(rng: np.random.Generator, n: int) -> list[NestedLabel]:
    """A uniformly messy but invariant-satisfying label sequence."""
    for _ in range(200):
        labels: list[NestedLabel] = []
        while len(labels) < n:
            remaining = n - len(labels)
            kinds = ["NON"] + (["PRO", "CON"] if remaining >= SEG_MIN else [])
            kind = kinds[rng.integers(len(kinds))]
            if kind == "NON":
                labels += [NestedLabel(Stance.NON)] * int(rng.integers(1, remaining + 1))
                continue
            stance = Stance.PRO if kind == "PRO" else Stance.CON
            run = int(rng.integers(SEG_MIN, remaining + 1))
            seg: list[NestedLabel] = []
            while len(seg) < run:
                left = run - len(seg)
                if rng.random() < 0.5:
                    seg += [NestedLabel(stance, False)] * int(rng.integers(1, left + 1))
                else:
                    length = int(rng.integers(1, min(ASP_MAX, left) + 1))
                    seg += [NestedLabel(stance, True)] * length
                    if left - length:
                        seg.append(NestedLabel(stance, False))
            labels += seg
        try:
            check_labels(labels)
            return labels
        except ValueError:
            continue  # adjacent same-stance chunks can merge aspect runs; redraw
    raise AssertionError("could not build a legal label sequence")


def random_tokens(rng: np.random.Generator, n: int, pattern_bias: float = 0.6) -> list[Token]:
    tokens = []
    for i in range(n):
        pool = PATTERN_TAGS if rng.random() < pattern_bias else OTHER_TAGS
        tag = pool[rng.integers(len(pool))]
        tokens.append(Token(f"w{rng.integers(0, 50)}", tag, ""))
    return tokens


def _segment_pos(rng: np.random.Generator, n: int) -> list[str]:
    # NN runs capped at ASP_MAX and never adjacent, so "aspect iff NN" is legal.
    tags: list[str] = []
    while len(tags) < n:
        if (not tags or tags[-1] != "NN") and rng.random() < 0.45:
            run = min(int(rng.integers(1, ASP_MAX + 1)), n - len(tags))
            tags += ["NN"] * run
        else:
            pool = ("VB", "JJ", "RB", "DT", "IN")
            tags.append(pool[rng.integers(len(pool))])
    return tags


def synthetic_corpus(
    seed: int = 7,
    topics=("T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8"),
    sentences_per_topic: int = 24,
) -> Corpus:
    """Generated corpus where aspects are exactly the NN runs of a segment.

    Big enough to exercise splits and CRF training; labels are a learnable
    deterministic function of the PoS column.
    """
    rng = np.random.default_rng(seed)
    sentences = []
    for topic in topics:
        for k in range(sentences_per_topic):
            n = int(rng.integers(8, 15))
            seg_len = int(rng.integers(5, n + 1))
            seg_start = int(rng.integers(0, n - seg_len + 1))
            stance = Stance.PRO if rng.random() < 0.5 else Stance.CON
            pos = ["DT" if rng.random() < 0.5 else "RB"] * n
            seg_tags = _segment_pos(rng, seg_len)
            tokens, labels = [], []
            for i in range(n):
                inside = seg_start <= i < seg_start + seg_len
                tag = seg_tags[i - seg_start] if inside else pos[i]
                word = f"{tag.lower()}{rng.integers(0, 40)}"
                tokens.append(Token(word, tag, word))
                if inside:
                    labels.append(NestedLabel(stance, tag == "NN"))
                else:
                    labels.append(NestedLabel(Stance.NON))
            sentences.append(
                Sentence(topic, f"g{k}", tuple(tokens), tuple(labels))
            )
    return Corpus(tuple(sentences))


@pytest.fixture(scope="session")
def synth_corpus() -> Corpus:
    return synthetic_corpus()
