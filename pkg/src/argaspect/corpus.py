"""Data model and disk formats for the aspect-annotated argument corpus.

A sentence is a list of tokens, each carrying a PoS tag, an optional lemma,
a stance label (PRO / CON / NON) and an aspect flag (ASP / O). Contiguous
runs of PRO or CON tokens are argumentative segments; contiguous runs of
ASP tokens inside a segment are aspect terms. Structural constraints:

* a segment spans at least ``SEG_MIN`` tokens (its upper bound is the
  sentence length),
* an aspect term spans between ``ASP_MIN`` and ``ASP_MAX`` tokens,
* an aspect run never sticks out of the segment that contains it, and
  the combination (NON, ASP) is unrepresentable.

Two equivalent disk formats are supported:

TSV, one token per row, blank line between sentences, ``#`` comments::

    topic_id  sentence_id  token_index  surface  pos  lemma  stance  aspect

JSONL, one sentence object per line, same field names::

    {"topic_id": "T1", "sentence_id": "s1",
     "tokens": [{"token_index": 0, "surface": "...", "pos": "...",
                 "lemma": "...", "stance": "PRO", "aspect": "O"}, ...]}
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, TextIO, Union

SEG_MIN = 3  # minimum tokens per argumentative segment; SEG_MAX is the sentence length
ASP_MIN = 1  # minimum tokens per aspect term
ASP_MAX = 5  # maximum tokens per aspect term

TOPIC_IDS = ("T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8")

TOPIC_NAMES = {
    "T1": "abortion",
    "T2": "cloning",
    "T3": "marijuana legalization",
    "T4": "minimum wage",
    "T5": "nuclear energy",
    "T6": "death penalty",
    "T7": "gun control",
    "T8": "school uniforms",
}

TSV_COLUMNS = (
    "topic_id",
    "sentence_id",
    "token_index",
    "surface",
    "pos",
    "lemma",
    "stance",
    "aspect",
)

ASPECT_FLAG = "ASP"
NO_ASPECT_FLAG = "O"


class CorpusError(ValueError):
    """Raised for malformed input or a violated corpus invariant.

    Carries enough context (topic, sentence, token index) to locate the
    offending row in the source file.
    """

    def __init__(self, message, topic_id=None, sentence_id=None, token_index=None):
        where = []
        if topic_id is not None:
            where.append(f"topic {topic_id}")
        if sentence_id is not None:
            where.append(f"sentence {sentence_id}")
        if token_index is not None:
            where.append(f"token {token_index}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.topic_id = topic_id
        self.sentence_id = sentence_id
        self.token_index = token_index


class Stance(str, Enum):
    PRO = "PRO"
    CON = "CON"
    NON = "NON"

    @classmethod
    def parse(cls, value: str) -> "Stance":
        try:
            return cls(value)
        except ValueError:
            raise CorpusError(f"unknown stance label {value!r}") from None


ARGUMENTATIVE_STANCES = (Stance.PRO, Stance.CON)


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str
    lemma: str = ""

    def __post_init__(self):
        if not self.surface:
            raise CorpusError("token surface must be non-empty")
        if not self.pos:
            raise CorpusError("token PoS tag must be non-empty")

    @property
    def lemma_or_surface(self) -> str:
        """Lowercased lemma, falling back to the lowercased surface."""
        return (self.lemma or self.surface).lower()


@dataclass(frozen=True)
class NestedLabel:
    """Per-token label: stance plus aspect flag. (NON, ASP) is rejected."""

    stance: Stance
    aspect: bool = False

    def __post_init__(self):
        if self.stance is Stance.NON and self.aspect:
            raise CorpusError("the label combination (NON, ASP) is illegal")

    @property
    def aspect_flag(self) -> str:
        return ASPECT_FLAG if self.aspect else NO_ASPECT_FLAG

    @property
    def tag(self) -> str:
        """Compact string form, e.g. ``PRO|ASP``."""
        return f"{self.stance.value}|{self.aspect_flag}"

    @classmethod
    def parse(cls, stance: str, aspect: str) -> "NestedLabel":
        if aspect not in (ASPECT_FLAG, NO_ASPECT_FLAG):
            raise CorpusError(f"unknown aspect flag {aspect!r}")
        return cls(Stance.parse(stance), aspect == ASPECT_FLAG)

    @classmethod
    def from_tag(cls, tag: str) -> "NestedLabel":
        stance, _, aspect = tag.partition("|")
        return cls.parse(stance, aspect or NO_ASPECT_FLAG)


# The five legal labels, in canonical order. Index 0 is the "background"
# label, which also serves as the deterministic tie-break winner in decoding.
NS_LABELS = (
    NestedLabel(Stance.NON, False),
    NestedLabel(Stance.PRO, False),
    NestedLabel(Stance.PRO, True),
    NestedLabel(Stance.CON, False),
    NestedLabel(Stance.CON, True),
)

SPAN_KINDS = ("PRO", "CON", "ASP")


@dataclass(frozen=True, order=True)
class Span:
    """Half-open token interval [start, end) of a given kind."""

    start: int
    end: int
    kind: str

    def __post_init__(self):
        if self.kind not in SPAN_KINDS:
            raise CorpusError(f"unknown span kind {self.kind!r}")
        if not 0 <= self.start < self.end:
            raise CorpusError(f"invalid span bounds [{self.start}, {self.end})")
        if self.kind == "ASP":
            if not ASP_MIN <= len(self) <= ASP_MAX:
                raise CorpusError(
                    f"aspect span of {len(self)} tokens outside [{ASP_MIN}, {ASP_MAX}]"
                )
        elif len(self) < SEG_MIN:
            raise CorpusError(
                f"{self.kind} segment of {len(self)} tokens is shorter than {SEG_MIN}"
            )

    def __len__(self) -> int:
        return self.end - self.start

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def shifted(self, offset: int) -> "Span":
        return Span(self.start + offset, self.end + offset, self.kind)


def _runs(values: Iterable) -> Iterator[tuple[int, int, object]]:
    """Yield (start, end, value) for every maximal run of equal values."""
    start = None
    current = None
    end = 0
    for i, v in enumerate(values):
        if start is None:
            start, current = i, v
        elif v != current:
            yield start, i, current
            start, current = i, v
        end = i + 1
    if start is not None:
        yield start, end, current


def check_labels(labels: Iterable[NestedLabel], context: dict | None = None) -> None:
    """Validate the run structure of a label sequence.

    Checks: every PRO/CON run is at least SEG_MIN tokens, every ASP run is
    at most ASP_MAX tokens, and every maximal ASP run lies inside a single
    maximal PRO or CON run. (NON, ASP) cannot occur; NestedLabel rejects it.
    """
    labels = list(labels)
    ctx = context or {}
    stance_runs = list(_runs(l.stance for l in labels))
    for start, end, stance in stance_runs:
        if stance in ARGUMENTATIVE_STANCES and end - start < SEG_MIN:
            raise CorpusError(
                f"{stance.value} segment [{start}, {end}) has fewer than {SEG_MIN} tokens",
                token_index=start,
                **ctx,
            )
    boundaries = {start for start, _, _ in stance_runs}
    for start, end, flagged in _runs(l.aspect for l in labels):
        if not flagged:
            continue
        if end - start > ASP_MAX:
            raise CorpusError(
                f"aspect run [{start}, {end}) exceeds {ASP_MAX} tokens",
                token_index=start,
                **ctx,
            )
        if any(start < b < end for b in boundaries):
            raise CorpusError(
                f"aspect run [{start}, {end}) crosses a segment boundary",
                token_index=start,
                **ctx,
            )


def extract_spans(labels: Iterable[NestedLabel]) -> list[Span]:
    """Decode a legal label sequence into maximal-run spans.

    Returns the maximal PRO runs, maximal CON runs and maximal ASP runs,
    sorted by (start, end, kind). Together with :func:`encode_labels` this
    round-trips exactly.
    """
    labels = list(labels)
    spans = []
    for start, end, stance in _runs(l.stance for l in labels):
        if stance in ARGUMENTATIVE_STANCES:
            spans.append(Span(start, end, stance.value))
    for start, end, flagged in _runs(l.aspect for l in labels):
        if flagged:
            spans.append(Span(start, end, "ASP"))
    return sorted(spans, key=lambda s: (s.start, s.end, s.kind))


def encode_labels(spans: Iterable[Span], length: int) -> list[NestedLabel]:
    """Inverse of :func:`extract_spans`: rebuild the per-token label list."""
    stance = [Stance.NON] * length
    aspect = [False] * length
    for span in spans:
        if span.end > length:
            raise CorpusError(f"span {span} exceeds sentence length {length}")
        target, value = (aspect, True) if span.kind == "ASP" else (stance, Stance(span.kind))
        for i in range(span.start, span.end):
            if target is stance and stance[i] is not Stance.NON:
                raise CorpusError(f"overlapping segments at token {i}")
            target[i] = value
    labels = [NestedLabel(s, a) for s, a in zip(stance, aspect)]
    check_labels(labels)
    return labels


@dataclass(frozen=True)
class Sentence:
    topic_id: str
    sentence_id: str
    tokens: tuple[Token, ...]
    labels: tuple[NestedLabel, ...]

    def __post_init__(self):
        ctx = {"topic_id": self.topic_id, "sentence_id": self.sentence_id}
        if not self.tokens:
            raise CorpusError("sentence has no tokens", **ctx)
        if len(self.tokens) != len(self.labels):
            raise CorpusError(
                f"{len(self.tokens)} tokens but {len(self.labels)} labels", **ctx
            )
        check_labels(self.labels, ctx)

    def __len__(self) -> int:
        return len(self.tokens)

    def spans(self) -> list[Span]:
        return extract_spans(self.labels)

    def segments(self) -> list[Span]:
        """Argument units: the maximal PRO and CON runs, left to right."""
        return sorted(
            (s for s in self.spans() if s.kind != "ASP"), key=lambda s: s.start
        )

    def aspects(self) -> list[Span]:
        return [s for s in self.spans() if s.kind == "ASP"]

    def with_labels(self, labels: Iterable[NestedLabel]) -> "Sentence":
        return Sentence(self.topic_id, self.sentence_id, self.tokens, tuple(labels))


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]

    def __post_init__(self):
        seen = set()
        for s in self.sentences:
            key = (s.topic_id, s.sentence_id)
            if key in seen:
                raise CorpusError(
                    "duplicate sentence id", topic_id=s.topic_id, sentence_id=s.sentence_id
                )
            seen.add(key)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self) -> Iterator[Sentence]:
        return iter(self.sentences)

    def topics(self) -> list[str]:
        """Topic ids present, in first-seen order."""
        out = []
        for s in self.sentences:
            if s.topic_id not in out:
                out.append(s.topic_id)
        return out

    def by_topic(self) -> dict[str, list[Sentence]]:
        grouped: dict[str, list[Sentence]] = {}
        for s in self.sentences:
            grouped.setdefault(s.topic_id, []).append(s)
        return grouped

    def get(self, topic_id: str, sentence_id: str) -> Sentence:
        for s in self.sentences:
            if s.topic_id == topic_id and s.sentence_id == sentence_id:
                return s
        raise KeyError((topic_id, sentence_id))


Source = Union[str, Path, TextIO]


def _open_text(source: Source):
    """Return (file object, needs_close) for a path or stream."""
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8"), True
    return source, False


def _parse_rows(stream: TextIO):
    """Yield (line_number, columns) for every data row of a TSV stream."""
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\n").rstrip("\r")
        if not line.strip():
            yield lineno, None
            continue
        if line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != len(TSV_COLUMNS):
            raise CorpusError(
                f"line {lineno}: expected {len(TSV_COLUMNS)} tab-separated columns, got {len(cols)}"
            )
        yield lineno, cols


def _sentence_from_rows(rows: list[list[str]]) -> Sentence:
    topic_id, sentence_id = rows[0][0], rows[0][1]
    tokens = []
    labels = []
    for i, cols in enumerate(rows):
        if (cols[0], cols[1]) != (topic_id, sentence_id):
            raise CorpusError(
                f"sentence block mixes ids {cols[0]}/{cols[1]}",
                topic_id=topic_id,
                sentence_id=sentence_id,
                token_index=i,
            )
        try:
            index = int(cols[2])
        except ValueError:
            raise CorpusError(
                f"token_index {cols[2]!r} is not an integer",
                topic_id=topic_id,
                sentence_id=sentence_id,
                token_index=i,
            ) from None
        if index != i:
            raise CorpusError(
                f"token_index {index} out of order (expected {i})",
                topic_id=topic_id,
                sentence_id=sentence_id,
                token_index=i,
            )
        try:
            tokens.append(Token(cols[3], cols[4], cols[5]))
            labels.append(NestedLabel.parse(cols[6], cols[7]))
        except CorpusError as err:
            raise CorpusError(
                str(err), topic_id=topic_id, sentence_id=sentence_id, token_index=i
            ) from None
    return Sentence(topic_id, sentence_id, tuple(tokens), tuple(labels))


def _sentence_from_record(record: dict) -> Sentence:
    try:
        topic_id = record["topic_id"]
        sentence_id = record["sentence_id"]
        token_records = record["tokens"]
    except (KeyError, TypeError) as err:
        raise CorpusError(f"sentence record missing field: {err}") from None
    rows = []
    for i, tok in enumerate(token_records):
        rows.append(
            [
                topic_id,
                sentence_id,
                str(tok.get("token_index", i)),
                tok.get("surface", ""),
                tok.get("pos", ""),
                tok.get("lemma", ""),
                tok.get("stance", ""),
                tok.get("aspect", ""),
            ]
        )
    if not rows:
        raise CorpusError("sentence record has no tokens", topic_id=topic_id, sentence_id=sentence_id)
    return _sentence_from_rows(rows)


def parse_corpus(source: Source) -> Corpus:
    """Parse and validate a corpus from TSV or JSONL (auto-detected)."""
    stream, needs_close = _open_text(source)
    try:
        text = stream.read()
    finally:
        if needs_close:
            stream.close()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        sentences = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"line {lineno}: invalid JSON ({err.msg})") from None
            sentences.append(_sentence_from_record(record))
        return Corpus(tuple(sentences))

    sentences = []
    block: list[list[str]] = []
    for lineno, cols in _parse_rows(io.StringIO(text)):
        if cols is None:
            if block:
                sentences.append(_sentence_from_rows(block))
                block = []
        else:
            block.append(cols)
    if block:
        sentences.append(_sentence_from_rows(block))
    return Corpus(tuple(sentences))


def _sentence_rows(sentence: Sentence) -> Iterator[list[str]]:
    for i, (tok, lab) in enumerate(zip(sentence.tokens, sentence.labels)):
        yield [
            sentence.topic_id,
            sentence.sentence_id,
            str(i),
            tok.surface,
            tok.pos,
            tok.lemma,
            lab.stance.value,
            lab.aspect_flag,
        ]


def sentence_record(sentence: Sentence) -> dict:
    """JSON-serializable record for one sentence (the JSONL row)."""
    return {
        "topic_id": sentence.topic_id,
        "sentence_id": sentence.sentence_id,
        "tokens": [
            {
                "token_index": i,
                "surface": tok.surface,
                "pos": tok.pos,
                "lemma": tok.lemma,
                "stance": lab.stance.value,
                "aspect": lab.aspect_flag,
            }
            for i, (tok, lab) in enumerate(zip(sentence.tokens, sentence.labels))
        ],
    }


def write_tsv(corpus: Corpus, target: Source) -> None:
    stream, needs_close = (
        (open(target, "w", encoding="utf-8"), True)
        if isinstance(target, (str, Path))
        else (target, False)
    )
    try:
        for n, sentence in enumerate(corpus):
            if n:
                stream.write("\n")
            for row in _sentence_rows(sentence):
                stream.write("\t".join(row) + "\n")
    finally:
        if needs_close:
            stream.close()


def write_jsonl(corpus: Corpus, target: Source) -> None:
    stream, needs_close = (
        (open(target, "w", encoding="utf-8"), True)
        if isinstance(target, (str, Path))
        else (target, False)
    )
    try:
        for sentence in corpus:
            stream.write(json.dumps(sentence_record(sentence), ensure_ascii=False) + "\n")
    finally:
        if needs_close:
            stream.close()


def read_label_file(source: Source) -> dict[tuple[str, str], list[NestedLabel]]:
    """Read per-token labels from a prediction file without run validation.

    Prediction files reuse the corpus formats but may violate the run-level
    invariants (a decoder can emit a two-token segment); evaluation has to
    score them as they are. Label vocabulary is still enforced, so
    (NON, ASP) cannot sneak in.
    """
    stream, needs_close = _open_text(source)
    try:
        text = stream.read()
    finally:
        if needs_close:
            stream.close()

    out: dict[tuple[str, str], list[NestedLabel]] = {}

    def add(topic_id, sentence_id, stance, aspect):
        key = (topic_id, sentence_id)
        out.setdefault(key, []).append(NestedLabel.parse(stance, aspect))

    if text.lstrip().startswith("{"):
        for line in text.splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            for tok in record["tokens"]:
                add(record["topic_id"], record["sentence_id"], tok["stance"], tok["aspect"])
        return out
    for _, cols in _parse_rows(io.StringIO(text)):
        if cols is not None:
            add(cols[0], cols[1], cols[6], cols[7])
    return out


def write_label_file(
    corpus: Corpus,
    labels: dict[tuple[str, str], list[NestedLabel]],
    target: Source,
) -> None:
    """Write corpus tokens with replaced labels, skipping run validation."""
    stream, needs_close = (
        (open(target, "w", encoding="utf-8"), True)
        if isinstance(target, (str, Path))
        else (target, False)
    )
    try:
        for n, sentence in enumerate(corpus):
            seq = labels.get((sentence.topic_id, sentence.sentence_id))
            if seq is None or len(seq) != len(sentence):
                raise CorpusError(
                    "missing or misaligned labels",
                    topic_id=sentence.topic_id,
                    sentence_id=sentence.sentence_id,
                )
            if n:
                stream.write("\n")
            for i, (tok, lab) in enumerate(zip(sentence.tokens, seq)):
                row = [
                    sentence.topic_id,
                    sentence.sentence_id,
                    str(i),
                    tok.surface,
                    tok.pos,
                    tok.lemma,
                    lab.stance.value,
                    lab.aspect_flag,
                ]
                stream.write("\t".join(row) + "\n")
    finally:
        if needs_close:
            stream.close()
