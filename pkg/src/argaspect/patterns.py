"""PoS-pattern matching: aspect candidate generation and the rule baseline.

Aspect term candidates are token windows whose PoS tag sequence exactly
equals one of 44 noun-phrase-like patterns over Penn Treebank tags. The
same patterns double as a rule-based labeler: flag every token covered by
at least one matching window.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, TextIO, Union

from .corpus import ASP_MAX, ASP_MIN, SEG_MIN, ASPECT_FLAG, NO_ASPECT_FLAG, Span, Token

# The default pattern inventory: 44 tag sequences, one per line.
DEFAULT_PATTERNS_TEXT = """\
NN
NNS
NN NN
NN NNS
JJ NN
JJ NNS
NN NN NN
NN NN NNS
NN IN NN
NN IN NNS
NN HYPH NN
NN HYPH NNS
NN JJ NN
NN JJ NNS
NNS JJ NN
NNS JJ NNS
NN POS NN
NN POS NNS
NNS POS NN
NNS POS NNS
IN NN NN
IN NN NNS
JJ NN NN
JJ NN NNS
JJ JJ NN
JJ JJ NNS
NN HYPH NN NN
NN HYPH NN NNS
NN POS JJ NN
NN POS JJ NNS
JJ HYPH NN NN
JJ HYPH NN NNS
JJ HYPH JJ NN
JJ HYPH JJ NNS
JJ JJ NN NN
JJ JJ NN NNS
JJ NN HYPH NN
JJ NN HYPH NNS
JJ NN JJ NN
JJ NN JJ NNS
JJ NN NN NN
JJ NN NN NNS
JJ HYPH NN NN NN
JJ HYPH NN NN NNS
"""

# Appended after the candidate menu everywhere; mutually exclusive with
# selecting any candidate.
NONE_OPTION = "NONE"


@dataclass(frozen=True)
class PosPattern:
    tags: tuple[str, ...]

    def __post_init__(self):
        if not ASP_MIN <= len(self.tags) <= ASP_MAX:
            raise ValueError(
                f"pattern length {len(self.tags)} outside [{ASP_MIN}, {ASP_MAX}]"
            )
        if any(not t or " " in t for t in self.tags):
            raise ValueError(f"malformed PoS tags in pattern: {self.tags}")

    def __len__(self) -> int:
        return len(self.tags)

    def __str__(self) -> str:
        return " ".join(self.tags)


class PatternSet:
    """Immutable, duplicate-free, order-preserving set of PoS patterns."""

    def __init__(self, patterns: Iterable[PosPattern]):
        patterns = tuple(patterns)
        seen = set()
        for p in patterns:
            if p.tags in seen:
                raise ValueError(f"duplicate pattern: {p}")
            seen.add(p.tags)
        self._patterns = patterns
        self._by_tags = {p.tags: p for p in patterns}
        self._lengths = sorted({len(p) for p in patterns})

    def __len__(self) -> int:
        return len(self._patterns)

    def __iter__(self):
        return iter(self._patterns)

    def __contains__(self, item) -> bool:
        if isinstance(item, PosPattern):
            return item.tags in self._by_tags
        return tuple(item) in self._by_tags

    def lookup(self, tags: Sequence[str]) -> PosPattern | None:
        return self._by_tags.get(tuple(tags))

    @property
    def window_lengths(self) -> list[int]:
        return list(self._lengths)


def default_patterns() -> PatternSet:
    """The built-in 44-pattern inventory."""
    return parse_patterns(DEFAULT_PATTERNS_TEXT)


def parse_patterns(text: str) -> PatternSet:
    patterns = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        patterns.append(PosPattern(tuple(line.split())))
    return PatternSet(patterns)


def load_patterns(source: Union[str, Path, TextIO]) -> PatternSet:
    """Load patterns from a plain-text file, one tag sequence per line."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    return parse_patterns(text)


def write_patterns(patterns: PatternSet, target: Union[str, Path, TextIO]) -> None:
    text = "".join(f"{p}\n" for p in patterns)
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


@dataclass(frozen=True)
class Candidate:
    """A pattern match: an ASP-kind span plus its surface and pattern."""

    span: Span
    surface: str
    pattern: PosPattern


def match_all(tokens: Sequence[Token], patterns: PatternSet) -> list[Candidate]:
    """Every contiguous window whose PoS sequence equals some pattern.

    Output is ordered by (start, end). A window matches at most one pattern
    (patterns are distinct sequences), so positional duplicates cannot
    occur; the same surface may of course appear more than once. Tags not
    used by any pattern simply never match.
    """
    if not tokens:
        raise ValueError("match_all requires a non-empty token sequence")
    tags = [t.pos for t in tokens]
    out = []
    for start in range(len(tokens)):
        for length in patterns.window_lengths:
            end = start + length
            if end > len(tokens):
                break
            pattern = patterns.lookup(tags[start:end])
            if pattern is not None:
                surface = " ".join(t.surface for t in tokens[start:end])
                out.append(Candidate(Span(start, end, "ASP"), surface, pattern))
    return out


def baseline_labels(tokens: Sequence[Token], patterns: PatternSet) -> list[str]:
    """Rule-based aspect labeling: the token-level union of all matches."""
    flags = [NO_ASPECT_FLAG] * len(tokens)
    for candidate in match_all(tokens, patterns):
        for i in range(candidate.span.start, candidate.span.end):
            flags[i] = ASPECT_FLAG
    return flags


def generate_candidates(
    segment_tokens: Sequence[Token], patterns: PatternSet
) -> list[Candidate]:
    """Candidate menu for annotating one argument unit.

    Matches are deduplicated by lowercased surface form (first occurrence
    wins, original order preserved): annotators pick terms, not offsets.
    The menu is always presented with the terminal ``NONE_OPTION`` appended,
    which is mutually exclusive with any candidate selection.
    """
    if len(segment_tokens) < SEG_MIN:
        raise ValueError(
            f"segment of {len(segment_tokens)} tokens is shorter than SEG_MIN={SEG_MIN}"
        )
    seen = set()
    menu = []
    for candidate in match_all(segment_tokens, patterns):
        key = candidate.surface.lower()
        if key not in seen:
            seen.add(key)
            menu.append(candidate)
    return menu
