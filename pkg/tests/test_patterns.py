from __future__ import annotations

import io

import numpy as np
import pytest

from argaspect import Token
from argaspect.corpus import ASPECT_FLAG, NO_ASPECT_FLAG
from argaspect.patterns import (
    Candidate,
    PatternSet,
    PosPattern,
    baseline_labels,
    default_patterns,
    generate_candidates,
    load_patterns,
    match_all,
    parse_patterns,
    write_patterns,
)

from conftest import random_tokens


def toks(*pairs) -> list[Token]:
    return [Token(surface, pos) for surface, pos in pairs]


class TestPatternSet:
    def test_default_has_exactly_44(self):
        assert len(default_patterns()) == 44

    def test_known_members(self):
        patterns = default_patterns()
        assert ("JJ", "NN") in patterns
        assert ("NN", "HYPH", "NN", "NNS") in patterns
        assert ("VB",) not in patterns

    def test_no_pattern_longer_than_five(self):
        assert max(len(p) for p in default_patterns()) == 5

    def test_no_duplicates(self):
        patterns = list(default_patterns())
        assert len({p.tags for p in patterns}) == 44
        with pytest.raises(ValueError, match="duplicate"):
            PatternSet([PosPattern(("NN",)), PosPattern(("NN",))])

    def test_length_bounds(self):
        with pytest.raises(ValueError):
            PosPattern(())
        with pytest.raises(ValueError):
            PosPattern(("NN",) * 6)

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "patterns.txt"
        write_patterns(default_patterns(), path)
        again = load_patterns(path)
        assert [p.tags for p in again] == [p.tags for p in default_patterns()]

    def test_parse_skips_comments_and_blanks(self):
        ps = parse_patterns("# noun\nNN\n\nJJ NN\n")
        assert len(ps) == 2


class TestMatchAll:
    def test_unsafe_abortion(self):
        candidates = match_all(toks(("unsafe", "JJ"), ("abortion", "NN")), default_patterns())
        found = {(c.span.start, c.span.end, c.surface) for c in candidates}
        assert found == {(0, 2, "unsafe abortion"), (1, 2, "abortion")}

    def test_all_verbs_match_nothing(self):
        assert match_all(toks(("run", "VB"), ("jump", "VB")), default_patterns()) == []

    def test_empty_tokens_rejected(self):
        with pytest.raises(ValueError):
            match_all([], default_patterns())

    def test_candidate_pattern_matches_covered_tags(self):
        rng = np.random.default_rng(5)
        patterns = default_patterns()
        for _ in range(50):
            tokens = random_tokens(rng, int(rng.integers(1, 16)))
            for c in match_all(tokens, patterns):
                covered = tuple(t.pos for t in tokens[c.span.start:c.span.end])
                assert covered == c.pattern.tags
                assert 1 <= len(c.pattern) <= 5

    def test_ordering_and_positional_uniqueness(self):
        rng = np.random.default_rng(6)
        patterns = default_patterns()
        for _ in range(50):
            tokens = random_tokens(rng, 12)
            spans = [(c.span.start, c.span.end) for c in match_all(tokens, patterns)]
            assert spans == sorted(spans)
            assert len(spans) == len(set(spans))

    def test_matches_exhaustive_window_oracle(self):
        rng = np.random.default_rng(11)
        patterns = default_patterns()
        table = {p.tags for p in patterns}
        for _ in range(300):
            tokens = random_tokens(rng, 15)
            tags = [t.pos for t in tokens]
            expected = {
                (s, s + w)
                for s in range(len(tags))
                for w in range(1, 6)
                if s + w <= len(tags) and tuple(tags[s:s + w]) in table
            }
            got = {(c.span.start, c.span.end) for c in match_all(tokens, patterns)}
            assert got == expected


class TestBaselineLabels:
    def test_union_of_matches(self):
        flags = baseline_labels(
            toks(("unsafe", "JJ"), ("abortion", "NN"), ("kills", "VBZ")), default_patterns()
        )
        assert flags == [ASPECT_FLAG, ASPECT_FLAG, NO_ASPECT_FLAG]

    def test_all_verbs_all_o(self):
        flags = baseline_labels(toks(("go", "VB"), ("went", "VBD")), default_patterns())
        assert flags == [NO_ASPECT_FLAG, NO_ASPECT_FLAG]

    def test_flag_iff_covered_by_some_candidate(self):
        rng = np.random.default_rng(12)
        patterns = default_patterns()
        for _ in range(100):
            tokens = random_tokens(rng, int(rng.integers(1, 15)))
            flags = baseline_labels(tokens, patterns)
            covered = set()
            for c in match_all(tokens, patterns):
                covered.update(range(c.span.start, c.span.end))
            assert [f == ASPECT_FLAG for f in flags] == [i in covered for i in range(len(tokens))]

    def test_matching_ignores_surfaces(self):
        a = baseline_labels(toks(("alpha", "NN"), ("beta", "VB")), default_patterns())
        b = baseline_labels(toks(("gamma", "NN"), ("delta", "VB")), default_patterns())
        assert a == b

    def test_tags_are_case_sensitive(self):
        assert baseline_labels(toks(("x", "nn")), default_patterns()) == [NO_ASPECT_FLAG]


class TestGenerateCandidates:
    def test_unsafe_abortion_kills_women(self):
        menu = generate_candidates(
            toks(("unsafe", "JJ"), ("abortion", "NN"), ("kills", "VBZ"), ("women", "NNS")),
            default_patterns(),
        )
        assert [c.surface for c in menu] == ["unsafe abortion", "abortion", "women"]

    def test_no_match_means_empty_menu(self):
        menu = generate_candidates(
            toks(("they", "PRP"), ("never", "RB"), ("agree", "VBP")), default_patterns()
        )
        assert menu == []

    def test_dedup_keeps_first_occurrence(self):
        menu = generate_candidates(
            toks(("cost", "NN"), ("and", "CC"), ("Cost", "NN")), default_patterns()
        )
        surfaces = [c.surface for c in menu]
        assert surfaces == ["cost"]
        assert menu[0].span.start == 0

    def test_segment_shorter_than_seg_min_rejected(self):
        with pytest.raises(ValueError, match="SEG_MIN"):
            generate_candidates(toks(("a", "DT"), ("b", "NN")), default_patterns())
