"""Aspect-based argument mining toolkit.

Corpus model and disk formats, PoS-pattern aspect candidates and the rule
baseline, a linear-chain CRF labeler for the two sequence tasks, span-level
evaluation, Cohen's kappa, and the candidate-selection annotation pipeline
with its HTTP API.
"""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    ASP_MAX,
    ASP_MIN,
    SEG_MIN,
    TOPIC_IDS,
    TOPIC_NAMES,
    Corpus,
    CorpusError,
    NestedLabel,
    NS_LABELS,
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
from .patterns import (  # noqa: F401
    Candidate,
    NONE_OPTION,
    PatternSet,
    PosPattern,
    baseline_labels,
    default_patterns,
    generate_candidates,
    load_patterns,
    match_all,
)
from .metrics import MetricReport, cohen_kappa, span_f1, token_metrics  # noqa: F401
from .splits import SplitSpec, make_splits, split_counts  # noqa: F401
from .stats import corpus_stats, top_aspects, topic_top_aspects  # noqa: F401
