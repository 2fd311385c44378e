"""Span-level F1, token-level accuracy/precision/recall, and Cohen's kappa.

Span scoring follows exact-match semantics: a predicted span is a true
positive iff its type, start and end all equal a gold span. Sequences are
run-length label encodings, decoded to spans internally (the moral
equivalent of converting to IOB2 and scoring entities), so with a single
span type the macro-F1 reduces to plain span F1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import ASPECT_FLAG, NestedLabel, Stance, _runs

ATE_TASK = "ate"
NS_TASK = "ns"


@dataclass(frozen=True)
class TypeScore:
    precision: float
    recall: float
    f1: float
    gold: int       # gold spans (or tokens) of this type
    pred: int       # predicted spans of this type
    correct: int    # exact matches


@dataclass(frozen=True)
class MetricReport:
    task: str
    per_type: dict[str, TypeScore]
    macro_f1: float
    accuracy: float
    precision: float
    recall: float
    token_support: int
    layers: dict[str, "MetricReport"] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "macro_f1": self.macro_f1,
            "per_type": {
                t: {
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "gold": s.gold,
                    "pred": s.pred,
                    "correct": s.correct,
                }
                for t, s in self.per_type.items()
            },
            "token": {
                "accuracy": self.accuracy,
                "precision": self.precision,
                "recall": self.recall,
                "support": self.token_support,
            },
            "layers": {name: r.to_dict() for name, r in self.layers.items()},
            "meta": self.meta,
        }


def _prf(correct: int, pred: int, gold: int) -> tuple[float, float, float]:
    # Zero-denominator convention: undefined P/R/F1 are reported as 0.
    p = correct / pred if pred else 0.0
    r = correct / gold if gold else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


def _as_flag(value) -> bool:
    if isinstance(value, NestedLabel):
        return value.aspect
    if isinstance(value, bool):
        return value
    return value == ASPECT_FLAG


def aspect_flag_spans(seq: Sequence) -> list[tuple[int, int]]:
    """Maximal runs of ASP flags in a binary / NestedLabel sequence."""
    return [
        (start, end)
        for start, end, flagged in _runs(_as_flag(v) for v in seq)
        if flagged
    ]


def _typed_spans(seq: Sequence, task: str) -> set[tuple[str, int, int]]:
    spans = {("ASP", s, e) for s, e in aspect_flag_spans(seq)}
    if task == NS_TASK:
        for start, end, stance in _runs(l.stance for l in seq):
            if stance is not Stance.NON:
                spans.add((stance.value, start, end))
    return spans


def _collect_spans(seqs: Iterable[Sequence], task: str) -> set[tuple[int, str, int, int]]:
    out = set()
    for i, seq in enumerate(seqs):
        for kind, start, end in _typed_spans(seq, task):
            out.add((i, kind, start, end))
    return out


def _token_tag(value, task: str) -> str:
    if task == ATE_TASK:
        return ASPECT_FLAG if _as_flag(value) else "O"
    return value.tag


def token_metrics(
    gold: Sequence[Sequence],
    pred: Sequence[Sequence],
    positive: Iterable[str],
    task: str = ATE_TASK,
) -> tuple[float, float, float]:
    """Micro-averaged token accuracy / precision / recall.

    Precision and recall are micro-averaged over the declared positive
    label set; accuracy is over all tokens. Undefined ratios are 0.
    """
    positive = set(positive)
    total = correct = 0
    pred_pos = gold_pos = hit = 0
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sequences vs {len(pred)} predicted")
    for gseq, pseq in zip(gold, pred):
        if len(gseq) != len(pseq):
            raise ValueError("gold/pred sequence length mismatch")
        for g, p in zip(gseq, pseq):
            gtag, ptag = _token_tag(g, task), _token_tag(p, task)
            total += 1
            same = gtag == ptag
            correct += same
            if ptag in positive:
                pred_pos += 1
                hit += same
            if gtag in positive:
                gold_pos += 1
    accuracy = correct / total if total else 0.0
    precision = hit / pred_pos if pred_pos else 0.0
    recall = hit / gold_pos if gold_pos else 0.0
    return accuracy, precision, recall


ATE_POSITIVE = (ASPECT_FLAG,)
NS_POSITIVE = ("PRO|O", "PRO|ASP", "CON|O", "CON|ASP")


def span_f1(
    gold: Sequence[Sequence],
    pred: Sequence[Sequence],
    task: str = ATE_TASK,
    meta: dict | None = None,
    _with_layers: bool = True,
) -> MetricReport:
    """Exact-match span scores plus token-level metrics.

    ATE sequences hold ASP/O flags (strings, bools or NestedLabels); NS
    sequences hold NestedLabels. Type set is {ASP} for ATE and
    {PRO, CON, ASP} for NS; macro-F1 averages over the types with any gold
    or predicted support. NS reports include per-layer sub-reports
    (stance spans only / aspect spans only).
    """
    if task not in (ATE_TASK, NS_TASK):
        raise ValueError(f"unknown task {task!r}")
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sequences vs {len(pred)} predicted")
    for gseq, pseq in zip(gold, pred):
        if len(gseq) != len(pseq):
            raise ValueError("gold/pred sequence length mismatch")

    gold_spans = _collect_spans(gold, task)
    pred_spans = _collect_spans(pred, task)
    kinds = ("ASP",) if task == ATE_TASK else ("PRO", "CON", "ASP")
    per_type = {}
    f1s = []
    for kind in kinds:
        g = {s for s in gold_spans if s[1] == kind}
        p = {s for s in pred_spans if s[1] == kind}
        correct = len(g & p)
        prec, rec, f1 = _prf(correct, len(p), len(g))
        per_type[kind] = TypeScore(prec, rec, f1, len(g), len(p), correct)
        if g or p:
            f1s.append(f1)
    macro = sum(f1s) / len(f1s) if f1s else 0.0

    positive = ATE_POSITIVE if task == ATE_TASK else NS_POSITIVE
    accuracy, precision, recall = token_metrics(gold, pred, positive, task)
    layers = {}
    if task == NS_TASK and _with_layers:
        stance_gold = [[NestedLabel(l.stance) for l in seq] for seq in gold]
        stance_pred = [[NestedLabel(l.stance) for l in seq] for seq in pred]
        layers["stance"] = span_f1(stance_gold, stance_pred, NS_TASK, _with_layers=False)
        aspect_gold = [[l.aspect for l in seq] for seq in gold]
        aspect_pred = [[l.aspect for l in seq] for seq in pred]
        layers["aspect"] = span_f1(aspect_gold, aspect_pred, ATE_TASK)

    report_meta = {"scheme": "exact-match spans (IOB2-equivalent, default mode)"}
    report_meta.update(meta or {})
    return MetricReport(
        task=task,
        per_type=per_type,
        macro_f1=macro,
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        token_support=sum(len(s) for s in gold),
        layers=layers,
        meta=report_meta,
    )


def cohen_kappa(annotations_a: Sequence, annotations_b: Sequence) -> float:
    """Chance-corrected agreement over two binary token-selection vectors.

    kappa = (p_o - p_e) / (1 - p_e) on the 2x2 contingency table. When both
    raters are constant and identical, p_e = 1 and kappa is defined as 1.0
    (p_e = 1 with disagreement is impossible: identical degenerate marginals
    force p_o = 1).
    """
    a = [bool(x) for x in annotations_a]
    b = [bool(x) for x in annotations_b]
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if not a:
        raise ValueError("cohen_kappa requires at least one token")
    n = len(a)
    n11 = sum(1 for x, y in zip(a, b) if x and y)
    n00 = sum(1 for x, y in zip(a, b) if not x and not y)
    n10 = sum(1 for x, y in zip(a, b) if x and not y)
    n01 = n - n11 - n00 - n10
    p_o = (n11 + n00) / n
    p_e = ((n11 + n10) * (n11 + n01) + (n00 + n01) * (n00 + n10)) / (n * n)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)
