"""End-to-end task plumbing shared by the CLI and the test suite.

Bridges the corpus model and the CRF: builds featurized datasets for a
split, trains/predicts per task, evaluates label files against gold, and
runs the rule baseline over both evaluation regimes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import (
    ASPECT_FLAG,
    NO_ASPECT_FLAG,
    Corpus,
    NestedLabel,
)
from .crf import (
    ATE_LABELS,
    DEFAULT_TEMPLATES,
    NS_LABEL_TAGS,
    CrfModel,
    FeatureVocab,
    TrainConfig,
    featurize,
    predict,
    train,
    grid_search,
)
from .metrics import MetricReport, span_f1
from .patterns import PatternSet, baseline_labels
from .splits import ATE, NS, SplitSpec, ate_samples, make_splits, ns_samples


def task_labels(task: str) -> tuple[str, ...]:
    return ATE_LABELS if task == ATE else NS_LABEL_TAGS


def build_dataset(
    corpus: Corpus,
    pointers,
    task: str,
    vocab: FeatureVocab,
    templates=DEFAULT_TEMPLATES,
):
    """Featurized (features, gold label indices) pairs for a pointer set."""
    labels = task_labels(task)
    index = {tag: i for i, tag in enumerate(labels)}
    dataset = []
    if task == ATE:
        for sentence, segment in ate_samples(corpus, pointers):
            tokens = sentence.tokens[segment.start:segment.end]
            gold = [
                index[ASPECT_FLAG if lab.aspect else NO_ASPECT_FLAG]
                for lab in sentence.labels[segment.start:segment.end]
            ]
            dataset.append((featurize(tokens, templates, vocab), gold))
    else:
        for sentence in ns_samples(corpus, pointers):
            gold = [index[lab.tag] for lab in sentence.labels]
            dataset.append((featurize(sentence.tokens, templates, vocab), gold))
    return dataset


@dataclass
class TrainOutcome:
    model: CrfModel
    config: TrainConfig
    dev_macro_f1: float
    grid_rows: list | None = None


def train_for_split(
    corpus: Corpus,
    spec: SplitSpec,
    config: TrainConfig,
    templates=DEFAULT_TEMPLATES,
    grid_l2=None,
    grid_lr=None,
) -> TrainOutcome:
    """Train on the split's train set; optionally grid-search on dev first."""
    vocab = FeatureVocab()
    train_set = build_dataset(corpus, spec.train, spec.task, vocab, templates)
    vocab.freeze()
    dev_set = build_dataset(corpus, spec.dev, spec.task, vocab, templates)
    labels = task_labels(spec.task)

    grid_rows = None
    if grid_l2 or grid_lr:
        config, result = grid_search(
            train_set,
            dev_set,
            grid_l2 or [config.l2],
            grid_lr or [config.learning_rate],
            config,
            task=spec.task,
            labels=labels,
            vocab=vocab,
            templates=templates,
        )
        grid_rows = result.rows
    model = train(
        train_set, config,
        task=spec.task, labels=labels, vocab=vocab, templates=templates,
    )
    dev_f1 = evaluate_labels(corpus, predict_labels(model, corpus), spec.task, spec.dev).macro_f1
    return TrainOutcome(model, config, dev_f1, grid_rows)


LabelMap = dict[tuple[str, str], list[NestedLabel]]


def predict_labels(model: CrfModel, corpus: Corpus, pointers=None) -> LabelMap:
    """Full-sentence predicted labels for every pointed-at sentence.

    ATE models label tokens inside the gold argument units and copy the
    stance layer from the input; NS models relabel whole sentences.
    """
    if pointers is None:
        pointers = [(s.topic_id, s.sentence_id) for s in corpus]
    out: LabelMap = {}
    for topic_id, sentence_id in pointers:
        sentence = corpus.get(topic_id, sentence_id)
        if model.task == NS:
            out[(topic_id, sentence_id)] = predict(model, sentence.tokens, NS).labels
            continue
        labels = [NestedLabel(lab.stance, False) for lab in sentence.labels]
        for segment in sentence.segments():
            flags = predict(model, sentence.tokens[segment.start:segment.end], ATE).labels
            for i, flag in enumerate(flags):
                if flag == ASPECT_FLAG:
                    labels[segment.start + i] = NestedLabel(
                        sentence.labels[segment.start + i].stance, True
                    )
        out[(topic_id, sentence_id)] = labels
    return out


def baseline_prediction(corpus: Corpus, patterns: PatternSet, pointers=None) -> LabelMap:
    """Rule-baseline labels: pattern matches within each argument unit."""
    if pointers is None:
        pointers = [(s.topic_id, s.sentence_id) for s in corpus]
    out: LabelMap = {}
    for topic_id, sentence_id in pointers:
        sentence = corpus.get(topic_id, sentence_id)
        labels = [NestedLabel(lab.stance, False) for lab in sentence.labels]
        for segment in sentence.segments():
            flags = baseline_labels(sentence.tokens[segment.start:segment.end], patterns)
            for i, flag in enumerate(flags):
                if flag == ASPECT_FLAG:
                    labels[segment.start + i] = NestedLabel(labels[segment.start + i].stance, True)
        out[(topic_id, sentence_id)] = labels
    return out


def evaluate_labels(
    corpus: Corpus,
    predicted: LabelMap,
    task: str,
    pointers=None,
    meta: dict | None = None,
) -> MetricReport:
    """Score predicted labels against the corpus gold for one task.

    ATE compares ASP/O flags inside the gold argument units (one sequence
    per segment); NS compares whole-sentence label sequences.
    """
    if pointers is None:
        pointers = [(s.topic_id, s.sentence_id) for s in corpus]
    gold_seqs, pred_seqs = [], []
    for topic_id, sentence_id in pointers:
        sentence = corpus.get(topic_id, sentence_id)
        pred = predicted.get((topic_id, sentence_id))
        if pred is None or len(pred) != len(sentence):
            raise ValueError(f"missing or misaligned prediction for {topic_id}/{sentence_id}")
        if task == NS:
            gold_seqs.append(list(sentence.labels))
            pred_seqs.append(list(pred))
        else:
            for segment in sentence.segments():
                gold_seqs.append([l.aspect for l in sentence.labels[segment.start:segment.end]])
                pred_seqs.append([l.aspect for l in pred[segment.start:segment.end]])
    return span_f1(gold_seqs, pred_seqs, task, meta=meta)


def baseline_report(
    corpus: Corpus, patterns: PatternSet, domain: str, seed: int
) -> dict[str, MetricReport]:
    """Baseline ATE scores on the dev and test sets of one regime."""
    spec = make_splits(corpus, domain, ATE, seed)
    predicted = baseline_prediction(corpus, patterns)
    meta = {"model": "pos-pattern baseline", "match_scope": "segment", "domain": domain}
    return {
        name: evaluate_labels(corpus, predicted, ATE, pointers, meta={**meta, "set": name})
        for name, pointers in (("dev", spec.dev), ("test", spec.test))
    }
