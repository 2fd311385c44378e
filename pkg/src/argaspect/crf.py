"""Linear-chain CRF over sparse hand-crafted features.

Replaces heavyweight neural labelers for the two sequence tasks: binary
aspect tagging inside argument units (2 labels) and nested segmentation
over full sentences (5 labels). Everything runs in log space on numpy;
training is mini-batch AdamW (decoupled weight decay) and is bit-for-bit
reproducible from the seed.

Score of a label path y for a featurized sentence x:

    score(x, y) = sum_i emission[features(x, i), y_i] + sum_i transition[y_{i-1}, y_i]

with NLL(x, y) = logZ(x) - score(x, y).
"""

from __future__ import annotations

import base64
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import __version__ as _pkg_version
from .corpus import ASPECT_FLAG, NO_ASPECT_FLAG, NS_LABELS, NestedLabel, Token
from .metrics import span_f1

log = logging.getLogger(__name__)

ATE_LABELS = (NO_ASPECT_FLAG, ASPECT_FLAG)
NS_LABEL_TAGS = tuple(l.tag for l in NS_LABELS)

TEMPLATE_FIELDS = ("lower", "pos", "prefix", "suffix", "shape")

BOS = "<s>"
EOS = "</s>"


@dataclass(frozen=True)
class FeatureTemplate:
    """One feature extractor: a field observed at fixed window offsets."""

    id: str
    offsets: tuple[int, ...]
    field: str

    def __post_init__(self):
        if self.field not in TEMPLATE_FIELDS:
            raise ValueError(f"unknown template field {self.field!r}")
        if not self.offsets or any(not -2 <= o <= 2 for o in self.offsets):
            raise ValueError(f"template offsets must lie in [-2, 2]: {self.offsets}")


def _template(field: str, *offsets: int) -> FeatureTemplate:
    return FeatureTemplate(f"{field}[{','.join(map(str, offsets))}]", tuple(offsets), field)


DEFAULT_TEMPLATES = (
    _template("lower", -2),
    _template("lower", -1),
    _template("lower", 0),
    _template("lower", 1),
    _template("lower", 2),
    _template("pos", -2),
    _template("pos", -1),
    _template("pos", 0),
    _template("pos", 1),
    _template("pos", 2),
    _template("pos", -1, 0),
    _template("pos", 0, 1),
    _template("prefix", 0),
    _template("suffix", 0),
    _template("shape", -1),
    _template("shape", 0),
    _template("shape", 1),
)


def word_shape(surface: str) -> str:
    # Compressed character-class sketch: "Anti-gun" -> "Xx-x"
    classes = []
    for ch in surface:
        if ch.isupper():
            c = "X"
        elif ch.islower():
            c = "x"
        elif ch.isdigit():
            c = "d"
        else:
            c = ch
        if not classes or classes[-1] != c:
            classes.append(c)
    return "".join(classes)


def _field_value(tokens: Sequence[Token], i: int, fieldname: str) -> str:
    if i < 0:
        return BOS
    if i >= len(tokens):
        return EOS
    tok = tokens[i]
    if fieldname == "lower":
        return tok.surface.lower()
    if fieldname == "pos":
        return tok.pos
    if fieldname == "prefix":
        return tok.surface.lower()[:3]
    if fieldname == "suffix":
        return tok.surface.lower()[-3:]
    return word_shape(tok.surface)


class FeatureVocab:
    """Injective feature-name -> index mapping; freezable for prediction."""

    def __init__(self, index: dict[str, int] | None = None, frozen: bool = False):
        self._index = dict(index or {})
        self.frozen = frozen

    def __len__(self) -> int:
        return len(self._index)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int | None:
        idx = self._index.get(name)
        if idx is None and not self.frozen:
            idx = len(self._index)
            self._index[name] = idx
        return idx

    def freeze(self) -> "FeatureVocab":
        self.frozen = True
        return self

    def to_dict(self) -> dict[str, int]:
        return dict(self._index)


def featurize(
    tokens: Sequence[Token],
    templates: Sequence[FeatureTemplate] = DEFAULT_TEMPLATES,
    vocab: FeatureVocab | None = None,
) -> list[list[int]]:
    """Per-position sparse feature indices.

    Deterministic: the same tokens, templates and vocab state always yield
    the same indices. Offsets falling outside the sentence contribute
    boundary sentinel features rather than being dropped. With a frozen
    vocab, unseen feature names are skipped.
    """
    if vocab is None:
        vocab = FeatureVocab()
    rows = []
    for i in range(len(tokens)):
        feats = []
        for t in templates:
            value = "|".join(_field_value(tokens, i + o, t.field) for o in t.offsets)
            idx = vocab.index(f"{t.id}={value}")
            if idx is not None:
                feats.append(idx)
        rows.append(feats)
    return rows


@dataclass(frozen=True)
class CrfModel:
    task: str                       # "ate" | "ns"
    labels: tuple[str, ...]
    templates: tuple[FeatureTemplate, ...]
    feature_index: dict[str, int]
    emission: np.ndarray            # [n_features, n_labels]
    transition: np.ndarray          # [n_labels, n_labels]
    version: str = _pkg_version

    def __post_init__(self):
        n_feat, n_lab = self.emission.shape
        if n_lab != len(self.labels) or self.transition.shape != (n_lab, n_lab):
            raise ValueError("weight shapes do not match the label set")
        if n_feat != len(self.feature_index):
            raise ValueError("emission rows do not match the feature dictionary")
        if not (np.isfinite(self.emission).all() and np.isfinite(self.transition).all()):
            raise ValueError("model weights must be finite")
        if len(set(self.feature_index.values())) != len(self.feature_index):
            raise ValueError("feature dictionary must be injective")

    def vocab(self) -> FeatureVocab:
        return FeatureVocab(self.feature_index, frozen=True)

    def featurize(self, tokens: Sequence[Token]) -> list[list[int]]:
        return featurize(tokens, self.templates, self.vocab())


def zero_model(
    task: str,
    labels: Sequence[str],
    vocab: FeatureVocab,
    templates: Sequence[FeatureTemplate] = DEFAULT_TEMPLATES,
) -> CrfModel:
    n_feat, n_lab = len(vocab), len(labels)
    return CrfModel(
        task=task,
        labels=tuple(labels),
        templates=tuple(templates),
        feature_index=vocab.to_dict(),
        emission=np.zeros((n_feat, n_lab)),
        transition=np.zeros((n_lab, n_lab)),
    )


def _logsumexp(a: np.ndarray, axis=None):
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return float(out.ravel()[0]) if axis is None else np.squeeze(out, axis=axis)


def emission_scores(model: CrfModel, features: Sequence[Sequence[int]]) -> np.ndarray:
    scores = np.zeros((len(features), len(model.labels)))
    for i, feats in enumerate(features):
        if feats:
            scores[i] = model.emission[list(feats)].sum(axis=0)
    return scores


def path_score(model: CrfModel, features, labels: Sequence[int]) -> float:
    scores = emission_scores(model, features)
    total = float(scores[np.arange(len(labels)), list(labels)].sum())
    lab = list(labels)
    total += float(model.transition[lab[:-1], lab[1:]].sum())
    return total


def log_partition(model: CrfModel, features) -> float:
    """log Z via the forward recursion, overflow-safe in log space."""
    if not len(features):
        raise ValueError("log_partition requires a non-empty sequence")
    scores = emission_scores(model, features)
    alpha = scores[0]
    for t in range(1, len(features)):
        alpha = scores[t] + _logsumexp(alpha[:, None] + model.transition, axis=0)
    return float(_logsumexp(alpha))


def viterbi(model: CrfModel, features) -> list[int]:
    """Highest-scoring label path; ties resolve to the lowest label index."""
    if not len(features):
        raise ValueError("viterbi requires a non-empty sequence")
    scores = emission_scores(model, features)
    n, n_labels = scores.shape
    delta = scores[0]
    back = np.zeros((n, n_labels), dtype=np.intp)
    for t in range(1, n):
        step = delta[:, None] + model.transition
        back[t] = np.argmax(step, axis=0)  # first (lowest) index wins ties
        delta = scores[t] + np.max(step, axis=0)
    path = [int(np.argmax(delta))]
    for t in range(n - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    return path


def _forward_backward(model: CrfModel, scores: np.ndarray):
    n, n_labels = scores.shape
    alpha = np.zeros((n, n_labels))
    alpha[0] = scores[0]
    for t in range(1, n):
        alpha[t] = scores[t] + _logsumexp(alpha[t - 1][:, None] + model.transition, axis=0)
    beta = np.zeros((n, n_labels))
    for t in range(n - 2, -1, -1):
        beta[t] = _logsumexp(model.transition + (scores[t + 1] + beta[t + 1])[None, :], axis=1)
    log_z = float(_logsumexp(alpha[-1]))
    return alpha, beta, log_z


def sequence_nll(model: CrfModel, features, labels: Sequence[int]) -> float:
    return log_partition(model, features) - path_score(model, features, labels)


def gradient(
    model: CrfModel,
    features,
    labels: Sequence[int],
    l2: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the (optionally l2-regularized) sequence NLL.

    Expected feature counts under the model minus the observed counts, plus
    l2 * weights when l2 > 0 (the gradient of 0.5 * l2 * ||w||^2). Returns
    (d/d emission, d/d transition).
    """
    if len(labels) != len(features):
        raise ValueError("gold length does not match the feature rows")
    scores = emission_scores(model, features)
    alpha, beta, log_z = _forward_backward(model, scores)
    marginal = np.exp(alpha + beta - log_z)  # [n, L]

    grad_em = np.zeros_like(model.emission)
    for i, feats in enumerate(features):
        row = marginal[i].copy()
        row[labels[i]] -= 1.0
        for f in feats:
            grad_em[f] += row

    grad_tr = np.zeros_like(model.transition)
    for t in range(1, len(features)):
        pair = np.exp(
            alpha[t - 1][:, None]
            + model.transition
            + (scores[t] + beta[t])[None, :]
            - log_z
        )
        grad_tr += pair
        grad_tr[labels[t - 1], labels[t]] -= 1.0

    if l2:
        grad_em = grad_em + l2 * model.emission
        grad_tr = grad_tr + l2 * model.transition
    return grad_em, grad_tr


@dataclass(frozen=True)
class TrainConfig:
    l2: float = 0.01
    epochs: int = 20
    learning_rate: float = 0.05
    batch_size: int = 32
    seed: int = 13

    def __post_init__(self):
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size <= 0:
            raise ValueError("batch size must be positive")


Dataset = Sequence[tuple[Sequence[Sequence[int]], Sequence[int]]]

_ADAM_B1, _ADAM_B2, _ADAM_EPS = 0.9, 0.999, 1e-8


def mean_nll(model: CrfModel, dataset: Dataset) -> float:
    return float(np.mean([sequence_nll(model, f, y) for f, y in dataset]))


def train(
    dataset: Dataset,
    config: TrainConfig,
    *,
    task: str,
    labels: Sequence[str],
    vocab: FeatureVocab,
    templates: Sequence[FeatureTemplate] = DEFAULT_TEMPLATES,
    dev: Dataset | None = None,
    epoch_callback: Callable[[int, float, float | None], None] | None = None,
) -> CrfModel:
    """Mini-batch AdamW training, deterministic for a fixed seed.

    Weight decay (config.l2) is applied decoupled from the gradient. The
    callback, when given, receives (epoch, mean train NLL, mean dev NLL or
    None) after each epoch; dev loss is also logged.
    """
    if not dataset:
        raise ValueError("training requires a non-empty dataset")
    n_labels = len(labels)
    for feats, gold in dataset:
        if len(feats) != len(gold):
            raise ValueError("feature rows and gold labels differ in length")
        bad = [y for y in gold if not 0 <= y < n_labels]
        if bad:
            raise ValueError(f"gold label index {bad[0]} outside the declared label set")

    model = zero_model(task, labels, vocab, templates)
    if config.epochs == 0:
        return model

    emission = model.emission.copy()
    transition = model.transition.copy()
    m_em = np.zeros_like(emission)
    v_em = np.zeros_like(emission)
    m_tr = np.zeros_like(transition)
    v_tr = np.zeros_like(transition)
    rng = np.random.default_rng(config.seed)
    step = 0

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(dataset))
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            current = replace(model, emission=emission, transition=transition)
            g_em = np.zeros_like(emission)
            g_tr = np.zeros_like(transition)
            for idx in batch:  # ordered reduction: seed-stable results
                feats, gold = dataset[idx]
                d_em, d_tr = gradient(current, feats, gold)
                g_em += d_em
                g_tr += d_tr
            g_em /= len(batch)
            g_tr /= len(batch)

            step += 1
            bias1 = 1.0 - _ADAM_B1 ** step
            bias2 = 1.0 - _ADAM_B2 ** step
            for w, g, m, v in ((emission, g_em, m_em, v_em), (transition, g_tr, m_tr, v_tr)):
                m *= _ADAM_B1
                m += (1 - _ADAM_B1) * g
                v *= _ADAM_B2
                v += (1 - _ADAM_B2) * g * g
                w -= config.learning_rate * (m / bias1) / (np.sqrt(v / bias2) + _ADAM_EPS)
                if config.l2:
                    w -= config.learning_rate * config.l2 * w  # decoupled decay

        if epoch_callback is not None or dev is not None:
            current = replace(model, emission=emission, transition=transition)
            train_nll = mean_nll(current, dataset)
            dev_nll = mean_nll(current, dev) if dev else None
            if dev is not None:
                log.info("epoch %d: train nll %.6f, dev nll %.6f", epoch, train_nll, dev_nll)
            if epoch_callback is not None:
                epoch_callback(epoch, train_nll, dev_nll)

    return replace(model, emission=emission, transition=transition)


@dataclass(frozen=True)
class Prediction:
    labels: list
    coerced: int = 0


def decode_tags(model: CrfModel, features) -> list[str]:
    return [model.labels[i] for i in viterbi(model, features)]


def predict(model: CrfModel, tokens: Sequence[Token], task: str) -> Prediction:
    """Decode one sequence; NS output is post-filtered to legal labels.

    Any decoded (NON, ASP) is coerced to (NON, O) and counted. With the
    canonical 5-label set this never fires, but the filter keeps the
    invariant under custom label sets too.
    """
    if task != model.task:
        raise ValueError(f"model was trained for {model.task!r}, not {task!r}")
    tags = decode_tags(model, model.featurize(tokens))
    if task == "ate":
        return Prediction([ASPECT_FLAG if t == ASPECT_FLAG else NO_ASPECT_FLAG for t in tags])
    coerced = 0
    out = []
    for tag in tags:
        stance, _, aspect = tag.partition("|")
        if stance == "NON" and aspect == ASPECT_FLAG:
            coerced += 1
            aspect = NO_ASPECT_FLAG
        out.append(NestedLabel.from_tag(f"{stance}|{aspect}"))
    return Prediction(out, coerced)


@dataclass(frozen=True)
class GridResult:
    best: TrainConfig
    rows: list[dict]

    def to_dict(self) -> dict:
        return {"best": vars(self.best).copy(), "rows": list(self.rows)}


def _dev_macro_f1(model: CrfModel, dev: Dataset, task: str) -> float:
    gold, pred = [], []
    for feats, y in dev:
        gold_tags = [model.labels[i] for i in y]
        pred_tags = decode_tags(model, feats)
        if task == "ns":
            gold.append([NestedLabel.from_tag(t) for t in gold_tags])
            pred.append([NestedLabel.from_tag(t) for t in pred_tags])
        else:
            gold.append(gold_tags)
            pred.append(pred_tags)
    return span_f1(gold, pred, task).macro_f1


def grid_search(
    train_set: Dataset,
    dev_set: Dataset,
    l2_values: Sequence[float],
    lr_values: Sequence[float],
    base: TrainConfig,
    *,
    task: str,
    labels: Sequence[str],
    vocab: FeatureVocab,
    templates: Sequence[FeatureTemplate] = DEFAULT_TEMPLATES,
) -> tuple[TrainConfig, GridResult]:
    """Exhaustive grid over l2 x learning rate, scored by dev span macro-F1.

    Deterministic: every cell trains from the same seed; the first cell
    attaining the maximum wins ties. The full score table is returned for
    persistence.
    """
    if not l2_values or not lr_values:
        raise ValueError("grid must contain at least one l2 and one learning-rate value")
    rows = []
    best_config = None
    best_score = -1.0
    for l2 in l2_values:
        for lr in lr_values:
            config = replace(base, l2=l2, learning_rate=lr)
            model = train(
                train_set, config, task=task, labels=labels,
                vocab=vocab, templates=templates,
            )
            score = _dev_macro_f1(model, dev_set, task)
            rows.append({"l2": l2, "learning_rate": lr, "dev_macro_f1": score})
            if score > best_score:
                best_score = score
                best_config = config
    return best_config, GridResult(best_config, rows)


# --- serialization ----------------------------------------------------------

MODEL_FORMAT = "argaspect-crf"
MODEL_FORMAT_VERSION = 1


def _encode_array(a: np.ndarray) -> dict:
    return {
        "shape": list(a.shape),
        "dtype": "<f8",
        "data": base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii"),
    }


def _decode_array(obj: dict) -> np.ndarray:
    a = np.frombuffer(base64.b64decode(obj["data"]), dtype=obj["dtype"])
    return a.reshape(obj["shape"]).astype(np.float64)


def save_model(model: CrfModel, path: str | Path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "format_version": MODEL_FORMAT_VERSION,
        "version": model.version,
        "task": model.task,
        "labels": list(model.labels),
        "templates": [
            {"id": t.id, "offsets": list(t.offsets), "field": t.field}
            for t in model.templates
        ],
        "features": model.feature_index,
        "emission": _encode_array(model.emission),
        "transition": _encode_array(model.transition),
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> CrfModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} model file")
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {payload.get('format_version')}")
    templates = tuple(
        FeatureTemplate(t["id"], tuple(t["offsets"]), t["field"])
        for t in payload["templates"]
    )
    return CrfModel(
        task=payload["task"],
        labels=tuple(payload["labels"]),
        templates=templates,
        feature_index=payload["features"],
        emission=_decode_array(payload["emission"]),
        transition=_decode_array(payload["transition"]),
        version=payload.get("version", "unknown"),
    )
