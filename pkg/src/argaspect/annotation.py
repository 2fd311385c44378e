"""Candidate-selection annotation workflow: tasks, responses, merge, export.

One annotation task per argument unit. Each task presents the PoS-pattern
candidate menu plus a terminal NONE option; two annotators answer every
task. The gold standard keeps exactly the tokens both annotators selected:
each annotator's chosen candidates are projected onto a token set, the two
sets are intersected, and maximal runs of the intersection become the gold
aspect spans (so the shorter of two nested selections survives).

Tasks and responses are stored as schema-versioned JSONL, one record per
line. The responses log is append-only; a re-submission by the same
annotator supersedes the earlier one but the full history is retained.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import (
    ASP_MAX,
    Corpus,
    CorpusError,
    Sentence,
    Span,
    Stance,
    Token,
)
from .metrics import cohen_kappa
from .patterns import NONE_OPTION, PatternSet, generate_candidates

SCHEMA_VERSION = 1

MERGED = "merged"
EMPTY_INTERSECTION = "empty-intersection"


@dataclass(frozen=True)
class TaskCandidate:
    id: str
    start: int        # segment-relative, half-open
    end: int
    surface: str
    pattern: str      # space-joined PoS tags

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "start": self.start,
            "end": self.end,
            "surface": self.surface,
            "pattern": self.pattern,
        }


@dataclass(frozen=True)
class AnnotationTask:
    task_id: str
    topic_id: str
    sentence_id: str
    segment_start: int   # sentence coordinates
    segment_end: int
    stance: str
    tokens: tuple[Token, ...]          # the segment's tokens
    candidates: tuple[TaskCandidate, ...]

    def __post_init__(self):
        ids = [c.id for c in self.candidates]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate candidate ids in task {self.task_id}")

    def __len__(self) -> int:
        return len(self.tokens)

    def candidate(self, candidate_id: str) -> TaskCandidate:
        for c in self.candidates:
            if c.id == candidate_id:
                return c
        raise KeyError(candidate_id)

    def to_record(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "task",
            "task_id": self.task_id,
            "topic_id": self.topic_id,
            "sentence_id": self.sentence_id,
            "segment_start": self.segment_start,
            "segment_end": self.segment_end,
            "stance": self.stance,
            "tokens": [
                {"surface": t.surface, "pos": t.pos, "lemma": t.lemma}
                for t in self.tokens
            ],
            "candidates": [c.to_record() for c in self.candidates],
            "none_option": NONE_OPTION,
        }

    @classmethod
    def from_record(cls, record: dict) -> "AnnotationTask":
        return cls(
            task_id=record["task_id"],
            topic_id=record["topic_id"],
            sentence_id=record["sentence_id"],
            segment_start=record["segment_start"],
            segment_end=record["segment_end"],
            stance=record["stance"],
            tokens=tuple(
                Token(t["surface"], t["pos"], t.get("lemma", ""))
                for t in record["tokens"]
            ),
            candidates=tuple(
                TaskCandidate(c["id"], c["start"], c["end"], c["surface"], c["pattern"])
                for c in record["candidates"]
            ),
        )


@dataclass(frozen=True)
class AnnotatorResponse:
    task_id: str
    annotator_id: str
    selected: tuple[str, ...] = ()
    none: bool = False
    timestamp: str = ""

    def __post_init__(self):
        if self.none and self.selected:
            raise ValueError("NONE is mutually exclusive with candidate selections")
        if not self.none and not self.selected:
            raise ValueError("a response must select at least one candidate or NONE")

    def to_record(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "response",
            "task_id": self.task_id,
            "annotator_id": self.annotator_id,
            "selected": list(self.selected),
            "none": self.none,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, record: dict) -> "AnnotatorResponse":
        return cls(
            task_id=record["task_id"],
            annotator_id=record["annotator_id"],
            selected=tuple(record.get("selected", ())),
            none=record.get("none", False),
            timestamp=record.get("timestamp", ""),
        )


def build_tasks(corpus: Corpus, patterns: PatternSet) -> list[AnnotationTask]:
    """One task per argument unit, candidates from the pattern menu.

    Task ids are derived from (topic, sentence, segment bounds), so two runs
    over the same corpus produce identical ids.
    """
    tasks = []
    for sentence in corpus:
        for segment in sentence.segments():
            tokens = sentence.tokens[segment.start:segment.end]
            menu = generate_candidates(tokens, patterns)
            candidates = tuple(
                TaskCandidate(
                    id=f"c{i}",
                    start=c.span.start,
                    end=c.span.end,
                    surface=c.surface,
                    pattern=str(c.pattern),
                )
                for i, c in enumerate(menu)
            )
            tasks.append(
                AnnotationTask(
                    task_id=f"{sentence.topic_id}:{sentence.sentence_id}:{segment.start}-{segment.end}",
                    topic_id=sentence.topic_id,
                    sentence_id=sentence.sentence_id,
                    segment_start=segment.start,
                    segment_end=segment.end,
                    stance=segment.kind,
                    tokens=tokens,
                    candidates=candidates,
                )
            )
    return tasks


class AnnotationStoreError(ValueError):
    pass


class AnnotationStore:
    """Single-writer, append-only store backed by two JSONL files.

    ``tasks.jsonl`` is written once; ``responses.jsonl`` only grows. Reads
    see a consistent snapshot (the in-memory index), and the append lock
    serializes writers.
    """

    TASKS_FILE = "tasks.jsonl"
    RESPONSES_FILE = "responses.jsonl"

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._tasks: dict[str, AnnotationTask] = {}
        self._task_order: list[str] = []
        self._history: list[AnnotatorResponse] = []
        self._latest: dict[tuple[str, str], AnnotatorResponse] = {}
        self._load()

    @property
    def tasks_path(self) -> Path:
        return self.directory / self.TASKS_FILE

    @property
    def responses_path(self) -> Path:
        return self.directory / self.RESPONSES_FILE

    def _load(self) -> None:
        if self.tasks_path.exists():
            for line in self.tasks_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                task = AnnotationTask.from_record(json.loads(line))
                self._tasks[task.task_id] = task
                self._task_order.append(task.task_id)
        if self.responses_path.exists():
            for line in self.responses_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                response = AnnotatorResponse.from_record(json.loads(line))
                self._history.append(response)
                self._latest[(response.task_id, response.annotator_id)] = response

    def save_tasks(self, tasks: Iterable[AnnotationTask]) -> None:
        tasks = list(tasks)
        with self._lock:
            if self._tasks:
                raise AnnotationStoreError("store already contains tasks")
            with open(self.tasks_path, "w", encoding="utf-8") as out:
                for task in tasks:
                    out.write(json.dumps(task.to_record(), ensure_ascii=False) + "\n")
            for task in tasks:
                self._tasks[task.task_id] = task
                self._task_order.append(task.task_id)

    def tasks(self) -> list[AnnotationTask]:
        return [self._tasks[tid] for tid in self._task_order]

    def task(self, task_id: str) -> AnnotationTask:
        try:
            return self._tasks[task_id]
        except KeyError:
            raise AnnotationStoreError(f"unknown task id {task_id!r}") from None

    def record_response(self, response: AnnotatorResponse) -> AnnotatorResponse:
        """Validate and append; the latest response per (task, annotator) wins."""
        task = self.task(response.task_id)
        known = {c.id for c in task.candidates}
        unknown = [cid for cid in response.selected if cid not in known]
        if unknown:
            raise AnnotationStoreError(
                f"unknown candidate id(s) {unknown} for task {task.task_id}"
            )
        if not response.timestamp:
            response = AnnotatorResponse(
                response.task_id,
                response.annotator_id,
                response.selected,
                response.none,
                datetime.now(timezone.utc).isoformat(),
            )
        with self._lock:
            with open(self.responses_path, "a", encoding="utf-8") as out:
                out.write(json.dumps(response.to_record(), ensure_ascii=False) + "\n")
            self._history.append(response)
            self._latest[(response.task_id, response.annotator_id)] = response
        return response

    def history(self, task_id: str, annotator_id: str | None = None) -> list[AnnotatorResponse]:
        return [
            r
            for r in self._history
            if r.task_id == task_id
            and (annotator_id is None or r.annotator_id == annotator_id)
        ]

    def latest(self, task_id: str) -> dict[str, AnnotatorResponse]:
        """Latest response per annotator for one task."""
        return {
            annotator: response
            for (tid, annotator), response in self._latest.items()
            if tid == task_id
        }

    def next_task_for(self, annotator_id: str) -> AnnotationTask | None:
        """First task (by stored order) this annotator has not answered."""
        for tid in self._task_order:
            if (tid, annotator_id) not in self._latest:
                return self._tasks[tid]
        return None

    def progress(self) -> dict:
        answered: dict[str, int] = {}
        for tid, annotator in self._latest:
            answered[annotator] = answered.get(annotator, 0) + 1
        pairs = sum(1 for tid in self._task_order if len(self.latest(tid)) >= 2)
        return {
            "total_tasks": len(self._task_order),
            "answered": dict(sorted(answered.items())),
            "tasks_with_two_responses": pairs,
        }


def selection_tokens(response: AnnotatorResponse, task: AnnotationTask) -> set[int]:
    """Project a response onto segment-relative token positions."""
    if response.none:
        return set()
    covered: set[int] = set()
    for cid in response.selected:
        candidate = task.candidate(cid)
        covered.update(range(candidate.start, candidate.end))
    return covered


@dataclass(frozen=True)
class GoldAspects:
    task_id: str
    spans: tuple[Span, ...]   # segment-relative ASP spans, each <= ASP_MAX tokens
    provenance: str           # MERGED or EMPTY_INTERSECTION

    def __post_init__(self):
        if self.provenance not in (MERGED, EMPTY_INTERSECTION):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def token_set(self) -> set[int]:
        out: set[int] = set()
        for span in self.spans:
            out.update(range(span.start, span.end))
        return out


def _runs_of(positions: set[int]) -> list[tuple[int, int]]:
    runs = []
    for p in sorted(positions):
        if runs and p == runs[-1][1]:
            runs[-1] = (runs[-1][0], p + 1)
        else:
            runs.append((p, p + 1))
    return runs


def merge_gold(
    response_a: AnnotatorResponse,
    response_b: AnnotatorResponse,
    task: AnnotationTask,
) -> GoldAspects:
    """Token-level intersection of two responses.

    The merged token set is exactly the intersection of the two projected
    token sets (merge is therefore commutative). Maximal runs become the
    gold spans; a run longer than ASP_MAX is emitted as adjacent chunks so
    no span breaks the length bound while the token set stays intact. If
    either response is NONE the gold is empty with provenance "merged";
    if both selected candidates but share no token, the gold is empty with
    provenance "empty-intersection".
    """
    if response_a.task_id != task.task_id or response_b.task_id != task.task_id:
        raise ValueError("responses do not target the given task")
    if response_a.none or response_b.none:
        return GoldAspects(task.task_id, (), MERGED)
    common = selection_tokens(response_a, task) & selection_tokens(response_b, task)
    if not common:
        return GoldAspects(task.task_id, (), EMPTY_INTERSECTION)
    out_of_range = [p for p in common if not 0 <= p < len(task)]
    if out_of_range:
        raise ValueError(f"candidate positions outside the segment: {out_of_range}")
    spans = []
    for start, end in _runs_of(common):
        for chunk in range(start, end, ASP_MAX):
            spans.append(Span(chunk, min(chunk + ASP_MAX, end), "ASP"))
    return GoldAspects(task.task_id, tuple(spans), MERGED)


@dataclass(frozen=True)
class IaaReport:
    overall: float
    per_topic: dict[str, float]
    tasks_scored: int
    tokens_scored: int

    def to_dict(self) -> dict:
        return {
            "overall_kappa": self.overall,
            "per_topic_kappa": dict(self.per_topic),
            "tasks_scored": self.tasks_scored,
            "tokens_scored": self.tokens_scored,
        }


def _paired_responses(store, tasks):
    for task in tasks:
        latest = store.latest(task.task_id)
        if len(latest) != 2:
            raise AnnotationStoreError(
                f"task {task.task_id} has {len(latest)} responses, expected 2"
            )
        a, b = (latest[k] for k in sorted(latest))
        yield task, a, b


def iaa_report(store: AnnotationStore, tasks: Sequence[AnnotationTask] | None = None) -> IaaReport:
    """Cohen's kappa over token-level selections, per topic and overall.

    Each response becomes a binary vector over its segment's tokens (a token
    is on iff covered by a chosen candidate; NONE means all-zero); vectors
    are concatenated across segments. Per-topic values are computed from the
    per-topic vectors, never derived from the overall score.
    """
    tasks = store.tasks() if tasks is None else list(tasks)
    if not tasks:
        raise AnnotationStoreError("no tasks to score")
    vec_a: dict[str, list[int]] = {}
    vec_b: dict[str, list[int]] = {}
    for task, a, b in _paired_responses(store, tasks):
        sel_a, sel_b = selection_tokens(a, task), selection_tokens(b, task)
        vec_a.setdefault(task.topic_id, []).extend(
            1 if i in sel_a else 0 for i in range(len(task))
        )
        vec_b.setdefault(task.topic_id, []).extend(
            1 if i in sel_b else 0 for i in range(len(task))
        )
    all_a = [x for t in sorted(vec_a) for x in vec_a[t]]
    all_b = [x for t in sorted(vec_b) for x in vec_b[t]]
    return IaaReport(
        overall=cohen_kappa(all_a, all_b),
        per_topic={t: cohen_kappa(vec_a[t], vec_b[t]) for t in sorted(vec_a)},
        tasks_scored=len(tasks),
        tokens_scored=len(all_a),
    )


@dataclass(frozen=True)
class ExportReport:
    empty_intersection: tuple[str, ...]   # task ids merged to an empty gold
    coerced: tuple[dict, ...]             # sentences where flags were legalized
    merged_tasks: int

    def to_dict(self) -> dict:
        return {
            "empty_intersection_tasks": list(self.empty_intersection),
            "coerced_sentences": [dict(c) for c in self.coerced],
            "merged_tasks": self.merged_tasks,
        }


def _legalize_flags(stances: Sequence[Stance], flags: list[bool]) -> int:
    """Clear the fewest flags so aspect runs are legal; returns #cleared.

    Breaks runs straddling two adjacent segments, then splits runs longer
    than ASP_MAX greedily (keep ASP_MAX, drop one, repeat).
    """
    dropped = 0
    n = len(flags)
    for i in range(1, n):
        if flags[i] and flags[i - 1] and stances[i] != stances[i - 1]:
            flags[i] = False
            dropped += 1
    i = 0
    while i < n:
        if not flags[i]:
            i += 1
            continue
        run = i
        while run < n and flags[run]:
            run += 1
        if run - i > ASP_MAX:
            flags[i + ASP_MAX] = False
            dropped += 1
            i += ASP_MAX + 1
        else:
            i = run
    return dropped


def export_gold(store: AnnotationStore, corpus: Corpus) -> tuple[Corpus, ExportReport]:
    """Replace corpus aspect flags with the merged gold annotations.

    Every task must have exactly two responses. The result passes all corpus
    invariants; segments whose merge was empty by disagreement, and
    sentences where flags had to be legalized, are listed in the report.
    """
    tasks = store.tasks()
    by_sentence: dict[tuple[str, str], list[tuple[AnnotationTask, GoldAspects]]] = {}
    empty = []
    for task, a, b in _paired_responses(store, tasks):
        gold = merge_gold(a, b, task)
        if gold.provenance == EMPTY_INTERSECTION:
            empty.append(task.task_id)
        by_sentence.setdefault((task.topic_id, task.sentence_id), []).append((task, gold))

    sentences = []
    coerced = []
    for sentence in corpus:
        flags = [False] * len(sentence)
        for task, gold in by_sentence.get((sentence.topic_id, sentence.sentence_id), ()):
            if task.segment_end > len(sentence):
                raise CorpusError(
                    "task segment exceeds sentence length",
                    topic_id=sentence.topic_id,
                    sentence_id=sentence.sentence_id,
                )
            for position in gold.token_set():
                flags[task.segment_start + position] = True
        stances = [l.stance for l in sentence.labels]
        dropped = _legalize_flags(stances, flags)
        if dropped:
            coerced.append(
                {
                    "topic_id": sentence.topic_id,
                    "sentence_id": sentence.sentence_id,
                    "tokens_dropped": dropped,
                }
            )
        labels = [
            type(lab)(lab.stance, flag) for lab, flag in zip(sentence.labels, flags)
        ]
        sentences.append(sentence.with_labels(labels))
    report = ExportReport(
        empty_intersection=tuple(empty),
        coerced=tuple(coerced),
        merged_tasks=len(tasks),
    )
    return Corpus(tuple(sentences)), report
