"""Command-line entry point wiring the toolkit into reproducible commands.

Every flag can also be supplied through an environment variable with the
``ARGASPECT_`` prefix (e.g. ``ARGASPECT_SEED=7 argaspect split ...``).
Usage errors exit with status 2, data errors with status 1. Commands that
write outputs also write a ``<output>.manifest.json`` run manifest;
print-only commands accept ``--manifest PATH``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .annotation import AnnotationStore, build_tasks, iaa_report, export_gold
from .corpus import Corpus, CorpusError, parse_corpus, read_label_file, write_jsonl, write_label_file, write_tsv
from .crf import TrainConfig, load_model, save_model
from .manifest import RunManifest
from .metrics import MetricReport
from .patterns import default_patterns, load_patterns
from .pipeline import (
    baseline_prediction,
    baseline_report,
    evaluate_labels,
    predict_labels,
    train_for_split,
)
from .splits import ATE, CROSS, DEFAULT_SEED, INNER, NS, make_splits, split_counts
from .stats import corpus_stats, top_aspects

CONTEXT_SETTINGS = {"auto_envvar_prefix": "ARGASPECT", "help_option_names": ["-h", "--help"]}

task_option = click.option("--task", type=click.Choice([ATE, NS]), default=ATE, show_default=True)
domain_option = click.option(
    "--domain", type=click.Choice([INNER, CROSS]), default=INNER, show_default=True
)
seed_option = click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
data_option = click.option(
    "--data", required=True, type=click.Path(exists=True, dir_okay=False), help="Corpus file (TSV or JSONL)."
)
patterns_option = click.option(
    "--patterns", type=click.Path(exists=True, dir_okay=False),
    help="Pattern file, one tag sequence per line (default: built-in 44).",
)
manifest_option = click.option(
    "--manifest", "manifest_path", type=click.Path(dir_okay=False),
    help="Write the run manifest to this path (in addition to any output manifest).",
)


def _load_corpus(path) -> Corpus:
    try:
        return parse_corpus(path)
    except CorpusError as err:
        raise click.ClickException(str(err))


def _load_patterns(path):
    if path is None:
        return default_patterns()
    try:
        return load_patterns(path)
    except ValueError as err:
        raise click.ClickException(str(err))


def _finish(manifest: RunManifest, manifest_path, *outputs) -> None:
    for out in outputs:
        if out:
            manifest.add_output(out)
    if outputs and outputs[0]:
        manifest.write_alongside(outputs[0])
    if manifest_path:
        manifest.write(manifest_path)


@click.group(context_settings=CONTEXT_SETTINGS)
@click.version_option(__version__)
def main():
    """Aspect-based argument mining toolkit."""


@main.command()
@data_option
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Validated copy to write.")
@click.option("--format", "fmt", type=click.Choice(["tsv", "jsonl"]), default=None,
              help="Output format (default: by --out extension, jsonl otherwise).")
@manifest_option
def ingest(data, out, fmt, manifest_path):
    """Parse, validate and re-serialize a corpus."""
    manifest = RunManifest("ingest", {"data": data, "out": out, "format": fmt})
    manifest.add_input(data)
    corpus = _load_corpus(data)
    fmt = fmt or ("tsv" if str(out).endswith(".tsv") else "jsonl")
    (write_tsv if fmt == "tsv" else write_jsonl)(corpus, out)
    stats = corpus_stats(corpus)
    click.echo(
        f"ok: {stats.sentences} sentences, {stats.segments} segments, "
        f"{stats.aspects_total} aspects -> {out}"
    )
    _finish(manifest, manifest_path, out)


@main.command()
@data_option
@click.option("--top", "top_k", type=int, default=5, show_default=True, help="Top aspects per topic.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the full report as JSON.")
@manifest_option
def stats(data, top_k, out, manifest_path):
    """Corpus statistics: counts, aspect-length histogram, top aspects."""
    manifest = RunManifest("stats", {"data": data, "top": top_k, "out": out})
    manifest.add_input(data)
    corpus = _load_corpus(data)
    report = corpus_stats(corpus)
    tops = top_aspects(corpus, top_k)

    click.echo(f"{'topic':<28}{'sentences':>10}{'segments':>10}{'aspects':>9}{'unique':>8}")
    for topic_id, ts in sorted(report.per_topic.items()):
        from .corpus import TOPIC_NAMES
        name = TOPIC_NAMES.get(topic_id, "")
        click.echo(
            f"{topic_id} {name:<25}{ts.sentences:>10}{ts.segments:>10}"
            f"{ts.aspects_total:>9}{ts.aspects_unique:>8}"
        )
    click.echo(
        f"{'total':<28}{report.sentences:>10}{report.segments:>10}"
        f"{report.aspects_total:>9}{report.aspects_unique:>8}"
    )
    click.echo(f"(per-topic unique sum: {report.aspects_unique_topic_sum})")
    pct = report.length_percentages()
    click.echo("aspect length: " + "  ".join(f"{n}: {pct[n]:.2f}%" for n in sorted(pct)))
    for topic_id, ranked in sorted(tops.per_topic.items()):
        pretty = ", ".join(f"{k} ({n})" for k, n in ranked)
        click.echo(f"top[{topic_id}]: {pretty}")
    for c in tops.common:
        click.echo(f"common ({c.topic_count} topics): {c.key} ({c.occurrences})")
    if out:
        payload = {"stats": report.to_dict(), "top_aspects": {
            "per_topic": tops.per_topic,
            "common": [vars(c) | {"topics": list(c.topics)} for c in tops.common],
        }}
        Path(out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _finish(manifest, manifest_path, out)


@main.command()
@data_option
@patterns_option
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Label file to write.")
@manifest_option
def match(data, patterns, out, manifest_path):
    """Rule-baseline aspect labeling within argument units."""
    manifest = RunManifest("match", {"data": data, "patterns": patterns, "out": out})
    manifest.add_input(data)
    manifest.add_input(patterns)
    corpus = _load_corpus(data)
    predicted = baseline_prediction(corpus, _load_patterns(patterns))
    write_label_file(corpus, predicted, out)
    click.echo(f"labeled {len(predicted)} sentences -> {out}")
    _finish(manifest, manifest_path, out)


@main.command()
@data_option
@patterns_option
@click.option("--store", "store_dir", required=True, type=click.Path(file_okay=False),
              help="Annotation store directory (tasks.jsonl is created).")
@manifest_option
def candidates(data, patterns, store_dir, manifest_path):
    """Build the candidate-selection annotation tasks."""
    manifest = RunManifest("candidates", {"data": data, "patterns": patterns, "store": store_dir})
    manifest.add_input(data)
    manifest.add_input(patterns)
    corpus = _load_corpus(data)
    tasks = build_tasks(corpus, _load_patterns(patterns))
    store = AnnotationStore(store_dir)
    try:
        store.save_tasks(tasks)
    except ValueError as err:
        raise click.ClickException(str(err))
    none_only = sum(1 for t in tasks if not t.candidates)
    click.echo(f"{len(tasks)} tasks ({none_only} with only the NONE option) -> {store.tasks_path}")
    _finish(manifest, manifest_path, store.tasks_path)


@main.command()
@data_option
@domain_option
@task_option
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), help="Write the split as JSON.")
@manifest_option
def split(data, domain, task, seed, out, manifest_path):
    """Build the train/dev/test split for a task and regime."""
    manifest = RunManifest("split", {"data": data, "domain": domain, "task": task}, seed=seed)
    manifest.add_input(data)
    corpus = _load_corpus(data)
    try:
        spec = make_splits(corpus, domain, task, seed)
    except CorpusError as err:
        raise click.ClickException(str(err))
    counts = split_counts(spec, corpus)
    unit = "segments" if task == ATE else "sentences"
    click.echo(f"{domain}/{task} ({unit}): train {counts['train']} / dev {counts['dev']} / test {counts['test']}")
    if out:
        Path(out).write_text(json.dumps(spec.to_dict(), indent=2) + "\n", encoding="utf-8")
    _finish(manifest, manifest_path, out)


def _parse_grid(text):
    if not text:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.ClickException(f"bad grid value list: {text!r}")


@main.command()
@data_option
@task_option
@domain_option
@seed_option
@click.option("--out", "model_out", required=True, type=click.Path(dir_okay=False), help="Model file to write.")
@click.option("--l2", type=float, default=0.01, show_default=True, help="Decoupled weight decay.")
@click.option("--learning-rate", type=float, default=0.05, show_default=True)
@click.option("--epochs", type=int, default=20, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--grid-l2", default=None, help="Comma-separated l2 grid; triggers grid search on dev.")
@click.option("--grid-lr", default=None, help="Comma-separated learning-rate grid.")
@manifest_option
def train(data, task, domain, seed, model_out, l2, learning_rate, epochs, batch_size,
          grid_l2, grid_lr, manifest_path):
    """Train the CRF labeler on a split (optionally grid-searching on dev)."""
    params = {
        "data": data, "task": task, "domain": domain, "out": model_out,
        "l2": l2, "learning_rate": learning_rate, "epochs": epochs,
        "batch_size": batch_size, "grid_l2": grid_l2, "grid_lr": grid_lr,
    }
    manifest = RunManifest("train", params, seed=seed)
    manifest.add_input(data)
    corpus = _load_corpus(data)
    spec = make_splits(corpus, domain, task, seed)
    config = TrainConfig(l2=l2, epochs=epochs, learning_rate=learning_rate,
                         batch_size=batch_size, seed=seed)
    try:
        outcome = train_for_split(
            corpus, spec, config,
            grid_l2=_parse_grid(grid_l2), grid_lr=_parse_grid(grid_lr),
        )
    except ValueError as err:
        raise click.ClickException(str(err))
    save_model(outcome.model, model_out)
    click.echo(
        f"trained {task}/{domain}: l2={outcome.config.l2} lr={outcome.config.learning_rate} "
        f"dev span macro-F1 {outcome.dev_macro_f1:.3f} -> {model_out}"
    )
    extra = []
    if outcome.grid_rows is not None:
        grid_out = Path(str(model_out) + ".grid.json")
        grid_out.write_text(json.dumps(outcome.grid_rows, indent=2) + "\n", encoding="utf-8")
        click.echo(f"grid table ({len(outcome.grid_rows)} rows) -> {grid_out}")
        extra.append(grid_out)
    _finish(manifest, manifest_path, model_out, *extra)


@main.command()
@data_option
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Label file to write.")
@manifest_option
def predict(data, model_path, out, manifest_path):
    """Label a corpus with a trained model."""
    manifest = RunManifest("predict", {"data": data, "model": model_path, "out": out})
    manifest.add_input(data)
    manifest.add_input(model_path)
    corpus = _load_corpus(data)
    try:
        model = load_model(model_path)
    except ValueError as err:
        raise click.ClickException(str(err))
    predicted = predict_labels(model, corpus)
    write_label_file(corpus, predicted, out)
    click.echo(f"predicted {len(predicted)} sentences ({model.task}) -> {out}")
    _finish(manifest, manifest_path, out)


def _print_report(report: MetricReport) -> None:
    for kind, score in report.per_type.items():
        click.echo(
            f"  {kind}: P {score.precision:.3f} R {score.recall:.3f} F1 {score.f1:.3f} "
            f"(gold {score.gold}, pred {score.pred})"
        )
    click.echo(f"  span macro-F1 {report.macro_f1:.3f}")
    click.echo(
        f"  token acc {report.accuracy:.3f} / pre {report.precision:.3f} / rec {report.recall:.3f}"
    )
    for name, layer in report.layers.items():
        click.echo(f"  [{name} layer] span macro-F1 {layer.macro_f1:.3f}")


@main.command()
@data_option
@click.option("--pred", required=True, type=click.Path(exists=True, dir_okay=False), help="Label file to score.")
@task_option
@click.option("--domain", type=click.Choice([INNER, CROSS]), default=None,
              help="Restrict scoring to one split set of this regime.")
@click.option("--set", "subset", type=click.Choice(["train", "dev", "test"]), default="test",
              show_default=True, help="Which set to score when --domain is given.")
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report as JSON.")
@manifest_option
def evaluate(data, pred, task, domain, subset, seed, out, manifest_path):
    """Score a prediction file against gold."""
    params = {"data": data, "pred": pred, "task": task, "domain": domain, "set": subset}
    manifest = RunManifest("evaluate", params, seed=seed)
    manifest.add_input(data)
    manifest.add_input(pred)
    corpus = _load_corpus(data)
    try:
        labels = read_label_file(pred)
    except CorpusError as err:
        raise click.ClickException(str(err))
    pointers = None
    if domain is not None:
        spec = make_splits(corpus, domain, task, seed)
        pointers = spec.sets()[subset]
    try:
        report = evaluate_labels(corpus, labels, task, pointers,
                                 meta={"pred": str(pred), "domain": domain, "set": subset})
    except ValueError as err:
        raise click.ClickException(str(err))
    _print_report(report)
    if out:
        Path(out).write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    _finish(manifest, manifest_path, out)


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True, file_okay=False))
@manifest_option
def iaa(store_dir, manifest_path):
    """Inter-annotator agreement over the stored responses."""
    manifest = RunManifest("iaa", {"store": store_dir})
    store = AnnotationStore(store_dir)
    try:
        report = iaa_report(store)
    except ValueError as err:
        raise click.ClickException(str(err))
    for topic, kappa in report.per_topic.items():
        click.echo(f"kappa[{topic}] = {kappa:.3f}")
    click.echo(f"kappa[all] = {report.overall:.3f} "
               f"({report.tasks_scored} tasks, {report.tokens_scored} tokens)")
    _finish(manifest, manifest_path, None)


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True, file_okay=False))
@data_option
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Gold corpus TSV to write.")
@manifest_option
def merge(store_dir, data, out, manifest_path):
    """Merge dual annotations into a gold corpus (plus sidecar report)."""
    manifest = RunManifest("merge", {"store": store_dir, "data": data, "out": out})
    manifest.add_input(data)
    corpus = _load_corpus(data)
    store = AnnotationStore(store_dir)
    try:
        gold, report = export_gold(store, corpus)
    except (ValueError, CorpusError) as err:
        raise click.ClickException(str(err))
    write_tsv(gold, out)
    sidecar = Path(str(out) + ".report.json")
    sidecar.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    click.echo(
        f"merged {report.merged_tasks} tasks "
        f"({len(report.empty_intersection)} empty intersections, "
        f"{len(report.coerced)} coerced sentences) -> {out}"
    )
    _finish(manifest, manifest_path, out, sidecar)


@main.command()
@click.option("--store", "store_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--port", type=int, default=8765, show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(file_okay=False),
              help="Static UI assets to serve at / (e.g. frontend/dist).")
def serve(store_dir, port, ui_dir):
    """Serve the annotation API (and optionally the UI) over HTTP."""
    from .server import serve as run_server

    store = AnnotationStore(store_dir)
    if not store.tasks():
        raise click.ClickException(f"no tasks in {store_dir}; run `argaspect candidates` first")
    click.echo(f"serving {len(store.tasks())} tasks on http://127.0.0.1:{port}")
    run_server(store, port=port, ui_dir=ui_dir)


@main.command("reproduce-baseline")
@data_option
@patterns_option
@seed_option
@click.option("--out", type=click.Path(dir_okay=False), help="Write all reports as JSON.")
@manifest_option
def reproduce_baseline(data, patterns, seed, out, manifest_path):
    """Rule-baseline ATE scores over both regimes, dev and test."""
    manifest = RunManifest("reproduce-baseline", {"data": data, "patterns": patterns}, seed=seed)
    manifest.add_input(data)
    manifest.add_input(patterns)
    corpus = _load_corpus(data)
    pattern_set = _load_patterns(patterns)
    reports = {}
    for domain in (INNER, CROSS):
        try:
            reports[domain] = baseline_report(corpus, pattern_set, domain, seed)
        except CorpusError as err:
            raise click.ClickException(str(err))

    click.echo("pattern-baseline ATE span macro-F1")
    click.echo(f"{'domain':<10}{'dev':>8}{'test':>8}")
    for domain in (INNER, CROSS):
        dev = reports[domain]["dev"].macro_f1
        test = reports[domain]["test"].macro_f1
        click.echo(f"{domain.upper():<10}{dev:>8.3f}{test:>8.3f}")
    click.echo("token metrics (accuracy / precision / recall)")
    for domain in (INNER, CROSS):
        for name in ("dev", "test"):
            r = reports[domain][name]
            click.echo(
                f"{domain.upper():<7}{name:<6}{r.accuracy:>7.3f}{r.precision:>7.3f}{r.recall:>7.3f}"
            )
    if out:
        payload = {
            d: {name: r.to_dict() for name, r in by_set.items()}
            for d, by_set in reports.items()
        }
        Path(out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    _finish(manifest, manifest_path, out)


if __name__ == "__main__":
    main()
