"""Command-line entry points for the whole pipeline."""

from __future__ import annotations

import json
import os
from fractions import Fraction
from importlib import resources
from pathlib import Path

import click

from oapr.catalog import (
    AttributeCatalog,
    HashNGramEmbedder,
    SplitManifest,
    cluster_attributes,
    embed_phrases,
    filter_and_verbalize,
    load_rules,
    parse_rules,
    partition_clusters,
)
from oapr.harness.bench import bench_latency
from oapr.harness.config import TrainConfig
from oapr.harness.evaluate import evaluate, write_report
from oapr.harness.model import OAPRModel
from oapr.harness.synthetic import generate_dataset
from oapr.harness.train import run_training, write_log
from oapr.retrieval.gallery import load_gallery
from oapr.retrieval.index import build_index, load_index, save_index

BUNDLED_DATASETS = ("pa100k", "peta", "rapv1", "rapv2", "synthetic")


def _load_rules_for(dataset: str, rules_path: str | None):
    if rules_path:
        return load_rules(rules_path)
    if dataset not in BUNDLED_DATASETS:
        raise click.UsageError(
            f"no bundled rules for {dataset!r}; pass --rules (bundled: {BUNDLED_DATASETS})"
        )
    text = resources.files("oapr.catalog").joinpath(f"data/{dataset}.tsv").read_text("utf-8")
    return parse_rules(text)


@click.group()
def main():
    """Open-attribute person retrieval toolkit."""


@main.command("build-catalog")
@click.option("--dataset", required=True, help="dataset name (bundled table) ")
@click.option("--rules", "rules_path", type=click.Path(exists=True), default=None,
              help="override verbalization table")
@click.option("--out", "out_path", required=True, type=click.Path())
def build_catalog(dataset: str, rules_path: str | None, out_path: str):
    """Filter and verbalize raw attributes into a catalog JSON."""
    rules = _load_rules_for(dataset, rules_path)
    catalog = filter_and_verbalize(list(rules), rules, dataset_name=dataset)
    Path(out_path).write_text(catalog.to_json(), encoding="utf-8")
    click.echo(f"catalog: {len(catalog)} retained, {len(catalog.filtered_out)} filtered out")


@main.command("split")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--clusters", "n_clusters", required=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--novel-fraction", default="1/4", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
def split(catalog_path: str, n_clusters: int, seed: int, novel_fraction: str, out_path: str):
    """Cluster phrases and partition each cluster into base/novel."""
    catalog = AttributeCatalog.from_json(Path(catalog_path).read_text(encoding="utf-8"))
    embeddings = embed_phrases(catalog, HashNGramEmbedder())
    assignment = cluster_attributes(embeddings, n_clusters)
    manifest = partition_clusters(assignment, catalog, seed, Fraction(novel_fraction))
    Path(out_path).write_text(manifest.to_json(), encoding="utf-8")
    click.echo(f"split: {len(manifest.base)} base / {len(manifest.novel)} novel")


@main.command("train")
@click.option("--catalog", "catalog_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--gallery", "gallery_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--log", "log_path", type=click.Path(), default=None)
@click.option("--seed", required=True, type=int)
@click.option("--epochs", default=100, show_default=True, type=int)
@click.option("--batch-size", default=32, show_default=True, type=int)
@click.option("--lr-prompts", default=0.005, show_default=True, type=float)
@click.option("--lr-selection", default=0.001, show_default=True, type=float)
@click.option("--encoder-seed", default=7, show_default=True, type=int)
def train(catalog_path, manifest_path, gallery_path, out_path, log_path, seed,
          epochs, batch_size, lr_prompts, lr_selection, encoder_seed):
    """Train prompts and selector on the manifest's base attributes."""
    catalog = AttributeCatalog.from_json(Path(catalog_path).read_text(encoding="utf-8"))
    manifest = SplitManifest.load(manifest_path)
    gallery = load_gallery(gallery_path, catalog)
    config = TrainConfig(
        seed=seed, epochs=epochs, batch_size=batch_size,
        lr_prompts=lr_prompts, lr_selection=lr_selection, encoder_seed=encoder_seed,
    )
    result = run_training(config, manifest, catalog, gallery)
    if log_path:
        write_log(result.log_records, log_path)
    result.model.save_checkpoint(out_path, training_log_digest=result.log_digest)
    last_epoch = [r for r in result.log_records if r["kind"] == "epoch"]
    if last_epoch:
        click.echo(f"final epoch mean loss: {last_epoch[-1]['l_total']:.6f}")
    click.echo(f"checkpoint written to {out_path}")


@main.command("index")
@click.option("--gallery", "gallery_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def index_cmd(gallery_path: str, checkpoint_path: str, out_path: str):
    """Precompute per-image body features for query scoring."""
    model = OAPRModel.load_checkpoint(checkpoint_path)
    gallery = load_gallery(gallery_path, model.catalog)
    index = build_index(gallery, model)
    save_index(index, out_path)
    click.echo(f"indexed {len(index)} images -> {out_path}")


@main.command("eval")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--k", "k_csv", default="1,5", show_default=True)
@click.option("--mode", type=click.Choice(["full", "balanced"]), default="full", show_default=True)
@click.option("--seed", type=int, default=None, help="required for balanced mode")
@click.option("--report", "report_path", required=True, type=click.Path())
def eval_cmd(index_path, checkpoint_path, manifest_path, k_csv, mode, seed, report_path):
    """Evaluate retrieval metrics on base/novel/mixed query sets."""
    if mode == "balanced" and seed is None:
        raise click.UsageError("--seed is mandatory with --mode balanced")
    model = OAPRModel.load_checkpoint(checkpoint_path)
    index = load_index(index_path)
    manifest = SplitManifest.load(manifest_path)
    k_values = tuple(int(v) for v in k_csv.split(","))
    report = evaluate(
        model, manifest, list(index.entries), k_values=k_values,
        mode=mode, seed=seed, index=index,
    )
    write_report(report, report_path)
    for split_name, block in report["splits"].items():
        lbl = ", ".join(f"P@{k}-lbl={v:.4f}" for k, v in block["p_at_k_label"].items())
        ins = ", ".join(f"P@{k}-ins={v:.4f}" for k, v in block["p_at_k_instance"].items())
        click.echo(f"{split_name}: n={block['n_queries']} {lbl} {ins}")


@main.command("serve")
@click.option("--index", "index_path", default=lambda: os.environ.get("OAPR_INDEX"))
@click.option("--checkpoint", "checkpoint_path", default=lambda: os.environ.get("OAPR_CHECKPOINT"))
@click.option("--manifest", "manifest_path", default=lambda: os.environ.get("OAPR_MANIFEST"))
@click.option("--port", type=int, default=lambda: int(os.environ.get("OAPR_PORT", "8731")))
@click.option("--cors-origin", default=lambda: os.environ.get("OAPR_CORS_ORIGIN"))
@click.option("--ui-dir", default=lambda: os.environ.get("OAPR_UI_DIR"))
def serve(index_path, checkpoint_path, manifest_path, port, cors_origin, ui_dir):
    """Serve /api/attributes, /api/query, and /api/images over HTTP."""
    import uvicorn

    from oapr.service.app import ServiceState, create_app

    if not (index_path and checkpoint_path and manifest_path):
        raise click.UsageError("need --index, --checkpoint and --manifest (or OAPR_* env vars)")
    state = ServiceState.load(index_path, checkpoint_path, manifest_path)
    app = create_app(state, cors_origin=cors_origin, ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port)


@main.command("bench-latency")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True))
@click.option("--checkpoint", "checkpoint_path", required=True, type=click.Path(exists=True))
@click.option("--batch", default=64, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def bench(index_path: str, checkpoint_path: str, batch: int, seed: int):
    """Report mean per-query milliseconds over a built index."""
    model = OAPRModel.load_checkpoint(checkpoint_path)
    index = load_index(index_path)
    stats = bench_latency(index, model, n_queries=batch, seed=seed)
    click.echo(json.dumps(stats, sort_keys=True, indent=2))


@main.command("synth-data")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--train", "n_train", default=512, show_default=True, type=int)
@click.option("--test", "n_test", default=128, show_default=True, type=int)
@click.option("--seed", default=11, show_default=True, type=int)
def synth_data(out_dir: str, n_train: int, n_test: int, seed: int):
    """Generate the procedural color-block dataset."""
    paths = generate_dataset(out_dir, n_train=n_train, n_test=n_test, seed=seed)
    for split_name, path in paths.items():
        click.echo(f"{split_name}: {path}")


if __name__ == "__main__":
    main()
