"""Command-line interface: ingest, ask, eval, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import EngineError
from .evaluation import load_dataset, run_eval, write_report
from .generation import GeneratorProviderSpec
from .pipeline import PipelineConfig, Session, answer_question, ingest_and_index
from .ranker import CrossScorerSpec
from .retrieval import EmbeddingProviderSpec, load_index, load_manifest
from .unirep import TextualizationConfig

_EMBEDDER_KINDS = {"local": "local_hash", "remote": "remote"}
_SCORER_KINDS = {"local": "local_lexical", "remote": "remote"}


def _base_config(config_path: str | None) -> dict:
    if not config_path:
        return {}
    return json.loads(Path(config_path).read_text())


def _build_config(config_path: str | None, *, index: str | None = None,
                  topk: int | None = None, topn: int | None = None,
                  embedder: str | None = None, embedder_url: str | None = None,
                  scorer: str | None = None, scorer_url: str | None = None,
                  generator: str | None = None, generator_url: str | None = None,
                  use_global: bool | None = None, use_local: bool | None = None,
                  ) -> PipelineConfig:
    """Layer CLI flags over an optional JSON config file; flags win."""
    raw = _base_config(config_path)
    cfg = PipelineConfig.from_dict(raw)
    embedder_spec = cfg.embedder
    if embedder:
        embedder_spec = EmbeddingProviderSpec(
            kind=_EMBEDDER_KINDS[embedder],
            dimension=cfg.embedder.dimension,
            endpoint=embedder_url or cfg.embedder.endpoint,
        )
    scorer_spec = cfg.scorer
    if scorer:
        scorer_spec = CrossScorerSpec(kind=_SCORER_KINDS[scorer],
                                      endpoint=scorer_url or cfg.scorer.endpoint)
    generator_spec = cfg.generator
    if generator:
        generator_spec = GeneratorProviderSpec(
            kind=generator,
            endpoint=generator_url or cfg.generator.endpoint,
            max_answer_tokens=cfg.generator.max_answer_tokens,
        )
    tex = cfg.textualization
    if use_global is not None or use_local is not None:
        tex = TextualizationConfig(
            use_global=tex.use_global if use_global is None else use_global,
            use_local=tex.use_local if use_local is None else use_local,
            max_history_turns=tex.max_history_turns,
        )
    return PipelineConfig(
        k=topk if topk is not None else cfg.k,
        n=topn if topn is not None else cfg.n,
        embedder=embedder_spec,
        scorer=scorer_spec,
        generator=generator_spec,
        textualization=tex,
        index_path=index if index is not None else cfg.index_path,
        sessions_db=cfg.sessions_db,
    )


@click.group()
def main():
    """Multi-modal QA over a unified language space."""


@main.command()
@click.option("--corpus", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--no-global", "no_global", is_flag=True, help="Skip image captions/titles.")
@click.option("--no-local", "no_local", is_flag=True, help="Skip image object attributes.")
@click.option("--config", "config_path", type=click.Path(exists=True))
def ingest(corpus, out, no_global, no_local, config_path):
    """Textualize a JSONL corpus and build the vector index."""
    config = _build_config(config_path, index=out,
                           use_global=False if no_global else None,
                           use_local=False if no_local else None)
    path = ingest_and_index(corpus, config)
    manifest = load_manifest(path)
    skipped = manifest.get("skipped_records", [])
    click.echo(f"indexed {manifest['count']} clues -> {path}")
    for item in skipped:
        click.echo(f"skipped line {item['line']}: {item['error']}", err=True)


@main.command()
@click.option("--index", "index_dir", required=True, type=click.Path(exists=True))
@click.option("--question", required=True)
@click.option("--topk", default=None, type=int)
@click.option("--topn", default=None, type=int)
@click.option("--embedder", type=click.Choice(["local", "remote"]))
@click.option("--embedder-url")
@click.option("--scorer", type=click.Choice(["local", "remote"]))
@click.option("--scorer-url")
@click.option("--generator", type=click.Choice(["extractive", "remote"]))
@click.option("--generator-url")
@click.option("--config", "config_path", type=click.Path(exists=True))
def ask(index_dir, question, topk, topn, embedder, embedder_url,
        scorer, scorer_url, generator, generator_url, config_path):
    """Answer a single question against a built index."""
    config = _build_config(config_path, index=index_dir, topk=topk, topn=topn,
                           embedder=embedder, embedder_url=embedder_url,
                           scorer=scorer, scorer_url=scorer_url,
                           generator=generator, generator_url=generator_url)
    index = load_index(index_dir)
    envelope = answer_question(Session(session_id="cli"), question, config, index)
    click.echo(json.dumps(envelope.to_dict(), indent=2))


@main.command(name="eval")
@click.option("--index", "index_dir", required=True, type=click.Path(exists=True))
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--topk", default=None, type=int)
@click.option("--topn", default=None, type=int)
@click.option("--inject-gold", is_flag=True,
              help="Force gold clues into the retrieval candidates.")
@click.option("--config", "config_path", type=click.Path(exists=True))
def eval_cmd(index_dir, dataset, out, topk, topn, inject_gold, config_path):
    """Evaluate a dataset and write the metrics report."""
    manifest = load_manifest(index_dir)
    tex = manifest.get("textualization", {})
    config = _build_config(config_path, index=index_dir, topk=topk, topn=topn,
                           use_global=tex.get("use_global"),
                           use_local=tex.get("use_local"))
    examples = load_dataset(dataset)
    report = run_eval(examples, config, inject_gold=inject_gold)
    target = write_report(report, out)
    click.echo(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    click.echo(f"report written to {target}", err=True)


@main.command()
@click.option("--index", "index_dir", required=True, type=click.Path(exists=True))
@click.option("--port", default=8600, type=int)
@click.option("--host", default="127.0.0.1")
@click.option("--sessions-db", default=None, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True))
def serve(index_dir, port, host, sessions_db, config_path):
    """Run the HTTP QA service."""
    from dataclasses import replace

    from .service import serve as run_service

    config = _build_config(config_path, index=index_dir)
    if sessions_db:
        config = replace(config, sessions_db=sessions_db)
    run_service(config, host=host, port=port)


def entrypoint():  # pragma: no cover
    try:
        main(standalone_mode=True)
    except EngineError as exc:
        click.echo(f"error [{exc.stage}]: {exc.message}", err=True)
        sys.exit(1)


if __name__ == "__main__":  # pragma: no cover
    entrypoint()
