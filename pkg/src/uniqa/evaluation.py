"""Dataset ingestion, pipeline evaluation, and the textualization ablation runner."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .metrics import exact_match, keyword_accuracy, retrieval_f1, token_f1
from .pipeline import (
    PipelineConfig,
    check_index_textualization,
    ingest_and_index,
    run_stages,
)
from .retrieval import VectorIndex, load_index
from .unirep import ConversationTurn, TextualizationConfig, build_contextual_question


@dataclass(frozen=True)
class QAExample:
    qid: str
    question: str
    gold_answers: list[str]
    gold_clue_ids: list[str] = field(default_factory=list)
    gold_keywords: list[str] | None = None
    conversation_id: str | None = None
    turn: int | None = None

    def validate(self) -> None:
        if not self.gold_answers:
            raise ValidationError(f"example {self.qid!r}: gold_answers must be non-empty")
        if self.conversation_id is not None and self.turn is None:
            raise ValidationError(f"example {self.qid!r}: conversation examples need a turn")


def parse_example(raw: dict) -> QAExample:
    example = QAExample(
        qid=raw["qid"],
        question=raw["question"],
        gold_answers=list(raw.get("answers", [])),
        gold_clue_ids=list(raw.get("gold_clue_ids", [])),
        gold_keywords=list(raw["keywords"]) if raw.get("keywords") else None,
        conversation_id=raw.get("conversation_id"),
        turn=raw.get("turn"),
    )
    example.validate()
    return example


def load_dataset(path: str | Path) -> list[QAExample]:
    examples = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                examples.append(parse_example(json.loads(line)))
    return examples


@dataclass
class ExampleRow:
    qid: str
    answer: str
    em: int
    f1: float
    retrieval_f1: float | None
    keyword_acc: int | None
    recall_at_k: float | None
    selected_hit: float | None
    selected_ids: list[str]
    note: str | None = None

    def to_dict(self) -> dict:
        return {
            "qid": self.qid, "answer": self.answer, "em": self.em, "f1": self.f1,
            "retrieval_f1": self.retrieval_f1, "keyword_acc": self.keyword_acc,
            "recall_at_k": self.recall_at_k, "selected_hit": self.selected_hit,
            "selected_ids": self.selected_ids, "note": self.note,
        }


@dataclass
class MetricsReport:
    em: float | None
    f1: float | None
    retrieval_f1: float | None
    keyword_acc: float | None
    recall_at_k: float | None
    selected_hit_rate: float | None
    example_count: int
    per_example: list[ExampleRow]
    config_fingerprint: str

    def to_dict(self) -> dict:
        return {
            "em": self.em,
            "f1": self.f1,
            "retrieval_f1": self.retrieval_f1,
            "keyword_acc": self.keyword_acc,
            "recall_at_k": self.recall_at_k,
            "selected_hit_rate": self.selected_hit_rate,
            "example_count": self.example_count,
            "config_fingerprint": self.config_fingerprint,
        }


def _mean(values: list) -> float | None:
    defined = [v for v in values if v is not None]
    return sum(defined) / len(defined) if defined else None


def _history_for(example: QAExample, by_conversation: dict) -> list[ConversationTurn]:
    """Gold history: prior turns of the conversation with their gold answers."""
    if example.conversation_id is None:
        return []
    prior = [e for e in by_conversation[example.conversation_id]
             if e.turn < example.turn]
    return [ConversationTurn(question=e.question, answer=e.gold_answers[0])
            for e in sorted(prior, key=lambda e: e.turn)]


def evaluate_example(example: QAExample, history: list[ConversationTurn],
                     index: VectorIndex, config: PipelineConfig,
                     inject_gold: bool = False) -> ExampleRow:
    question = build_contextual_question(history, example.question,
                                         config.textualization)
    gold_ids = set(example.gold_clue_ids)
    note = None
    unknown = sorted(gid for gid in gold_ids if gid not in index.clue_store)
    if unknown:
        note = f"gold clue ids not in corpus: {unknown}"
    envelope = run_stages(
        question, index, config,
        inject_gold_ids=example.gold_clue_ids if inject_gold else None,
    )
    answer = envelope.answer.text
    selected = envelope.ranked_clues.selected_ids
    retrieved = set(envelope.retrieval.clue_ids)
    row = ExampleRow(
        qid=example.qid,
        answer=answer,
        em=exact_match(answer, example.gold_answers),
        f1=token_f1(answer, example.gold_answers),
        retrieval_f1=retrieval_f1(set(selected), gold_ids) if gold_ids else None,
        keyword_acc=(keyword_accuracy(answer, example.gold_keywords)
                     if example.gold_keywords else None),
        recall_at_k=(len(gold_ids & retrieved) / len(gold_ids)) if gold_ids else None,
        selected_hit=(len(gold_ids & set(selected)) / len(gold_ids)) if gold_ids else None,
        selected_ids=selected,
        note=note,
    )
    return row


def run_eval(examples: list[QAExample], config: PipelineConfig,
             ablation: TextualizationConfig | None = None, *,
             index: VectorIndex | None = None,
             inject_gold: bool = False) -> MetricsReport:
    """Run the full pipeline over a dataset and aggregate the metrics.

    Conversational examples consume the gold answers of their prior turns,
    so each turn is scored independently of model mistakes.
    """
    if ablation is not None:
        config = config.with_textualization(ablation)
    if index is None:
        if not config.index_path:
            raise ValidationError("run_eval needs an index or config.index_path")
        check_index_textualization(config.index_path, config.textualization)
        index = load_index(config.index_path)

    by_conversation: dict[str, list[QAExample]] = {}
    for ex in examples:
        ex.validate()
        if ex.conversation_id is not None:
            by_conversation.setdefault(ex.conversation_id, []).append(ex)

    # deterministic order: conversations by (id, turn), singletons by qid
    ordered = sorted(examples, key=lambda e: (e.conversation_id or "",
                                              e.turn or 0, e.qid))
    rows = []
    for example in ordered:
        history = _history_for(example, by_conversation)
        rows.append(evaluate_example(example, history, index, config, inject_gold))
    rows.sort(key=lambda r: r.qid)

    return MetricsReport(
        em=_mean([r.em for r in rows]),
        f1=_mean([r.f1 for r in rows]),
        retrieval_f1=_mean([r.retrieval_f1 for r in rows]),
        keyword_acc=_mean([r.keyword_acc for r in rows]),
        recall_at_k=_mean([r.recall_at_k for r in rows]),
        selected_hit_rate=_mean([r.selected_hit for r in rows]),
        example_count=len(rows),
        per_example=rows,
        config_fingerprint=config.fingerprint(),
    )


def write_report(report: MetricsReport, out_dir: str | Path) -> Path:
    """Write report.json plus per_example.jsonl under a fingerprint-named dir."""
    target = Path(out_dir) / report.config_fingerprint[:16]
    target.mkdir(parents=True, exist_ok=True)
    (target / "report.json").write_text(
        json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    )
    with open(target / "per_example.jsonl", "w") as fh:
        for row in report.per_example:
            fh.write(json.dumps(row.to_dict(), sort_keys=True) + "\n")
    return target


ABLATION_ARMS = {
    "full": TextualizationConfig(use_global=True, use_local=True),
    "no_global": TextualizationConfig(use_global=False, use_local=True),
    "no_local": TextualizationConfig(use_global=True, use_local=False),
}


def run_ablation(corpus_path: str | Path, examples: list[QAExample],
                 config: PipelineConfig, work_dir: str | Path,
                 arms: dict[str, TextualizationConfig] | None = None,
                 ) -> dict[str, MetricsReport]:
    """Re-ingest the corpus under each textualization arm and evaluate it."""
    from dataclasses import replace

    arms = arms or ABLATION_ARMS
    work_dir = Path(work_dir)
    results = {}
    for name, tex in arms.items():
        arm_config = replace(config.with_textualization(tex),
                             index_path=str(work_dir / f"index_{name}"))
        ingest_and_index(corpus_path, arm_config)
        results[name] = run_eval(examples, arm_config)
    return results
