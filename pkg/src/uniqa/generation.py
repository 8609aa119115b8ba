"""Fuse ranked clues with the question and produce an answer."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import httpx

from .errors import EngineError, ProviderError, ValidationError
from .metrics import normalize_answer, pair_f1
from .ranker import RankedList
from .unirep import Clue, ContextualQuestion
from .wire import post_json

_SENTENCE_SPLIT = re.compile(r"[.?!]")


@dataclass(frozen=True)
class GeneratorProviderSpec:
    kind: str = "extractive"  # "extractive" | "remote"
    endpoint: str | None = None
    max_answer_tokens: int = 64

    def __post_init__(self):
        if self.kind not in ("extractive", "remote"):
            raise ValidationError(f"unknown generator kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValidationError("remote generator requires an endpoint")
        if self.max_answer_tokens <= 0:
            raise ValidationError("max_answer_tokens must be positive")


@dataclass(frozen=True)
class PromptBlock:
    clue_id: str
    modality: str
    text: str


@dataclass(frozen=True)
class Prompt:
    text: str
    clue_ids: list[str]
    question_text: str
    blocks: list[PromptBlock] = field(default_factory=list)


@dataclass(frozen=True)
class GeneratedAnswer:
    text: str
    provenance: list[str]  # clue ids consulted, best-supporting first
    generator_kind: str


def build_prompt(question: ContextualQuestion, ranked: RankedList,
                 clue_store: dict[str, Clue]) -> Prompt:
    """Serialize the question plus the selected clues in rank order."""
    if not ranked.selected:
        raise ValidationError("cannot build a prompt from an empty selection")
    blocks = []
    for item in ranked.selected:
        clue = clue_store.get(item.clue_id)
        if clue is None:
            raise ValidationError(f"clue {item.clue_id!r} missing from store")
        blocks.append(PromptBlock(clue_id=clue.id, modality=clue.modality,
                                  text=clue.text))
    lines = [f"question: {question.text}"]
    lines += [f"context [{b.modality}] ({b.clue_id}): {b.text}" for b in blocks]
    return Prompt(text="\n".join(lines), clue_ids=[b.clue_id for b in blocks],
                  question_text=question.text, blocks=blocks)


def _split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]


def _extract_answer(prompt: Prompt) -> GeneratedAnswer:
    question_tokens = normalize_answer(prompt.question_text)
    best = None  # (f1, clue_rank, sentence_pos, sentence, clue_id)
    for rank, block in enumerate(prompt.blocks):
        for pos, sentence in enumerate(_split_sentences(block.text)):
            f1 = pair_f1(normalize_answer(sentence), question_tokens)
            key = (-f1, rank, pos)
            if best is None or key < best[0]:
                best = (key, sentence, block.clue_id)
    if best is None:
        raise EngineError("no extractable sentences in any context block",
                          stage="generate")
    _, sentence, winner = best
    provenance = [winner] + [cid for cid in prompt.clue_ids if cid != winner]
    return GeneratedAnswer(text=sentence, provenance=provenance,
                           generator_kind="extractive")


def _truncate_tokens(text: str, limit: int) -> str:
    tokens = text.split()
    return " ".join(tokens[:limit]) if len(tokens) > limit else text


def generate_answer(prompt: Prompt, provider: GeneratorProviderSpec,
                    client: httpx.Client | None = None) -> GeneratedAnswer:
    """Produce an answer from the prompt via the configured provider.

    The extractive provider is a deterministic offline fallback: it returns
    the context sentence with the highest token-F1 overlap with the
    question, preferring better-ranked clues and earlier sentences on ties.
    """
    if provider.kind == "extractive":
        return _extract_answer(prompt)
    body = post_json(
        f"{provider.endpoint.rstrip('/')}/generate",
        {"prompt": prompt.text, "max_tokens": provider.max_answer_tokens},
        stage="generate", client=client,
    )
    text = body.get("text")
    if not isinstance(text, str) or not text:
        raise ProviderError(
            f"generate provider at {provider.endpoint}: empty or missing text",
            stage="generate",
        )
    return GeneratedAnswer(
        text=_truncate_tokens(text, provider.max_answer_tokens),
        provenance=list(prompt.clue_ids),
        generator_kind="remote",
    )


def generation_loss(stepwise_gold_logprobs: list[float]) -> float:
    """Negated sum of per-step gold-token log-probabilities."""
    if not stepwise_gold_logprobs:
        raise ValidationError("generation_loss requires at least one step")
    for lp in stepwise_gold_logprobs:
        if math.isnan(lp):
            raise ValidationError("log-probability is NaN")
        if lp > 0:
            raise ValidationError(f"log-probability above zero: {lp!r}")
    return -sum(stepwise_gold_logprobs)
