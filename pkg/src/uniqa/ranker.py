"""Cross-scoring of (question, clue) pairs and top-N selection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import httpx

from .errors import ProviderError, ValidationError
from .metrics import normalize_answer, pair_f1
from .retrieval import RetrievalResult, log_sum_exp
from .unirep import Clue, ContextualQuestion
from .wire import post_json

MAX_RANKING_NEGATIVES = 30


@dataclass(frozen=True)
class CrossScorerSpec:
    kind: str = "local_lexical"  # "local_lexical" | "remote"
    endpoint: str | None = None

    def __post_init__(self):
        if self.kind not in ("local_lexical", "remote"):
            raise ValidationError(f"unknown scorer kind {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValidationError("remote scorer requires an endpoint")


@dataclass(frozen=True)
class RankScore:
    clue_id: str
    logit: float
    score: float  # sigmoid(logit)


@dataclass(frozen=True)
class RankedList:
    items: list[RankScore]  # sorted by score desc, ties by clue id asc
    n: int

    @property
    def selected(self) -> list[RankScore]:
        return self.items[:min(self.n, len(self.items))]

    @property
    def selected_ids(self) -> list[str]:
        return [item.clue_id for item in self.selected]


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _lexical_logit(question_text: str, clue_text: str) -> float:
    # Token-overlap F1 in [0, 1] mapped onto logits in [-2, 2].
    f1 = pair_f1(normalize_answer(question_text), normalize_answer(clue_text))
    return 4.0 * f1 - 2.0


def _score_logits(question: ContextualQuestion, clues: list[Clue],
                  scorer: CrossScorerSpec,
                  client: httpx.Client | None = None) -> list[float]:
    if scorer.kind == "local_lexical":
        return [_lexical_logit(question.text, c.text) for c in clues]
    body = post_json(
        f"{scorer.endpoint.rstrip('/')}/score",
        {"pairs": [{"question": question.text, "clue": c.text} for c in clues]},
        stage="rank", client=client,
    )
    logits = body.get("logits")
    if not isinstance(logits, list) or len(logits) != len(clues):
        raise ProviderError(
            f"score provider at {scorer.endpoint}: expected {len(clues)} logits "
            f"for pairs {[c.id for c in clues]!r}",
            stage="rank",
        )
    return [float(v) for v in logits]


def score_pair(question: ContextualQuestion, clue: Clue, scorer: CrossScorerSpec,
               client: httpx.Client | None = None) -> RankScore:
    """Cross-score one pair; score is the sigmoid of the logit."""
    if not question.text or not clue.text:
        raise ValidationError("score_pair requires non-empty question and clue text")
    logit = _score_logits(question, [clue], scorer, client)[0]
    return RankScore(clue_id=clue.id, logit=logit, score=sigmoid(logit))


def rank_and_select(question: ContextualQuestion, candidates: list[Clue], n: int,
                    scorer: CrossScorerSpec,
                    client: httpx.Client | None = None) -> RankedList:
    """Score every candidate, sort, and keep the top N."""
    if not candidates:
        raise ValidationError("rank_and_select requires at least one candidate")
    if n <= 0:
        raise ValidationError("N must be positive")
    logits = _score_logits(question, candidates, scorer, client)
    items = [RankScore(clue_id=c.id, logit=l, score=sigmoid(l))
             for c, l in zip(candidates, logits)]
    items.sort(key=lambda r: (-r.score, r.clue_id))
    return RankedList(items=items, n=n)


def ranking_loss(logits: list[float], positive_indices: set[int]) -> float:
    """Negative summed log-softmax over the positive positions."""
    if not positive_indices:
        raise ValidationError("ranking_loss requires at least one positive index")
    for v in logits:
        if not math.isfinite(v):
            raise ValidationError(f"non-finite logit: {v!r}")
    bad = [i for i in positive_indices if not (0 <= i < len(logits))]
    if bad:
        raise ValidationError(f"positive indices out of bounds: {bad}")
    lse = log_sum_exp(logits)
    return sum(lse - logits[i] for i in positive_indices)


def build_ranking_batch(
    retrieval: RetrievalResult,
    gold_ids: list[str],
    max_negatives: int = MAX_RANKING_NEGATIVES,
) -> tuple[list[str], set[int]]:
    """Assemble a ranking training batch: golds first, then retrieved negatives.

    Negatives are the top retrieved clues excluding the golds, capped at
    ``max_negatives``. Returns clue ids and the positive positions.
    """
    golds = sorted(set(gold_ids))
    gold_set = set(golds)
    negatives = [cid for cid in retrieval.clue_ids if cid not in gold_set]
    candidates = golds + negatives[:max_negatives]
    return candidates, set(range(len(golds)))
