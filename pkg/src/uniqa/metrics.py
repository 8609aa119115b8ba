"""Answer- and evidence-level metrics: EM, token F1, retrieval F1, keywords."""

from __future__ import annotations

import string
from collections import Counter

from .errors import ValidationError

_ARTICLES = {"a", "an", "the"}
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_answer(text: str) -> list[str]:
    """Lowercase, drop punctuation and articles, return the token list."""
    stripped = text.lower().translate(_PUNCT_TABLE)
    return [tok for tok in stripped.split() if tok not in _ARTICLES]


def pair_f1(pred_tokens: list[str], gold_tokens: list[str]) -> float:
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred_tokens)
    recall = common / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def exact_match(pred: str, golds: list[str]) -> int:
    """1 iff the normalized prediction equals any normalized gold."""
    if not golds:
        raise ValidationError("exact_match requires at least one gold answer")
    pred_tokens = normalize_answer(pred)
    return int(any(pred_tokens == normalize_answer(g) for g in golds))


def token_f1(pred: str, golds: list[str]) -> float:
    """Best bag-of-tokens F1 of the prediction against any gold answer."""
    if not golds:
        raise ValidationError("token_f1 requires at least one gold answer")
    pred_tokens = normalize_answer(pred)
    return max(pair_f1(pred_tokens, normalize_answer(g)) for g in golds)


def retrieval_f1(pred_ids: set[str], gold_ids: set[str]) -> float:
    """Set precision/recall F1 between predicted and gold clue ids."""
    if not gold_ids:
        raise ValidationError("retrieval_f1 requires a non-empty gold set")
    if not pred_ids:
        return 0.0
    common = len(pred_ids & gold_ids)
    if common == 0:
        return 0.0
    precision = common / len(pred_ids)
    recall = common / len(gold_ids)
    return 2 * precision * recall / (precision + recall)


def _contains_contiguous(haystack: list[str], needle: list[str]) -> bool:
    if not needle:
        return True
    return any(haystack[i:i + len(needle)] == needle
               for i in range(len(haystack) - len(needle) + 1))


def keyword_accuracy(pred: str, keywords: list[str]) -> int:
    """1 iff every keyword occurs contiguously in the normalized prediction."""
    if not keywords:
        raise ValidationError("keyword_accuracy requires at least one keyword")
    pred_tokens = normalize_answer(pred)
    return int(all(_contains_contiguous(pred_tokens, normalize_answer(k))
                   for k in keywords))
