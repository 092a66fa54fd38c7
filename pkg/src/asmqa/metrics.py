"""Evaluation metrics: exact match, normalized LCS, weighted Jaccard,
optimal-planning rate, average step, and context-length accounting."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ValidationError
from .kg import KnowledgeGraph
from .qa import GRAPH_PLACEHOLDER

Sequence = "list[str] | tuple[str, ...]"

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def exact_match(pred, gold) -> int:
    """1 iff the sequences are identical element-wise."""
    return int(list(pred) == list(gold))


def accuracy(pairs) -> float:
    """Mean exact match over (pred, gold) pairs."""
    pairs = list(pairs)
    if not pairs:
        raise ValidationError("accuracy over an empty set is undefined")
    return sum(exact_match(p, g) for p, g in pairs) / len(pairs)


def lcs_length(a, b) -> int:
    """Longest-common-subsequence length via the standard DP table."""
    a, b = list(a), list(b)
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(cur[j - 1], prev[j]))
        prev = cur
    return prev[-1]


def nlcs(pred, gold) -> float:
    """LCS length over max(|pred|, |gold|); both empty -> 1, one empty -> 0."""
    pred, gold = list(pred), list(gold)
    if not pred and not gold:
        return 1.0
    if not pred or not gold:
        return 0.0
    return lcs_length(pred, gold) / max(len(pred), len(gold))


def wjaccard(pred, gold) -> float:
    """Multiset Jaccard: sum of min counts over sum of max counts."""
    pred, gold = list(pred), list(gold)
    if not pred and not gold:
        return 1.0
    if not pred or not gold:
        return 0.0
    counts: dict[str, list[int]] = {}
    for x in pred:
        counts.setdefault(x, [0, 0])[0] += 1
    for x in gold:
        counts.setdefault(x, [0, 0])[1] += 1
    num = sum(min(c[0], c[1]) for c in counts.values())
    den = sum(max(c[0], c[1]) for c in counts.values())
    return num / den


def opr(episodes) -> float:
    """Optimal steps over total steps, aggregated across all episodes."""
    total = 0
    optimal = 0
    for steps in episodes:
        for step in steps:
            total += 1
            optimal += int(bool(step["was_optimal"]) if isinstance(step, dict) else bool(step))
    if total == 0:
        raise ValidationError("OPR undefined with zero operations")
    return optimal / total


def average_step(episodes) -> float:
    """Mean step count per episode; empty episodes are invalid."""
    lengths = []
    for steps in episodes:
        n = len(steps)
        if n == 0:
            raise ValidationError("episode with zero steps")
        lengths.append(n)
    if not lengths:
        raise ValidationError("no episodes")
    return sum(lengths) / len(lengths)


def count_tokens(text: str) -> int:
    """Whitespace-and-punctuation token count."""
    return len(_TOKEN_RE.findall(text))


def context_length(items) -> int:
    """Sum of integer token budgets and tokenized string lengths."""
    total = 0
    for item in items:
        if isinstance(item, int):
            total += item
        else:
            total += count_tokens(item)
    return total


def instruction_token_count(instruction: str) -> int:
    """Tokens of a rendered instruction; the graph placeholder is embedding
    input downstream and is not counted as text."""
    return count_tokens(instruction.replace(GRAPH_PLACEHOLDER, ""))


def graph_context_length(m: int, instruction: str) -> int:
    """One token per graph symbol plus the instruction tokens."""
    return context_length([m, instruction.replace(GRAPH_PLACEHOLDER, "")])


def serialize_triples_text(g: KnowledgeGraph) -> str:
    """Text-triple baseline serialization: one `<head, relation, tail>` line
    per triple. Entities repeat wherever they have several edges."""
    return "\n".join(f"<{h}, {r}, {t}>" for h, r, t in g.named_triples())


@dataclass
class EvalResult:
    accuracy: float
    nlcs: float
    wjaccard: float
    per_category: dict
    mean_infer_ms: float
    items: list

    def __post_init__(self):
        for name in ("accuracy", "nlcs", "wjaccard"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValidationError(f"{name}={value} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "nlcs": self.nlcs,
            "wjaccard": self.wjaccard,
            "per_category": self.per_category,
            "mean_infer_ms": self.mean_infer_ms,
        }
