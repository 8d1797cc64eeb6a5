"""Forward ensemble selection optimized by AUC, and max-probability voting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SelectionError, VoteError
from .metrics import auc


@dataclass(frozen=True)
class SelectionResult:
    """Multiset of selected member indices plus the greedy AUC path."""

    multiplicities: tuple[int, ...]
    path_auc: tuple[float, ...]

    def member_indices(self) -> list[int]:
        out = []
        for i, m in enumerate(self.multiplicities):
            out.extend([i] * m)
        return out


def ensemble_select(
    selection_scores: Sequence[Sequence[float]],
    labels: Sequence[int],
    max_steps: int = 50,
) -> SelectionResult:
    """Greedy forward selection with replacement, maximizing validation AUC.

    Starts from the single best-AUC member, then repeatedly adds the member
    whose inclusion in the score average improves AUC the most; stops when
    no addition improves or after ``max_steps`` total selections. The
    accepted path AUC is non-decreasing by construction.
    """
    scores = np.asarray(selection_scores, dtype=float)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise SelectionError("empty model library")
    labels = np.asarray(labels)
    if max_steps < 1:
        raise SelectionError("max_steps must be >= 1")
    n_models = scores.shape[0]
    single = [auc(scores[i], labels) for i in range(n_models)]
    best_first = int(np.argmax(single))
    counts = np.zeros(n_models, dtype=np.int64)
    counts[best_first] = 1
    total = scores[best_first].copy()
    size = 1
    current = single[best_first]
    path = [current]
    while size < max_steps:
        best_gain_auc = -np.inf
        best_member = -1
        for i in range(n_models):
            candidate = auc((total + scores[i]) / (size + 1), labels)
            if candidate > best_gain_auc:
                best_gain_auc = candidate
                best_member = i
        if best_gain_auc <= current:
            break
        counts[best_member] += 1
        total += scores[best_member]
        size += 1
        current = best_gain_auc
        path.append(current)
    return SelectionResult(
        multiplicities=tuple(int(c) for c in counts), path_auc=tuple(path)
    )


def ensemble_average(probabilities: Sequence[float], multiplicities: Sequence[int]) -> float:
    """Multiplicity-weighted mean of member probabilities."""
    probs = np.asarray(probabilities, dtype=float)
    mult = np.asarray(multiplicities, dtype=float)
    weight = mult.sum()
    if weight <= 0:
        raise SelectionError("ensemble has no members")
    return float((probs * mult).sum() / weight)


@dataclass(frozen=True)
class VoteOutcome:
    predicted_class: int
    confidence: float
    winner_p_above: float


def vote_max_prob(member_probabilities: Sequence[float]) -> VoteOutcome:
    """Committee decision by maximum member confidence.

    Each member reports (class at 0.5, confidence = max(p, 1-p)); the most
    confident member's class wins. A confidence tie goes to the class with
    more supporters among the tied members, and a residual tie goes to
    above-average.
    """
    probs = [float(p) for p in member_probabilities]
    if not probs:
        raise VoteError("committee has no members")
    confidences = [max(p, 1.0 - p) for p in probs]
    top = max(confidences)
    tied = [i for i, c in enumerate(confidences) if c == top]
    above = [i for i in tied if probs[i] >= 0.5]
    below = [i for i in tied if probs[i] < 0.5]
    if len(above) > len(below):
        winners = above
    elif len(below) > len(above):
        winners = below
    else:
        winners = above  # residual tie: above-average
    winner_class = 1 if winners is above else 0
    return VoteOutcome(
        predicted_class=winner_class,
        confidence=top,
        winner_p_above=probs[winners[0]],
    )
