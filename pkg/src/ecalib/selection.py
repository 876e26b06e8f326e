"""Certified-set selection rules.

All rules are pure: given the current anytime-valid p-values (or e-values for
ebh) they return the certified set plus the per-rank thresholds that produced
it.  Step-up rules (bh, by, ebh) default to the standard closure (select every
rank up to the largest passing rank k*); ``literal=True`` instead selects
exactly the ranks whose own predicate passes, which can be non-contiguous.
Ties in p or e are ranked by ascending id so results are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import check_order
from .errors import OutOfRange


@dataclass(frozen=True)
class SelectionResult:
    selected: frozenset[int]
    rule: str
    thresholds: tuple[float, ...]


def _check_p(p: Sequence[float]) -> None:
    for v in p:
        # 0.0 is tolerated as extreme-evidence underflow of exp(-log max wealth).
        if not 0.0 <= v <= 1.0:
            raise OutOfRange(f"p-value {v!r} out of [0,1]")


def _check_e(e: Sequence[float]) -> None:
    for v in e:
        if not v >= 0.0:
            raise OutOfRange(f"e-value {v!r} not a nonnegative real")


def _step_up(
    ranked: list[int],
    values: Sequence[float],
    thresholds: tuple[float, ...],
    passes,
    literal: bool,
) -> frozenset[int]:
    if literal:
        return frozenset(
            ranked[k] for k in range(len(ranked)) if passes(values[ranked[k]], thresholds[k])
        )
    k_star = 0
    for k in range(len(ranked)):
        if passes(values[ranked[k]], thresholds[k]):
            k_star = k + 1
    return frozenset(ranked[:k_star])


def bonferroni(p: Sequence[float], delta: float) -> SelectionResult:
    """Select {i: p_i <= delta / N}."""
    _check_p(p)
    n = len(p)
    thr = delta / n
    selected = frozenset(i for i, v in enumerate(p) if v <= thr)
    return SelectionResult(selected, "bonferroni", (thr,) * n)


def fixed_sequence(p: Sequence[float], order: Sequence[int], delta: float) -> SelectionResult:
    """Select the longest prefix of ``order`` with every p <= delta."""
    _check_p(p)
    n = len(p)
    check_order(tuple(order), n)
    selected: list[int] = []
    for i in order:
        if p[i] <= delta:
            selected.append(i)
        else:
            break
    return SelectionResult(frozenset(selected), "fixed_sequence", (delta,) * n)


def bh(p: Sequence[float], delta: float, literal: bool = False) -> SelectionResult:
    """Step-up over ascending p with per-rank threshold k * delta / N."""
    _check_p(p)
    n = len(p)
    ranked = sorted(range(n), key=lambda i: (p[i], i))
    thresholds = tuple((k + 1) * delta / n for k in range(n))
    selected = _step_up(ranked, p, thresholds, lambda v, t: v <= t, literal)
    return SelectionResult(selected, "bh", thresholds)


def by(p: Sequence[float], delta: float, literal: bool = False) -> SelectionResult:
    """bh with every threshold shrunk by the harmonic sum H_N."""
    _check_p(p)
    n = len(p)
    h_n = sum(1.0 / k for k in range(1, n + 1))
    ranked = sorted(range(n), key=lambda i: (p[i], i))
    thresholds = tuple((k + 1) * delta / (n * h_n) for k in range(n))
    selected = _step_up(ranked, p, thresholds, lambda v, t: v <= t, literal)
    return SelectionResult(selected, "by", thresholds)


def ebh(e: Sequence[float], delta: float, literal: bool = False) -> SelectionResult:
    """Step-up over descending e with per-rank threshold N / (k * delta)."""
    _check_e(e)
    n = len(e)
    ranked = sorted(range(n), key=lambda i: (-e[i], i))
    thresholds = tuple(n / ((k + 1) * delta) for k in range(n))
    selected = _step_up(ranked, e, thresholds, lambda v, t: v >= t, literal)
    return SelectionResult(selected, "ebh", thresholds)
