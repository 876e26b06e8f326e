"""Test-by-betting e-processes.

Each candidate carries a wealth process starting at 1.  Testing a candidate
with observed risk r yields the payoff g (``alpha - r`` under RISK_BELOW,
``r - alpha`` under REWARD_ABOVE) and multiplies wealth by (1 + mu * g) for
the bet mu chosen before seeing r.  Under the null (candidate not reliable)
the payoff has non-positive conditional mean, so wealth is a nonnegative
supermartingale and Ville's inequality makes 1 / running_max(wealth) an
anytime-valid p-value.

Wealth is tracked in the log domain; a multiplicative factor <= 0 (possible
only through rounding at the bet boundary) sends the process to an absorbing
zero-wealth state instead of producing NaNs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import Direction
from .errors import BetOutOfBounds, EmptyMerge, OutOfRange

# Payoff g is the stake-normalized margin; wealth update is 1 + mu * g.
Payoff = float


@dataclass(frozen=True)
class BetBound:
    """Largest bet keeping wealth nonnegative for the worst-case payoff.

    Worst case is g = alpha - 1 (risk 1) under RISK_BELOW and g = -alpha
    (reward 0) under REWARD_ABOVE, giving mu_max = 1/(1-alpha) and 1/alpha
    respectively; admissible bets are [0, mu_max).
    """

    alpha: float
    direction: Direction
    mu_max: float


def bet_bound(alpha: float, direction: Direction) -> BetBound:
    if not 0.0 < alpha < 1.0:
        raise OutOfRange("alpha out of (0,1)")
    if direction is Direction.RISK_BELOW:
        return BetBound(alpha, direction, 1.0 / (1.0 - alpha))
    return BetBound(alpha, direction, 1.0 / alpha)


def payoff(risk: float, alpha: float, direction: Direction) -> Payoff:
    if not 0.0 <= risk <= 1.0:
        raise OutOfRange(f"risk {risk!r} out of [0,1]")
    if direction is Direction.RISK_BELOW:
        return alpha - risk
    return risk - alpha


@dataclass
class EProcessState:
    """Wealth, its running maximum, and the update count for one process.

    Stored as logs; ``bankrupt`` marks the absorbing zero-wealth state.
    Treat instances as immutable: update() returns a new state.
    """

    log_wealth: float = 0.0
    log_running_max: float = 0.0
    n_updates: int = 0
    bankrupt: bool = False

    @property
    def wealth(self) -> float:
        if self.bankrupt:
            return 0.0
        return math.exp(self.log_wealth)

    @property
    def running_max(self) -> float:
        return math.exp(self.log_running_max)


def update(state: EProcessState, g: Payoff, mu: float, bound: BetBound) -> EProcessState:
    """One betting round: wealth *= (1 + mu * g).

    Requires 0 <= mu < mu_max.  Bankruptcy (factor <= 0, reachable only via
    rounding at the boundary) is absorbing; updates still count.
    """
    if not 0.0 <= mu < bound.mu_max:
        raise BetOutOfBounds(f"mu {mu!r} outside [0, {bound.mu_max!r})")
    if state.bankrupt:
        return EProcessState(
            state.log_wealth, state.log_running_max, state.n_updates + 1, True
        )
    x = mu * g
    if x <= -1.0:
        return EProcessState(
            float("-inf"), state.log_running_max, state.n_updates + 1, True
        )
    lw = state.log_wealth + math.log1p(x)
    lrm = state.log_running_max
    if lw > lrm:
        lrm = lw
    return EProcessState(lw, lrm, state.n_updates + 1, False)


def anytime_p(state: EProcessState) -> float:
    """1 / max historical wealth, valid at every stopping time (Ville)."""
    return min(1.0, math.exp(-state.log_running_max))


def min_merge(states: Sequence[EProcessState]) -> float:
    """Current wealth of the composite (all requirements must hold) process.

    The minimum of per-requirement e-processes is an e-process for the union
    null.  Its running max must be tracked on the merged values over rounds,
    not derived from the components' running maxes.
    """
    if not states:
        raise EmptyMerge("min_merge needs at least one component")
    return min(s.wealth for s in states)


def quantile_transform(raw_risk: float, threshold: float) -> int:
    """Indicator 1[raw <= threshold], turning a quantile requirement on the
    raw score into a mean requirement on the transformed one."""
    if not 0.0 <= raw_risk <= 1.0:
        raise OutOfRange(f"raw risk {raw_risk!r} out of [0,1]")
    return 1 if raw_risk <= threshold else 0
