"""Domain types for sequential candidate certification.

A calibration run tests N candidate configurations (ids 0..N-1) against a
risk requirement: under ``RISK_BELOW`` a candidate is reliable when its mean
risk is at most ``alpha``; under ``REWARD_ABOVE`` when its mean reward
exceeds ``alpha``.  Everything downstream (payoffs, bet bounds, ground-truth
reliable sets) derives from that convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import InvalidConfig, InvalidOrder, OutOfRange

# Candidates are dense integer ids in [0, n_candidates).
HyperparameterId = int


class Direction(enum.Enum):
    RISK_BELOW = "risk_below"
    REWARD_ABOVE = "reward_above"


class ErrorMetric(enum.Enum):
    FWER = "fwer"
    FDR = "fdr"


class SelectionRuleName(enum.Enum):
    BONFERRONI = "bonferroni"
    FIXED_SEQUENCE = "fixed_sequence"
    BH = "bh"
    BY = "by"
    EBH = "ebh"


class BettingStrategy(enum.Enum):
    UNIT = "unit"
    MAX = "max"
    AGRAPA = "agrapa"
    ONS = "ons"
    LBOW = "lbow"


class AcquisitionPolicy(enum.Enum):
    EPS_GREEDY = "eps_greedy"
    UNIFORM_ALL = "uniform_all"
    ROUND_ROBIN = "round_robin"
    FULL_BATCH = "full_batch"


# Rules compatible with each family-wise / false-discovery guarantee.
FWER_RULES = frozenset({SelectionRuleName.BONFERRONI, SelectionRuleName.FIXED_SEQUENCE})
FDR_RULES = frozenset({SelectionRuleName.BH, SelectionRuleName.BY, SelectionRuleName.EBH})


@dataclass(frozen=True)
class MetricSpec:
    """One additional risk requirement in a composite (all-must-hold) null."""

    alpha: float
    direction: Direction


@dataclass(frozen=True)
class BettingSpec:
    """Betting strategy plus the clipping constants shared by all strategies.

    The admissible bet range is [0, mu_max) with mu_max set by the payoff
    bound; data-driven strategies are clipped to
    cap = clip_fraction * mu_max * (1 - max_bet_epsilon), strictly inside
    the admissible range so wealth can never be wiped out by one round.
    """

    strategy: BettingStrategy
    clip_fraction: float = 0.75
    max_bet_epsilon: float = 1e-6


@dataclass(frozen=True)
class AcquisitionSpec:
    """Which candidates to test each round.

    epsilon only matters for EPS_GREEDY: probability of testing a uniformly
    random batch instead of the current-wealth leaders.
    """

    policy: AcquisitionPolicy
    epsilon: float = 0.0
    batch_size: int = 1


@dataclass(frozen=True)
class CalibrationConfig:
    n_candidates: int
    alpha: float
    delta: float
    direction: Direction
    error_metric: ErrorMetric
    selection_rule: SelectionRuleName
    acquisition: AcquisitionSpec
    betting: BettingSpec
    t_max: int
    d_stop: int
    batch_size: int
    seed: int
    literal_set: bool = False
    fixed_sequence_order: tuple[int, ...] | None = None
    extra_metrics: tuple[MetricSpec, ...] = ()


def validate_config(cfg: CalibrationConfig) -> CalibrationConfig:
    """Check every config invariant; raise InvalidConfig listing all failures."""
    bad: list[str] = []
    n = cfg.n_candidates
    if not isinstance(n, int) or n < 1:
        bad.append("n_candidates must be a positive integer")
    if not 0.0 < cfg.alpha < 1.0:
        bad.append("alpha out of (0,1)")
    if not 0.0 < cfg.delta < 1.0:
        bad.append("delta out of (0,1)")
    if cfg.error_metric is ErrorMetric.FWER and cfg.selection_rule not in FWER_RULES:
        bad.append("rule/metric mismatch: FWER requires bonferroni or fixed_sequence")
    if cfg.error_metric is ErrorMetric.FDR and cfg.selection_rule not in FDR_RULES:
        bad.append("rule/metric mismatch: FDR requires bh, by, or ebh")
    if cfg.t_max < 1:
        bad.append("t_max must be >= 1")
    if cfg.d_stop < 1:
        bad.append("d_stop must be >= 1")
    elif isinstance(n, int) and n >= 1 and cfg.d_stop > n:
        bad.append("d_stop exceeds n_candidates")
    if cfg.batch_size < 1:
        bad.append("batch_size must be >= 1")
    elif isinstance(n, int) and n >= 1 and cfg.batch_size > n:
        bad.append("batch_size exceeds n_candidates")
    if not 0 <= cfg.seed < 2**64:
        bad.append("seed out of [0, 2**64)")

    acq = cfg.acquisition
    if acq.batch_size != cfg.batch_size:
        bad.append("acquisition.batch_size disagrees with config batch_size")
    if acq.policy is AcquisitionPolicy.EPS_GREEDY and not 0.0 <= acq.epsilon <= 1.0:
        bad.append("acquisition epsilon out of [0,1]")

    bet = cfg.betting
    if not 0.0 < bet.clip_fraction <= 1.0:
        bad.append("betting clip_fraction out of (0,1]")
    if not 0.0 < bet.max_bet_epsilon < 1.0:
        bad.append("betting max_bet_epsilon out of (0,1)")
    elif bet.clip_fraction * (1.0 - bet.max_bet_epsilon) >= 1.0:
        bad.append("betting clip must stay strictly below mu_max")

    for k, m in enumerate(cfg.extra_metrics):
        if not 0.0 < m.alpha < 1.0:
            bad.append(f"extra_metrics[{k}].alpha out of (0,1)")

    if cfg.fixed_sequence_order is not None:
        try:
            check_order(cfg.fixed_sequence_order, n if isinstance(n, int) else 0)
        except InvalidOrder as exc:
            bad.append(str(exc))

    if bad:
        raise InvalidConfig(bad)
    return cfg


def check_order(order: tuple[int, ...], n: int) -> None:
    """Raise InvalidOrder unless order is a permutation of range(n)."""
    if len(order) != n or sorted(order) != list(range(n)):
        raise InvalidOrder(f"order must be a permutation of 0..{n - 1}")


@dataclass(frozen=True)
class RiskObservation:
    """One observed risk for one candidate in one round (round >= 1)."""

    round: int
    id: HyperparameterId
    risk: float

    def __post_init__(self):
        if self.round < 1:
            raise OutOfRange("observation round must be >= 1")
        if not 0.0 <= self.risk <= 1.0:
            raise OutOfRange(f"risk {self.risk!r} out of [0,1]")


@dataclass
class EvidenceLog:
    """Append-only record of which ids were tested each round and what they scored.

    ``prior`` is an optional block of pre-run observations (recorded as round 0)
    that may inform testing order but carries no statistical weight.
    """

    n_candidates: int
    prior: tuple[tuple[HyperparameterId, float], ...] = ()
    _rounds: list[tuple[int, tuple[HyperparameterId, ...], tuple[float, ...]]] = field(
        default_factory=list, init=False, repr=False
    )

    def __post_init__(self):
        for i, r in self.prior:
            if not 0 <= i < self.n_candidates:
                raise OutOfRange(f"prior id {i} out of range")
            if not 0.0 <= r <= 1.0:
                raise OutOfRange(f"prior risk {r!r} out of [0,1]")

    def append(
        self, round_index: int, tested: tuple[HyperparameterId, ...], risks: tuple[float, ...]
    ) -> None:
        expected = self._rounds[-1][0] + 1 if self._rounds else 1
        if round_index != expected:
            raise OutOfRange(f"round {round_index} breaks the 1,2,... sequence")
        if len(tested) != len(set(tested)) or len(tested) != len(risks):
            raise OutOfRange("tested ids must be distinct and aligned with risks")
        for i in tested:
            if not 0 <= i < self.n_candidates:
                raise OutOfRange(f"tested id {i} out of range")
        for r in risks:
            if not 0.0 <= r <= 1.0:
                raise OutOfRange(f"risk {r!r} out of [0,1]")
        self._rounds.append((round_index, tuple(tested), tuple(risks)))

    @property
    def rounds(self) -> tuple[tuple[int, tuple[HyperparameterId, ...], tuple[float, ...]], ...]:
        return tuple(self._rounds)

    def observations(self) -> tuple[RiskObservation, ...]:
        return tuple(
            RiskObservation(t, i, r)
            for t, tested, risks in self._rounds
            for i, r in zip(tested, risks)
        )

    def counts(self) -> list[int]:
        """Times each id has been tested (prior block excluded)."""
        c = [0] * self.n_candidates
        for _, tested, _ in self._rounds:
            for i in tested:
                c[i] += 1
        return c


def ordering_from_prior(log: EvidenceLog, alpha: float, direction: Direction) -> tuple[int, ...]:
    """Best-first candidate order from the prior block's mean payoffs.

    Ids absent from the prior sort last; ties break by ascending id.  Intended
    as a FixedSequence testing order; it never touches betting state.
    """
    sums = [0.0] * log.n_candidates
    counts = [0] * log.n_candidates
    for i, r in log.prior:
        g = alpha - r if direction is Direction.RISK_BELOW else r - alpha
        sums[i] += g
        counts[i] += 1
    mean_g = [sums[i] / counts[i] if counts[i] else float("-inf") for i in range(log.n_candidates)]
    return tuple(sorted(range(log.n_candidates), key=lambda i: (-mean_g[i], i)))


@dataclass(frozen=True)
class GroundTruth:
    """True mean risk (or reward) per candidate, for simulation scoring only."""

    true_means: tuple[float, ...]

    def __post_init__(self):
        for m in self.true_means:
            if not 0.0 <= m <= 1.0:
                raise OutOfRange(f"true mean {m!r} out of [0,1]")

    @property
    def n(self) -> int:
        return len(self.true_means)


def reliable_set(gt: GroundTruth, alpha: float, direction: Direction) -> frozenset[int]:
    """Ids whose true mean satisfies the requirement; boundary means count as
    reliable under RISK_BELOW (<= alpha) and unreliable under REWARD_ABOVE
    (> alpha strictly)."""
    if direction is Direction.RISK_BELOW:
        return frozenset(i for i, m in enumerate(gt.true_means) if m <= alpha)
    return frozenset(i for i, m in enumerate(gt.true_means) if m > alpha)
