"""Pseudo-experiment generator and Clauser-Horne estimators.

Each event draws one of the four (left, right) setting pairs, draws the
ideal outcome pair from the quantum joint distribution of the prepared
state, then pushes each side through its detector response (identity when no
detector is modelled).  Only recorded categories are accumulated; Lost
events stay in the table so raw inefficiencies remain inspectable.

Determinism contract: events are processed in fixed-size blocks and block k
draws from a counter-based Philox stream keyed by (seed, k), so the counts
depend only on the plan, never on scheduling or the number of workers.

Estimation: each probability entering the CH combination is estimated from
the counts of its own setting-pair bucket; one-side probabilities are sums
of two joint estimates from the mixed bucket.  In efficiency-corrected mode
recorded strangeness counts are divided by the matching absorber efficiency
before forming estimates (lifetime misidentification is deliberately not
unfolded).  Errors are per-probability binomial, propagated linearly to B;
buckets are disjoint samples, and the small negative covariances inside a
bucket are neglected, which slightly overstates se_B.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .detector import DetectorModel, lifetime_response
from .errors import InsufficientEvents, StateNotNormalized
from .measurement import (
    CHReport,
    OUTCOMES_FOR,
    Outcome,
    Setting,
    VIOLATION_ATOL,
    joint_probability,
)
from .quasispin import PairState, PhysicalConstants

SETTING_PAIRS: tuple[tuple[Setting, Setting], ...] = (
    (Setting.STRANGENESS, Setting.STRANGENESS),
    (Setting.STRANGENESS, Setting.LIFETIME),
    (Setting.LIFETIME, Setting.STRANGENESS),
    (Setting.LIFETIME, Setting.LIFETIME),
)

RECORDED_FOR: dict[Setting, tuple[Outcome, ...]] = {
    Setting.STRANGENESS: (Outcome.K0, Outcome.K0BAR, Outcome.LOST),
    Setting.LIFETIME: (Outcome.KS, Outcome.KL),
}

DEFAULT_BLOCK_SIZE = 1 << 16

# Probability roles of the CH combination, per variant:
# role -> (setting pair, recorded outcome pairs to sum).
_ROLE_TERMS = {
    "first": {
        "p_bb": ((Setting.STRANGENESS, Setting.STRANGENESS),
                 [(Outcome.K0BAR, Outcome.K0BAR)]),
        "p_sb": ((Setting.LIFETIME, Setting.STRANGENESS),
                 [(Outcome.KS, Outcome.K0BAR)]),
        "p_bl": ((Setting.STRANGENESS, Setting.LIFETIME),
                 [(Outcome.K0BAR, Outcome.KL)]),
        "p_sl": ((Setting.LIFETIME, Setting.LIFETIME),
                 [(Outcome.KS, Outcome.KL)]),
        "p_s_star": ((Setting.LIFETIME, Setting.STRANGENESS),
                     [(Outcome.KS, Outcome.K0), (Outcome.KS, Outcome.K0BAR)]),
        "p_star_l": ((Setting.STRANGENESS, Setting.LIFETIME),
                     [(Outcome.K0, Outcome.KL), (Outcome.K0BAR, Outcome.KL)]),
    },
    "second": {
        "p_bb": ((Setting.STRANGENESS, Setting.STRANGENESS),
                 [(Outcome.K0BAR, Outcome.K0BAR)]),
        "p_sb": ((Setting.STRANGENESS, Setting.LIFETIME),
                 [(Outcome.K0BAR, Outcome.KS)]),
        "p_bl": ((Setting.LIFETIME, Setting.STRANGENESS),
                 [(Outcome.KL, Outcome.K0BAR)]),
        "p_sl": ((Setting.LIFETIME, Setting.LIFETIME),
                 [(Outcome.KL, Outcome.KS)]),
        "p_s_star": ((Setting.STRANGENESS, Setting.LIFETIME),
                     [(Outcome.K0, Outcome.KS), (Outcome.K0BAR, Outcome.KS)]),
        "p_star_l": ((Setting.LIFETIME, Setting.STRANGENESS),
                     [(Outcome.KL, Outcome.K0), (Outcome.KL, Outcome.K0BAR)]),
    },
}


@dataclass(frozen=True)
class RunPlan:
    """Full description of one pseudo-experiment.

    ``setting_weights`` maps each of the four setting pairs to its selection
    probability (default: equal).  ``detector`` of None means ideal
    responses.  Identical plans give identical count tables.
    """

    state: PairState
    n_events: int
    constants: PhysicalConstants
    seed: int
    setting_weights: dict[tuple[Setting, Setting], float] | None = None
    detector: DetectorModel | None = None
    correction_mode: str = "raw"
    block_size: int = DEFAULT_BLOCK_SIZE

    def __post_init__(self):
        if self.n_events < 1:
            raise ValueError("n_events must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.correction_mode not in ("raw", "corrected"):
            raise ValueError("correction_mode must be 'raw' or 'corrected'")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if self.setting_weights is not None:
            w = [self.setting_weights.get(p, 0.0) for p in SETTING_PAIRS]
            if any(x < 0.0 for x in w) or abs(sum(w) - 1.0) > 1e-9:
                raise ValueError("setting weights must be >= 0 and sum to 1")

    def weights_array(self) -> np.ndarray:
        if self.setting_weights is None:
            return np.full(4, 0.25)
        return np.array(
            [self.setting_weights[p] for p in SETTING_PAIRS], dtype=float
        )


@dataclass
class CountTable:
    """Recorded-event counts keyed by setting pair and recorded outcomes.

    Keys are (left setting, right setting, left outcome, right outcome)
    value strings; every valid combination is present, zeros included.
    """

    n_events: int
    counts: dict[tuple[str, str, str, str], int] = field(default_factory=dict)

    def bucket_total(self, pair: tuple[Setting, Setting]) -> int:
        sl, sr = pair
        return sum(
            count
            for (ksl, ksr, _, _), count in self.counts.items()
            if ksl == sl.value and ksr == sr.value
        )

    def get(
        self, pair: tuple[Setting, Setting], left: Outcome, right: Outcome
    ) -> int:
        return self.counts[
            (pair[0].value, pair[1].value, left.value, right.value)
        ]

    def rows(self) -> list[tuple[str, str, str, str, int]]:
        """Rows in canonical order, stable across runs."""
        out = []
        for pair in SETTING_PAIRS:
            for left in RECORDED_FOR[pair[0]]:
                for right in RECORDED_FOR[pair[1]]:
                    key = (pair[0].value, pair[1].value, left.value, right.value)
                    out.append((*key, self.counts[key]))
        return out


def _response_rows(
    detector: DetectorModel | None, constants: PhysicalConstants
) -> np.ndarray:
    """Per-setting response rows, padded to 3 recorded categories.

    Shape (2 settings, 2 true, 3 recorded); setting index 0 is strangeness,
    1 is lifetime (whose third column is unused and zero).
    """
    rows = np.zeros((2, 2, 3))
    if detector is None:
        rows[0, :2, :2] = np.eye(2)
        rows[1, :2, :2] = np.eye(2)
    else:
        rows[0] = detector.strangeness_matrix().matrix
        rows[1, :2, :2] = lifetime_response(detector.delta_T, constants).matrix
    return rows


def _ideal_joint_table(state: PairState) -> np.ndarray:
    """Shape (4 setting pairs, 4 outcome pairs); each row sums to 1."""
    table = np.zeros((4, 4))
    for p, (sl, sr) in enumerate(SETTING_PAIRS):
        for i, left in enumerate(OUTCOMES_FOR[sl]):
            for j, right in enumerate(OUTCOMES_FOR[sr]):
                table[p, 2 * i + j] = joint_probability(state, left, right)
    sums = table.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-9):
        raise StateNotNormalized("joint probabilities do not sum to 1")
    return table / sums[:, None]


def _categorical(u: np.ndarray, cum_rows: np.ndarray) -> np.ndarray:
    """Index of the first cumulative threshold exceeding each u."""
    idx = (u[:, None] >= cum_rows).sum(axis=1)
    return np.minimum(idx, cum_rows.shape[1] - 1)


def sample_event(
    state: PairState,
    settings: tuple[Setting, Setting],
    rng: np.random.Generator,
    detector: DetectorModel | None = None,
    constants: PhysicalConstants | None = None,
) -> tuple[Outcome, Outcome]:
    """Draw one recorded outcome pair for a fixed setting pair.

    The ideal outcome pair is drawn from the quantum joint distribution,
    then each side is pushed through its response matrix.  A detector
    requires the constants that fix its lifetime response.
    """
    if detector is not None and constants is None:
        raise ValueError("constants are required when a detector is modelled")
    sl, sr = settings
    probs = np.array(
        [
            joint_probability(state, left, right)
            for left in OUTCOMES_FOR[sl]
            for right in OUTCOMES_FOR[sr]
        ]
    )
    cum = np.cumsum(probs / probs.sum())
    o = int(np.searchsorted(cum, rng.random(), side="right"))
    o = min(o, 3)
    true_left, true_right = OUTCOMES_FOR[sl][o // 2], OUTCOMES_FOR[sr][o % 2]
    rows = _response_rows(detector, constants or PhysicalConstants(delta_m=0.0))
    out = []
    for setting, true in ((sl, true_left), (sr, true_right)):
        s_idx = 0 if setting is Setting.STRANGENESS else 1
        t_idx = OUTCOMES_FOR[setting].index(true)
        cum_row = np.cumsum(rows[s_idx, t_idx])
        r_idx = int(np.searchsorted(cum_row, rng.random(), side="right"))
        r_idx = min(r_idx, len(RECORDED_FOR[setting]) - 1)
        out.append(RECORDED_FOR[setting][r_idx])
    return out[0], out[1]


def _block_counts(
    block_index: int,
    block_events: int,
    seed: int,
    weights_cum: np.ndarray,
    joint_cum: np.ndarray,
    response_cum: np.ndarray,
) -> np.ndarray:
    """Counts (4, 3, 3) for one block; pure function of its arguments."""
    key = (int(block_index) << 64) | int(seed)
    rng = np.random.Generator(np.random.Philox(key=key))
    u_setting = rng.random(block_events)
    u_outcome = rng.random(block_events)
    u_left = rng.random(block_events)
    u_right = rng.random(block_events)

    pair_idx = np.minimum(
        (u_setting[:, None] >= weights_cum).sum(axis=1), 3
    )
    outcome_idx = _categorical(u_outcome, joint_cum[pair_idx])
    left_setting = pair_idx // 2   # 0 strangeness, 1 lifetime
    right_setting = pair_idx % 2
    true_left = outcome_idx // 2
    true_right = outcome_idx % 2
    rec_left = _categorical(u_left, response_cum[left_setting, true_left])
    rec_right = _categorical(u_right, response_cum[right_setting, true_right])

    flat = pair_idx * 9 + rec_left * 3 + rec_right
    return np.bincount(flat, minlength=36).reshape(4, 3, 3)


def run_experiment(
    plan: RunPlan, workers: int = 1
) -> tuple[CountTable, dict[str, CHReport]]:
    """Generate a pseudo-experiment and estimate both CH variants.

    Returns the recorded count table together with one report per variant,
    carrying binomial standard errors.  Raises InsufficientEvents when any
    setting-pair bucket ends up empty.
    """
    joint = _ideal_joint_table(plan.state)
    joint_cum = np.cumsum(joint, axis=1)
    rows = _response_rows(plan.detector, plan.constants)
    response_cum = np.cumsum(rows, axis=2)
    weights_cum = np.cumsum(plan.weights_array())

    n_blocks = (plan.n_events + plan.block_size - 1) // plan.block_size

    def events_in(k: int) -> int:
        if k < n_blocks - 1:
            return plan.block_size
        return plan.n_events - plan.block_size * (n_blocks - 1)

    def one(k: int) -> np.ndarray:
        return _block_counts(
            k, events_in(k), plan.seed, weights_cum, joint_cum, response_cum
        )

    totals = np.zeros((4, 3, 3), dtype=np.int64)
    if workers <= 1:
        for k in range(n_blocks):
            totals += one(k)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for block in pool.map(one, range(n_blocks)):
                totals += block

    counts: dict[tuple[str, str, str, str], int] = {}
    for p, pair in enumerate(SETTING_PAIRS):
        for i, left in enumerate(RECORDED_FOR[pair[0]]):
            for j, right in enumerate(RECORDED_FOR[pair[1]]):
                key = (pair[0].value, pair[1].value, left.value, right.value)
                counts[key] = int(totals[p, i, j])
    table = CountTable(n_events=plan.n_events, counts=counts)
    reports = estimate_reports(table, plan.detector, plan.correction_mode)
    return table, reports


def _correction_weight(
    pair: tuple[Setting, Setting],
    recorded: tuple[Outcome, Outcome],
    detector: DetectorModel | None,
    mode: str,
) -> float:
    """1/efficiency per recorded strangeness outcome in corrected mode."""
    if mode != "corrected" or detector is None:
        return 1.0
    weight = 1.0
    for setting, outcome in zip(pair, recorded):
        if setting is Setting.STRANGENESS:
            if outcome is Outcome.K0:
                weight /= detector.eta_k0
            elif outcome is Outcome.K0BAR:
                weight /= detector.eta_k0bar
    return weight


def _reports_from_probabilities(
    prob, bucket_sizes, detector: DetectorModel | None, mode: str
) -> dict[str, CHReport]:
    """Assemble both variants from recorded-category probabilities.

    ``prob(pair, recorded_pair)`` returns the recorded probability within
    its bucket; ``bucket_sizes`` maps pair -> event count, or None for an
    exact (zero-error) evaluation.
    """
    out = {}
    for variant, roles in _ROLE_TERMS.items():
        values: dict[str, float] = {}
        variances: dict[str, float] = {}
        for role, (pair, terms) in roles.items():
            est = 0.0
            var = 0.0
            for recorded in terms:
                p_hat = prob(pair, recorded)
                w = _correction_weight(pair, recorded, detector, mode)
                est += w * p_hat
                if bucket_sizes is not None:
                    n = bucket_sizes[pair]
                    var += w * w * p_hat * (1.0 - p_hat) / n
            values[role] = est
            variances[role] = var
        b = (
            -values["p_bb"] + values["p_sb"] + values["p_bl"]
            + values["p_sl"] - values["p_s_star"] - values["p_star_l"]
        )
        se = {role: math.sqrt(v) for role, v in variances.items()}
        se_b = math.sqrt(sum(variances.values()))
        out[variant] = CHReport(
            variant=variant,
            p_bb=values["p_bb"],
            p_sb=values["p_sb"],
            p_bl=values["p_bl"],
            p_sl=values["p_sl"],
            p_s_star=values["p_s_star"],
            p_star_l=values["p_star_l"],
            B=b,
            ratio=1.0 + b,
            violated_upper=b > VIOLATION_ATOL,
            violated_lower=b < -1.0 - VIOLATION_ATOL,
            se_p_bb=se["p_bb"],
            se_p_sb=se["p_sb"],
            se_p_bl=se["p_bl"],
            se_p_sl=se["p_sl"],
            se_p_s_star=se["p_s_star"],
            se_p_star_l=se["p_star_l"],
            se_B=se_b,
            se_ratio=se_b,
        )
    return out


def estimate_reports(
    table: CountTable,
    detector: DetectorModel | None,
    correction_mode: str,
) -> dict[str, CHReport]:
    """Both CH variants estimated from a recorded count table."""
    bucket_sizes = {pair: table.bucket_total(pair) for pair in SETTING_PAIRS}
    empty = [p for p, n in bucket_sizes.items() if n == 0]
    if empty:
        names = ", ".join(f"({p[0].value}, {p[1].value})" for p in empty)
        raise InsufficientEvents(f"no events in setting pair(s): {names}")

    def prob(pair, recorded):
        return table.get(pair, *recorded) / bucket_sizes[pair]

    return _reports_from_probabilities(
        prob, bucket_sizes, detector, correction_mode
    )


def recorded_distributions(
    state: PairState,
    detector: DetectorModel | None,
    constants: PhysicalConstants,
) -> np.ndarray:
    """Exact recorded-pair probabilities, shape (4 pairs, 3, 3).

    The ideal joint distribution pushed through both response matrices;
    this is what the sampler's recorded counts converge to.
    """
    joint = _ideal_joint_table(state)
    rows = _response_rows(detector, constants)
    dist = np.zeros((4, 3, 3))
    for p in range(4):
        left_setting = p // 2
        right_setting = p % 2
        for o in range(4):
            tl, tr = o // 2, o % 2
            dist[p] += joint[p, o] * np.outer(
                rows[left_setting, tl], rows[right_setting, tr]
            )
    return dist


def expected_reports(
    state: PairState,
    detector: DetectorModel | None,
    correction_mode: str,
    constants: PhysicalConstants,
) -> dict[str, CHReport]:
    """Infinite-statistics limit of :func:`run_experiment`'s estimates.

    Analytic prediction of what the estimator converges to for a given
    detector and correction mode; standard errors are zero.  With no
    detector this reproduces the ideal CH reports.
    """
    dist = recorded_distributions(state, detector, constants)

    def prob(pair, recorded):
        p = SETTING_PAIRS.index(pair)
        i = RECORDED_FOR[pair[0]].index(recorded[0])
        j = RECORDED_FOR[pair[1]].index(recorded[1])
        return float(dist[p, i, j])

    return _reports_from_probabilities(
        prob, None, detector, correction_mode
    )
