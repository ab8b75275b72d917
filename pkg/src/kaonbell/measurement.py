"""Ideal measurement layer: joint probabilities and Clauser-Horne tests.

On each beam one of two mutually exclusive measurements is performed at the
common proper time T: a strangeness measurement (K0 vs K0bar, via strong
interactions in an absorber) or a lifetime measurement (K_S vs K_L, via
decay within a window versus survival past it).  Both are dichotomic, so the
Clauser-Horne construction applies directly.  The homogeneous combination
used here is

    B = -P(K0bar, K0bar) + P(K_S, K0bar) + P(K0bar, K_L) + P(K_S, K_L)
        - P(K_S, *) - P(*, K_L)

with -1 <= B <= 0 under local realism; the "second" variant swaps the roles
of left and right beams, which matters because the prepared state is
left-right asymmetric.  One-side probabilities such as P(K_S, *) are sums of
two joints, so every term is measured on doubly surviving pairs.

For the conditional state (K_S K_L - K_L K_S + R K_L K_L)/sqrt(2 + |R|^2)
both variants evaluate in closed form to

    1 + B = (2 -+ Re R + |R|^2 / 4) / (2 + |R|^2),

so the upper bound is violated exactly when |Re R| > (3/4)|R|^2, and the
largest violation, 1 + B = 1.1404, occurs for real R with |R| = 0.5616.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import closed_form_bell_state
from .errors import StateNotNormalized
from .quasispin import PairState, SingleKaonState

UNIT_NORM_ATOL = 1e-9

# Guard band for the strict violation flags: a combination that merely
# saturates the local-realism bound (or differs from it by rounding noise)
# is not counted as a violation.
VIOLATION_ATOL = 1e-12

_SQRT1_2 = 1.0 / math.sqrt(2.0)


class Setting(str, Enum):
    STRANGENESS = "strangeness"
    LIFETIME = "lifetime"


class Outcome(str, Enum):
    K0 = "K0"
    K0BAR = "K0bar"
    KS = "KS"
    KL = "KL"
    LOST = "Lost"          # detector layer only: absorber saw nothing


# Ideal outcomes per setting, in canonical order.
OUTCOMES_FOR: dict[Setting, tuple[Outcome, Outcome]] = {
    Setting.STRANGENESS: (Outcome.K0, Outcome.K0BAR),
    Setting.LIFETIME: (Outcome.KS, Outcome.KL),
}

# Single-kaon kets in the lifetime basis.
OUTCOME_VECTORS: dict[Outcome, SingleKaonState] = {
    Outcome.KS: SingleKaonState(1.0, 0.0),
    Outcome.KL: SingleKaonState(0.0, 1.0),
    Outcome.K0: SingleKaonState(_SQRT1_2, _SQRT1_2),
    Outcome.K0BAR: SingleKaonState(_SQRT1_2, -_SQRT1_2),
}


def setting_of(outcome: Outcome) -> Setting:
    """Measurement type an outcome belongs to (Lost is a strangeness record)."""
    if outcome in (Outcome.KS, Outcome.KL):
        return Setting.LIFETIME
    return Setting.STRANGENESS


@dataclass(frozen=True)
class CHReport:
    """One evaluated Clauser-Horne combination.

    The probability slots are positional roles in
    B = -p_bb + p_sb + p_bl + p_sl - p_s_star - p_star_l; which concrete
    joint each slot holds depends on the variant (left and right swap).
    The violation flags are strict, with a VIOLATION_ATOL guard band so a
    combination that only saturates the bound never counts as violated.
    Standard-error fields are zero for analytic evaluation and binomial for
    Monte Carlo estimates.
    """

    variant: str
    p_bb: float
    p_sb: float
    p_bl: float
    p_sl: float
    p_s_star: float
    p_star_l: float
    B: float
    ratio: float
    violated_upper: bool
    violated_lower: bool
    se_p_bb: float = 0.0
    se_p_sb: float = 0.0
    se_p_bl: float = 0.0
    se_p_sl: float = 0.0
    se_p_s_star: float = 0.0
    se_p_star_l: float = 0.0
    se_B: float = 0.0
    se_ratio: float = 0.0


def _check_variant(variant: str):
    if variant not in ("first", "second"):
        raise ValueError(f"variant must be 'first' or 'second', got {variant!r}")


def _require_unit_norm(s: PairState):
    n_sq = s.norm_sq
    if abs(n_sq - 1.0) > UNIT_NORM_ATOL:
        raise StateNotNormalized(
            f"state norm**2 = {n_sq!r} differs from 1 by more than "
            f"{UNIT_NORM_ATOL:g}"
        )


def joint_probability(s: PairState, left: Outcome, right: Outcome) -> float:
    """P(left outcome on the left beam, right outcome on the right beam).

    The state matrix is rotated to the strangeness basis on each side whose
    outcome is a strangeness one, then the squared amplitude of the selected
    element is taken.  Requires a unit-norm state.
    """
    if left is Outcome.LOST or right is Outcome.LOST:
        raise ValueError("Lost is a detector record, not an ideal outcome")
    _require_unit_norm(s)
    c = np.array(
        [[s.c_ss, s.c_sl], [s.c_ls, s.c_ll]], dtype=complex
    )
    u = np.array([[1.0, 1.0], [1.0, -1.0]]) * _SQRT1_2
    if setting_of(left) is Setting.STRANGENESS:
        c = u @ c
    if setting_of(right) is Setting.STRANGENESS:
        c = c @ u
    li = OUTCOMES_FOR[setting_of(left)].index(left)
    ri = OUTCOMES_FOR[setting_of(right)].index(right)
    return float(abs(c[li, ri]) ** 2)


def marginal_probability(
    s: PairState, side: str, setting: Setting, outcome: Outcome
) -> float:
    """One-side probability, summed over both other-side outcomes.

    By unitarity of the basis change the result does not depend on which
    measurement is performed on the other side (no signaling).
    """
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    if setting_of(outcome) is not setting or outcome is Outcome.LOST:
        raise ValueError(f"outcome {outcome} is not a {setting.value} outcome")
    other_setting = Setting.LIFETIME  # arbitrary; result is setting independent
    total = 0.0
    for other_outcome in OUTCOMES_FOR[other_setting]:
        pair = (
            (outcome, other_outcome) if side == "left" else (other_outcome, outcome)
        )
        total += joint_probability(s, *pair)
    return total


def ch_statistic(s: PairState, variant: str = "first") -> CHReport:
    """Evaluate one Clauser-Horne combination on a unit-norm pair state.

    For the first variant the slots are P(K0bar,K0bar), P(K_S,K0bar),
    P(K0bar,K_L), P(K_S,K_L), P(K_S,*) and P(*,K_L); the second variant
    swaps left and right everywhere.  The one-side terms are built as sums
    of two joints over the other side's strangeness outcomes.
    ``violated_upper`` flags B > 0 and ``violated_lower`` flags B < -1;
    ``ratio`` is the normalization-free form 1 + B.
    """
    _check_variant(variant)
    k0, k0b, ks, kl = Outcome.K0, Outcome.K0BAR, Outcome.KS, Outcome.KL
    if variant == "first":
        p_bb = joint_probability(s, k0b, k0b)
        p_sb = joint_probability(s, ks, k0b)
        p_bl = joint_probability(s, k0b, kl)
        p_sl = joint_probability(s, ks, kl)
        p_s_star = joint_probability(s, ks, k0) + joint_probability(s, ks, k0b)
        p_star_l = joint_probability(s, k0, kl) + joint_probability(s, k0b, kl)
    else:
        p_bb = joint_probability(s, k0b, k0b)
        p_sb = joint_probability(s, k0b, ks)
        p_bl = joint_probability(s, kl, k0b)
        p_sl = joint_probability(s, kl, ks)
        p_s_star = joint_probability(s, k0, ks) + joint_probability(s, k0b, ks)
        p_star_l = joint_probability(s, kl, k0) + joint_probability(s, kl, k0b)
    b = -p_bb + p_sb + p_bl + p_sl - p_s_star - p_star_l
    return CHReport(
        variant=variant,
        p_bb=p_bb,
        p_sb=p_sb,
        p_bl=p_bl,
        p_sl=p_sl,
        p_s_star=p_s_star,
        p_star_l=p_star_l,
        B=b,
        ratio=1.0 + b,
        violated_upper=b > VIOLATION_ATOL,
        violated_lower=b < -1.0 - VIOLATION_ATOL,
    )


def qm_ratio(R: complex, variant: str = "first") -> float:
    """Closed-form 1 + B for the conditional state with coefficient R.

    (2 - Re R + |R|^2/4) / (2 + |R|^2) for the first variant; the second
    flips the sign of the linear term.
    """
    _check_variant(variant)
    sign = -1.0 if variant == "first" else 1.0
    r2 = abs(R) ** 2
    return (2.0 + sign * complex(R).real + 0.25 * r2) / (2.0 + r2)


def violation_condition(R: complex) -> bool:
    """True when one of the two variants violates its upper CH bound.

    Strict inequality: |Re R| > (3/4)|R|^2.  Equality only saturates the
    local-realism bound and is not counted as a violation.
    """
    return abs(complex(R).real) > 0.75 * abs(R) ** 2


def _ratio_grid(z: np.ndarray, variant: str) -> np.ndarray:
    sign = -1.0 if variant == "first" else 1.0
    r2 = np.abs(z) ** 2
    return (2.0 + sign * z.real + 0.25 * r2) / (2.0 + r2)


def _golden_section_max(f, a: float, b: float, tol: float) -> float:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def optimize_R(
    domain: str = "real",
    variant: str = "first",
    bound: float = 2.0,
    tol: float = 1e-6,
) -> tuple[complex, float]:
    """Maximize the closed-form ratio over R; deterministic.

    ``domain`` is "real" (R on [-bound, bound] of the real axis; coarse grid
    bracket followed by golden-section refinement) or "disc" (|R| <= bound;
    shrinking grid refinement).  Returns (R_star, ratio_star).  On the real
    axis the maximizer is the positive root of x^2 + 3x - 2 = 0, about
    0.5616, with the sign opposite the variant's linear term; over the disc
    the optimum lies on the real axis.
    """
    _check_variant(variant)
    if bound <= 0.0:
        raise ValueError("bound must be positive")
    if domain == "real":
        xs = np.linspace(-bound, bound, 4097)
        vals = _ratio_grid(xs.astype(complex), variant)
        i = int(np.argmax(vals))
        lo = xs[max(i - 1, 0)]
        hi = xs[min(i + 1, xs.size - 1)]
        x_star = _golden_section_max(
            lambda x: qm_ratio(complex(x), variant), lo, hi, tol
        )
        return complex(x_star, 0.0), qm_ratio(complex(x_star), variant)
    if domain == "disc":
        center = 0j
        half_width = bound
        points = 81
        spacing = 2.0 * half_width / (points - 1)
        best = center
        while spacing > 0.25 * tol:
            re = np.linspace(center.real - half_width, center.real + half_width, points)
            im = np.linspace(center.imag - half_width, center.imag + half_width, points)
            z = re[None, :] + 1j * im[:, None]
            vals = _ratio_grid(z, variant)
            vals = np.where(np.abs(z) <= bound, vals, -np.inf)
            flat = int(np.argmax(vals))
            best = complex(z.flat[flat])
            center = best
            half_width = 2.0 * spacing
            spacing = 2.0 * half_width / (points - 1)
        return best, qm_ratio(best, variant)
    raise ValueError(f"domain must be 'real' or 'disc', got {domain!r}")


def ch_reports_from_R(R: complex) -> dict[str, CHReport]:
    """Both variants evaluated on the conditional state built from R."""
    state = closed_form_bell_state(R)
    return {
        "first": ch_statistic(state, "first"),
        "second": ch_statistic(state, "second"),
    }
