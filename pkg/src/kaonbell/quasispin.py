"""Amplitude algebra for one- and two-kaon states in the kaon quasi-spin space.

The internal space of a neutral kaon is two dimensional and carries two
physically useful bases: the strangeness eigenstates ``K0``/``K0bar``
(selected by strong interactions on nucleons) and the weak-decay eigenstates
``K_S``/``K_L`` (selected by decay-time behaviour).  CP violation is
neglected, so the two bases are related by a fixed orthogonal dictionary,
used consistently everywhere in this package:

    K_S = (K0 + K0bar) / sqrt(2),        K0    = (K_S + K_L) / sqrt(2),
    K_L = (K0 - K0bar) / sqrt(2),        K0bar = (K_S - K_L) / sqrt(2).

Mixed-basis probabilities such as P(K_S, K0bar) are only meaningful under a
single such convention; do not mix conventions across modules.

States are stored in the lifetime basis, where the free evolution is
diagonal; the strangeness basis is a rotated view.  Weak decay makes the
evolution non-unitary, so pair states carry a norm that shrinks with time and
are renormalized explicitly when conditioning on undecayed pairs.

Working units: times in units of the K_S mean lifetime, decay widths in
inverse K_S lifetimes (the short-lived width is exactly 1), hbar = c = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateState

# Norm**2 below this floor counts as a fully decayed state.
NORM_SQ_FLOOR = 1e-30

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PhysicalConstants:
    """Neutral-kaon constants in working units (times in K_S lifetimes).

    ``gamma_s`` is 1 by definition of the units and is rejected otherwise.
    ``epsilon_mag`` and ``ks_kl_overlap`` record the size of the neglected
    CP-violating effects for error budgets; they never enter any evolution.
    ``delta_m`` is an externally measured constant and has no in-code
    default; it is read from the run configuration.
    """

    delta_m: float
    gamma_s: float = 1.0
    gamma_l: float = 1.0 / 579.0
    epsilon_mag: float = 2.3e-3
    ks_kl_overlap: float = 3.2e-3

    def __post_init__(self):
        if self.gamma_s != 1.0:
            raise ValueError("gamma_s must be exactly 1 in working units")
        if self.gamma_l < 0.0 or self.delta_m < 0.0:
            raise ValueError("gamma_l and delta_m must be non-negative")


@dataclass(frozen=True)
class SingleKaonState:
    """One kaon: amplitudes over (K_S, K_L).  Norm need not be 1."""

    a_s: complex
    a_l: complex

    @property
    def norm_sq(self) -> float:
        return abs(self.a_s) ** 2 + abs(self.a_l) ** 2

    def to_strangeness(self) -> "SingleKaonState":
        """Amplitudes of the same ket over (K0, K0bar)."""
        return SingleKaonState(
            (self.a_s + self.a_l) / _SQRT2,
            (self.a_s - self.a_l) / _SQRT2,
        )


@dataclass(frozen=True)
class PairState:
    """Two kaons: amplitudes over (left x right) in the lifetime basis.

    Component order is (c_ss, c_sl, c_ls, c_ll) for
    (K_S K_S, K_S K_L, K_L K_S, K_L K_L).  The same container is reused for
    the strangeness-basis view returned by :func:`basis_to_strangeness`, with
    the slots then meaning (K0 K0, K0 K0bar, K0bar K0, K0bar K0bar).
    """

    c_ss: complex
    c_sl: complex
    c_ls: complex
    c_ll: complex

    @property
    def amplitudes(self) -> tuple[complex, complex, complex, complex]:
        return (self.c_ss, self.c_sl, self.c_ls, self.c_ll)

    @property
    def norm_sq(self) -> float:
        return sum(abs(c) ** 2 for c in self.amplitudes)

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    def scaled(self, factor: complex) -> "PairState":
        return PairState(*(factor * c for c in self.amplitudes))


def tensor(left: SingleKaonState, right: SingleKaonState) -> PairState:
    """Product state |left> x |right>."""
    return PairState(
        left.a_s * right.a_s,
        left.a_s * right.a_l,
        left.a_l * right.a_s,
        left.a_l * right.a_l,
    )


def basis_to_strangeness(s: PairState) -> PairState:
    """Rewrite a lifetime-basis pair state over (K0, K0bar) on both sides.

    The single-kaon rotation is (1/sqrt(2)) [[1, 1], [1, -1]], applied to each
    factor.  The rotation is orthogonal and involutive, so it preserves the
    norm and applying it twice restores the input exactly.
    """
    c_ss, c_sl, c_ls, c_ll = s.amplitudes
    # left rotation
    t_0s = (c_ss + c_ls) / _SQRT2
    t_0l = (c_sl + c_ll) / _SQRT2
    t_bs = (c_ss - c_ls) / _SQRT2
    t_bl = (c_sl - c_ll) / _SQRT2
    # right rotation
    return PairState(
        (t_0s + t_0l) / _SQRT2,
        (t_0s - t_0l) / _SQRT2,
        (t_bs + t_bl) / _SQRT2,
        (t_bs - t_bl) / _SQRT2,
    )


def basis_to_lifetime(s: PairState) -> PairState:
    """Inverse view change; the rotation is its own inverse."""
    return basis_to_strangeness(s)


def inner_product(a: PairState, b: PairState) -> complex:
    """<a|b>, conjugate linear in the first argument."""
    return sum(
        ca.conjugate() * cb for ca, cb in zip(a.amplitudes, b.amplitudes)
    )


def normalize(s: PairState) -> tuple[PairState, float]:
    """Return (unit-norm state, original norm).

    Raises:
        DegenerateState: if norm**2 <= NORM_SQ_FLOOR, i.e. the pair has
            decayed beyond recovery and no conditional state exists.
    """
    n_sq = s.norm_sq
    if n_sq <= NORM_SQ_FLOOR:
        raise DegenerateState(
            f"cannot normalize: norm**2 = {n_sq:.3e} is at or below the "
            f"floor {NORM_SQ_FLOOR:.0e}"
        )
    n = math.sqrt(n_sq)
    return s.scaled(1.0 / n), n
