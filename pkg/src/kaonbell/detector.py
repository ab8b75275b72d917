"""Experimental-realism layer: identification statistics and feasibility.

Lifetime measurements watch for a decay between T and T + delta_T and call
the kaon K_S if it decayed, K_L if it reached the absorber behind the decay
region.  Pure exponential decay then fixes the misidentification rates: an
undecayed K_S is recorded K_L with probability exp(-gamma_s*delta_T) and a
decayed K_L is recorded K_S with probability 1 - exp(-gamma_l*delta_T).
For delta_T = 5.5 both errors sit at the few-per-thousand level.

Strangeness measurements are exact in kind but inefficient: an absorber
detects a K0bar with probability eta_k0bar and a K0 with probability eta_k0
(the antikaon cross sections on nucleons are larger, hence
eta_k0 <= eta_k0bar); undetected kaons are recorded Lost.  There is no
K0 <-> K0bar cross talk.

The module also answers two feasibility questions: how large T must be for
the left measurement at T to be spacelike separated from the entire right
decay window [T, T + delta_T], and what fraction of produced pairs has both
kaons alive at T.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .measurement import Outcome
from .quasispin import PhysicalConstants

ROW_SUM_ATOL = 1e-12


@dataclass(eq=False)
class ResponseMatrix:
    """Row-stochastic map from true category to recorded category."""

    true_outcomes: tuple[Outcome, ...]
    recorded_outcomes: tuple[Outcome, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.true_outcomes), len(self.recorded_outcomes)):
            raise ValueError("matrix shape does not match outcome labels")
        if np.any(m < -ROW_SUM_ATOL) or np.any(m > 1.0 + ROW_SUM_ATOL):
            raise ValueError("entries must be probabilities in [0, 1]")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > ROW_SUM_ATOL):
            raise ValueError("each row must sum to 1")
        self.matrix = m

    def probability(self, true: Outcome, recorded: Outcome) -> float:
        return float(
            self.matrix[
                self.true_outcomes.index(true),
                self.recorded_outcomes.index(recorded),
            ]
        )

    def row(self, true: Outcome) -> np.ndarray:
        return self.matrix[self.true_outcomes.index(true)]


@dataclass(frozen=True)
class DetectorModel:
    """Window length, absorber efficiencies and lab velocity of the pair."""

    delta_T: float
    eta_k0bar: float
    eta_k0: float
    beta: float

    def __post_init__(self):
        if self.delta_T <= 0.0:
            raise ValueError("delta_T must be positive")
        if not 0.0 <= self.eta_k0 <= self.eta_k0bar <= 1.0:
            raise ValueError("need 0 <= eta_k0 <= eta_k0bar <= 1")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")

    def lifetime_matrix(self, constants: PhysicalConstants) -> ResponseMatrix:
        return lifetime_response(self.delta_T, constants)

    def strangeness_matrix(self) -> ResponseMatrix:
        return strangeness_response(self.eta_k0bar, self.eta_k0)


def lifetime_response(
    delta_T: float, constants: PhysicalConstants
) -> ResponseMatrix:
    """Recorded K_S/K_L probabilities for each true component.

    P(recorded K_S | true K_S) = 1 - exp(-gamma_s*delta_T) (decayed inside
    the window) and P(recorded K_L | true K_L) = exp(-gamma_l*delta_T)
    (survived to the absorber); the complements are the misidentifications.
    """
    if delta_T < 0.0:
        raise ValueError("delta_T must be >= 0")
    ks_decays = 1.0 - math.exp(-constants.gamma_s * delta_T)
    kl_survives = math.exp(-constants.gamma_l * delta_T)
    return ResponseMatrix(
        true_outcomes=(Outcome.KS, Outcome.KL),
        recorded_outcomes=(Outcome.KS, Outcome.KL),
        matrix=np.array(
            [
                [ks_decays, 1.0 - ks_decays],
                [1.0 - kl_survives, kl_survives],
            ]
        ),
    )


def strangeness_response(eta_k0bar: float, eta_k0: float) -> ResponseMatrix:
    """Absorber response: detect with the per-species efficiency, else Lost."""
    if not 0.0 <= eta_k0 <= eta_k0bar <= 1.0:
        raise ValueError("need 0 <= eta_k0 <= eta_k0bar <= 1")
    return ResponseMatrix(
        true_outcomes=(Outcome.K0, Outcome.K0BAR),
        recorded_outcomes=(Outcome.K0, Outcome.K0BAR, Outcome.LOST),
        matrix=np.array(
            [
                [eta_k0, 0.0, 1.0 - eta_k0],
                [0.0, eta_k0bar, 1.0 - eta_k0bar],
            ]
        ),
    )


def check_spacelike(
    T: float, delta_T: float, beta: float
) -> tuple[bool, float]:
    """Spacelike separation of one measurement from the other decay window.

    For back-to-back kaons at lab velocity beta, the measurement of one kaon
    at proper time T cannot influence its partner's decay region
    [T, T + delta_T] when T > T_min with

        T_min = delta_T * (1 - beta) / (2 * beta).

    Returns (T > T_min, T_min).  At beta = 0.22 the factor
    T_min / delta_T is 1.773.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must be in (0, 1)")
    if delta_T < 0.0:
        raise ValueError("delta_T must be >= 0")
    t_min = delta_T * (1.0 - beta) / (2.0 * beta)
    return T > t_min, t_min


def sample_economics(T: float, constants: PhysicalConstants) -> float:
    """Fraction of produced pairs with both kaons alive at proper time T.

    exp(-(gamma_s + gamma_l)*T); the order-|r|^2 regenerator correction is
    ignored.  At T = 11 this is 1.64e-5, about 1 usable pair in 61000.
    """
    if T < 0.0:
        raise ValueError("T must be >= 0")
    return math.exp(-(constants.gamma_s + constants.gamma_l) * T)
