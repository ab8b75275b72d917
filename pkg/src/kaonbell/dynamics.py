"""Preparation chain for the entangled two-kaon Bell state.

A phi decay (or p pbar annihilation at rest) produces the antisymmetric pair

    (K_S K_L - K_L K_S) / sqrt(2),

anticorrelated in every quasi-spin basis.  A thin slab of matter placed on
one beam right after the production point mixes the components at first
order in the complex regeneration strength r (K_S -> K_S + r K_L and
K_L -> K_L + r K_S), after which both kaons fly freely to a common proper
time T.  Free flight multiplies each K_S factor by exp(-t/2) and each K_L
factor by exp(-i*dm*t - gamma_l*t/2) in working units, so the doubly
long-lived component is exponentially enhanced relative to the mixed ones
while the doubly short-lived one dies away.  Conditioning on both kaons
being undecayed at T gives

    (K_S K_L - K_L K_S + R K_L K_L) / sqrt(2 + |R|^2),

with the effective coefficient

    R = -r * exp[(-i*dm + (gamma_s - gamma_l)/2) * T],

whose magnitude |r|*exp((gamma_s - gamma_l)*T/2) can be of order one even
though |r| is tiny.  This conditional state is the input to the
Clauser-Horne analysis in :mod:`kaonbell.measurement`.

Phase convention: the overall phase from the mean kaon mass is dropped
(only the mass difference dm is physical), and prepared states are returned
with the K_S K_L amplitude real and positive.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

from .errors import InvalidSpec
from .quasispin import PairState, PhysicalConstants, normalize

_SQRT2 = math.sqrt(2.0)

# First-order regeneration map: warn when |r| is large enough that the
# neglected O(r^2) terms approach the percent level.
R_LINEARITY_WARN = 0.1


class RegimeWarning(UserWarning):
    """Inputs are outside the regime the first-order pipeline was built for."""


@dataclass(frozen=True)
class MaterialParams:
    """Regenerator slab described by material and kinematic quantities.

    All quantities must be given in one consistent system of natural units
    (hbar = c = 1), e.g. lengths in cm, ``nu`` in 1/cm^3, ``delta_f`` in cm,
    ``p_k`` and ``m_k`` in 1/cm.  Exactly one of ``d`` (slab length) or
    ``delta_t`` (proper crossing time, same length unit since c = 1) must be
    set; they are related by d = (p_k / m_k) * delta_t.
    """

    nu: float
    delta_f: complex
    p_k: float
    m_k: float
    d: float | None = None
    delta_t: float | None = None

    def __post_init__(self):
        if (self.d is None) == (self.delta_t is None):
            raise InvalidSpec("exactly one of d or delta_t must be set")
        if self.nu < 0.0:
            raise InvalidSpec("scattering-center density nu must be >= 0")
        if self.p_k <= 0.0 or self.m_k <= 0.0:
            raise InvalidSpec("p_k and m_k must be positive")
        length = self.d if self.d is not None else self.delta_t
        if length < 0.0:
            raise InvalidSpec("slab length / crossing time must be >= 0")


@dataclass(frozen=True)
class RegenSpec:
    """Either a direct complex strength or a material description."""

    r_direct: complex | None = None
    material: MaterialParams | None = None

    def __post_init__(self):
        if (self.r_direct is None) == (self.material is None):
            raise InvalidSpec(
                "exactly one of r_direct or material must be set"
            )


@dataclass(frozen=True)
class PreparationConfig:
    """Inputs of the full preparation pipeline."""

    regen: RegenSpec
    T: float
    constants: PhysicalConstants
    truncate_ss: bool = True

    def __post_init__(self):
        if self.T < 0.0:
            raise ValueError("free-flight time T must be >= 0")


def phi_initial() -> PairState:
    """Antisymmetric pair state at production, (K_S K_L - K_L K_S)/sqrt(2)."""
    return PairState(0.0, 1.0 / _SQRT2, -1.0 / _SQRT2, 0.0)


def regeneration_parameter(spec: RegenSpec) -> complex:
    """Complex regeneration strength r of a thin slab.

    For the material form,

        r = i * pi * nu * (f - fbar) * d / p_k
          = i * pi * nu * (f - fbar) * delta_t / m_k,

    where f - fbar is the difference of the forward scattering amplitudes of
    the two strangeness states on the slab nuclei.  Linear in the slab
    thickness, as appropriate for a thin slab.
    """
    if spec.r_direct is not None:
        return complex(spec.r_direct)
    m = spec.material
    if m.d is not None:
        return 1j * math.pi * m.nu / m.p_k * m.delta_f * m.d
    return 1j * math.pi * m.nu / m.m_k * m.delta_f * m.delta_t


def apply_thin_regenerator(
    s: PairState, r: complex, side: str = "right"
) -> PairState:
    """First-order regeneration map on one beam.

    On the chosen side, K_S -> K_S + r K_L and K_L -> K_L + r K_S; the other
    beam is untouched.  Valid for |r| << 1; warns above R_LINEARITY_WARN.
    """
    if abs(r) > R_LINEARITY_WARN:
        warnings.warn(
            f"|r| = {abs(r):.3g} is large for a first-order regeneration map",
            RegimeWarning,
            stacklevel=2,
        )
    c_ss, c_sl, c_ls, c_ll = s.amplitudes
    if side == "right":
        return PairState(
            c_ss + r * c_sl, c_sl + r * c_ss, c_ls + r * c_ll, c_ll + r * c_ls
        )
    if side == "left":
        return PairState(
            c_ss + r * c_ls, c_sl + r * c_ll, c_ls + r * c_ss, c_ll + r * c_sl
        )
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def propagate_free(
    s: PairState, t_left: float, t_right: float, constants: PhysicalConstants
) -> PairState:
    """Free non-unitary evolution of each beam for its own proper time.

    Each K_S factor picks up exp(-gamma_s*t/2) and each K_L factor
    exp(-i*delta_m*t - gamma_l*t/2); the overall phase from the mean mass is
    dropped.  The norm never increases, and for the antisymmetric state it is
    exactly exp(-(gamma_s + gamma_l)*t) after a common time t.
    """
    if t_left < 0.0 or t_right < 0.0:
        raise ValueError("propagation times must be >= 0")
    f_s_left = math.exp(-0.5 * constants.gamma_s * t_left)
    f_s_right = math.exp(-0.5 * constants.gamma_s * t_right)
    f_l_left = cmath.exp(
        (-1j * constants.delta_m - 0.5 * constants.gamma_l) * t_left
    )
    f_l_right = cmath.exp(
        (-1j * constants.delta_m - 0.5 * constants.gamma_l) * t_right
    )
    return PairState(
        s.c_ss * f_s_left * f_s_right,
        s.c_sl * f_s_left * f_l_right,
        s.c_ls * f_l_left * f_s_right,
        s.c_ll * f_l_left * f_l_right,
    )


def effective_R(r: complex, T: float, constants: PhysicalConstants) -> complex:
    """Closed form of the K_L K_L coefficient after regeneration plus flight.

    R = -r * exp[(-i*delta_m + (gamma_s - gamma_l)/2) * T], so
    |R| = |r| * exp((gamma_s - gamma_l)*T/2) and
    arg R = arg(-r) - delta_m*T.
    """
    if T < 0.0:
        raise ValueError("T must be >= 0")
    return -r * cmath.exp(
        (-1j * constants.delta_m + 0.5 * (constants.gamma_s - constants.gamma_l))
        * T
    )


def closed_form_bell_state(R: complex) -> PairState:
    """Conditional state (0, 1, -1, R)/sqrt(2 + |R|^2) in the lifetime basis."""
    n = math.sqrt(2.0 + abs(R) ** 2)
    return PairState(0.0, 1.0 / n, -1.0 / n, complex(R) / n)


def prepare_bell_state(
    cfg: PreparationConfig,
) -> tuple[PairState, complex, float]:
    """Run the exact preparation pipeline and condition on surviving pairs.

    Returns (state, R, survive_fraction):

    * ``state``: the normalized conditional pair state, with the global phase
      fixed so the K_S K_L amplitude is real positive.  With ``truncate_ss``
      the doubly short-lived amplitude (doubly suppressed, order |r|^2
      relative) is zeroed before normalizing.
    * ``R``: the K_L K_L / K_S K_L amplitude ratio of the exact pipeline; it
      equals :func:`effective_R` up to floating-point rounding.
    * ``survive_fraction``: norm**2 after propagation, i.e. the probability
      that both kaons are still undecayed at T.

    The slab crossing time is treated as zero: the regeneration map carries
    the entire effect of the slab, which sits right at the production point.

    Warns with :class:`RegimeWarning` outside the design regime
    tau_S << T << tau_L (T below 5 or above 0.1/gamma_l), where
    identification of the surviving components becomes unreliable; the
    formulas themselves remain valid for any T >= 0.
    """
    c = cfg.constants
    if cfg.T < 5.0 or cfg.T > 0.1 / c.gamma_l:
        warnings.warn(
            f"T = {cfg.T:g} is outside the design regime "
            f"5 <= T <= {0.1 / c.gamma_l:g}",
            RegimeWarning,
            stacklevel=2,
        )
    r = regeneration_parameter(cfg.regen)
    state = apply_thin_regenerator(phi_initial(), r, side="right")
    state = propagate_free(state, cfg.T, cfg.T, c)
    survive_fraction = state.norm_sq

    r_implied = 0j
    if abs(state.c_sl) > 0.0:
        r_implied = state.c_ll / state.c_sl
    if cfg.truncate_ss:
        state = PairState(0.0, state.c_sl, state.c_ls, state.c_ll)
    state, _ = normalize(state)
    if abs(state.c_sl) > 0.0:
        # fix the unphysical global phase
        state = state.scaled(abs(state.c_sl) / state.c_sl)
    return state, r_implied, survive_fraction
