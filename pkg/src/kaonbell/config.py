"""Run configuration: JSON schema, defaults, and core-object builders.

Configurations are JSON documents validated by pydantic models; unknown keys
are rejected.  Keys carry their units (``T_tau_s`` is a proper time in K_S
lifetimes, ``d_cm`` a length in cm).  Complex numbers are two-element
``[re, im]`` arrays; a bare number is accepted as purely real.  Keys whose
name starts with an underscore are annotations and are stripped before
validation, so the shipped defaults can document the provenance of each
value in place.

A user file is deep-merged over the packaged defaults
(``kaonbell/data/defaults.json``), so partial configurations are valid and
external constants such as ``delta_m_per_tau_s`` always come from a config
file rather than from code.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Annotated, Literal

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    PlainSerializer,
    ValidationError,
    WithJsonSchema,
    model_validator,
)

from .detector import DetectorModel
from .dynamics import (
    MaterialParams,
    PreparationConfig,
    RegenSpec,
    closed_form_bell_state,
    prepare_bell_state,
)
from .errors import ConfigError
from .montecarlo import SETTING_PAIRS, RunPlan
from .quasispin import PairState, PhysicalConstants

DEFAULTS_RESOURCE = "defaults.json"


def _to_complex(value) -> complex:
    if isinstance(value, complex):
        return value
    if isinstance(value, bool):
        raise ValueError("complex value must be a number or [re, im]")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        re, im = value
        if all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (re, im)):
            return complex(re, im)
    raise ValueError("complex value must be a number or [re, im]")


ComplexValue = Annotated[
    complex,
    BeforeValidator(_to_complex),
    PlainSerializer(lambda z: [z.real, z.imag], return_type=list),
    WithJsonSchema(
        {
            "type": "array",
            "items": {"type": "number"},
            "minItems": 2,
            "maxItems": 2,
            "description": "complex number as [re, im]; a bare number is real",
        }
    ),
]


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ConstantsCfg(_StrictModel):
    gamma_s_per_tau_s: float = 1.0
    gamma_l_per_tau_s: float = Field(default=1.0 / 579.0, ge=0.0)
    delta_m_per_tau_s: float = Field(ge=0.0)
    epsilon_mag: float = Field(default=2.3e-3, ge=0.0)
    ks_kl_overlap: float = Field(default=3.2e-3, ge=0.0)

    @model_validator(mode="after")
    def _gamma_s_is_unity(self):
        if self.gamma_s_per_tau_s != 1.0:
            raise ValueError("gamma_s_per_tau_s must be exactly 1 (working units)")
        return self


class MaterialCfg(_StrictModel):
    nu_per_cm3: float = Field(ge=0.0)
    delta_f_cm: ComplexValue
    p_k_inv_cm: float = Field(gt=0.0)
    m_k_inv_cm: float = Field(gt=0.0)
    d_cm: float | None = Field(default=None, ge=0.0)
    delta_t_cm: float | None = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def _one_length(self):
        if (self.d_cm is None) == (self.delta_t_cm is None):
            raise ValueError("exactly one of d_cm or delta_t_cm must be set")
        return self


class RegenCfg(_StrictModel):
    r_direct: ComplexValue | None = None
    material: MaterialCfg | None = None

    @model_validator(mode="after")
    def _one_form(self):
        if (self.r_direct is None) == (self.material is None):
            raise ValueError("exactly one of r_direct or material must be set")
        return self


class PreparationCfg(_StrictModel):
    R_direct: ComplexValue | None = None
    regenerator: RegenCfg | None = None
    T_tau_s: float | None = Field(default=None, ge=0.0)
    truncate_ss: bool = True

    @model_validator(mode="after")
    def _one_form(self):
        if (self.R_direct is None) == (self.regenerator is None):
            raise ValueError("exactly one of R_direct or regenerator must be set")
        if self.regenerator is not None and self.T_tau_s is None:
            raise ValueError("T_tau_s is required with a regenerator pipeline")
        return self


class DetectorCfg(_StrictModel):
    delta_T_tau_s: float = Field(gt=0.0)
    eta_k0bar: float = Field(ge=0.0, le=1.0)
    eta_k0: float = Field(ge=0.0, le=1.0)
    beta: float = Field(gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _efficiency_order(self):
        if self.eta_k0 > self.eta_k0bar:
            raise ValueError("eta_k0 must not exceed eta_k0bar")
        return self


class SettingWeightsCfg(_StrictModel):
    ss: float = Field(default=0.25, ge=0.0)
    sl: float = Field(default=0.25, ge=0.0)
    ls: float = Field(default=0.25, ge=0.0)
    ll: float = Field(default=0.25, ge=0.0)

    @model_validator(mode="after")
    def _sum_to_one(self):
        total = self.ss + self.sl + self.ls + self.ll
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"setting weights must sum to 1, got {total!r}")
        return self


class MonteCarloCfg(_StrictModel):
    n_events: int = Field(ge=1)
    seed: int = Field(ge=0, lt=2**64)
    setting_weights: SettingWeightsCfg = SettingWeightsCfg()
    correction_mode: Literal["raw", "corrected"] = "raw"
    use_detector: bool = False
    block_size: int = Field(default=65536, ge=1)


class OutputCfg(_StrictModel):
    path: str | None = None
    format: Literal["csv", "json"] = "json"


class RunConfig(_StrictModel):
    constants: ConstantsCfg
    preparation: PreparationCfg
    detector: DetectorCfg
    mc: MonteCarloCfg
    output: OutputCfg = OutputCfg()


def strip_annotations(node):
    """Drop keys starting with '_' recursively; lists are traversed."""
    if isinstance(node, dict):
        return {
            k: strip_annotations(v)
            for k, v in node.items()
            if not (isinstance(k, str) and k.startswith("_"))
        }
    if isinstance(node, list):
        return [strip_annotations(v) for v in node]
    return node


def deep_merge(base: dict, override: dict) -> dict:
    """Merge override into base recursively; non-dict values replace."""
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def default_config_dict() -> dict:
    text = (
        resources.files("kaonbell").joinpath("data", DEFAULTS_RESOURCE).read_text()
    )
    return strip_annotations(json.loads(text))


def _format_validation_error(exc: ValidationError) -> list[str]:
    details = []
    for err in exc.errors():
        loc = ".".join(str(part) for part in err["loc"]) or "<root>"
        details.append(f"{loc}: {err['msg']}")
    return details


def parse_config(data: dict) -> RunConfig:
    """Validate a raw dict (already annotation-stripped) against the schema."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        details = _format_validation_error(exc)
        raise ConfigError(
            "invalid configuration: " + "; ".join(details), details
        ) from exc


def load_config(path: str | None = None) -> RunConfig:
    """Load a config file merged over the packaged defaults.

    With no path the defaults alone are used.  JSON syntax errors carry line
    and column; validation errors carry the offending key path.
    """
    merged = default_config_dict()
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(
                f"config file {path!r} is not valid JSON at line "
                f"{exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
        if not isinstance(user, dict):
            raise ConfigError(f"config file {path!r} must hold a JSON object")
        merged = deep_merge(merged, strip_annotations(user))
    return parse_config(merged)


def to_constants(cfg: RunConfig) -> PhysicalConstants:
    c = cfg.constants
    return PhysicalConstants(
        delta_m=c.delta_m_per_tau_s,
        gamma_s=c.gamma_s_per_tau_s,
        gamma_l=c.gamma_l_per_tau_s,
        epsilon_mag=c.epsilon_mag,
        ks_kl_overlap=c.ks_kl_overlap,
    )


def to_regen_spec(cfg: RunConfig) -> RegenSpec:
    regen = cfg.preparation.regenerator
    if regen is None:
        raise ConfigError("preparation has no regenerator section")
    if regen.r_direct is not None:
        return RegenSpec(r_direct=regen.r_direct)
    m = regen.material
    return RegenSpec(
        material=MaterialParams(
            nu=m.nu_per_cm3,
            delta_f=m.delta_f_cm,
            p_k=m.p_k_inv_cm,
            m_k=m.m_k_inv_cm,
            d=m.d_cm,
            delta_t=m.delta_t_cm,
        )
    )


def to_preparation(cfg: RunConfig) -> PreparationConfig:
    if cfg.preparation.regenerator is None:
        raise ConfigError(
            "this command needs the regenerator pipeline; the configuration "
            "gives a direct R instead"
        )
    return PreparationConfig(
        regen=to_regen_spec(cfg),
        T=cfg.preparation.T_tau_s,
        constants=to_constants(cfg),
        truncate_ss=cfg.preparation.truncate_ss,
    )


def to_detector(cfg: RunConfig) -> DetectorModel:
    d = cfg.detector
    return DetectorModel(
        delta_T=d.delta_T_tau_s,
        eta_k0bar=d.eta_k0bar,
        eta_k0=d.eta_k0,
        beta=d.beta,
    )


def build_state(cfg: RunConfig) -> tuple[PairState, complex, float | None]:
    """Prepared state, its coefficient R, and the surviving fraction.

    The fraction is None when the state is specified directly through R
    rather than through the preparation pipeline.
    """
    prep = cfg.preparation
    if prep.R_direct is not None:
        return closed_form_bell_state(prep.R_direct), prep.R_direct, None
    state, r_eff, fraction = prepare_bell_state(to_preparation(cfg))
    return state, r_eff, fraction


def to_plan(cfg: RunConfig, state: PairState, seed: int | None = None) -> RunPlan:
    mc = cfg.mc
    w = mc.setting_weights
    weights = dict(zip(SETTING_PAIRS, (w.ss, w.sl, w.ls, w.ll)))
    return RunPlan(
        state=state,
        n_events=mc.n_events,
        constants=to_constants(cfg),
        seed=mc.seed if seed is None else seed,
        setting_weights=weights,
        detector=to_detector(cfg) if mc.use_detector else None,
        correction_mode=mc.correction_mode,
        block_size=mc.block_size,
    )
