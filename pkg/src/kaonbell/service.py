"""HTTP service exposing the engine: one endpoint per analysis command.

All endpoints are stateless POSTs taking a run configuration (or a small
request wrapper around one) and returning plain-JSON reports; complex
numbers travel as [re, im] pairs.  The CLI in :mod:`kaonbell.cli` is a thin
client of this service, either over the network or against an in-process
instance of the app.

Error mapping: configuration and request validation problems return 422,
domain runtime failures (degenerate state, empty Monte Carlo buckets)
return 409.
"""

from __future__ import annotations

import json
import math
from importlib import resources
from typing import Literal

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, model_validator

from . import __version__
from .config import (
    ComplexValue,
    DEFAULTS_RESOURCE,
    RunConfig,
    build_state,
    to_constants,
    to_detector,
    to_plan,
    to_regen_spec,
)
from .detector import check_spacelike, lifetime_response, sample_economics
from .dynamics import MaterialParams, RegenSpec, effective_R, regeneration_parameter
from .errors import ConfigError, KaonBellError
from .measurement import (
    CHReport,
    ch_statistic,
    optimize_R,
    qm_ratio,
    violation_condition,
)
from .montecarlo import run_experiment

app = FastAPI(
    title="kaonbell",
    version=__version__,
    description=(
        "Bell tests with entangled neutral-kaon pairs: Clauser-Horne "
        "predictions, preparation pipeline, feasibility numbers and Monte "
        "Carlo pseudo-experiments."
    ),
)


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError) -> JSONResponse:
    return JSONResponse(status_code=422, content={"detail": str(exc)})


@app.exception_handler(KaonBellError)
async def _domain_error(request: Request, exc: KaonBellError) -> JSONResponse:
    return JSONResponse(status_code=409, content={"detail": str(exc)})


class CHReportModel(BaseModel):
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
    se_p_bb: float
    se_p_sb: float
    se_p_bl: float
    se_p_sl: float
    se_p_s_star: float
    se_p_star_l: float
    se_B: float
    se_ratio: float

    @classmethod
    def from_report(cls, report: CHReport) -> "CHReportModel":
        return cls(**report.__dict__)


class PredictResponse(BaseModel):
    mode: Literal["direct", "pipeline"]
    R: ComplexValue
    survive_fraction: float | None
    violation_predicted: bool
    first: CHReportModel
    second: CHReportModel


class ScanRequest(BaseModel):
    axis: Literal["R", "T", "d"]
    start: float
    stop: float
    steps: int = Field(ge=2)
    phase_deg: float = 0.0
    config: RunConfig | None = None

    @model_validator(mode="after")
    def _monotone(self):
        if not self.stop > self.start:
            raise ValueError("stop must be greater than start")
        return self


class ScanRow(BaseModel):
    value: float
    ratio_first: float
    ratio_second: float
    violated: bool


class ScanResponse(BaseModel):
    axis: str
    rows: list[ScanRow]


class OptimizeRequest(BaseModel):
    domain: Literal["real", "disc"] = "real"
    variant: Literal["first", "second", "both"] = "both"
    bound: float = Field(default=2.0, gt=0.0, le=3.0)


class OptimizeResult(BaseModel):
    variant: str
    domain: str
    R_star: ComplexValue
    ratio_star: float


class OptimizeResponse(BaseModel):
    results: list[OptimizeResult]


class LifetimeResponseModel(BaseModel):
    p_true_ks_recorded_ks: float
    p_true_ks_recorded_kl: float
    p_true_kl_recorded_ks: float
    p_true_kl_recorded_kl: float


class FeasibilityResponse(BaseModel):
    T_tau_s: float
    delta_T_tau_s: float
    beta: float
    T_min_tau_s: float
    spacelike_ok: bool
    spacelike_factor: float
    surviving_fraction: float
    initial_events_per_usable_pair: float
    lifetime_response: LifetimeResponseModel


class CountRowModel(BaseModel):
    left_setting: str
    right_setting: str
    left_outcome: str
    right_outcome: str
    count: int


class SimulateResponse(BaseModel):
    n_events: int
    seed: int
    correction_mode: str
    detector_applied: bool
    counts: list[CountRowModel]
    first: CHReportModel
    second: CHReportModel
    significance_first: float | None
    significance_second: float | None


@app.get("/health")
def health() -> dict:
    """Liveness probe."""
    return {"status": "ok", "version": __version__}


@app.get("/defaults")
def defaults() -> dict:
    """Packaged default configuration, annotations included."""
    text = resources.files("kaonbell").joinpath("data", DEFAULTS_RESOURCE).read_text()
    return json.loads(text)


@app.post("/predict", response_model=PredictResponse)
def predict(config: RunConfig) -> PredictResponse:
    """Both Clauser-Horne variants for the configured prepared state."""
    state, r_coeff, fraction = build_state(config)
    return PredictResponse(
        mode="direct" if config.preparation.R_direct is not None else "pipeline",
        R=r_coeff,
        survive_fraction=fraction,
        violation_predicted=violation_condition(r_coeff),
        first=CHReportModel.from_report(ch_statistic(state, "first")),
        second=CHReportModel.from_report(ch_statistic(state, "second")),
    )


def _scan_values(request: ScanRequest) -> list[tuple[float, complex]]:
    values = np.linspace(request.start, request.stop, request.steps)
    cfg = request.config
    if request.axis == "R":
        phase = complex(
            math.cos(math.radians(request.phase_deg)),
            math.sin(math.radians(request.phase_deg)),
        )
        return [(float(v), complex(v) * phase) for v in values]
    if cfg is None:
        raise ConfigError(f"a configuration is required for a {request.axis} scan")
    constants = to_constants(cfg)
    if request.axis == "T":
        if request.start < 0.0:
            raise ConfigError("T values must be >= 0")
        r = regeneration_parameter(to_regen_spec(cfg))
        return [(float(v), effective_R(r, float(v), constants)) for v in values]
    # d axis: thickness of the material slab
    regen = cfg.preparation.regenerator
    if regen is None or regen.material is None:
        raise ConfigError("a material regenerator is required for a d scan")
    if cfg.preparation.T_tau_s is None:
        raise ConfigError("T_tau_s is required for a d scan")
    if request.start < 0.0:
        raise ConfigError("d values must be >= 0")
    m = regen.material
    out = []
    for v in values:
        params = MaterialParams(
            nu=m.nu_per_cm3,
            delta_f=m.delta_f_cm,
            p_k=m.p_k_inv_cm,
            m_k=m.m_k_inv_cm,
            d=float(v),
        )
        r = regeneration_parameter(RegenSpec(material=params))
        out.append((float(v), effective_R(r, cfg.preparation.T_tau_s, constants)))
    return out


@app.post("/scan", response_model=ScanResponse)
def scan(request: ScanRequest) -> ScanResponse:
    """Closed-form ratio table along one axis (R value, flight time, or slab thickness)."""
    rows = [
        ScanRow(
            value=value,
            ratio_first=qm_ratio(r_coeff, "first"),
            ratio_second=qm_ratio(r_coeff, "second"),
            violated=violation_condition(r_coeff),
        )
        for value, r_coeff in _scan_values(request)
    ]
    return ScanResponse(axis=request.axis, rows=rows)


@app.post("/optimize", response_model=OptimizeResponse)
def optimize(request: OptimizeRequest) -> OptimizeResponse:
    """Maximize the closed-form ratio over R, per variant."""
    variants = (
        ("first", "second") if request.variant == "both" else (request.variant,)
    )
    results = []
    for variant in variants:
        r_star, ratio_star = optimize_R(
            domain=request.domain, variant=variant, bound=request.bound
        )
        results.append(
            OptimizeResult(
                variant=variant,
                domain=request.domain,
                R_star=r_star,
                ratio_star=ratio_star,
            )
        )
    return OptimizeResponse(results=results)


@app.post("/feasibility", response_model=FeasibilityResponse)
def feasibility(config: RunConfig) -> FeasibilityResponse:
    """Spacelike-separation bound, usable-pair fraction and misID matrix."""
    if config.preparation.T_tau_s is None:
        raise ConfigError(
            "feasibility needs preparation.T_tau_s (pipeline form)"
        )
    constants = to_constants(config)
    det = to_detector(config)
    t_flight = config.preparation.T_tau_s
    ok, t_min = check_spacelike(t_flight, det.delta_T, det.beta)
    fraction = sample_economics(t_flight, constants)
    lt = lifetime_response(det.delta_T, constants)
    return FeasibilityResponse(
        T_tau_s=t_flight,
        delta_T_tau_s=det.delta_T,
        beta=det.beta,
        T_min_tau_s=t_min,
        spacelike_ok=ok,
        spacelike_factor=t_min / det.delta_T,
        surviving_fraction=fraction,
        initial_events_per_usable_pair=1.0 / fraction,
        lifetime_response=LifetimeResponseModel(
            p_true_ks_recorded_ks=lt.matrix[0, 0],
            p_true_ks_recorded_kl=lt.matrix[0, 1],
            p_true_kl_recorded_ks=lt.matrix[1, 0],
            p_true_kl_recorded_kl=lt.matrix[1, 1],
        ),
    )


@app.post("/simulate", response_model=SimulateResponse)
def simulate(config: RunConfig) -> SimulateResponse:
    """Run the configured pseudo-experiment and estimate both variants."""
    state, _, _ = build_state(config)
    plan = to_plan(config, state)
    table, reports = run_experiment(plan)

    def significance(report: CHReport) -> float | None:
        if report.se_B <= 0.0:
            return None
        return report.B / report.se_B

    return SimulateResponse(
        n_events=plan.n_events,
        seed=plan.seed,
        correction_mode=plan.correction_mode,
        detector_applied=plan.detector is not None,
        counts=[
            CountRowModel(
                left_setting=ls,
                right_setting=rs,
                left_outcome=lo,
                right_outcome=ro,
                count=count,
            )
            for ls, rs, lo, ro, count in table.rows()
        ],
        first=CHReportModel.from_report(reports["first"]),
        second=CHReportModel.from_report(reports["second"]),
        significance_first=significance(reports["first"]),
        significance_second=significance(reports["second"]),
    )
