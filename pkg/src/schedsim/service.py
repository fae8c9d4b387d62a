"""HTTP service exposing simulations, sweeps, and oracle checks over the core package.

Request and response bodies are the same pydantic documents the CLI reads
and writes, so a config file can be POSTed as-is.  Domain-level validation
failures map to 400 with the offending field in the message; malformed
bodies are FastAPI's usual 422.
"""

from __future__ import annotations

import io
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from . import engine, oracle
from .documents import (
    ConfigDocument,
    RunReport,
    build_run_report,
    document_from_config,
    document_from_scenario,
    to_policy,
    to_region_spec,
    to_system_config,
)
from .experiments import builtin_scenarios, sweep_region, write_region_csv
from .model import ConfigError, RadioMode, TopologyError
from .policies import make_policy

app = FastAPI(
    title="schedsim",
    description="Deadline-constrained packet scheduling over unreliable sensor trees",
    version="0.1.0",
)


def _domain(call, *args, **kwargs):
    try:
        return call(*args, **kwargs)
    except (ConfigError, TopologyError) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


class ScenarioSummary(BaseModel):
    name: str
    description: str


class SweepRequest(BaseModel):
    config: ConfigDocument
    policies: list[str]
    alpha_step: float = 0.05
    beta_step: float = 0.05
    intervals: Optional[int] = None
    base_seed: Optional[int] = None


class SweepPoint(BaseModel):
    alpha: float
    beta: float
    fulfilled: bool
    max_debt: float


class SweepTable(BaseModel):
    policy: str
    points: list[SweepPoint]


class SweepResponse(BaseModel):
    tables: list[SweepTable]


class OracleCheckRequest(BaseModel):
    instances: int = 200
    max_sensors: int = 4
    max_flows: int = 3
    max_T: int = 5
    mode: str = "full-duplex"
    topology: Optional[str] = None
    policy: Optional[str] = None
    seed: int = 0
    tolerance: float = 1e-9


class OracleViolation(BaseModel):
    gap: float
    optimum: float
    achieved: float
    debts: dict
    config: ConfigDocument


class OracleCheckResponse(BaseModel):
    policy: str
    mode: str
    topology: str
    instances: int
    tolerance: float
    max_gap: float
    violations: list[OracleViolation]


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok"}


@app.get("/scenarios", response_model=list[ScenarioSummary])
def list_scenarios(seed: int = Query(0)) -> list[ScenarioSummary]:
    return [
        ScenarioSummary(name=name, description=scenario.description)
        for name, scenario in builtin_scenarios(seed=seed).items()
    ]


@app.get("/scenarios/{name}", response_model=ConfigDocument)
def get_scenario(name: str, seed: int = Query(0)) -> ConfigDocument:
    scenarios = builtin_scenarios(seed=seed)
    if name not in scenarios:
        raise HTTPException(status_code=404, detail=f"unknown scenario {name!r}")
    return document_from_scenario(scenarios[name])


@app.post("/run", response_model=RunReport)
def run_simulation(doc: ConfigDocument) -> RunReport:
    config = _domain(to_system_config, doc)
    policy = _domain(to_policy, doc)
    metrics = engine.run(config, policy)
    return build_run_report(doc, config, policy, metrics)


@app.post("/sweep")
def run_sweep(request: SweepRequest, format: str = Query("json", pattern="^(json|csv)$")):
    if not request.policies:
        raise HTTPException(status_code=400, detail="policies must not be empty")
    config = _domain(to_system_config, request.config)
    spec = _domain(
        to_region_spec, request.config, config,
        alpha_step=request.alpha_step,
        beta_step=request.beta_step,
        intervals=request.intervals,
        base_seed=request.base_seed,
    )
    results = [
        sweep_region(spec, _domain(make_policy, name)) for name in request.policies
    ]
    if format == "csv":
        if len(results) != 1:
            raise HTTPException(status_code=400, detail="csv format supports exactly one policy")
        buffer = io.StringIO()
        write_region_csv(results[0], buffer)
        return PlainTextResponse(buffer.getvalue(), media_type="text/csv")
    return SweepResponse(
        tables=[
            SweepTable(
                policy=result.policy,
                points=[
                    SweepPoint(alpha=p.alpha, beta=p.beta, fulfilled=p.fulfilled,
                               max_debt=p.max_debt)
                    for p in result.points
                ],
            )
            for result in results
        ]
    )


@app.post("/oracle-check", response_model=OracleCheckResponse)
def run_oracle_check(request: OracleCheckRequest) -> OracleCheckResponse:
    mode = _domain(RadioMode.parse, request.mode)
    policy_name = request.policy or ("csf" if mode is RadioMode.HALF_DUPLEX else "greedy")
    report = oracle.run_oracle_check(
        _domain(make_policy, policy_name),
        mode,
        instances=request.instances,
        seed=request.seed,
        max_sensors=request.max_sensors,
        max_flows=request.max_flows,
        max_slots=request.max_T,
        shape=request.topology,
        tolerance=request.tolerance,
    )
    return OracleCheckResponse(
        policy=report.policy_name,
        mode=report.mode.value,
        topology=report.shape,
        instances=report.instances,
        tolerance=report.tolerance,
        max_gap=report.max_gap,
        violations=[
            OracleViolation(
                gap=record.gap,
                optimum=record.optimum,
                achieved=record.achieved,
                debts=dict(sorted(record.instance.debts.items())),
                config=document_from_config(record.instance.config),
            )
            for record in report.violations
        ],
    )
