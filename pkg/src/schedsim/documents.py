"""JSON config and report documents, and their mapping to domain objects.

The config document has four sections (``topology``, ``flows``, ``system``,
``policy``) plus an optional ``region`` section naming the alpha/beta flow
groups for requirement sweeps.  Documents are validated structurally here
(pydantic) and semantically by the domain constructors; both kinds of error
carry the offending field.

Reports serialize with sorted keys and a fixed layout so identical runs
produce byte-identical output.
"""

from __future__ import annotations

import hashlib
import json
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from . import engine
from .experiments import RegionSpec, Scenario
from .model import ConfigError, FlowSpec, RadioMode, SystemConfig, validate_topology
from .policies import Policy, PolicyKind


class TopologyDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    root: str
    parents: dict = Field(default_factory=dict)
    reliability: dict = Field(default_factory=dict)


class FlowDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str
    source: str
    q: float
    tau: int = 1


class SystemDocument(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    T: int
    mode: str = "full-duplex"
    update_period: int = Field(0, alias="lambda")
    seed: int = 0
    intervals: int = 1


class PolicyDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "greedy"
    tie_break: str = "lowest"
    seed: Optional[int] = None


class RegionDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    alpha_flows: list
    beta_flows: list


class ConfigDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    topology: TopologyDocument
    flows: list[FlowDocument]
    system: SystemDocument
    policy: PolicyDocument = Field(default_factory=PolicyDocument)
    region: Optional[RegionDocument] = None


def parse_config_document(data) -> ConfigDocument:
    """Validate raw JSON text or an already-decoded mapping."""
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    return ConfigDocument.model_validate(data)


def to_system_config(doc: ConfigDocument) -> SystemConfig:
    topology = validate_topology(doc.topology.parents, doc.topology.reliability, doc.topology.root)
    flows = tuple(
        FlowSpec(flow_id=f.id, source=f.source, requirement=f.q, generation_slot=f.tau)
        for f in doc.flows
    )
    return SystemConfig(
        topology=topology,
        flows=flows,
        slots_per_interval=doc.system.T,
        mode=RadioMode.parse(doc.system.mode),
        update_period=doc.system.update_period,
        seed=doc.system.seed,
        intervals=doc.system.intervals,
    )


def to_policy(doc: ConfigDocument) -> Policy:
    return Policy(
        kind=PolicyKind.parse(doc.policy.name),
        tie_break=doc.policy.tie_break,
        seed=doc.policy.seed,
    )


def to_region_spec(doc: ConfigDocument, config: SystemConfig, alpha_step: float = 0.05,
                   beta_step: float = 0.05, intervals: Optional[int] = None,
                   base_seed: Optional[int] = None) -> RegionSpec:
    if doc.region is None:
        raise ConfigError(
            "region: config has no region section (alpha_flows/beta_flows) to sweep over"
        )
    return RegionSpec(
        config=config,
        alpha_flows=tuple(doc.region.alpha_flows),
        beta_flows=tuple(doc.region.beta_flows),
        alpha_step=alpha_step,
        beta_step=beta_step,
        intervals=intervals,
        base_seed=base_seed,
    )


def document_from_config(config: SystemConfig, policy: Optional[Policy] = None,
                         alpha_flows=None, beta_flows=None) -> ConfigDocument:
    topology = TopologyDocument(
        root=config.topology.root,
        parents=dict(sorted(config.topology.parent.items())),
        reliability=dict(sorted(config.topology.reliability.items())),
    )
    flows = [
        FlowDocument(id=f.flow_id, source=f.source, q=f.requirement, tau=f.generation_slot)
        for f in config.flows
    ]
    system = SystemDocument(
        T=config.slots_per_interval,
        mode=config.mode.value,
        update_period=config.update_period,
        seed=config.seed,
        intervals=config.intervals,
    )
    policy_doc = PolicyDocument() if policy is None else PolicyDocument(
        name=policy.kind.value, tie_break=policy.tie_break, seed=policy.seed
    )
    region = None
    if alpha_flows is not None or beta_flows is not None:
        region = RegionDocument(alpha_flows=list(alpha_flows or ()), beta_flows=list(beta_flows or ()))
    return ConfigDocument(topology=topology, flows=flows, system=system,
                          policy=policy_doc, region=region)


def document_from_scenario(scenario: Scenario) -> ConfigDocument:
    return document_from_config(
        scenario.config,
        alpha_flows=scenario.alpha_flows,
        beta_flows=scenario.beta_flows,
    )


def canonical_config_json(doc: ConfigDocument) -> str:
    payload = doc.model_dump(by_alias=True, exclude_none=True)
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_digest(doc: ConfigDocument) -> str:
    digest = hashlib.sha256(canonical_config_json(doc).encode("utf-8")).hexdigest()
    return f"sha256:{digest}"


class FlowReport(BaseModel):
    id: str
    q: float
    delivered: int
    timely_throughput: float
    final_debt: float
    fulfilled: bool


class RunReport(BaseModel):
    config_digest: str
    policy: str
    seed: int
    intervals: int
    fulfilled: bool
    max_debt: float
    flows: list[FlowReport]


def build_run_report(doc: ConfigDocument, config: SystemConfig, policy: Policy,
                     metrics: engine.RunMetrics) -> RunReport:
    threshold = engine.default_debt_threshold(metrics.intervals)
    flows = [
        FlowReport(
            id=flow.flow_id,
            q=flow.requirement,
            delivered=metrics.delivered[flow.flow_id],
            timely_throughput=metrics.timely_throughput[flow.flow_id],
            final_debt=metrics.final_debt[flow.flow_id],
            fulfilled=metrics.final_debt[flow.flow_id] < threshold,
        )
        for flow in config.flows
    ]
    return RunReport(
        config_digest=config_digest(doc),
        policy=policy.kind.value,
        seed=config.seed,
        intervals=metrics.intervals,
        fulfilled=metrics.fulfilled,
        max_debt=metrics.max_debt,
        flows=flows,
    )


def render_json(model: BaseModel) -> str:
    """Stable serialization: sorted keys, two-space indent, trailing newline."""
    return json.dumps(model.model_dump(by_alias=True), sort_keys=True, indent=2) + "\n"
