"""Experiment protocol: fulfillment, requirement-region sweeps, and built-in scenarios.

A region sweep varies the requirement pair (alpha, beta) over a grid: the
alpha-group flows all require alpha, the beta-group flows beta, and every
grid point is one independent simulation judged fulfilled or not.  The set
of fulfilled points is the policy's achievable region; policies are
compared by containment of these sets.

Grid points reuse channel randomness across policies (the per-point seed
is the base seed XOR the point index), which couples the comparisons and
reduces Monte Carlo noise in containment checks.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

from . import engine
from .model import ConfigError, FlowSpec, RadioMode, SystemConfig, validate_topology

REGION_CSV_HEADER = "alpha,beta,policy,fulfilled,max_debt"


def fulfillment_check(final_debts, intervals: int, threshold: Optional[float] = None) -> bool:
    """True when every flow's final debt is strictly below the threshold.

    The default threshold is 3% of the horizon (debt 90 at 3000 intervals),
    i.e. every flow achieved at least its requirement minus 0.03.
    """
    if threshold is None:
        threshold = engine.default_debt_threshold(intervals)
    values = final_debts.values() if isinstance(final_debts, Mapping) else final_debts
    return max(values, default=0.0) < threshold


def grid_values(step: float) -> list:
    """Grid points covering [0, 1] from 0 in increments of ``step``."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    count = int(1.0 / step + 1e-9)
    return [round(i * step, 9) for i in range(count + 1)]


@dataclass(frozen=True)
class RegionSpec:
    """A sweep: which flows take alpha, which take beta, and how to run points."""

    config: SystemConfig
    alpha_flows: tuple
    beta_flows: tuple
    alpha_step: float = 0.05
    beta_step: float = 0.05
    intervals: Optional[int] = None
    base_seed: Optional[int] = None

    def __post_init__(self):
        if self.alpha_step <= 0 or self.beta_step <= 0:
            raise ConfigError("grid steps must be positive")
        known = set(self.config.flow_ids())
        for flow_id in list(self.alpha_flows) + list(self.beta_flows):
            if flow_id not in known:
                raise ConfigError(f"region references unknown flow {flow_id!r}")
        if set(self.alpha_flows) & set(self.beta_flows):
            raise ConfigError("alpha and beta flow groups must be disjoint")
        object.__setattr__(self, "alpha_flows", tuple(self.alpha_flows))
        object.__setattr__(self, "beta_flows", tuple(self.beta_flows))

    def horizon(self) -> int:
        return self.config.intervals if self.intervals is None else self.intervals

    def seed_for(self, index: int) -> int:
        base = self.config.seed if self.base_seed is None else self.base_seed
        return base ^ index


@dataclass(frozen=True)
class RegionPoint:
    alpha: float
    beta: float
    fulfilled: bool
    max_debt: float


@dataclass(frozen=True)
class RegionResult:
    policy: str
    points: tuple

    def fulfilled_set(self) -> set:
        return {(p.alpha, p.beta) for p in self.points if p.fulfilled}

    def boundary(self) -> dict:
        """For each alpha, the largest fulfilled beta (None when none is)."""
        best: dict = {}
        for point in self.points:
            best.setdefault(point.alpha, None)
            if point.fulfilled and (best[point.alpha] is None or point.beta > best[point.alpha]):
                best[point.alpha] = point.beta
        return best


def _with_requirements(config: SystemConfig, assignment: Mapping) -> SystemConfig:
    flows = tuple(
        replace(flow, requirement=assignment.get(flow.flow_id, flow.requirement))
        for flow in config.flows
    )
    return replace(config, flows=flows)


def _evaluate_point(spec: RegionSpec, policy, index: int, alpha: float, beta: float) -> RegionPoint:
    assignment = {flow_id: alpha for flow_id in spec.alpha_flows}
    assignment.update({flow_id: beta for flow_id in spec.beta_flows})
    config = _with_requirements(spec.config, assignment)
    horizon = spec.horizon()
    metrics = engine.run(config, policy, intervals=horizon, seed=spec.seed_for(index))
    return RegionPoint(
        alpha=alpha,
        beta=beta,
        fulfilled=fulfillment_check(metrics.final_debt, horizon),
        max_debt=metrics.max_debt,
    )


def _evaluate_point_args(args) -> RegionPoint:
    return _evaluate_point(*args)


def sweep_region(spec: RegionSpec, policy, jobs: int = 1) -> RegionResult:
    """Simulate every (alpha, beta) grid point independently.

    Points are deterministic given the spec (each owns a seed derived from
    its index), so the result is identical for any ``jobs`` value or
    evaluation order.
    """
    tasks = []
    index = 0
    for alpha in grid_values(spec.alpha_step):
        for beta in grid_values(spec.beta_step):
            tasks.append((spec, policy, index, alpha, beta))
            index += 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_evaluate_point_args, tasks, chunksize=8))
    else:
        points = [_evaluate_point(*task) for task in tasks]
    label = getattr(getattr(policy, "kind", None), "value", str(policy))
    return RegionResult(policy=label, points=tuple(points))


def delayed_info_study(spec: RegionSpec, policy, update_periods: Sequence[int],
                       jobs: int = 1) -> dict:
    """Sweep the same region once per debt-update period, with identical seeds.

    Period 0 reproduces the base sweep; larger periods show how much the
    achievable region shrinks when sensors act on stale debts.
    """
    results = {}
    for period in update_periods:
        period_spec = replace(spec, config=replace(spec.config, update_period=period))
        results[period] = sweep_region(period_spec, policy, jobs=jobs)
    return results


def boundary_mismatch_fraction(base: RegionResult, other: RegionResult,
                               tolerance: float = 0.0) -> float:
    """Fraction of alpha columns whose largest fulfilled beta differs.

    ``tolerance`` allows boundary moves up to that size (e.g. one grid step)
    before a column counts as mismatched; an empty column matches only
    another empty column.
    """
    base_boundary = base.boundary()
    other_boundary = other.boundary()
    columns = sorted(set(base_boundary) | set(other_boundary))
    if not columns:
        return 0.0
    mismatched = 0
    for alpha in columns:
        left = base_boundary.get(alpha)
        right = other_boundary.get(alpha)
        if left is None or right is None:
            if left is not right:
                mismatched += 1
        elif abs(left - right) > tolerance + 1e-9:
            mismatched += 1
    return mismatched / len(columns)


def write_region_csv(result: RegionResult, stream) -> None:
    stream.write(REGION_CSV_HEADER + "\n")
    for p in result.points:
        fulfilled = "true" if p.fulfilled else "false"
        stream.write(f"{p.alpha!r},{p.beta!r},{result.policy},{fulfilled},{p.max_debt!r}\n")


# ---------------------------------------------------------------------------
# Built-in scenarios

# Ten-sensor surveillance tree: the documented part is 1, 2 under the root,
# 3, 4 under 1, and 5 under 2; the completion below (6, 7 under 3; 8, 9
# under 5; 10 under 4) is a reconstruction fixed for reproducibility.
_TREE_PARENTS = {
    "1": "r", "2": "r",
    "3": "1", "4": "1", "5": "2",
    "6": "3", "7": "3", "8": "5", "9": "5", "10": "4",
}
_TREE_SOURCES = ("3", "5", "6", "7", "8", "9")

_PATH_PARENTS = {"1": "r", "2": "1", "3": "2", "4": "3", "5": "4"}


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    config: SystemConfig
    alpha_flows: tuple
    beta_flows: tuple

    def region_spec(self, alpha_step: float = 0.05, beta_step: float = 0.05,
                    intervals: Optional[int] = None, base_seed: Optional[int] = None) -> RegionSpec:
        return RegionSpec(
            config=self.config,
            alpha_flows=self.alpha_flows,
            beta_flows=self.beta_flows,
            alpha_step=alpha_step,
            beta_step=beta_step,
            intervals=intervals,
            base_seed=base_seed,
        )


def _draw_reliabilities(name: str, seed: int, sensors) -> dict:
    rng = random.Random(f"{name}:{seed}")
    return {sensor: rng.uniform(0.4, 0.9) for sensor in sorted(sensors)}


def _tree_scenario(name: str, mode: RadioMode, seed: int) -> Scenario:
    reliability = _draw_reliabilities(name, seed, _TREE_PARENTS)
    topology = validate_topology(_TREE_PARENTS, reliability, "r")
    flows = []
    alpha_flows = []
    beta_flows = []
    for sensor in _TREE_SOURCES:
        alpha_id, beta_id = f"a{sensor}", f"b{sensor}"
        flows.append(FlowSpec(flow_id=alpha_id, source=sensor, requirement=0.0))
        flows.append(FlowSpec(flow_id=beta_id, source=sensor, requirement=0.0))
        alpha_flows.append(alpha_id)
        beta_flows.append(beta_id)
    config = SystemConfig(
        topology=topology,
        flows=tuple(flows),
        slots_per_interval=10,
        mode=mode,
        update_period=0,
        seed=seed,
        intervals=3000,
    )
    description = (
        "Ten-sensor tree, two flows at each of sensors 3, 5, 6, 7, 8, 9 "
        f"(12 flows), {mode.value} radios, 10-slot intervals"
    )
    return Scenario(name, description, config, tuple(alpha_flows), tuple(beta_flows))


def _path_scenario(name: str, seed: int) -> Scenario:
    reliability = _draw_reliabilities(name, seed, _PATH_PARENTS)
    topology = validate_topology(_PATH_PARENTS, reliability, "r")
    flows = []
    alpha_flows = []
    beta_flows = []
    for i in range(1, 4):
        alpha_id, beta_id = f"a{i}", f"b{i}"
        flows.append(FlowSpec(flow_id=alpha_id, source="5", requirement=0.0))
        flows.append(FlowSpec(flow_id=beta_id, source="5", requirement=0.0))
        alpha_flows.append(alpha_id)
        beta_flows.append(beta_id)
    config = SystemConfig(
        topology=topology,
        flows=tuple(flows),
        slots_per_interval=10,
        mode=RadioMode.HALF_DUPLEX,
        update_period=0,
        seed=seed,
        intervals=3000,
    )
    description = (
        "Five-sensor chain below the collection point, six flows all generated "
        "by the far sensor, half-duplex radios, 10-slot intervals"
    )
    return Scenario(name, description, config, tuple(alpha_flows), tuple(beta_flows))


def builtin_scenarios(seed: int = 0) -> dict:
    """The three standard experiment setups, reliabilities drawn from ``seed``.

    Link reliabilities are drawn uniformly from [0.4, 0.9] once per scenario
    and seed, and are then shared by every grid point and policy compared on
    that scenario.
    """
    return {
        "tree-full-duplex": _tree_scenario("tree-full-duplex", RadioMode.FULL_DUPLEX, seed),
        "tree-half-duplex": _tree_scenario("tree-half-duplex", RadioMode.HALF_DUPLEX, seed),
        "path-half-duplex": _path_scenario("path-half-duplex", seed),
    }
