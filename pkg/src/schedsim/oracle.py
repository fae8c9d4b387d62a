"""Exact finite-horizon computations used as ground truth for policy tests.

For one interval the system is a finite-horizon Markov decision process:
the state is the slot index plus every packet's position, actions are the
legal schedules, and each scheduled transmission independently succeeds
with its link reliability.  Backward induction gives the exact optimum of
the weighted expected-delivery objective; a forward recursion evaluates any
fixed deterministic policy exactly.  A separate closed-form recursion gives
the delivery probability of a single flow on a chain.

The objective weighs each delivery by the flow's debt clipped at zero;
callers pass raw debts and the clipping happens here.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .engine import DELIVERED, UNBORN, IllegalSchedule, IntervalState, is_schedule_legal
from .model import FlowSpec, RadioMode, SystemConfig, validate_topology

DEFAULT_MAX_STATES = 10 ** 6


class StateSpaceTooLarge(RuntimeError):
    """The instance exceeds the configured state-space cap."""


class NondeterministicPolicy(ValueError):
    """Exact policy evaluation requires a deterministic policy."""


class BadProbability(ValueError):
    """A stage reliability is outside (0, 1]."""


def state_space_bound(config: SystemConfig) -> int:
    """Upper bound on the number of MDP states: (slots+1) * (nodes+1)^flows."""
    nodes = len(config.topology.sensors)
    return (config.slots_per_interval + 1) * (nodes + 1) ** len(config.flows)


class _FixedViews:
    """Debt view where every sensor sees the same, current debt vector."""

    def __init__(self, debts: Mapping):
        self._debts = dict(debts)

    def at(self, sensor) -> Mapping:
        return self._debts


def _held_by_sensor(positions: Sequence) -> dict:
    held: dict = {}
    for index, pos in enumerate(positions):
        if pos is UNBORN or pos is DELIVERED:
            continue
        held.setdefault(pos, []).append(index)
    return held


def _legal_action_tuples(held: dict, config: SystemConfig, cap: Optional[int]) -> list:
    """All legal schedules over the held packets, idle choices included.

    Actions are tuples of (sensor, flow index) pairs sorted by sensor, and
    the list is in a canonical lexicographic order (idle before each held
    flow), which downstream tie-breaking relies on.
    """
    sensors = sorted(held)
    if cap is not None:
        total = 1
        for sensor in sensors:
            total *= 1 + len(held[sensor])
            if total > cap:
                raise StateSpaceTooLarge(f"more than {cap} candidate actions")
    half = config.mode is RadioMode.HALF_DUPLEX
    parent = config.topology.parent
    actions = []

    def extend(i: int, chosen: tuple, transmitting: frozenset, receiving: frozenset):
        if i == len(sensors):
            actions.append(chosen)
            return
        sensor = sensors[i]
        extend(i + 1, chosen, transmitting, receiving)
        if half:
            up = parent[sensor]
            if sensor in receiving or up in transmitting or up in receiving:
                return
            next_tx = transmitting | {sensor}
            next_rx = receiving | {up}
        else:
            next_tx = transmitting
            next_rx = receiving
        for flow_index in held[sensor]:
            extend(i + 1, chosen + ((sensor, flow_index),), next_tx, next_rx)

    extend(0, (), frozenset(), frozenset())
    return actions


def enumerate_actions(state: IntervalState, config: SystemConfig,
                      cap: Optional[int] = DEFAULT_MAX_STATES) -> list:
    """All legal schedules (as sensor -> flow id dicts) for an interval state."""
    flow_ids = config.flow_ids()
    positions = [state.positions[flow_id] for flow_id in flow_ids]
    held = _held_by_sensor(positions)
    return [
        {sensor: flow_ids[flow_index] for sensor, flow_index in action}
        for action in _legal_action_tuples(held, config, cap)
    ]


def _clipped_weights(config: SystemConfig, debts: Mapping) -> list:
    return [max(float(debts.get(flow.flow_id, 0.0)), 0.0) for flow in config.flows]


def _initial_positions(config: SystemConfig) -> tuple:
    root = config.topology.root
    out = []
    for flow in config.flows:
        if flow.generation_slot == 1:
            out.append(DELIVERED if flow.source == root else flow.source)
        else:
            out.append(UNBORN)
    return tuple(out)


def _births_by_slot(config: SystemConfig) -> dict:
    """slot -> [(flow index, position at generation)], for slots after the first."""
    root = config.topology.root
    births: dict = {}
    for index, flow in enumerate(config.flows):
        if flow.generation_slot > 1:
            pos = DELIVERED if flow.source == root else flow.source
            births.setdefault(flow.generation_slot, []).append((index, pos))
    return births


def _guard(config: SystemConfig, max_states: int) -> None:
    bound = state_space_bound(config)
    if bound > max_states:
        raise StateSpaceTooLarge(
            f"state-space bound {bound} exceeds cap {max_states}; "
            "raise max_states to override"
        )


def dp_value(config: SystemConfig, debts: Mapping,
             max_states: int = DEFAULT_MAX_STATES):
    """Exact optimum of the clipped-debt-weighted expected deliveries.

    Returns ``(optimum, table)`` where ``table`` maps each reachable
    ``(slot, positions)`` state to ``(value, best action)``; the best action
    is the first maximizer in canonical action order, stored as a tuple of
    (sensor, flow id) pairs.  Backward induction over one interval; the
    expectation branches over the independent per-transmission outcomes.
    """
    _guard(config, max_states)
    weights = _clipped_weights(config, debts)
    flow_ids = config.flow_ids()
    topology = config.topology
    parent = topology.parent
    reliability = topology.reliability
    root = topology.root
    last_slot = config.slots_per_interval + 1
    births = _births_by_slot(config)

    table: dict = {}

    def value(slot: int, positions: tuple) -> float:
        if slot == last_slot:
            return sum(w for w, pos in zip(weights, positions) if pos is DELIVERED)
        key = (slot, positions)
        known = table.get(key)
        if known is not None:
            return known[0]
        if len(table) > max_states:
            raise StateSpaceTooLarge(f"visited more than {max_states} states")
        held = _held_by_sensor(positions)
        born = births.get(slot + 1, ())
        best_value = None
        best_action = None
        for action in _legal_action_tuples(held, config, max_states):
            expected = 0.0
            for mask in range(1 << len(action)):
                probability = 1.0
                next_positions = list(positions)
                for bit, (sensor, flow_index) in enumerate(action):
                    p = reliability[sensor]
                    if mask >> bit & 1:
                        probability *= p
                        up = parent[sensor]
                        next_positions[flow_index] = DELIVERED if up == root else up
                    else:
                        probability *= 1.0 - p
                for flow_index, pos in born:
                    next_positions[flow_index] = pos
                expected += probability * value(slot + 1, tuple(next_positions))
            if best_value is None or expected > best_value:
                best_value = expected
                best_action = action
        table[key] = (
            best_value,
            tuple((sensor, flow_ids[flow_index]) for sensor, flow_index in best_action),
        )
        return best_value

    start = _initial_positions(config)
    return value(1, start), table


def policy_expected_value(config: SystemConfig, policy, debts: Mapping,
                          max_states: int = DEFAULT_MAX_STATES) -> float:
    """Exact value of the clipped-debt objective under a fixed deterministic policy.

    Forward recursion over the outcome tree the policy actually reaches,
    with the policy consuming the given debts as a current, uniform view.
    """
    if not getattr(policy, "deterministic", False):
        raise NondeterministicPolicy(f"{policy!r} is not deterministic")
    _guard(config, max_states)
    weights = _clipped_weights(config, debts)
    flow_ids = config.flow_ids()
    views = _FixedViews(debts)
    topology = config.topology
    parent = topology.parent
    reliability = topology.reliability
    root = topology.root
    last_slot = config.slots_per_interval + 1
    births = _births_by_slot(config)
    index_of = {flow_id: i for i, flow_id in enumerate(flow_ids)}

    memo: dict = {}

    def value(slot: int, positions: tuple) -> float:
        if slot == last_slot:
            return sum(w for w, pos in zip(weights, positions) if pos is DELIVERED)
        key = (slot, positions)
        if key in memo:
            return memo[key]
        state = IntervalState(slot=slot, positions=dict(zip(flow_ids, positions)))
        schedule = policy.schedule_slot(state, views, config, rng=None)
        if not is_schedule_legal(state, schedule, topology, config.mode):
            raise IllegalSchedule(f"policy produced illegal schedule {schedule!r}")
        action = sorted(schedule.items())
        born = births.get(slot + 1, ())
        expected = 0.0
        for mask in range(1 << len(action)):
            probability = 1.0
            next_positions = list(positions)
            for bit, (sensor, flow_id) in enumerate(action):
                p = reliability[sensor]
                if mask >> bit & 1:
                    probability *= p
                    up = parent[sensor]
                    next_positions[index_of[flow_id]] = DELIVERED if up == root else up
                else:
                    probability *= 1.0 - p
            for flow_index, pos in born:
                next_positions[flow_index] = pos
            expected += probability * value(slot + 1, tuple(next_positions))
        memo[key] = expected
        return expected

    return value(1, _initial_positions(config))


def chain_delivery_probability(reliabilities: Sequence[float], generation_slot: int,
                               slots: int) -> float:
    """Probability a packet crosses the given chain before the interval ends.

    ``reliabilities`` lists the per-hop success probabilities from the
    source toward the root; a packet generated in ``generation_slot`` has
    ``slots - generation_slot + 1`` attempts, one hop per successful slot.
    An empty chain (source at the root) is delivered at generation.
    """
    for p in reliabilities:
        if not 0.0 < p <= 1.0:
            raise BadProbability(f"stage reliability {p!r} not in (0, 1]")
    if not 1 <= generation_slot <= slots + 1:
        raise ValueError(f"generation slot {generation_slot} not in [1, {slots + 1}]")
    hops = len(reliabilities)
    if hops == 0:
        return 1.0
    budget = slots - generation_slot + 1
    if budget < hops:
        return 0.0
    # reached[h]: probability the packet has completed h hops so far
    reached = [1.0] + [0.0] * hops
    for _ in range(budget):
        for h in range(hops - 1, -1, -1):
            advance = reached[h] * reliabilities[h]
            reached[h] -= advance
            reached[h + 1] += advance
    return reached[hops]


# ---------------------------------------------------------------------------
# Random-instance comparison harness


@dataclass(frozen=True)
class OracleInstance:
    config: SystemConfig
    debts: Mapping


@dataclass
class GapRecord:
    instance: OracleInstance
    optimum: float
    achieved: float

    @property
    def gap(self) -> float:
        return self.optimum - self.achieved


@dataclass
class OracleCheckReport:
    mode: RadioMode
    shape: str
    policy_name: str
    instances: int
    tolerance: float
    max_gap: float
    violations: list


def random_instance(rng: random.Random, mode: RadioMode, max_sensors: int = 4,
                    max_flows: int = 3, max_slots: int = 5,
                    shape: Optional[str] = None) -> OracleInstance:
    """A small random instance: random tree (or chain) plus random debts.

    ``shape`` is ``"tree"`` (random parents) or ``"path"`` (a chain with all
    flows generated at the far end in slot 1, the structure for which the
    nearest-first policy is exact).  Defaults follow the mode: trees for
    full-duplex, paths for half-duplex.
    """
    if shape is None:
        shape = "path" if mode is RadioMode.HALF_DUPLEX else "tree"
    count = rng.randint(1, max_sensors)
    names = [f"n{i}" for i in range(1, count + 1)]
    parent = {}
    for i, name in enumerate(names):
        if shape == "path":
            parent[name] = "r" if i == 0 else names[i - 1]
        else:
            parent[name] = rng.choice(["r"] + names[:i])
    reliability = {name: 1.0 - rng.random() for name in names}
    topology = validate_topology(parent, reliability, "r")

    slots = rng.randint(1, max_slots)
    flow_count = rng.randint(1, max_flows)
    flows = []
    for i in range(flow_count):
        if shape == "path":
            source, generation = names[-1], 1
        else:
            source = rng.choice(names + ["r"])
            generation = rng.randint(1, slots)
        flows.append(FlowSpec(flow_id=f"f{i}", source=source, requirement=rng.random(),
                              generation_slot=generation))
    config = SystemConfig(topology=topology, flows=tuple(flows), slots_per_interval=slots,
                          mode=mode, intervals=1)
    debts = {
        flow.flow_id: (0.0 if rng.random() < 0.2 else rng.uniform(0.0, 5.0))
        for flow in flows
    }
    return OracleInstance(config=config, debts=debts)


def run_oracle_check(policy, mode: RadioMode, instances: int, seed: int = 0,
                     max_sensors: int = 4, max_flows: int = 3, max_slots: int = 5,
                     shape: Optional[str] = None, tolerance: float = 1e-9,
                     max_states: int = DEFAULT_MAX_STATES) -> OracleCheckReport:
    """Compare a policy's exact value against the DP optimum on random instances.

    Records every instance whose gap exceeds ``tolerance`` so it can be
    serialized and replayed.
    """
    rng = random.Random(seed)
    if shape is None:
        shape = "path" if mode is RadioMode.HALF_DUPLEX else "tree"
    max_gap = 0.0
    violations = []
    for _ in range(instances):
        instance = random_instance(rng, mode, max_sensors=max_sensors,
                                   max_flows=max_flows, max_slots=max_slots, shape=shape)
        optimum, _ = dp_value(instance.config, instance.debts, max_states=max_states)
        achieved = policy_expected_value(instance.config, policy, instance.debts,
                                         max_states=max_states)
        gap = optimum - achieved
        if gap > max_gap:
            max_gap = gap
        if gap > tolerance:
            violations.append(GapRecord(instance=instance, optimum=optimum, achieved=achieved))
    return OracleCheckReport(
        mode=mode,
        shape=shape,
        policy_name=getattr(getattr(policy, "kind", None), "value", str(policy)),
        instances=instances,
        tolerance=tolerance,
        max_gap=max_gap,
        violations=violations,
    )
