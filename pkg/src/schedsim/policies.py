"""The four slot-scheduling policies behind one strategy interface.

Each policy turns the current packet positions (plus whatever debt
information the sensors hold) into a schedule for the slot: a map from
transmitting sensor to the flow whose packet it sends.  The two debt-driven
policies are deterministic; the random and static-priority baselines take
an explicit RNG handle.

Every policy is work conserving within the radio constraints: under
full-duplex every packet-holding sensor transmits, and under half-duplex
the transmitter set is maximal (no further holder could be legally added).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Optional

from .engine import DELIVERED, UNBORN, IntervalState
from .model import ConfigError, RadioMode, SystemConfig, Topology

TIE_LOWEST = "lowest"
TIE_HIGHEST = "highest"
_TIE_BREAKS = (TIE_LOWEST, TIE_HIGHEST)


class PolicyKind(str, Enum):
    GREEDY_FORWARDER = "greedy"
    CLOSEST_SENSOR_FIRST = "csf"
    RANDOM = "random"
    STATIC_PRIORITY = "static"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        normalized = str(name).strip().lower().replace("_", "-")
        aliases = {
            "greedy": cls.GREEDY_FORWARDER,
            "greedy-forwarder": cls.GREEDY_FORWARDER,
            "csf": cls.CLOSEST_SENSOR_FIRST,
            "closest-sensor-first": cls.CLOSEST_SENSOR_FIRST,
            "random": cls.RANDOM,
            "static": cls.STATIC_PRIORITY,
            "static-priority": cls.STATIC_PRIORITY,
        }
        try:
            return aliases[normalized]
        except KeyError:
            raise ConfigError(
                f"unknown policy {name!r} (expected one of {sorted(set(aliases))})"
            ) from None


def sensor_debt_index(state: IntervalState, views) -> dict:
    """Largest viewed debt among the flows each sensor holds.

    Sensors holding nothing are absent from the result (conceptually their
    index is minus infinity).
    """
    index: dict = {}
    for flow_id, pos in state.positions.items():
        if pos is UNBORN or pos is DELIVERED:
            continue
        debt = views.at(pos)[flow_id]
        if pos not in index or debt > index[pos]:
            index[pos] = debt
    return index


def greedy_forwarder(state: IntervalState, views, tie_break: str = TIE_LOWEST) -> dict:
    """Every packet-holding sensor transmits its held flow with the largest viewed debt.

    Ties go to the lowest flow id (or the highest, if so configured).
    Intended for full-duplex radios, where per-sensor choices never
    conflict.
    """
    later_wins = tie_break == TIE_HIGHEST
    best: dict = {}
    for flow_id, pos in state.positions.items():
        if pos is UNBORN or pos is DELIVERED:
            continue
        debt = views.at(pos)[flow_id]
        cur = best.get(pos)
        if cur is None or debt > cur[0] or (
            debt == cur[0] and ((flow_id > cur[1]) if later_wins else (flow_id < cur[1]))
        ):
            best[pos] = (debt, flow_id)
    return {sensor: flow_id for sensor, (_, flow_id) in best.items()}


def closest_sensor_first(state: IntervalState, views, topology: Topology,
                         tie_break: str = TIE_LOWEST) -> dict:
    """Half-duplex scheduling by hop level, nearest to the root first.

    Level by level, among the packet-holding children of each potential
    receiver, the sensor with the largest per-sensor debt index transmits
    its largest-debt flow; a sensor whose parent was scheduled in the
    previous level is blocked.  The result is half-duplex legal by
    construction, and maximal: every blocked holder conflicts with a
    scheduled one.
    """
    later_wins = tie_break == TIE_HIGHEST
    held = state.holders()
    if not held:
        return {}
    depth = topology.depth
    parent = topology.parent
    by_level: dict = {}
    for sensor in held:
        by_level.setdefault(depth[sensor], []).append(sensor)

    schedule: dict = {}
    for level in sorted(by_level):
        groups: dict = {}
        for sensor in sorted(by_level[level]):
            groups.setdefault(parent[sensor], []).append(sensor)
        for receiver, siblings in groups.items():
            if receiver in schedule:
                continue
            best = None  # (debt, sensor, flow)
            for sensor in siblings:
                view = views.at(sensor)
                choice = None
                for flow_id in held[sensor]:
                    debt = view[flow_id]
                    if choice is None or debt > choice[0] or (
                        debt == choice[0]
                        and ((flow_id > choice[1]) if later_wins else (flow_id < choice[1]))
                    ):
                        choice = (debt, flow_id)
                if best is None or choice[0] > best[0] or (later_wins and choice[0] == best[0]):
                    best = (choice[0], sensor, choice[1])
            schedule[best[1]] = best[2]
    return schedule


def _half_duplex_greedy_set(order, parent) -> list:
    """Greedily keep the sensors of ``order`` that stay mutually legal."""
    chosen: set = set()
    receiving: set = set()
    kept = []
    for sensor in order:
        up = parent[sensor]
        if sensor in receiving or up in chosen or up in receiving:
            continue
        chosen.add(sensor)
        receiving.add(up)
        kept.append(sensor)
    return kept


def random_policy(state: IntervalState, topology: Topology, mode: RadioMode,
                  rng: random.Random) -> dict:
    """Uninformed baseline: random packet choices, ignoring debts and requirements.

    Full-duplex: every holder transmits a uniformly chosen held flow.
    Half-duplex: holders are scanned in a random order and greedily added
    while legal, which yields a maximal transmitter set; each kept sensor
    transmits a uniformly chosen held flow.
    """
    held = state.holders()
    if not held:
        return {}
    if mode is RadioMode.FULL_DUPLEX:
        transmitters = sorted(held)
    else:
        order = sorted(held)
        rng.shuffle(order)
        transmitters = sorted(_half_duplex_greedy_set(order, topology.parent))
    schedule = {}
    for sensor in transmitters:
        flows = held[sensor]
        schedule[sensor] = flows[0] if len(flows) == 1 else rng.choice(flows)
    return schedule


def static_priority(state: IntervalState, requirements: Mapping, topology: Topology,
                    mode: RadioMode, rng: random.Random) -> dict:
    """Priority by timely-throughput requirement, ties broken randomly.

    Full-duplex: each holder transmits its held flow with the largest
    requirement.  Half-duplex: undelivered packets are ranked by descending
    requirement (random tie order) and greedily granted their holding
    sensor while the transmitter set stays legal.
    """
    held = state.holders()
    if not held:
        return {}
    if mode is RadioMode.FULL_DUPLEX:
        schedule = {}
        for sensor in sorted(held):
            flows = held[sensor]
            top = max(requirements[f] for f in flows)
            candidates = [f for f in flows if requirements[f] == top]
            schedule[sensor] = candidates[0] if len(candidates) == 1 else rng.choice(candidates)
        return schedule

    ranked = []
    for sensor in sorted(held):
        for flow_id in held[sensor]:
            ranked.append((-requirements[flow_id], rng.random(), flow_id, sensor))
    ranked.sort()
    parent = topology.parent
    schedule: dict = {}
    receiving: set = set()
    for _, _, flow_id, sensor in ranked:
        if sensor in schedule:
            continue
        up = parent[sensor]
        if sensor in receiving or up in schedule or up in receiving:
            continue
        schedule[sensor] = flow_id
        receiving.add(up)
    return schedule


@dataclass(frozen=True)
class Policy:
    """A named policy plus its tie-break rule and optional private seed.

    ``schedule_slot`` is the strategy interface the simulation loop calls
    once per slot.  The debt-driven kinds adapt to the radio mode: with no
    transmit constraints every holder forwards its largest-debt flow, and
    under half-duplex the per-level selection of :func:`closest_sensor_first`
    realizes the same preferences within the constraints (so the two kinds
    coincide in behavior and differ in which mode they were designed for).
    """

    kind: PolicyKind
    tie_break: str = TIE_LOWEST
    seed: Optional[int] = None

    def __post_init__(self):
        if self.tie_break not in _TIE_BREAKS:
            raise ConfigError(f"unknown tie break {self.tie_break!r} (expected {_TIE_BREAKS})")

    @property
    def deterministic(self) -> bool:
        return self.kind in (PolicyKind.GREEDY_FORWARDER, PolicyKind.CLOSEST_SENSOR_FIRST)

    def schedule_slot(self, state: IntervalState, views, config: SystemConfig,
                      rng: Optional[random.Random]) -> dict:
        kind = self.kind
        if kind is PolicyKind.GREEDY_FORWARDER or kind is PolicyKind.CLOSEST_SENSOR_FIRST:
            if config.mode is RadioMode.FULL_DUPLEX:
                return greedy_forwarder(state, views, tie_break=self.tie_break)
            return closest_sensor_first(state, views, config.topology, tie_break=self.tie_break)
        if kind is PolicyKind.RANDOM:
            return random_policy(state, config.topology, config.mode, rng)
        return static_priority(state, config.requirements(), config.topology, config.mode, rng)


def make_policy(name, tie_break: str = TIE_LOWEST, seed: Optional[int] = None) -> Policy:
    kind = name if isinstance(name, PolicyKind) else PolicyKind.parse(name)
    return Policy(kind=kind, tie_break=tie_break, seed=seed)
