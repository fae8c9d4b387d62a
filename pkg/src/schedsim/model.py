"""Immutable description of the network, its flows, and the system configuration.

The network is a routing tree: every sensor forwards packets to a fixed
parent, and the collection point (the root) is where packets must arrive.
Each link is unreliable: a transmission from sensor ``n`` reaches the parent
with probability ``reliability[n]``, independently of everything else.

All types here are immutable after construction and safe to share between
concurrently running simulations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping


class TopologyError(ValueError):
    """A routing-tree description is structurally invalid."""


class CycleDetected(TopologyError):
    """Following the parent map revisits a sensor instead of reaching the root."""


class MissingParent(TopologyError):
    """A non-root sensor has no parent entry."""


class BadReliability(TopologyError):
    """A link reliability is missing, out of range, or attached to the root."""


class UnknownSensor(TopologyError):
    """A sensor identifier is not part of the topology."""


class ConfigError(ValueError):
    """A system configuration violates a structural constraint."""


class RadioMode(str, Enum):
    """Radio capability of the sensors.

    Full-duplex sensors transmit and receive at the same time and never
    interfere with each other.  Half-duplex sensors cannot transmit while
    their parent transmits, and a sensor can receive at most one packet
    per slot (so two children of the same parent cannot transmit together).
    """

    FULL_DUPLEX = "full-duplex"
    HALF_DUPLEX = "half-duplex"

    @classmethod
    def parse(cls, text: str) -> "RadioMode":
        normalized = str(text).strip().lower()
        if normalized in ("full", "full-duplex", "full_duplex"):
            return cls.FULL_DUPLEX
        if normalized in ("half", "half-duplex", "half_duplex"):
            return cls.HALF_DUPLEX
        raise ConfigError(f"unknown radio mode {text!r} (expected 'full-duplex' or 'half-duplex')")


@dataclass(frozen=True)
class Topology:
    """A validated routing tree.

    Construct through :func:`validate_topology`; direct construction skips
    the structural checks.  ``sensors`` contains every node including the
    root.  ``parent`` and ``reliability`` have an entry for every non-root
    sensor and nothing else.
    """

    root: str
    parent: Mapping[str, str]
    reliability: Mapping[str, float]
    sensors: frozenset
    depth: Mapping[str, int] = field(repr=False)
    children: Mapping[str, tuple] = field(repr=False)

    def hop_distance(self, sensor) -> int:
        """Number of parent hops from ``sensor`` to the root (root -> 0)."""
        try:
            return self.depth[sensor]
        except KeyError:
            raise UnknownSensor(f"sensor {sensor!r} is not in the topology") from None

    def path_to_root(self, sensor) -> list:
        """The sensors visited walking from ``sensor`` up to the root, inclusive."""
        if sensor not in self.sensors:
            raise UnknownSensor(f"sensor {sensor!r} is not in the topology")
        path = [sensor]
        while sensor != self.root:
            sensor = self.parent[sensor]
            path.append(sensor)
        return path

    def max_depth(self) -> int:
        return max(self.depth.values(), default=0)

    def levels(self) -> list:
        """Sensors grouped by hop distance: ``levels()[g]`` is the sorted tuple at depth g."""
        out = [[] for _ in range(self.max_depth() + 1)]
        for sensor in self.sensors:
            out[self.depth[sensor]].append(sensor)
        return [tuple(sorted(level)) for level in out]


def validate_topology(parent: Mapping, reliability: Mapping, root) -> Topology:
    """Check a raw parent map and reliability map and build a :class:`Topology`.

    Raises :class:`CycleDetected`, :class:`MissingParent`, or
    :class:`BadReliability` on the corresponding violation, and the base
    :class:`TopologyError` if the root itself carries a parent entry.
    """
    if root in parent:
        raise TopologyError(f"root {root!r} must not have a parent entry")

    sensors = set(parent) | set(parent.values()) | {root}
    for sensor in sensors:
        if sensor != root and sensor not in parent:
            raise MissingParent(f"sensor {sensor!r} has no parent entry")

    # Walk every parent chain; a chain that revisits a node is a cycle.
    depth: dict = {root: 0}
    for sensor in sensors:
        chain = []
        node = sensor
        seen = set()
        while node not in depth:
            if node in seen:
                raise CycleDetected(f"parent chain from {sensor!r} revisits {node!r}")
            seen.add(node)
            chain.append(node)
            node = parent[node]
        base = depth[node]
        for offset, link in enumerate(reversed(chain), start=1):
            depth[link] = base + offset

    non_root = sensors - {root}
    for sensor in non_root:
        value = reliability.get(sensor)
        if value is None:
            raise BadReliability(f"no reliability entry for sensor {sensor!r}")
        if not (0.0 < value <= 1.0):
            raise BadReliability(f"reliability for sensor {sensor!r} is {value!r}, not in (0, 1]")
    for sensor in reliability:
        if sensor not in non_root:
            raise BadReliability(f"reliability entry for {sensor!r}, which is not a non-root sensor")

    children: dict = {sensor: [] for sensor in sensors}
    for sensor, guardian in parent.items():
        children[guardian].append(sensor)

    return Topology(
        root=root,
        parent=dict(parent),
        reliability=dict(reliability),
        sensors=frozenset(sensors),
        depth=depth,
        children={sensor: tuple(sorted(kids)) for sensor, kids in children.items()},
    )


@dataclass(frozen=True)
class FlowSpec:
    """One data flow: where its packet originates and what it requires.

    ``requirement`` is the long-run fraction of packets that must reach the
    root within their interval.  ``generation_slot`` is the slot within each
    interval at which the packet becomes available at the source.
    """

    flow_id: str
    source: str
    requirement: float
    generation_slot: int = 1


@dataclass(frozen=True)
class SystemConfig:
    """Everything a simulation run needs: network, flows, timing, and seeds.

    ``slots_per_interval`` is the packet deadline in slots; packets not
    delivered by the end of their interval are dropped.  ``update_period``
    controls how often sensors refresh their (possibly stale) knowledge of
    flow debts: 0 means every sensor always sees the current values.
    """

    topology: Topology
    flows: tuple
    slots_per_interval: int
    mode: RadioMode = RadioMode.FULL_DUPLEX
    update_period: int = 0
    seed: int = 0
    intervals: int = 1

    def __post_init__(self):
        if self.slots_per_interval < 1:
            raise ConfigError("slots_per_interval must be >= 1")
        if self.intervals < 1:
            raise ConfigError("intervals must be >= 1")
        if self.update_period < 0:
            raise ConfigError("update_period must be >= 0")
        flows = tuple(sorted(self.flows, key=lambda f: f.flow_id))
        ids = [flow.flow_id for flow in flows]
        if len(set(ids)) != len(ids):
            raise ConfigError("flow ids must be unique")
        for flow in flows:
            if flow.source not in self.topology.sensors:
                raise ConfigError(f"flow {flow.flow_id!r}: source {flow.source!r} is not in the topology")
            if not (0.0 <= flow.requirement <= 1.0):
                raise ConfigError(f"flow {flow.flow_id!r}: requirement {flow.requirement!r} not in [0, 1]")
            if not (1 <= flow.generation_slot <= self.slots_per_interval):
                raise ConfigError(
                    f"flow {flow.flow_id!r}: generation slot {flow.generation_slot} "
                    f"not in [1, {self.slots_per_interval}]"
                )
        object.__setattr__(self, "flows", flows)
        object.__setattr__(self, "_requirements", {f.flow_id: f.requirement for f in flows})

    def flow_ids(self) -> list:
        return [flow.flow_id for flow in self.flows]

    def flow(self, flow_id) -> FlowSpec:
        for spec in self.flows:
            if spec.flow_id == flow_id:
                return spec
        raise ConfigError(f"no flow with id {flow_id!r}")

    def requirements(self) -> Mapping:
        """Flow id -> timely-throughput requirement (shared mapping, do not mutate)."""
        return self._requirements


def is_path_topology(config: SystemConfig) -> bool:
    """True when all flows share one source and are generated in slot 1.

    In that case only the sensors between the common source and the root
    ever carry a packet, so the system behaves like a single path.
    """
    sources = {flow.source for flow in config.flows}
    if len(sources) > 1:
        return False
    return all(flow.generation_slot == 1 for flow in config.flows)
