import sys
from pathlib import Path

import pytest

SRC = Path(__file__).resolve().parents[1] / "src"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from schedsim.engine import DELIVERED, UNBORN, IntervalState  # noqa: E402
from schedsim.model import FlowSpec, RadioMode, SystemConfig, validate_topology  # noqa: E402


class FixedViews:
    """Test stand-in for DebtViews: every sensor sees the same debt vector."""

    def __init__(self, debts):
        self.debts = dict(debts)

    def at(self, sensor):
        return self.debts


def make_chain(length, reliability=0.5, root="r"):
    """Chain root <- s1 <- s2 <- ... <- s<length>."""
    parents = {}
    rel = {}
    prev = root
    for i in range(1, length + 1):
        name = f"s{i}"
        parents[name] = prev
        rel[name] = reliability if isinstance(reliability, float) else reliability[i - 1]
        prev = name
    return validate_topology(parents, rel, root)


def make_tree10(reliability=0.5):
    parents = {
        "1": "r", "2": "r",
        "3": "1", "4": "1", "5": "2",
        "6": "3", "7": "3", "8": "5", "9": "5", "10": "4",
    }
    rel = {s: reliability for s in parents}
    return validate_topology(parents, rel, "r")


def random_system(rng, mode=None, max_sensors=5, max_flows=4, max_slots=6):
    """Random valid SystemConfig for fuzz tests."""
    count = rng.randint(1, max_sensors)
    names = [f"n{i}" for i in range(1, count + 1)]
    parents = {}
    for i, name in enumerate(names):
        parents[name] = rng.choice(["r"] + names[:i])
    rel = {name: rng.uniform(0.1, 1.0) for name in names}
    topology = validate_topology(parents, rel, "r")
    slots = rng.randint(1, max_slots)
    flows = tuple(
        FlowSpec(
            flow_id=f"f{i}",
            source=rng.choice(names),
            requirement=rng.random(),
            generation_slot=rng.randint(1, slots),
        )
        for i in range(rng.randint(1, max_flows))
    )
    if mode is None:
        mode = rng.choice([RadioMode.FULL_DUPLEX, RadioMode.HALF_DUPLEX])
    return SystemConfig(topology=topology, flows=flows, slots_per_interval=slots,
                        mode=mode, intervals=1, seed=rng.randrange(10 ** 6))


def random_state(rng, config):
    """Random mid-interval state consistent with the packet-motion invariants."""
    slot = rng.randint(1, config.slots_per_interval)
    positions = {}
    for flow in config.flows:
        if flow.generation_slot > slot:
            positions[flow.flow_id] = UNBORN
        else:
            spots = config.topology.path_to_root(flow.source)[:-1]
            choices = spots + [DELIVERED]
            positions[flow.flow_id] = rng.choice(choices) if choices else DELIVERED
    return IntervalState(slot=slot, positions=positions)


# ---------------------------------------------------------------------------
# Acceptance criteria reporting

_acceptance_lines = []


@pytest.fixture
def criterion():
    """Record and assert one acceptance criterion; prints a pass/fail line."""

    def record(number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:>2} [{status}] {title}"
        if detail:
            line += f" -- {detail}"
        _acceptance_lines.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
