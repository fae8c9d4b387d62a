"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The region sweeps use the full experiment protocol (0.05 grid, 3000
intervals, coupled per-point seeds) and are shared between criteria via
module-scoped fixtures; expect the module to run for several minutes.
"""

import json
import os
import random
import subprocess
import sys
from itertools import product
from pathlib import Path

import pytest

from schedsim.engine import (
    DebtLedger,
    DebtViews,
    advance_slot,
    begin_interval,
    end_interval,
    is_schedule_legal,
    run,
)
from schedsim.experiments import (
    builtin_scenarios,
    delayed_info_study,
    fulfillment_check,
    sweep_region,
)
from schedsim.model import FlowSpec, RadioMode, SystemConfig
from schedsim.oracle import chain_delivery_probability, run_oracle_check
from schedsim.policies import make_policy

from conftest import FixedViews, make_chain, random_state, random_system

JOBS = max(1, os.cpu_count() or 1)
SRC = str(Path(__file__).resolve().parents[1] / "src")


@pytest.fixture(scope="module")
def scenarios():
    return builtin_scenarios(seed=0)


@pytest.fixture(scope="module")
def tree_full_sweeps(scenarios):
    spec = scenarios["tree-full-duplex"].region_spec()
    return {
        name: sweep_region(spec, make_policy(name), jobs=JOBS)
        for name in ("greedy", "static", "random")
    }


@pytest.fixture(scope="module")
def greedy_delay_sweeps(scenarios, tree_full_sweeps):
    spec = scenarios["tree-full-duplex"].region_spec()
    study = delayed_info_study(spec, make_policy("greedy"), [100, 200], jobs=JOBS)
    study[0] = tree_full_sweeps["greedy"]  # update period 0 is the base sweep
    return study

@pytest.fixture(scope="module")
def half_sweeps(scenarios):
    results = {}
    for scenario_name in ("tree-half-duplex", "path-half-duplex"):
        spec = scenarios[scenario_name].region_spec()
        results[scenario_name] = {
            name: sweep_region(spec, make_policy(name), jobs=JOBS)
            for name in ("csf", "static", "random")
        }
    return results


def containment_fraction(cover, covered):
    """Fraction of grid points respecting: covered fulfilled => cover fulfilled."""
    cover_set = cover.fulfilled_set()
    respected = sum(
        1 for p in covered.points if not p.fulfilled or (p.alpha, p.beta) in cover_set
    )
    return respected / len(covered.points)


def test_criterion_1_greedy_full_duplex_optimality(criterion):
    report = run_oracle_check(
        make_policy("greedy"), RadioMode.FULL_DUPLEX,
        instances=200, seed=101, max_sensors=4, max_flows=3, max_slots=5,
        tolerance=1e-9,
    )
    criterion(
        1, "greedy forwarder matches the exact optimum on full-duplex instances",
        report.max_gap <= 1e-9 and not report.violations,
        f"max gap {report.max_gap:.3e} over {report.instances} instances",
    )


def test_criterion_2_nearest_first_path_optimality(criterion):
    report = run_oracle_check(
        make_policy("csf"), RadioMode.HALF_DUPLEX,
        instances=200, seed=202, max_sensors=4, max_flows=3, max_slots=6,
        shape="path", tolerance=1e-9,
    )
    criterion(
        2, "closest-sensor-first matches the exact optimum on path instances",
        report.max_gap <= 1e-9 and not report.violations,
        f"max gap {report.max_gap:.3e} over {report.instances} instances",
    )


def test_criterion_3_chain_delivery_probability(criterion):
    # independent enumeration over the 8 outcome triples
    enumerated = 0.0
    for bits in product([0, 1], repeat=3):
        hops = 0
        for b in bits:
            if hops < 2 and b:
                hops += 1
        if hops == 2:
            enumerated += 0.5 ** 3
    exact = chain_delivery_probability((0.5, 0.5), 1, 3)

    trials = 100_000
    config = SystemConfig(
        topology=make_chain(2, 0.5),
        flows=(FlowSpec("f", "s2", 0.5),),
        slots_per_interval=3,
        intervals=trials,
        seed=33,
    )
    empirical = run(config, make_policy("greedy")).timely_throughput["f"]
    criterion(
        3, "chain delivery probability: exact 0.5 and Monte Carlo agreement",
        exact == 0.5 == enumerated and abs(empirical - 0.5) <= 0.005,
        f"exact {exact}, enumerated {enumerated}, empirical {empirical:.4f}",
    )


def test_criterion_4_debt_telescoping(criterion):
    rng = random.Random(404)
    names = ["greedy", "csf", "random", "static"]
    runs = 0
    exact_everywhere = True
    for index in range(50):
        config = random_system(rng)
        policy = make_policy(names[index % 4])
        ledger = DebtLedger(config.flows)
        views = DebtViews(config.topology, config.flow_ids(), config.update_period)
        rng_tx = random.Random(f"{index}:channel")
        rng_policy = random.Random(f"{index}:policy")
        running = {f.flow_id: 0 for f in config.flows}
        for k in range(1, 31):
            state = begin_interval(config)
            for _ in range(config.slots_per_interval):
                schedule = policy.schedule_slot(state, views, config, rng_policy)
                state, _ = advance_slot(config, state, schedule, rng_tx)
            deliveries = end_interval(config, state, ledger)
            views.refresh(ledger, k)
            for flow in config.flows:
                running[flow.flow_id] += deliveries[flow.flow_id]
                if ledger.debt(flow.flow_id) != k * flow.requirement - running[flow.flow_id]:
                    exact_everywhere = False
        runs += 1
    criterion(
        4, "debt equals intervals*requirement - deliveries, exactly, every interval",
        runs == 50 and exact_everywhere,
        f"{runs} runs x 30 intervals, all four policies",
    )


def test_criterion_5_greedy_region_contains_baselines(criterion, tree_full_sweeps):
    fractions = {
        name: containment_fraction(tree_full_sweeps["greedy"], tree_full_sweeps[name])
        for name in ("static", "random")
    }
    criterion(
        5, "greedy's fulfilled region contains both baselines on >=95% of the grid",
        all(fraction >= 0.95 for fraction in fractions.values()),
        f"containment: static {fractions['static']:.3f}, random {fractions['random']:.3f}",
    )


def test_criterion_6_delayed_information_robustness(criterion, greedy_delay_sweeps):
    from schedsim.experiments import boundary_mismatch_fraction

    base = greedy_delay_sweeps[0]
    exact = {
        period: boundary_mismatch_fraction(base, greedy_delay_sweeps[period])
        for period in (100, 200)
    }
    within_step = {
        period: boundary_mismatch_fraction(base, greedy_delay_sweeps[period], tolerance=0.05)
        for period in (100, 200)
    }
    criterion(
        6, "stale-debt regions differ from the current-debt boundary on <=10% of columns",
        all(fraction <= 0.10 for fraction in exact.values()),
        f"differing columns: lambda=100 {exact[100]:.3f}, lambda=200 {exact[200]:.3f} "
        f"(beyond one grid step: {within_step[100]:.3f}, {within_step[200]:.3f})",
    )


def test_criterion_7_half_duplex_ordering(criterion, half_sweeps):
    from dataclasses import replace

    strict = {}
    for scenario_name, results in half_sweeps.items():
        csf_set = results["csf"].fulfilled_set()
        strict[scenario_name] = all(
            results[name].fulfilled_set() < csf_set for name in ("static", "random")
        )

    # the random baseline should fail outright at requirements (0, 0.05)
    failure_counts = {}
    for scenario_name in ("tree-half-duplex", "path-half-duplex"):
        failures = 0
        for seed in range(10):
            scenario = builtin_scenarios(seed=seed)[scenario_name]
            assignment = {
                flow.flow_id: (0.05 if flow.flow_id in scenario.beta_flows else 0.0)
                for flow in scenario.config.flows
            }
            flows = tuple(
                replace(flow, requirement=assignment[flow.flow_id])
                for flow in scenario.config.flows
            )
            config = replace(scenario.config, flows=flows)
            metrics = run(config, make_policy("random"))
            if not metrics.fulfilled:
                failures += 1
        failure_counts[scenario_name] = failures

    criterion(
        7, "nearest-first strictly contains baselines; random fails at (0, 0.05)",
        all(strict.values()) and all(count >= 8 for count in failure_counts.values()),
        f"strict containment {strict}; random failures/10 {failure_counts}",
    )


def test_criterion_8_fulfillment_threshold(criterion):
    at_899 = fulfillment_check({"f": 89.9}, 3000)
    at_900 = fulfillment_check({"f": 90.0}, 3000)
    criterion(
        8, "fulfillment at 3000 intervals: debt 89.9 passes, 90.0 fails",
        at_899 is True and at_900 is False,
        f"89.9 -> {at_899}, 90.0 -> {at_900}",
    )


def _cli(*args):
    env = dict(os.environ)
    env["PYTHONPATH"] = SRC + os.pathsep + env.get("PYTHONPATH", "")
    return subprocess.run(
        [sys.executable, "-m", "schedsim", *args],
        capture_output=True, env=env, timeout=600,
    )


def test_criterion_9_byte_identical_results(criterion, tmp_path, scenarios):
    from schedsim.documents import document_from_scenario

    doc = document_from_scenario(scenarios["path-half-duplex"])
    data = doc.model_dump(by_alias=True, exclude_none=True)
    for flow in data["flows"]:
        flow["q"] = 0.2
    data["system"]["intervals"] = 150
    data["policy"]["name"] = "csf"
    config_path = tmp_path / "determinism.json"
    config_path.write_text(json.dumps(data))

    run_a = _cli("run", str(config_path), "--seed", "7")
    run_b = _cli("run", str(config_path), "--seed", "7")
    runs_identical = run_a.returncode == run_b.returncode == 0 and run_a.stdout == run_b.stdout

    sweep_args = ("sweep", str(config_path), "--policy", "csf,random",
                  "--alpha-step", "0.25", "--beta-step", "0.25", "--intervals", "60")
    sweep_serial = _cli(*sweep_args, "--jobs", "1")
    sweep_parallel = _cli(*sweep_args, "--jobs", str(max(2, JOBS)))
    sweeps_identical = (
        sweep_serial.returncode == sweep_parallel.returncode == 0
        and sweep_serial.stdout == sweep_parallel.stdout
    )
    criterion(
        9, "identical config/policy/seed give byte-identical documents",
        runs_identical and sweeps_identical,
        f"run bytes {len(run_a.stdout)}, sweep bytes {len(sweep_serial.stdout)}",
    )


def test_criterion_10_half_duplex_legality_fuzz(criterion):
    rng = random.Random(1010)
    systems = [random_system(rng, mode=RadioMode.HALF_DUPLEX) for _ in range(40)]
    policies = [make_policy(name) for name in ("greedy", "csf", "random", "static")]
    invocations = 100_000
    violations = 0
    for i in range(invocations):
        config = systems[i % len(systems)]
        state = random_state(rng, config)
        views = FixedViews({f: rng.uniform(-5.0, 5.0) for f in config.flow_ids()})
        schedule = policies[i % 4].schedule_slot(state, views, config, rng)
        if not is_schedule_legal(state, schedule, config.topology, config.mode):
            violations += 1
    criterion(
        10, "100k half-duplex schedules respect parent/sibling constraints",
        violations == 0,
        f"{invocations} invocations, {violations} violations",
    )
