"""Command-line front end: run simulations, sweep requirement regions, check policies.

Thin orchestration over the library; all state flows through documented
seed fields and flags.  Exit codes: 0 success, 2 bad configuration or
usage, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from pydantic import ValidationError

from . import engine, oracle
from .documents import (
    build_run_report,
    document_from_config,
    document_from_scenario,
    parse_config_document,
    render_json,
    to_policy,
    to_region_spec,
    to_system_config,
)
from .experiments import builtin_scenarios, sweep_region, write_region_csv
from .model import ConfigError, RadioMode, TopologyError
from .policies import make_policy

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

_CONFIG_ERRORS = (ConfigError, TopologyError, ValidationError, json.JSONDecodeError)


def _default_jobs() -> int:
    env = os.environ.get("SCHEDSIM_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _load_document(path: str, overrides) -> dict:
    text = Path(path).read_text()
    data = json.loads(text)
    for item in overrides or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} must look like section.field=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        try:
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        except (AttributeError, TypeError):
            raise ConfigError(
                f"override path {key!r} does not address a config section field"
            ) from None
    return data


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    data = _load_document(args.config, args.override)
    if args.policy:
        data.setdefault("policy", {})["name"] = args.policy
    if args.seed is not None:
        data.setdefault("system", {})["seed"] = args.seed
    if args.intervals is not None:
        data.setdefault("system", {})["intervals"] = args.intervals
    doc = parse_config_document(data)
    config = to_system_config(doc)
    policy = to_policy(doc)
    metrics = engine.run(config, policy)
    report = build_run_report(doc, config, policy, metrics)
    _emit(render_json(report), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    policies = [name for name in (args.policy or "").split(",") if name.strip()]
    if not policies:
        raise ConfigError("sweep needs at least one policy (--policy greedy,random,...)")
    data = _load_document(args.config, args.override)
    doc = parse_config_document(data)
    config = to_system_config(doc)
    spec = to_region_spec(
        doc, config,
        alpha_step=args.alpha_step,
        beta_step=args.beta_step,
        intervals=args.intervals,
        base_seed=args.base_seed,
    )
    for name in policies:
        policy = make_policy(name, tie_break=doc.policy.tie_break, seed=doc.policy.seed)
        result = sweep_region(spec, policy, jobs=args.jobs)
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            with (out / f"region_{result.policy}.csv").open("w") as stream:
                write_region_csv(result, stream)
        else:
            write_region_csv(result, sys.stdout)
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    mode = RadioMode.parse(args.mode)
    policy_name = args.policy or ("csf" if mode is RadioMode.HALF_DUPLEX else "greedy")
    report = oracle.run_oracle_check(
        make_policy(policy_name),
        mode,
        instances=args.instances,
        seed=args.seed,
        max_sensors=args.max_sensors,
        max_flows=args.max_flows,
        max_slots=args.max_T,
        shape=args.topology,
        tolerance=args.tolerance,
    )
    payload = {
        "policy": report.policy_name,
        "mode": report.mode.value,
        "topology": report.shape,
        "instances": report.instances,
        "tolerance": report.tolerance,
        "max_gap": report.max_gap,
        "violations": [
            {
                "gap": record.gap,
                "optimum": record.optimum,
                "achieved": record.achieved,
                "debts": dict(sorted(record.instance.debts.items())),
                "config": document_from_config(record.instance.config).model_dump(
                    by_alias=True, exclude_none=True
                ),
            }
            for record in report.violations
        ],
    }
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_scenarios(args) -> int:
    scenarios = builtin_scenarios(seed=args.seed)
    if args.name:
        if args.name not in scenarios:
            raise ConfigError(f"unknown scenario {args.name!r} (have {sorted(scenarios)})")
        doc = document_from_scenario(scenarios[args.name])
        _emit(render_json(doc), args.out)
        return EXIT_OK
    payload = {
        name: {
            "description": scenario.description,
            "config": document_from_scenario(scenario).model_dump(by_alias=True, exclude_none=True),
        }
        for name, scenario in scenarios.items()
    }
    _emit(json.dumps(payload, sort_keys=True, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schedsim",
        description="Deadline-constrained packet scheduling simulator for unreliable sensor trees",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one config and print a JSON report")
    run.add_argument("config", help="path to a JSON config document")
    run.add_argument("--policy", help="override the config's policy name")
    run.add_argument("--seed", type=int, help="override the channel seed")
    run.add_argument("--intervals", type=int, help="override the horizon")
    run.add_argument("--override", action="append", metavar="KEY=VALUE",
                     help="set any config field by dotted path, e.g. system.T=5")
    run.add_argument("--out", help="write the report here instead of stdout")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="sweep the (alpha, beta) requirement grid")
    sweep.add_argument("config", help="config document with a region section")
    sweep.add_argument("--policy", required=True,
                       help="comma-separated policy names, e.g. greedy,random,static")
    sweep.add_argument("--alpha-step", type=float, default=0.05)
    sweep.add_argument("--beta-step", type=float, default=0.05)
    sweep.add_argument("--intervals", type=int, help="override the per-point horizon")
    sweep.add_argument("--base-seed", type=int, help="override the per-point seed base")
    sweep.add_argument("--jobs", type=int, default=_default_jobs(),
                       help="parallel grid points (default: SCHEDSIM_JOBS or CPU count)")
    sweep.add_argument("--override", action="append", metavar="KEY=VALUE")
    sweep.add_argument("--out-dir", help="write region_<policy>.csv files here instead of stdout")
    sweep.set_defaults(func=cmd_sweep)

    check = sub.add_parser("oracle-check",
                           help="compare a policy against the exact optimum on random instances")
    check.add_argument("--instances", type=int, default=200)
    check.add_argument("--max-sensors", type=int, default=4)
    check.add_argument("--max-flows", type=int, default=3)
    check.add_argument("--max-T", type=int, default=5)
    check.add_argument("--mode", default="full-duplex")
    check.add_argument("--topology", choices=["tree", "path"],
                       help="instance shape (default: tree for full-duplex, path for half)")
    check.add_argument("--policy", help="policy to evaluate (default: greedy or csf by mode)")
    check.add_argument("--seed", type=int, default=0)
    check.add_argument("--tolerance", type=float, default=1e-9)
    check.add_argument("--out")
    check.set_defaults(func=cmd_oracle_check)

    scenarios = sub.add_parser("scenarios", help="print the built-in experiment configs")
    scenarios.add_argument("--name", help="print just this scenario's config document")
    scenarios.add_argument("--seed", type=int, default=0, help="reliability draw seed")
    scenarios.add_argument("--out")
    scenarios.set_defaults(func=cmd_scenarios)

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
