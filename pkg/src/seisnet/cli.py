"""Headless scenario runner: reproducible artifacts from a scenario JSON.

Exit codes: 0 success, 1 convergence failure (artifacts still written),
2 configuration error.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .errors import ConfigError
from .io import write_convergence_csv, write_grid, write_json, write_picks_csv
from .model import Scenario
from .pipelines import make_run

__all__ = ["run_scenario", "main"]


def _parse_override(text):
    if "=" not in text:
        raise ConfigError("--set", f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _apply_override(data, key, value):
    parts = key.split(".")
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(key, "override path crosses a non-object value")
    node[parts[-1]] = value


def load_scenario(config_path, overrides=(), pipeline=None, seed=None):
    try:
        data = json.loads(Path(config_path).read_text())
    except FileNotFoundError:
        raise ConfigError("scenario", f"file not found: {config_path}")
    except json.JSONDecodeError as exc:
        raise ConfigError("scenario", f"invalid JSON: {exc}")
    for item in overrides:
        key, value = _parse_override(item)
        _apply_override(data, key, value)
    if pipeline is not None:
        data["pipeline"] = pipeline
    if seed is not None:
        data["seed"] = seed
    return Scenario.from_json_dict(data), data


def run_scenario(config_path, out_dir, overrides=(), pipeline=None, seed=None):
    """Run a scenario to completion and write all artifacts under out_dir.

    Returns (manifest dict, exit code).
    """
    scenario, resolved = load_scenario(config_path, overrides, pipeline, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "scenario_resolved.json", scenario.to_json_dict())

    run = make_run(scenario)
    while run.advance_round():
        pass
    artifacts = run.artifacts()

    outputs = ["scenario_resolved.json"]
    for name, (values, extra) in sorted(artifacts["images"].items()):
        write_grid(out / name, values, run.grid.spacing, run.grid.origin, extra=extra)
        outputs += [f"{name}.f32", f"{name}.json"]
    write_convergence_csv(out / "convergence.csv", artifacts["convergence"])
    outputs.append("convergence.csv")
    write_picks_csv(out / "picks.csv", artifacts["picks"])
    outputs.append("picks.csv")
    write_json(out / "net_stats.json", artifacts["net_stats"])
    outputs.append("net_stats.json")

    canonical = json.dumps(scenario.to_json_dict(), sort_keys=True).encode()
    converged = bool(artifacts["metrics"].get("converged", True))
    manifest = {
        "scenario_hash": hashlib.sha256(canonical).hexdigest(),
        "seed": scenario.seed,
        "pipeline": scenario.pipeline,
        "outputs": sorted(outputs),
        "metrics": artifacts["metrics"],
        "converged": converged,
    }
    write_json(out / "manifest.json", manifest)
    return manifest, 0 if converged else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="seisnet", description="Run an imaging scenario headlessly."
    )
    parser.add_argument("--scenario", required=True, help="scenario JSON file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="dotted-path config override (repeatable)",
    )
    parser.add_argument("--pipeline", choices=("TOMO_TT", "MMI", "ANSI"))
    parser.add_argument("--seed", type=int)
    args = parser.parse_args(argv)
    try:
        manifest, code = run_scenario(
            args.scenario, args.out, args.overrides, args.pipeline, args.seed
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(manifest["metrics"], sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
