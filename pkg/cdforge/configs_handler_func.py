# cdforge/configs_handler_func.py

import copy
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

from cdforge.exceptions import DomainError, UsageError
from cdforge.schedules_paths import SCHEDULE_KINDS, g_of_xi
from cdforge.utils.log_generator import setup_pipeline_logger

log = setup_pipeline_logger(logger_name="ConfigsHandler")

PACKAGE_DIR = Path(__file__).resolve().parent
DEFAULTS_PATH = PACKAGE_DIR / "experiment_defaults.json"
RECORD_TEMPLATE_PATH = PACKAGE_DIR / "result_record_template.json"

EXPERIMENTS = ("ising-bench", "mps-bench", "trotter-cost", "scaling", "predict-tp", "dump-coefficients")
DRIVER_KINDS = ("adiabatic", "cd")
ANSATZ_MODES = ("WNC", "NC", "EXACT")
OPTIMIZERS = ("global", "local")


def load_json_file(file_path) -> Dict[str, Any]:
    """Load and validate JSON file"""
    if not os.path.exists(file_path):
        raise FileNotFoundError(f"File not found: {file_path}")

    with open(file_path, "r") as f:
        return json.load(f)


def deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    """Nested dicts merge key by key; every other value in overrides replaces the default."""
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def replace_placeholders(config: Dict[str, Any]) -> Dict[str, Any]:
    """Replace {experiment} and {name} placeholders"""
    experiment = config.get("experiment") or ""
    name = config.get("name") or ""
    # name may itself be "{experiment}"
    name = name.replace("{experiment}", experiment)

    def replace_value(value):
        if isinstance(value, str):
            return value.replace("{experiment}", experiment).replace("{name}", name)
        elif isinstance(value, list):
            return [replace_value(item) for item in value]
        elif isinstance(value, dict):
            return {k: replace_value(v) for k, v in value.items()}
        return value

    return {key: replace_value(value) for key, value in config.items()}


def resolve_correlation_lengths(config: Dict[str, Any]) -> Dict[str, Any]:
    """Turn an xi grid into the g grid the MPS path is parameterized by."""
    grid = config["grid"]
    if config["path"].get("kind") != "mps" or not grid.get("xi"):
        return config
    if grid.get("g"):
        raise UsageError("Give either a g grid or a xi grid for the MPS path, not both")
    try:
        grid["g"] = [g_of_xi(float(xi)) for xi in grid["xi"]]
    except DomainError as error:
        raise UsageError(f"Invalid correlation length grid: {error}") from error
    log.info("Resolved correlation lengths", log_key="ConfigResolve", status="XI_TO_G", xi=grid["xi"], g=grid["g"])
    return config


def _check_output_dir(output_dir: str):
    path = Path(output_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as error:
        raise UsageError(f"Cannot create output directory {output_dir}: {error}") from error
    if not os.access(path, os.W_OK):
        raise UsageError(f"Output directory {output_dir} is not writable")


def validate_config(config: Dict[str, Any]) -> Dict[str, Any]:
    experiment = config.get("experiment")
    if experiment not in EXPERIMENTS:
        raise UsageError(f"Unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")

    path_kind = config["path"].get("kind")
    if path_kind not in ("ising", "mps"):
        raise UsageError(f"Unknown path kind {path_kind!r}")

    grid = config["grid"]
    for key in ("N", "T"):
        if not grid.get(key):
            raise UsageError(f"Grid '{key}' must be non-empty")
    if path_kind == "mps" and not grid.get("g"):
        raise UsageError("MPS path needs a non-empty g or xi grid")
    if experiment == "trotter-cost" and not grid.get("tau"):
        raise UsageError("trotter-cost needs a non-empty tau grid")
    if experiment == "mps-bench" and path_kind != "mps":
        raise UsageError("mps-bench runs on the MPS path")
    if experiment == "ising-bench" and path_kind != "ising":
        raise UsageError("ising-bench runs on the Ising path")
    if any(float(t) <= 0 for t in grid["T"]) or any(int(n) < 1 for n in grid["N"]):
        raise UsageError("Grid values for N and T must be positive")

    if config["schedule"].upper() not in SCHEDULE_KINDS:
        raise UsageError(f"Unknown schedule {config['schedule']!r}")

    drivers = config.get("drivers") or []
    if not drivers:
        raise UsageError("At least one driver must be configured")
    labels = [driver.get("label") for driver in drivers]
    if len(set(labels)) != len(labels) or any(not label for label in labels):
        raise UsageError(f"Driver labels must be present and unique, got {labels}")
    for driver in drivers:
        if driver.get("driver", "").lower() not in DRIVER_KINDS:
            raise UsageError(f"Driver {driver.get('label')!r} has unknown kind {driver.get('driver')!r}")
        if driver["driver"].lower() == "cd":
            if str(driver.get("mode", "WNC")).upper() not in ANSATZ_MODES:
                raise UsageError(f"Driver {driver['label']!r} has unknown mode {driver.get('mode')!r}")
            if str(driver.get("optimizer", "global")).lower() not in OPTIMIZERS:
                raise UsageError(f"Driver {driver['label']!r} has unknown optimizer {driver.get('optimizer')!r}")
            if int(driver.get("order", 1)) < 1:
                raise UsageError(f"Driver {driver['label']!r} needs order >= 1")

    if experiment == "predict-tp":
        if not 0.0 < float(config["F_target"]) < 1.0:
            raise UsageError("F_target must lie in (0, 1)")
        if not config.get("predict_sizes"):
            raise UsageError("predict-tp needs predict_sizes")
    if int(config.get("workers", 1)) < 1:
        raise UsageError("workers must be >= 1")

    _check_output_dir(config["output_dir"])
    return config


def update_record_template_keys_only(record_template: Dict[str, Any], updated_config: Dict[str, Any]) -> Dict[str, Any]:
    """Fill template keys whose lower-case name exists in the config; other keys keep their defaults"""
    updated_record = record_template.copy()
    for key in record_template.keys():
        if key.lower() in updated_config and not isinstance(updated_config[key.lower()], (dict, list)):
            updated_record[key] = updated_config[key.lower()]
    return updated_record


def get_final_config(config_path: str, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Complete config merging with placeholder replacement, xi resolution and validation"""
    team_config = load_json_file(config_path)
    defaults = load_json_file(DEFAULTS_PATH)
    log.info("Loaded experiment config", log_key="ConfigLoad", status="LOADED", path=str(config_path), keys=len(team_config))

    merged = deep_merge(defaults, team_config)
    if overrides:
        merged = deep_merge(merged, {k: v for k, v in overrides.items() if v is not None})

    final_config = replace_placeholders(merged)
    final_config = resolve_correlation_lengths(final_config)
    final_config = validate_config(final_config)

    record_template = load_json_file(RECORD_TEMPLATE_PATH)
    final_config["result_default_record"] = update_record_template_keys_only(record_template, final_config)

    log.info("Final config ready", log_key="ConfigLoad", status="READY", experiment=final_config["experiment"], keys=len(final_config))
    return final_config
