# cdforge/task_handlers.py

"""One task per experiment kind; each runs a single grid point and fills its record."""

from dataclasses import asdict
from typing import Any, Dict, Optional

from cdforge.dynamics import EvolutionConfig, evolve, trotter_evolve
from cdforge.result_store import update_record_fields
from cdforge.schedules_paths import build_path
from cdforge.utils.log_generator import setup_pipeline_logger
from cdforge.utils.time_utility import calculate_duration_seconds, get_current_time_iso

log = setup_pipeline_logger(logger_name="TaskHandlers")


def path_for(final_config: Dict[str, Any], n_sites: int, g: Optional[float] = None):
    path_config = dict(final_config["path"])
    if path_config["kind"] == "mps":
        path_config.update({"N_p": n_sites, "g": g, "xi": None})
    else:
        path_config["N"] = n_sites
    return build_path(path_config, cap=int(final_config["dense_cap"]))


def evolution_config_for(final_config: Dict[str, Any], driver: Dict[str, Any], T: float) -> EvolutionConfig:
    return EvolutionConfig(
        total_time=float(T),
        driver=driver["driver"],
        mode=driver.get("mode", "WNC"),
        order=int(driver.get("order", 1)),
        optimizer=driver.get("optimizer", "global"),
        region_width=int(driver.get("region_width", final_config["region_width"])),
        region_stride=int(driver.get("region_stride", final_config["region_stride"])),
        dt=float(final_config["dt"]),
        substeps=int(final_config["substeps"]),
        schedule=final_config["schedule"],
        krylov_tol=float(final_config["krylov_tol"]),
        krylov_max_dim=int(final_config["krylov_max_dim"]),
        dense_cap=int(final_config["dense_cap"]),
        ds=float(final_config["ds"]),
        max_window_sites=int(final_config["max_window_sites"]),
        track_action=bool(final_config["write_traces"]) or final_config["experiment"] == "dump-coefficients",
        record_coefficients=bool(final_config["record_coefficients"]) or final_config["experiment"] == "dump-coefficients",
    )


def _driver_of(record: Dict[str, Any], final_config: Dict[str, Any]) -> Dict[str, Any]:
    return next(driver for driver in final_config["drivers"] if driver["label"] == record["DRIVER_LABEL"])


def simulate_fidelity(final_config: Dict[str, Any], driver: Dict[str, Any], n_sites: int, g: Optional[float], T: float) -> float:
    """Final fidelity of one evolution; used by the direct runtime search."""
    return evolve(path_for(final_config, n_sites, g), evolution_config_for(final_config, driver, T)).fidelity


def evolution_task(record: Dict[str, Any], final_config: Dict[str, Any]) -> Dict[str, Any]:
    """Exact propagation of one (N, g, T, driver) point"""
    driver = _driver_of(record, final_config)
    config = evolution_config_for(final_config, driver, record["T"])
    result = evolve(path_for(final_config, record["N"], record["G"]), config)

    updates = {"FIDELITY": result.fidelity, "INFIDELITY": 1.0 - result.fidelity, "N_STEPS": result.n_steps}
    if final_config["write_traces"] or final_config["experiment"] == "dump-coefficients":
        updates["TRACE"] = [asdict(row) for row in result.trace]
    if config.record_coefficients:
        updates["COEFFICIENTS"] = [asdict(row) for row in result.coefficients]
    return update_record_fields(record, updates)


def trotter_task(record: Dict[str, Any], final_config: Dict[str, Any]) -> Dict[str, Any]:
    """Product-formula propagation with CNOT accounting"""
    driver = _driver_of(record, final_config)
    config = evolution_config_for(final_config, driver, record["T"])
    _, report = trotter_evolve(path_for(final_config, record["N"], record["G"]), config, tau=record["TAU"])
    return update_record_fields(
        record,
        {
            "N_STEPS": report.n_steps,
            "TOTAL_CNOTS": report.total_cnots,
            "FIDELITY_TROTTER": report.fidelity_trotter,
            "INFIDELITY": 1.0 - report.fidelity_trotter,
        },
    )


EXPERIMENT_TASKS = {
    "ising-bench": evolution_task,
    "mps-bench": evolution_task,
    "scaling": evolution_task,
    "predict-tp": evolution_task,
    "dump-coefficients": evolution_task,
    "trotter-cost": trotter_task,
}


def run_point_task(record: Dict[str, Any], final_config: Dict[str, Any]) -> Dict[str, Any]:
    """Run one point; failures are recorded on the record and never abort the sweep"""
    timezone = final_config.get("timezone", "UTC")
    started_at = get_current_time_iso(timezone)
    record = update_record_fields(record, {"STARTED_AT": started_at, "POINT_STATUS": "IN_PROGRESS"})
    log.info("Point started", log_key="RunPoint", status="STARTED", POINT_ID=record["POINT_ID"], driver=record["DRIVER_LABEL"], N=record["N"], T=record["T"])

    try:
        record = EXPERIMENT_TASKS[final_config["experiment"]](record, final_config)
        status, error = "COMPLETED", None
    except Exception as exc:
        log.exception("Point failed", log_key="RunPoint", status="FAILED", POINT_ID=record["POINT_ID"])
        status, error = "FAILED", f"{type(exc).__name__}: {exc}"

    finished_at = get_current_time_iso(timezone)
    record = update_record_fields(
        record,
        {
            "POINT_STATUS": status,
            "ERROR": error,
            "FINISHED_AT": finished_at,
            "DURATION_SECONDS": calculate_duration_seconds(started_at, finished_at),
        },
    )
    log.info("Point finished", log_key="RunPoint", status=status, POINT_ID=record["POINT_ID"], fidelity=record.get("FIDELITY"))
    return record
