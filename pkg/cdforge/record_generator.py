# cdforge/record_generator.py

"""
RECORD GENERATOR FLOW:
1. Read the resolved sweep grid and driver list from final_config
2. Walk the grid in canonical order: N, g, T, tau, driver
3. Create one record per point from result_default_record
4. Fill point parameters and derived values (qubit count, xi, series label)
5. Generate a deterministic POINT_ID from the point parameters
6. Embed the resolved config for provenance
"""

import copy
import hashlib
import itertools
from typing import Any, Dict, List, Optional

from cdforge.operator_core import qubits_per_site
from cdforge.schedules_paths import MPS_LOCAL_DIM, xi_of_g
from cdforge.utils.log_generator import setup_pipeline_logger

log = setup_pipeline_logger(logger_name="RecordGenerator")

TROTTER_EXPERIMENT = "trotter-cost"


def create_base_record(final_config: Dict[str, Any]) -> Dict[str, Any]:
    """Create base record dict from result_default_record template in final_config"""
    return copy.deepcopy(final_config["result_default_record"])


def provenance_config(final_config: Dict[str, Any]) -> Dict[str, Any]:
    return {key: copy.deepcopy(value) for key, value in final_config.items() if key != "result_default_record"}


def series_label(path_kind: str, g: Optional[float]) -> str:
    if path_kind == "ising":
        return "ising"
    return f"g={g:.6g}"


def update_point_fields(record, final_config, n_sites, g, T, tau, driver):
    """Update record with the parameters of one grid point"""
    path_kind = final_config["path"]["kind"]
    bits = qubits_per_site(MPS_LOCAL_DIM) if path_kind == "mps" else 1
    xi = None
    if g is not None:
        xi = xi_of_g(g) if g > -1.0 else 0.0

    record.update({
        "EXPERIMENT": final_config["experiment"],
        "NAME": final_config["name"],
        "PATH_KIND": path_kind,
        "SERIES": series_label(path_kind, g),
        "N": int(n_sites),
        "N_QUBITS": int(n_sites) * bits,
        "G": g,
        "XI": xi,
        "T": float(T),
        "TAU": tau,
        "DRIVER_LABEL": driver["label"],
        "DRIVER": driver["driver"].upper(),
        "MODE": str(driver.get("mode", "WNC")).upper() if driver["driver"].lower() == "cd" else None,
        "ORDER": int(driver.get("order", 1)) if driver["driver"].lower() == "cd" else None,
        "OPTIMIZER": str(driver.get("optimizer", "global")).upper() if driver["driver"].lower() == "cd" else None,
    })
    return record


def generate_point_id(record: Dict[str, Any]) -> Dict[str, Any]:
    """Deterministic 16-hex id from the resolved point parameters"""
    hash_input = "*".join(
        str(record.get(key))
        for key in ("EXPERIMENT", "NAME", "PATH_KIND", "N", "G", "T", "TAU", "DRIVER_LABEL", "DRIVER", "MODE", "ORDER", "OPTIMIZER")
    )
    record["POINT_ID"] = hashlib.md5(hash_input.encode()).hexdigest()[:16]
    return record


def generate_point_records(final_config: Dict[str, Any]) -> List[Dict[str, Any]]:
    """Main record generator: one PENDING record per grid point, in canonical grid order"""
    log.info("Starting record generation", log_key="Record Generator", status="STARTED", experiment=final_config["experiment"])

    grid = final_config["grid"]
    g_values = [float(g) for g in grid["g"]] if final_config["path"]["kind"] == "mps" else [None]
    tau_values = [float(tau) for tau in grid["tau"]] if final_config["experiment"] == TROTTER_EXPERIMENT else [None]
    provenance = provenance_config(final_config)

    records = []
    seen = set()
    for n_sites, g, T, tau, driver in itertools.product(grid["N"], g_values, grid["T"], tau_values, final_config["drivers"]):
        record = create_base_record(final_config)
        record = update_point_fields(record, final_config, n_sites, g, T, tau, driver)
        record = generate_point_id(record)
        if record["POINT_ID"] in seen:
            log.warning("Duplicate grid point dropped", log_key="Record Generator", status="DUPLICATE", POINT_ID=record["POINT_ID"])
            continue
        seen.add(record["POINT_ID"])
        record["CONFIG"] = provenance
        records.append(record)

    log.info("Record generation completed", log_key="Record Generator", status="SUCCESS", count=len(records))
    return records
