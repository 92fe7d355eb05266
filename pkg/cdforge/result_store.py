# cdforge/result_store.py

import json
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd

from cdforge.utils.log_generator import setup_pipeline_logger

log = setup_pipeline_logger(logger_name="ResultStore")

RESULTS_FILE = "results.json"

POINT_COLUMNS = {
    "PATH_KIND": "path",
    "SERIES": "series",
    "N": "N",
    "N_QUBITS": "N_qubits",
    "G": "g",
    "XI": "xi",
    "DRIVER_LABEL": "driver",
    "T": "T",
    "FIDELITY": "fidelity",
    "INFIDELITY": "infidelity",
}
TROTTER_COLUMNS = {
    "DRIVER_LABEL": "driver",
    "SERIES": "series",
    "N_QUBITS": "N_qubits",
    "T": "T",
    "TAU": "tau",
    "N_STEPS": "n_steps",
    "TOTAL_CNOTS": "total_cnots",
    "FIDELITY_TROTTER": "fidelity_trotter",
    "INFIDELITY": "infidelity_trotter",
}
TRACE_COLUMNS = ["driver", "series", "N_qubits", "T", "t", "s", "fidelity", "action"]
COEFFICIENT_COLUMNS = ["driver", "series", "N_qubits", "T", "t", "s", "group_id", "alpha"]


def update_record_fields(record: Dict[str, Any], updates: Dict[str, Any]) -> Dict[str, Any]:
    """Return a copy of record with updates applied; unknown keys are rejected"""
    unknown = set(updates) - set(record)
    if unknown:
        raise KeyError(f"Record has no fields {sorted(unknown)}")
    updated = dict(record)
    updated.update(updates)
    return updated


def write_results_json(records: List[Dict[str, Any]], output_dir) -> Path:
    path = Path(output_dir) / RESULTS_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(records, f, indent=2, sort_keys=True, allow_nan=True)
        f.write("\n")
    log.info("Results written", log_key="ResultStore", status="WRITTEN", path=str(path), count=len(records))
    return path


def read_results_json(output_dir) -> List[Dict[str, Any]]:
    with open(Path(output_dir) / RESULTS_FILE, "r") as f:
        return json.load(f)


def completed(records: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
    return [record for record in records if record["POINT_STATUS"] == "COMPLETED"]


def _frame(records: List[Dict[str, Any]], columns: Dict[str, str]) -> pd.DataFrame:
    rows = [{name: record.get(key) for key, name in columns.items()} for record in records]
    return pd.DataFrame(rows, columns=list(columns.values()))


def points_frame(records: List[Dict[str, Any]]) -> pd.DataFrame:
    """One row per completed evolution point, sorted by driver then T"""
    frame = _frame([r for r in completed(records) if r["FIDELITY"] is not None], POINT_COLUMNS)
    return frame.sort_values(["driver", "series", "N", "T"], kind="mergesort").reset_index(drop=True)


def trotter_frame(records: List[Dict[str, Any]]) -> pd.DataFrame:
    frame = _frame([r for r in completed(records) if r["TOTAL_CNOTS"] is not None], TROTTER_COLUMNS)
    return frame.sort_values(["driver", "series", "N_qubits", "tau", "T"], kind="mergesort").reset_index(drop=True)


def _nested_frame(records: List[Dict[str, Any]], field: str, columns: List[str]) -> pd.DataFrame:
    rows = []
    for record in completed(records):
        for row in record.get(field) or []:
            rows.append({
                "driver": record["DRIVER_LABEL"],
                "series": record["SERIES"],
                "N_qubits": record["N_QUBITS"],
                "T": record["T"],
                **row,
            })
    return pd.DataFrame(rows, columns=columns)


def traces_frame(records: List[Dict[str, Any]]) -> pd.DataFrame:
    return _nested_frame(records, "TRACE", TRACE_COLUMNS)


def coefficients_frame(records: List[Dict[str, Any]]) -> pd.DataFrame:
    return _nested_frame(records, "COEFFICIENTS", COEFFICIENT_COLUMNS)
