# cdforge/cli.py

"""Batch runner: cdforge <experiment> --config <file> [--out <dir>] [--workers k]"""

import argparse
import concurrent.futures
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from rich.console import Console
from rich.table import Table

from cdforge.analysis import fit_table, fits_by_series, predict_Tp, search_Tp, write_csv
from cdforge.configs_handler_func import EXPERIMENTS, get_final_config
from cdforge.exceptions import CdforgeError, OutOfRangeError, UsageError
from cdforge.record_generator import generate_point_records
from cdforge.result_store import (
    coefficients_frame,
    points_frame,
    traces_frame,
    trotter_frame,
    write_results_json,
)
from cdforge.task_handlers import run_point_task, simulate_fidelity
from cdforge.utils.log_generator import setup_pipeline_logger

log = setup_pipeline_logger(logger_name="Cli")

EXIT_OK = 0
EXIT_POINT_FAILED = 1
EXIT_USAGE = 2

TP_COLUMNS = ["driver", "series", "N", "F_target", "T_p_predicted", "T_p_direct"]
SCALING_EXPERIMENTS = ("scaling", "predict-tp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdforge", description="Counterdiabatic driving experiments.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, help="experiment JSON config")
    parser.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    parser.add_argument("--workers", type=int, default=None, help="parallel grid points")
    return parser


def run_points(records: List[Dict[str, Any]], final_config: Dict[str, Any], workers: int) -> List[Dict[str, Any]]:
    """Execute every record; results come back in grid order regardless of completion order."""
    if workers <= 1 or len(records) <= 1:
        return [run_point_task(record, final_config) for record in records]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(run_point_task, record, final_config) for record in records]
        return [future.result() for future in futures]


def _sites_for_qubits(final_config: Dict[str, Any], n_qubits: int) -> int:
    if final_config["path"]["kind"] == "mps":
        return n_qubits // 2
    return n_qubits


def runtime_table(records: List[Dict[str, Any]], final_config: Dict[str, Any]) -> pd.DataFrame:
    """T_p per (driver, series, N): predicted from the fits, and by direct search for verify_sizes."""
    frame = points_frame(records).rename(columns={"N": "N_sites", "N_qubits": "N"})
    _, fits = fit_table(frame)
    f_target = float(final_config["F_target"])
    t_lo, t_hi = (float(t) for t in final_config["search_T_bounds"])
    drivers = {driver["label"]: driver for driver in final_config["drivers"]}
    series_g = {record["SERIES"]: record["G"] for record in records}

    rows = []
    for (driver, series), series_fits in fits_by_series(fits).items():
        for n in sorted(set(final_config["predict_sizes"]) | set(final_config["verify_sizes"])):
            try:
                predicted = predict_Tp(series_fits, n, f_target)
            except OutOfRangeError as error:
                log.warning("Runtime prediction out of range", log_key="PredictTp", status="OUT_OF_RANGE", driver=driver, N=n, endpoints=error.grid_endpoints)
                predicted = math.nan
            direct = math.nan
            if n in final_config["verify_sizes"]:
                n_sites = _sites_for_qubits(final_config, n)
                try:
                    direct = search_Tp(
                        lambda T: simulate_fidelity(final_config, drivers[driver], n_sites, series_g[series], T),
                        f_target,
                        t_lo,
                        t_hi,
                        rel_tol=float(final_config["search_rel_tol"]),
                    )
                except CdforgeError:
                    log.exception("Direct runtime search failed", log_key="SearchTp", status="FAILED", driver=driver, N=n)
            rows.append({"driver": driver, "series": series, "N": n, "F_target": f_target, "T_p_predicted": predicted, "T_p_direct": direct})
    return pd.DataFrame(rows, columns=TP_COLUMNS)


def emit_plotdata(records: List[Dict[str, Any]], final_config: Dict[str, Any], output_dir) -> Dict[str, Path]:
    """Write one tidy CSV per figure class; an empty result set gives header-only files."""
    output_dir = Path(output_dir)
    written: Dict[str, Path] = {}
    points = points_frame(records)

    written["infidelity_vs_T"] = write_csv(points, output_dir / "infidelity_vs_T.csv")
    by_xi = points[points["path"] == "mps"].sort_values(["driver", "N", "T", "xi"], kind="mergesort")
    written["infidelity_vs_xi"] = write_csv(by_xi, output_dir / "infidelity_vs_xi.csv")
    written["fidelity_vs_cnot"] = write_csv(trotter_frame(records), output_dir / "fidelity_vs_cnot.csv")
    written["traces"] = write_csv(traces_frame(records), output_dir / "traces.csv")
    written["coefficients"] = write_csv(coefficients_frame(records), output_dir / "coefficients.csv")

    if final_config["experiment"] in SCALING_EXPERIMENTS:
        fits, _ = fit_table(points.rename(columns={"N": "N_sites", "N_qubits": "N"}))
        written["fits"] = write_csv(fits, output_dir / "fits.csv")
        written["kappa_vs_T"] = write_csv(fits[["driver", "series", "T", "kappa", "c"]], output_dir / "kappa_vs_T.csv")
    if final_config["experiment"] == "predict-tp":
        written["tp_vs_n"] = write_csv(runtime_table(records, final_config), output_dir / "tp_vs_n.csv")

    log.info("Plot data written", log_key="EmitPlotdata", status="WRITTEN", files=sorted(written))
    return written


def print_summary(records: List[Dict[str, Any]], console: Optional[Console] = None):
    console = console or Console()
    table = Table(show_header=True, header_style="bold cyan", title="cdforge run summary")
    for column in ("POINT_ID", "driver", "N", "g", "T", "tau", "status", "fidelity", "CNOTs", "seconds"):
        table.add_column(column)
    for record in records:
        fidelity = record["FIDELITY"] if record["FIDELITY"] is not None else record["FIDELITY_TROTTER"]
        status = record["POINT_STATUS"]
        table.add_row(
            record["POINT_ID"],
            record["DRIVER_LABEL"],
            str(record["N"]),
            "" if record["G"] is None else f"{record['G']:.6g}",
            f"{record['T']:g}",
            "" if record["TAU"] is None else f"{record['TAU']:g}",
            f"[green]{status}[/green]" if status == "COMPLETED" else f"[red]{status}[/red]",
            "" if fidelity is None else f"{fidelity:.10f}",
            "" if record["TOTAL_CNOTS"] is None else str(record["TOTAL_CNOTS"]),
            "" if record["DURATION_SECONDS"] is None else f"{record['DURATION_SECONDS']:.2f}",
        )
    console.print(table)


def run(final_config: Dict[str, Any], workers: Optional[int] = None) -> Tuple[int, List[Dict[str, Any]]]:
    """Run every grid point, persist results and tables, return (exit status, records)."""
    workers = int(workers or final_config.get("workers", 1))
    records = generate_point_records(final_config)
    log.info("Sweep started", log_key="Run", status="STARTED", experiment=final_config["experiment"], points=len(records), workers=workers)

    records = run_points(records, final_config, workers)
    output_dir = Path(final_config["output_dir"])
    write_results_json(records, output_dir)
    emit_plotdata(records, final_config, output_dir)

    failed = [record for record in records if record["POINT_STATUS"] != "COMPLETED"]
    for record in failed:
        log.error("Point failed", log_key="Run", status="FAILED", POINT_ID=record["POINT_ID"], error=record["ERROR"])
    status = EXIT_POINT_FAILED if failed else EXIT_OK
    log.info("Sweep finished", log_key="Run", status="COMPLETED", failed=len(failed), exit_status=status)
    return status, records


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        final_config = get_final_config(
            args.config,
            overrides={"experiment": args.experiment, "output_dir": args.out, "workers": args.workers},
        )
    except (UsageError, FileNotFoundError, ValueError) as error:
        log.error("Invalid configuration", log_key="Cli", status="USAGE_ERROR", error=str(error))
        return EXIT_USAGE

    status, records = run(final_config, args.workers)
    print_summary(records)
    return status


if __name__ == "__main__":
    sys.exit(main())
