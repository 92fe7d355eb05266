# cdforge/analysis.py

"""
Fidelity scaling F(N, T) = exp(-kappa(T) N - c(T)) and runtime prediction.

fit_scaling regresses -ln F on N at fixed T. predict_Tp interpolates
g(T) = kappa(T) N + c(T) linearly in (ln T, ln g) and bisects g(T) = -ln F_target.
search_Tp bisects a simulated F(T) directly and serves as the cross-check.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from cdforge.exceptions import DomainError, OutOfRangeError
from cdforge.utils.log_generator import setup_pipeline_logger

log = setup_pipeline_logger(logger_name="Analysis")

NEGATIVE_KAPPA_TOL = -1e-6
FIT_COLUMNS = ["driver", "series", "T", "kappa", "c", "residual", "n_min", "n_max", "n_points"]


@dataclass(frozen=True)
class ScalingFit:
    T: float
    kappa: float
    c: float
    residual: float
    n_range: Tuple[int, int]

    def log_infidelity(self, n: float) -> float:
        return self.kappa * n + self.c


def fit_scaling(samples: Sequence[Tuple[int, float]], T: float) -> ScalingFit:
    """Ordinary least squares of -ln F against N."""
    if len(samples) < 3:
        raise DomainError(f"Scaling fit needs at least 3 samples, got {len(samples)}")
    sizes = np.array([float(n) for n, _ in samples])
    fidelities = np.array([float(f) for _, f in samples])
    if np.any(fidelities <= 0.0):
        raise DomainError("Fidelities must be positive for a log fit")
    if np.any(fidelities > 1.0 + 1e-12):
        raise DomainError("Fidelities above 1 are not physical")

    y = -np.log(np.minimum(fidelities, 1.0))
    design = np.column_stack([sizes, np.ones_like(sizes)])
    (kappa, c), *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = float(np.max(np.abs(design @ np.array([kappa, c]) - y)))

    if kappa < NEGATIVE_KAPPA_TOL:
        log.warning("Negative error density", log_key="FitScaling", status="NEGATIVE_KAPPA", T=T, kappa=float(kappa))
    return ScalingFit(
        T=float(T),
        kappa=float(kappa),
        c=float(c),
        residual=residual,
        n_range=(int(sizes.min()), int(sizes.max())),
    )


def _is_decreasing(values: Sequence[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def predict_Tp(fits: Sequence[ScalingFit], n: float, f_target: float, rel_tol: float = 1e-6) -> float:
    """Time at which the interpolated kappa(T) N + c(T) reaches -ln f_target."""
    if not 0.0 < f_target < 1.0:
        raise DomainError(f"Target fidelity must lie in (0, 1), got {f_target}")
    if len(fits) < 2:
        raise DomainError("Runtime prediction needs fits at two or more times")
    ordered = sorted(fits, key=lambda fit: fit.T)
    times = np.array([fit.T for fit in ordered])
    values = np.array([fit.log_infidelity(n) for fit in ordered])
    target = -math.log(f_target)

    if np.any(values <= 0.0):
        log.warning("Non-positive kappa N + c on the grid; clipped for log interpolation", log_key="PredictTp", status="CLIPPED", N=n)
        values = np.maximum(values, 1e-300)
    if not _is_decreasing(list(values)):
        log.warning("kappa N + c is not monotone in T on this grid", log_key="PredictTp", status="NON_MONOTONE", N=n)

    log_t = np.log(times)
    log_g = np.log(values)
    for i in range(len(times) - 1):
        lo_val, hi_val = values[i] - target, values[i + 1] - target
        if lo_val * hi_val > 0.0:
            continue

        def excess(x: float) -> float:
            return math.exp(np.interp(x, log_t[i:i + 2], log_g[i:i + 2])) - target

        lo, hi = log_t[i], log_t[i + 1]
        f_lo = excess(lo)
        if f_lo == 0.0:
            return float(times[i])
        while math.exp(hi - lo) - 1.0 > rel_tol:
            mid = 0.5 * (lo + hi)
            f_mid = excess(mid)
            if f_mid == 0.0:
                return math.exp(mid)
            if (f_mid > 0.0) == (f_lo > 0.0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        return math.exp(0.5 * (lo + hi))

    raise OutOfRangeError(
        f"-ln F_target = {target:.6g} is not bracketed by kappa N + c on T in [{times[0]}, {times[-1]}] at N={n}",
        grid_endpoints=(float(times[0]), float(times[-1])),
    )


def search_Tp(
    simulate: Callable[[float], float],
    f_target: float,
    t_lo: float,
    t_hi: float,
    rel_tol: float = 1e-3,
    max_iter: int = 60,
) -> float:
    """Geometric bisection on a simulated F(T), assumed increasing in T."""
    f_lo, f_hi = simulate(t_lo), simulate(t_hi)
    if f_lo >= f_target:
        return float(t_lo)
    if f_hi < f_target:
        raise OutOfRangeError(
            f"F(T={t_hi}) = {f_hi:.6g} stays below the target {f_target}", grid_endpoints=(float(t_lo), float(t_hi))
        )
    for _ in range(max_iter):
        if t_hi / t_lo - 1.0 <= rel_tol:
            break
        mid = math.sqrt(t_lo * t_hi)
        if simulate(mid) >= f_target:
            t_hi = mid
        else:
            t_lo = mid
    return math.sqrt(t_lo * t_hi)


# ---------------------------------------------------------------- tables

def fit_table(frame: pd.DataFrame, group_keys: Sequence[str] = ("driver", "series", "T")) -> Tuple[pd.DataFrame, Dict[tuple, ScalingFit]]:
    """Fit every (driver, series, T) group of a results frame with columns N and fidelity."""
    rows: List[Dict] = []
    fits: Dict[tuple, ScalingFit] = {}
    if frame.empty:
        return pd.DataFrame(columns=FIT_COLUMNS), fits
    for key, group in frame.groupby(list(group_keys), sort=True):
        key = key if isinstance(key, tuple) else (key,)
        samples = list(zip(group["N"].astype(int), group["fidelity"].astype(float)))
        labels = dict(zip(group_keys, key))
        if len(samples) < 3:
            log.warning("Too few sizes for a scaling fit; group skipped", log_key="FitTable", status="SKIPPED", **labels)
            continue
        fit = fit_scaling(samples, labels["T"])
        fits[key] = fit
        rows.append(
            {
                "driver": labels.get("driver"),
                "series": labels.get("series"),
                "T": fit.T,
                "kappa": fit.kappa,
                "c": fit.c,
                "residual": fit.residual,
                "n_min": fit.n_range[0],
                "n_max": fit.n_range[1],
                "n_points": len(samples),
            }
        )
    return pd.DataFrame(rows, columns=FIT_COLUMNS), fits


def fits_by_series(fits: Dict[tuple, ScalingFit]) -> Dict[tuple, List[ScalingFit]]:
    """Regroup fits keyed (driver, series, T) into T-sorted lists per (driver, series)."""
    grouped: Dict[tuple, List[ScalingFit]] = {}
    for key, fit in fits.items():
        grouped.setdefault(tuple(key[:-1]), []).append(fit)
    return {key: sorted(items, key=lambda fit: fit.T) for key, items in sorted(grouped.items())}


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Deterministic CSV: fixed column order, no index, repr-stable floats."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    return path
