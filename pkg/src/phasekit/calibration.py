"""Batch gradient-descent fitting of the phasing-model constants to a
dataset of observed combustion phasings.

The objective is the root-mean-square CA50 prediction error over the full
batch (optionally blended with an SOC term when SOC observations exist).
One parameter update per epoch: accumulate the finite-difference gradient
over all samples, then take a backtracking step so the objective trace is
monotone nonincreasing.  Parameters are optimized in a per-parameter
scaled space because their natural magnitudes span ten decades.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import DEFAULT_GEOMETRY, EngineGeometry, IvcState, cylinder_volume
from .model import ModelParams, OperatingCondition


class DatasetError(ValueError):
    """Malformed calibration dataset file."""


class DivergenceError(RuntimeError):
    """Objective became non-finite during descent."""


@dataclass(frozen=True)
class CalibrationSample:
    """One steady-state observation: operating condition plus measured
    phasing.  ``observed_soc`` is optional; CA50 is the primary target."""

    cond: OperatingCondition
    observed_ca50: float
    observed_soc: float | None = None

    def __post_init__(self) -> None:
        if not -10.0 <= self.observed_ca50 <= 40.0:
            raise ValueError(
                f"observed CA50 {self.observed_ca50} outside sane range [-10, 40]")


@dataclass
class CalibrationOptions:
    learning_rate: float = 1.0
    max_epochs: int = 2000
    tolerance: float = 1e-8  # relative objective change over `window` epochs
    window: int = 50
    grad_step: float = 1e-6  # relative finite-difference step in scaled space
    backtrack_shrink: float = 0.5
    backtrack_grow: float = 1.3
    max_backtracks: int = 40
    soc_weight: float = 0.5  # weight of the SOC term when SOC data present


@dataclass
class CalibrationReport:
    final_params: ModelParams
    rmse_trace: list[float]  # minimized objective per epoch, [0] = initial
    per_sample_errors: np.ndarray  # final CA50 residuals [deg]
    std_dev: float
    max_abs_error: float
    rmse: float  # final CA50-only RMSE [deg]
    epochs: int
    converged: bool
    stop_reason: str = ""


class DatasetArrays:
    """Column view of a sample list, with the volume-ratio logs at each
    sample's injection angle precomputed so repeated model evaluations
    during descent stay cheap."""

    def __init__(self, samples: list[CalibrationSample],
                 geom: EngineGeometry = DEFAULT_GEOMETRY):
        if not samples:
            raise ValueError("empty dataset")
        self.geom = geom
        conds = [s.cond for s in samples]
        self.n = np.array([c.n for c in conds])
        self.egr = np.array([c.egr for c in conds])
        self.phi = np.array([c.phi for c in conds])
        self.p_ivc = np.array([c.ivc.p_ivc for c in conds])
        self.t_ivc = np.array([c.ivc.t_ivc for c in conds])
        self.x_r = np.array([c.x_r for c in conds])
        self.soi = np.array([c.soi for c in conds])
        self.lnr = np.log(np.array([c.ivc.v_ivc for c in conds])
                          / cylinder_volume(self.soi, geom))
        self.ca50_obs = np.array([s.observed_ca50 for s in samples])
        self.soc_obs = np.array([np.nan if s.observed_soc is None else s.observed_soc
                                 for s in samples])
        self.has_soc = ~np.isnan(self.soc_obs)

    def __len__(self) -> int:
        return self.n.size


def predict_soc(arrays: DatasetArrays, params: ModelParams | np.ndarray) -> np.ndarray:
    """Vectorized closed-form SOC over the dataset, with the injection-time
    state taken from the per-sample polytropic compression trace."""
    vec = params.as_array() if isinstance(params, ModelParams) else np.asarray(params)
    c1, c2, c3, c4, c5, c7, c8, c9, kc = vec
    p_soi = arrays.p_ivc * np.exp(kc * arrays.lnr)
    t_soi = arrays.t_ivc * np.exp((kc - 1.0) * arrays.lnr)
    delay = (c1 * arrays.egr + c2) * arrays.n * arrays.phi ** (-c3) * np.exp(
        c4 * p_soi**c5 / t_soi)
    return arrays.soi + delay


def predict_ca50(arrays: DatasetArrays, params: ModelParams | np.ndarray) -> np.ndarray:
    """Vectorized closed-form CA50 over the dataset."""
    vec = params.as_array() if isinstance(params, ModelParams) else np.asarray(params)
    c1, c2, c3, c4, c5, c7, c8, c9, kc = vec
    offset = c9 * (1.0 + arrays.egr + arrays.x_r) ** c7 * arrays.phi**c8
    return predict_soc(arrays, vec) + offset


def rmse(dataset: list[CalibrationSample] | DatasetArrays,
         params: ModelParams | np.ndarray,
         geom: EngineGeometry = DEFAULT_GEOMETRY) -> float:
    """Root-mean-square CA50 prediction error over a nonempty dataset [deg]."""
    arrays = dataset if isinstance(dataset, DatasetArrays) else DatasetArrays(dataset, geom)
    err = predict_ca50(arrays, params) - arrays.ca50_obs
    return float(np.sqrt(np.mean(err**2)))


def _params_valid(vec: np.ndarray) -> bool:
    c1, c2, c3, c4, c5, c7, c8, c9, kc = vec
    return (c2 > 0.0 and c1 * (1.0 - 1e-12) + c2 > 0.0 and c9 > 0.0
            and 1.0 < kc < 1.4)


def calibrate(dataset: list[CalibrationSample] | DatasetArrays,
              init: ModelParams,
              opts: CalibrationOptions | None = None,
              geom: EngineGeometry = DEFAULT_GEOMETRY) -> CalibrationReport:
    """Fit all nine constants jointly by batch gradient descent.

    Each epoch evaluates the full-batch objective gradient by central
    differences in the scaled parameter space, then applies one descent
    step sized by backtracking (halve until the objective improves, grow
    the base step after success).  Stops when the relative objective
    change over ``opts.window`` epochs falls below ``opts.tolerance``, or
    when no improving step exists (the objective has reached a steady
    value).  Deterministic: same dataset, init and options give a
    bit-identical report.
    """
    opts = opts or CalibrationOptions()
    arrays = dataset if isinstance(dataset, DatasetArrays) else DatasetArrays(dataset, geom)
    use_soc = bool(np.any(arrays.has_soc)) and opts.soc_weight > 0.0

    def objective(vec: np.ndarray) -> float:
        err = predict_ca50(arrays, vec) - arrays.ca50_obs
        j = float(np.sqrt(np.mean(err**2)))
        if use_soc:
            soc_err = (predict_soc(arrays, vec) - arrays.soc_obs)[arrays.has_soc]
            j_soc = float(np.sqrt(np.mean(soc_err**2)))
            j = (1.0 - opts.soc_weight) * j + opts.soc_weight * j_soc
        return j

    init_vec = init.as_array()
    scale = np.abs(init_vec)  # nonzero by ModelParams invariants
    z = init_vec / scale

    j_current = objective(z * scale)
    if not np.isfinite(j_current):
        raise DivergenceError(f"objective is {j_current} at the initial point")
    trace = [j_current]
    lr = opts.learning_rate
    converged = False
    reason = "max_epochs"

    for _ in range(opts.max_epochs):
        grad = np.zeros_like(z)
        for i in range(z.size):
            h = opts.grad_step * max(abs(z[i]), 1.0)
            z_plus, z_minus = z.copy(), z.copy()
            z_plus[i] += h
            z_minus[i] -= h
            grad[i] = (objective(z_plus * scale) - objective(z_minus * scale)) / (2.0 * h)
        if not np.all(np.isfinite(grad)):
            raise DivergenceError("non-finite gradient encountered")

        step = lr
        accepted = False
        for _ in range(opts.max_backtracks):
            z_new = z - step * grad
            vec_new = z_new * scale
            if _params_valid(vec_new):
                j_new = objective(vec_new)
                if not np.isfinite(j_new):
                    raise DivergenceError("objective became non-finite during descent")
                if j_new < j_current:
                    accepted = True
                    break
            step *= opts.backtrack_shrink
        if not accepted:
            # no improving step in any tried size: objective is steady
            converged = True
            reason = "steady"
            break

        z, j_current = z_new, j_new
        lr = step * opts.backtrack_grow
        trace.append(j_current)
        if len(trace) > opts.window:
            drop = trace[-opts.window - 1] - j_current
            if drop <= opts.tolerance * max(j_current, 1e-30):
                converged = True
                reason = "tolerance"
                break

    final = ModelParams.from_array(z * scale)
    residuals = predict_ca50(arrays, final) - arrays.ca50_obs
    return CalibrationReport(
        final_params=final,
        rmse_trace=trace,
        per_sample_errors=residuals,
        std_dev=float(np.std(residuals)),
        max_abs_error=float(np.max(np.abs(residuals))),
        rmse=float(np.sqrt(np.mean(residuals**2))),
        epochs=len(trace) - 1,
        converged=converged,
        stop_reason=reason,
    )


DATASET_HEADER = ("N", "EGR", "phi", "P_IVC", "T_IVC", "X_r", "SOI",
                  "SOC_obs", "CA50_obs")


def load_dataset(path: str | Path,
                 geom: EngineGeometry = DEFAULT_GEOMETRY) -> list[CalibrationSample]:
    """Read a calibration dataset CSV.

    Expected header: ``N,EGR,phi,P_IVC,T_IVC,X_r,SOI,SOC_obs,CA50_obs``.
    ``SOC_obs`` may be empty.  Malformed rows are reported with their line
    number.
    """
    path = Path(path)
    samples: list[CalibrationSample] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path}: empty file, expected header "
                               f"{','.join(DATASET_HEADER)}") from None
        if tuple(h.strip() for h in header) != DATASET_HEADER:
            raise DatasetError(f"{path}:1: bad header {header!r}, expected "
                               f"{list(DATASET_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(DATASET_HEADER):
                raise DatasetError(f"{path}:{lineno}: expected "
                                   f"{len(DATASET_HEADER)} fields, got {len(row)}")
            try:
                n, egr, phi, p_ivc, t_ivc, x_r, soi = (float(v) for v in row[:7])
                soc = float(row[7]) if row[7].strip() else None
                ca50 = float(row[8])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            try:
                cond = OperatingCondition(
                    n=n, egr=egr, phi=phi,
                    ivc=IvcState(p_ivc=p_ivc, t_ivc=t_ivc, v_ivc=geom.v_ivc),
                    x_r=x_r, soi=soi)
                samples.append(CalibrationSample(cond=cond, observed_ca50=ca50,
                                                 observed_soc=soc))
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
    if not samples:
        raise DatasetError(f"{path}: no data rows")
    return samples


def write_dataset(samples: list[CalibrationSample], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_HEADER)
        for s in samples:
            c = s.cond
            writer.writerow([
                repr(c.n), repr(c.egr), repr(c.phi), repr(c.ivc.p_ivc),
                repr(c.ivc.t_ivc), repr(c.x_r), repr(c.soi),
                "" if s.observed_soc is None else repr(s.observed_soc),
                repr(s.observed_ca50),
            ])
