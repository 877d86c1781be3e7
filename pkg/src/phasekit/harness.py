"""Closed-loop scenario runner, tracking metrics, synthetic datasets, and
model-accuracy studies (input-error sensitivity, full-vs-simplified SOC).

Everything here is deterministic for fixed inputs and seed: lattice
sampling replaces random grids, reductions run in a fixed order, and CSV
values are written with shortest round-trip formatting so a file reader
recovers bit-identical numbers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .calibration import CalibrationSample, DatasetArrays, predict_ca50, predict_soc
from .control import AdaptiveController, FeedforwardController, lyapunov_value
from .engine import DEFAULT_GEOMETRY, EngineGeometry, IvcState
from .model import (
    DEFAULT_PARAMS,
    MisfireError,
    ModelParams,
    OperatingCondition,
    ca50_offset,
    soc_full_integral,
)
from .plant import CycleRecord, EnginePlant
from .scenarios import ScenarioConfig

# Error band defining "settled" per controller type: each controller's
# claimed steady-state accuracy.
SETTLING_BAND = {"adaptive": 0.1, "feedforward": 0.5}
STEADY_WINDOW = 2.0  # steady-state stats over the final seconds of a segment


@dataclass(frozen=True)
class RunMetrics:
    """Tracking metrics for one segment of a closed-loop run.

    ``settling_cycles`` counts fueled cycles up to and including the first
    one from which the error magnitude stays within the band;
    ``settling_cycles_from_start`` counts every cycle of the segment
    (including no-fuel startup cycles).  Both are None when the run never
    settles.  ``overshoot`` is the largest excursion past the reference
    against the approach direction; ``transient_peak_error`` the largest
    error magnitude anywhere in the segment.
    """

    settling_cycles: int | None
    settling_cycles_from_start: int | None
    steady_state_error_band: tuple[float, float]
    overshoot: float
    transient_peak_error: float


@dataclass(frozen=True)
class RunResult:
    config: ScenarioConfig
    records: list[CycleRecord]
    metrics: dict[str, RunMetrics]  # keys "pre", "post"
    band: float


def segment_metrics(times: list[float], errors: list[float | None],
                    band: float, steady_window: float = STEADY_WINDOW,
                    settle_after: float = -math.inf) -> RunMetrics:
    """Metrics over one segment given cycle start times and per-cycle
    tracking errors (None where the cycle did not burn).

    ``settle_after`` excludes cycles while the commanded transient is
    still in progress from the settling count (their error is tracked in
    the overshoot/peak statistics regardless).
    """
    fueled = [(t, e) for t, e in zip(times, errors) if e is not None]
    if not fueled:
        return RunMetrics(None, None, (math.nan, math.nan), math.nan, math.nan)
    errs = [e for _, e in fueled]

    countable = [i for i, (t, _) in enumerate(fueled) if t >= settle_after]
    settling = None
    for rank, i in enumerate(countable, start=1):
        if all(abs(e) <= band for e in errs[i:]):
            settling = rank
            break
    settling_from_start = None
    if settling is not None:
        first_settled_time = fueled[countable[settling - 1]][0]
        settling_from_start = sum(1 for t in times if t <= first_settled_time)

    t_end = times[-1]
    steady = [e for t, e in fueled if t >= t_end - steady_window]
    steady_band = (min(steady), max(steady)) if steady else (math.nan, math.nan)

    direction = 0.0
    for e in errs:
        if e != 0.0:
            direction = math.copysign(1.0, e)
            break
    overshoot = max(0.0, max(-direction * e for e in errs)) if direction else 0.0

    return RunMetrics(
        settling_cycles=settling,
        settling_cycles_from_start=settling_from_start,
        steady_state_error_band=steady_band,
        overshoot=overshoot,
        transient_peak_error=max(abs(e) for e in errs),
    )


def metrics_from_series(times: list[float], ca50: list[float | None],
                        ca50_ref: list[float], band: float,
                        step_time: float,
                        steady_window: float = STEADY_WINDOW,
                        transient_end: float | None = None) -> dict[str, RunMetrics]:
    """Split a run at ``step_time`` and compute per-segment metrics.

    ``transient_end`` is when the post-step commanded ramps finish
    (defaults to ``step_time``, i.e. a pure step); post-segment settling
    counts cycles from that point.  Operates on plain value series so the
    result can be reproduced from an emitted CSV alone.
    """
    errors = [None if y is None else y - r for y, r in zip(ca50, ca50_ref)]
    settle_after = {"pre": -math.inf,
                    "post": step_time if transient_end is None else transient_end}
    out = {}
    for key, keep in (("pre", lambda t: t < step_time),
                      ("post", lambda t: t >= step_time)):
        idx = [i for i, t in enumerate(times) if keep(t)]
        out[key] = segment_metrics([times[i] for i in idx],
                                   [errors[i] for i in idx],
                                   band, steady_window, settle_after[key])
    return out


def profile_transient_end(config: ScenarioConfig) -> float:
    """Time at which every commanded post-step ramp has completed."""
    end = config.step_time
    profile = config.profile
    for ramp in (profile.n, profile.egr, profile.phi, profile.p_man,
                 profile.t_man, profile.ca50_ref):
        if ramp.final != ramp.initial:
            end = max(end, ramp.start + ramp.duration)
    return end


def run_scenario(config: ScenarioConfig, csv_path: str | Path | None = None) -> RunResult:
    """Simulate the closed loop cycle by cycle for the configured duration.

    Per cycle: latch the reference from the profile at the cycle start
    time, command the controller with the previous cycle's realized
    conditions, actuate through the plant, then feed the measured CA50
    back to the controller.  Optionally writes one record row per cycle
    to ``csv_path``.
    """
    plant = EnginePlant(config.plant, config.profile, config.seed)
    nominal = plant.initial_condition()
    if config.controller == "adaptive":
        controller = AdaptiveController(nominal, config.controller_params,
                                        config.plant.geom, config.x_r_bar,
                                        config.soi_bounds,
                                        innovation_deadband=config.plant.soi_quantum / 2.0)
    else:
        controller = FeedforwardController(config.controller_params,
                                           config.plant.geom, config.x_r_bar,
                                           config.soi_bounds)
        controller.command(config.profile.ca50_ref.value(0.0), nominal)

    records: list[CycleRecord] = []
    while plant.time < config.duration:
        ref = config.profile.ca50_ref.value(plant.time)
        cmd = controller.command(ref, plant.last_condition)
        rec = plant.step_cycle(cmd)
        controller.observe(rec.ca50)
        snap = controller.state_snapshot()
        rec = replace(
            rec,
            x1_hat=None if snap is None else snap.x1_hat,
            x2_hat=None if snap is None else snap.x2_hat,
            lyapunov=None if rec.ca50 is None else lyapunov_value(ref, rec.ca50),
        )
        records.append(rec)

    band = SETTLING_BAND[config.controller]
    metrics = metrics_from_series(
        [r.time_s for r in records],
        [r.ca50 for r in records],
        [r.ca50_ref for r in records],
        band, config.step_time,
        transient_end=profile_transient_end(config))
    if csv_path is not None:
        write_records(records, csv_path)
    return RunResult(config=config, records=records, metrics=metrics, band=band)


# -- record CSV -------------------------------------------------------------

CSV_COLUMNS = ("cycle_index", "time_s", "soi_cmd", "soi_actuated", "soc", "ca50",
               "ca50_ref", "x1_hat", "x2_hat", "lyapunov", "n", "egr", "phi",
               "p_ivc", "t_ivc", "fault")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records(records: list[CycleRecord], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                r.cycle_index, _cell(r.time_s), _cell(r.soi_cmd),
                _cell(r.soi_actuated), _cell(r.soc), _cell(r.ca50),
                _cell(r.ca50_ref), _cell(r.x1_hat), _cell(r.x2_hat),
                _cell(r.lyapunov), _cell(r.cond.n), _cell(r.cond.egr),
                _cell(r.cond.phi), _cell(r.cond.ivc.p_ivc),
                _cell(r.cond.ivc.t_ivc), r.fault,
            ])


def read_record_series(path: str | Path) -> tuple[list[float], list[float | None], list[float]]:
    """Read back (times, ca50, ca50_ref) from a record CSV, for
    recomputing metrics independently of the in-memory records."""
    times: list[float] = []
    ca50: list[float | None] = []
    ref: list[float] = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            times.append(float(row["time_s"]))
            ca50.append(float(row["ca50"]) if row["ca50"] else None)
            ref.append(float(row["ca50_ref"]))
    return times, ca50, ref


# -- synthetic datasets -----------------------------------------------------

# Sampling boxes: (low, high) per channel.  "table4" covers the steady
# calibration envelope; "transient" covers the manifold conditions of the
# stock transient cases, where ignition delays run several degrees and
# the compression-state sensitivity of the model is fully expressed.
BOXES: dict[str, dict[str, tuple[float, float]]] = {
    "table4": {"n": (1200.0, 1500.0), "t_ivc": (372.6, 413.9),
               "p_ivc": (2.85, 4.38), "phi": (0.5, 0.9), "egr": (0.0, 0.5),
               "soi": (-5.0, 5.0), "x_r": (0.02, 0.06)},
    "transient": {"n": (1200.0, 1500.0), "t_ivc": (300.0, 330.0),
                  "p_ivc": (1.87, 4.07), "phi": (0.5, 0.9), "egr": (0.0, 0.5),
                  "soi": (-5.0, 5.0), "x_r": (0.02, 0.06)},
}

DEFAULT_GRID_SIZE = 516


def lattice_points(n: int, dims: int, seed: int = 0) -> np.ndarray:
    """Rank-1 lattice in [0, 1)^dims with a seeded Cranley-Patterson shift.

    Deterministic and evenly space-filling for any point count, unlike a
    product grid.
    """
    a = 149  # coprime with any n not divisible by 149
    if math.gcd(a, n) != 1:
        a = 151
    gen = np.array([pow(a, j, n) for j in range(dims)], dtype=float)
    shift = np.random.default_rng(seed).random(dims)
    i = np.arange(n, dtype=float)[:, None]
    return np.mod(i * gen[None, :] / n + shift[None, :], 1.0)


def sample_conditions(n: int = DEFAULT_GRID_SIZE, box: str = "table4",
                      seed: int = 0,
                      geom: EngineGeometry = DEFAULT_GEOMETRY) -> list[OperatingCondition]:
    """Sample ``n`` operating conditions from a named box on a lattice."""
    if box not in BOXES:
        raise ValueError(f"unknown box {box!r}, expected one of {sorted(BOXES)}")
    ranges = BOXES[box]
    u = lattice_points(n, len(ranges), seed)
    cols = {key: lo + (hi - lo) * u[:, j]
            for j, (key, (lo, hi)) in enumerate(ranges.items())}
    v_ivc = geom.v_ivc
    return [
        OperatingCondition(
            n=float(cols["n"][i]), egr=float(cols["egr"][i]),
            phi=float(cols["phi"][i]),
            ivc=IvcState(p_ivc=float(cols["p_ivc"][i]),
                         t_ivc=float(cols["t_ivc"][i]), v_ivc=v_ivc),
            x_r=float(cols["x_r"][i]), soi=float(cols["soi"][i]))
        for i in range(n)
    ]


def plant_truth_ca50(cond: OperatingCondition, params: ModelParams,
                     geom: EngineGeometry, step: float = 0.01) -> tuple[float, float]:
    """(SOC, CA50) from the full ignition-delay integral plus the
    composite burn offset: the surrogate ground truth."""
    soc = soc_full_integral(cond, params, geom, step)
    return soc, soc + ca50_offset(cond.x_d, cond.phi, params)


def gen_dataset(n: int = DEFAULT_GRID_SIZE, box: str = "table4",
                truth: str = "simplified", noise_std: float = 0.0, seed: int = 0,
                params: ModelParams = DEFAULT_PARAMS,
                geom: EngineGeometry = DEFAULT_GEOMETRY,
                oracle_step: float = 0.01) -> list[CalibrationSample]:
    """Generate a synthetic calibration dataset.

    ``truth="simplified"`` records the closed-form model's own output
    (zero-residual oracle for self-recovery tests); ``truth="full"``
    records the ignition-delay-integral truth.  Gaussian noise of
    ``noise_std`` degrees is added to the observations when requested.
    Bit-reproducible for a fixed seed.
    """
    if truth not in ("simplified", "full"):
        raise ValueError(f"unknown truth {truth!r}")
    conditions = sample_conditions(n, box, seed, geom)
    arrays = DatasetArrays(
        [CalibrationSample(cond=c, observed_ca50=0.0) for c in conditions], geom)
    if truth == "simplified":
        soc = predict_soc(arrays, params)
        ca50 = predict_ca50(arrays, params)
    else:
        pairs = [plant_truth_ca50(c, params, geom, oracle_step) for c in conditions]
        soc = np.array([p[0] for p in pairs])
        ca50 = np.array([p[1] for p in pairs])
    if noise_std > 0.0:
        rng = np.random.default_rng(seed + 1)
        soc = soc + rng.normal(0.0, noise_std, soc.size)
        ca50 = ca50 + rng.normal(0.0, noise_std, ca50.size)
    return [
        CalibrationSample(cond=c, observed_ca50=float(ca50[i]),
                          observed_soc=float(soc[i]))
        for i, c in enumerate(conditions)
    ]


# -- input-error sensitivity ------------------------------------------------

# (label, column, absolute offset); fractions are absolute fraction changes
SENSITIVITY_ROWS: tuple[tuple[str, str | None, float], ...] = (
    ("none", None, 0.0),
    ("P_IVC", "p_ivc", +0.05),
    ("P_IVC", "p_ivc", -0.05),
    ("T_IVC", "t_ivc", +5.0),
    ("T_IVC", "t_ivc", -5.0),
    ("EGR", "egr", +0.05),
    ("EGR", "egr", -0.05),
    ("phi", "phi", +0.05),
    ("phi", "phi", -0.05),
    ("X_r", "x_r", +0.03),
    ("X_r", "x_r", -0.03),
)


@dataclass(frozen=True)
class SensitivityRow:
    source: str  # corrupted input, "none" for the baseline row
    delta: float  # absolute offset applied to that input
    std_dev: float  # std of the CA50 prediction error [deg]
    max_abs_error: float  # max |error| [deg]
    change_std: float  # spread of the prediction change the offset induced [deg]
    change_max: float  # largest |prediction change| [deg]


def sensitivity(conditions: list[OperatingCondition],
                params: ModelParams = DEFAULT_PARAMS,
                geom: EngineGeometry = DEFAULT_GEOMETRY,
                oracle_step: float = 0.01) -> list[SensitivityRow]:
    """CA50 prediction-error statistics under injected input errors.

    Ground truth per condition is the surrogate plant (full integral plus
    burn offset, uncorrupted inputs).  Each row re-predicts CA50 with one
    input offset and reports the error std and max magnitude, plus the
    statistics of the per-sample prediction change itself (which, unlike
    the max error, cannot shrink through sign cancellation against the
    baseline error).  The first row is the uncorrupted baseline.
    """
    truth = np.array([plant_truth_ca50(c, params, geom, oracle_step)[1]
                      for c in conditions])
    base = DatasetArrays(
        [CalibrationSample(cond=c, observed_ca50=0.0) for c in conditions], geom)
    base_pred = predict_ca50(base, params)

    rows = []
    for label, column, delta in SENSITIVITY_ROWS:
        arrays = base
        if column is not None:
            arrays = _with_offset(base, column, delta)
        pred = predict_ca50(arrays, params)
        err = pred - truth
        change = pred - base_pred
        rows.append(SensitivityRow(
            source=label, delta=delta,
            std_dev=float(np.std(err)),
            max_abs_error=float(np.max(np.abs(err))),
            change_std=float(np.std(change)),
            change_max=float(np.max(np.abs(change)))))
    return rows


def _with_offset(base: DatasetArrays, column: str, delta: float) -> DatasetArrays:
    clone = object.__new__(DatasetArrays)
    clone.__dict__.update(base.__dict__)
    setattr(clone, column, getattr(base, column) + delta)
    return clone


def write_sensitivity(rows: list[SensitivityRow], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "delta", "std_dev", "max_abs_error",
                         "change_std", "change_max"])
        for r in rows:
            writer.writerow([r.source, _cell(r.delta), _cell(r.std_dev),
                             _cell(r.max_abs_error), _cell(r.change_std),
                             _cell(r.change_max)])


# -- full-vs-simplified comparison ------------------------------------------

@dataclass(frozen=True)
class SocComparison:
    n_points: int
    misfires: int
    soc_std: float  # std of (simplified - full) SOC error [deg]
    soc_max_abs: float
    ca50_std: float
    ca50_max_abs: float
    exceed_1cad: int  # points with |simplified - full| SOC error > 1 deg
    table: list[tuple]  # per-point rows for CSV emission


COMPARE_HEADER = ("n", "egr", "phi", "p_ivc", "t_ivc", "x_r", "soi",
                  "soc_full", "soc_simplified", "ca50_full", "ca50_simplified")


def compare_soc(conditions: list[OperatingCondition],
                params: ModelParams = DEFAULT_PARAMS,
                geom: EngineGeometry = DEFAULT_GEOMETRY,
                oracle_step: float = 0.001) -> SocComparison:
    """Sweep full-integral vs closed-form SOC (and CA50) over a grid.

    The full integral at ``oracle_step`` is the reference; misfiring
    points are skipped and counted.
    """
    base = DatasetArrays(
        [CalibrationSample(cond=c, observed_ca50=0.0) for c in conditions], geom)
    soc_simpl = predict_soc(base, params)
    ca50_simpl = predict_ca50(base, params)

    table = []
    soc_err = []
    ca50_err = []
    misfires = 0
    for i, cond in enumerate(conditions):
        try:
            soc_f, ca50_f = plant_truth_ca50(cond, params, geom, oracle_step)
        except MisfireError:
            misfires += 1
            continue
        table.append((cond.n, cond.egr, cond.phi, cond.ivc.p_ivc, cond.ivc.t_ivc,
                      cond.x_r, cond.soi, soc_f, float(soc_simpl[i]),
                      ca50_f, float(ca50_simpl[i])))
        soc_err.append(float(soc_simpl[i]) - soc_f)
        ca50_err.append(float(ca50_simpl[i]) - ca50_f)
    if not soc_err:
        raise ValueError("every grid point misfired; nothing to compare")
    soc_err_arr = np.array(soc_err)
    ca50_err_arr = np.array(ca50_err)
    return SocComparison(
        n_points=len(table),
        misfires=misfires,
        soc_std=float(np.std(soc_err_arr)),
        soc_max_abs=float(np.max(np.abs(soc_err_arr))),
        ca50_std=float(np.std(ca50_err_arr)),
        ca50_max_abs=float(np.max(np.abs(ca50_err_arr))),
        exceed_1cad=int(np.sum(np.abs(soc_err_arr) > 1.0)),
        table=table,
    )


def write_comparison(comparison: SocComparison, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARE_HEADER)
        for row in comparison.table:
            writer.writerow([_cell(float(v)) for v in row])
