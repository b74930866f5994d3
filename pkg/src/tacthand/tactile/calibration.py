"""Calibration and characterization pipeline for the barometer taxels:
cycle segmentation, polynomial transfer-function fitting, hysteresis/drift
metrics, inverse force estimation, and the dynamic and quasi-static
accuracy analyses.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .model import LoadingTrace


class CycleSegmentation(ValueError):
    """The trace did not segment into the expected number of cycles."""


class IllConditioned(ValueError):
    """Pressure span too small relative to the noise floor to fit."""


class DwellNotFound(ValueError):
    """No dwell segments in a quasi-static trace."""


class ExtrapolationWarning(UserWarning):
    """Pressure outside the calibrated span."""


@dataclass(frozen=True)
class CalibrationModel:
    poly_inverse: tuple       # highest power first, np.polyval convention
    degree: int
    r_squared: float
    p0_est: float             # hPa at which the fitted force crosses zero
    range_est: float          # N
    sensitivity_est: float    # hPa/N, slope of the degree-1 fit
    hysteresis_abs: float     # N at half range on the last cycle
    hysteresis_frac: float    # fraction of range_est
    drift_frac: float         # zero-value drift, fraction of first zero value
    pressure_span: tuple      # calibrated pressure interval


@dataclass(frozen=True)
class Cycle:
    loading: slice
    unloading: slice


def segment_cycles(trace: LoadingTrace, band_frac: float = 0.02):
    """Split a trace into loading/unloading cycles by direction changes of
    the smoothed force, with a hysteresis band of band_frac of peak force."""
    f = trace.reference_force
    if len(f) < 8:
        raise CycleSegmentation("trace too short")
    kernel = np.ones(5) / 5.0
    fs = np.convolve(f, kernel, mode="same")
    band = band_frac * float(fs.max())

    turns = [0]
    directions = []
    direction = 0
    ref = fs[0]
    ref_i = 0
    for i in range(1, len(fs)):
        dv = fs[i] - ref
        if direction == 0:
            if dv > band:
                direction = 1
                ref, ref_i = fs[i], i
            elif dv < -band:
                direction = -1
                ref, ref_i = fs[i], i
        elif direction == 1:
            if fs[i] > ref:
                ref, ref_i = fs[i], i
            elif dv < -band:
                turns.append(ref_i)
                directions.append(1)
                direction = -1
                ref, ref_i = fs[i], i
        else:
            if fs[i] < ref:
                ref, ref_i = fs[i], i
            elif dv > band:
                turns.append(ref_i)
                directions.append(-1)
                direction = 1
                ref, ref_i = fs[i], i
    turns.append(len(fs) - 1)
    directions.append(direction)

    cycles = []
    k = 0
    while k + 1 < len(turns):
        if directions[k] == 1:  # segment [turns[k], turns[k+1]] was loading
            loading = slice(turns[k], turns[k + 1] + 1)
            if k + 2 < len(turns) + 1 and k + 1 < len(directions) \
                    and directions[k + 1] == -1:
                unloading = slice(turns[k + 1], turns[k + 2] + 1)
                cycles.append(Cycle(loading=loading, unloading=unloading))
                k += 2
                continue
        k += 1
    return cycles


def _branch_pressure_at_force(trace, seg: slice, force: float) -> float:
    f = trace.reference_force[seg]
    p = trace.pressure[seg]
    order = np.argsort(f)
    return float(np.interp(force, f[order], p[order]))


def calibrate(trace: LoadingTrace, degree: int = 1,
              expected_cycles: int = 25) -> CalibrationModel:
    """Fit the inverse transfer function (pressure -> force) over all cycles
    and extract the characterization metrics.

    The sensitivity is always the slope of the degree-1 pressure-vs-force
    fit; hysteresis is the force gap between the loading and unloading
    branches of the last cycle at half range, read through the fit; drift is
    the change of the zero-value reading between the first and last cycle.
    """
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    cycles = segment_cycles(trace)
    if len(cycles) != expected_cycles:
        raise CycleSegmentation(
            f"expected {expected_cycles} cycles, found {len(cycles)}")

    f = trace.reference_force
    p = trace.pressure
    span = float(p.max() - p.min())
    noise_floor = _noise_estimate(trace)
    if span < 10.0 * noise_floor:
        raise IllConditioned(
            f"pressure span {span:.3g} hPa < 10x noise {noise_floor:.3g}")

    inv = np.polyfit(p, f, degree)
    f_hat = np.polyval(inv, p)
    ss_res = float(np.sum((f - f_hat) ** 2))
    ss_tot = float(np.sum((f - f.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot

    sens = float(np.polyfit(f, p, 1)[0])

    p_lo, p_hi = float(p.min()), float(p.max())
    p0_est = _zero_crossing(inv, p_lo, p_hi)
    range_est = float(np.polyval(inv, p_hi))

    last = cycles[-1]
    half = 0.5 * range_est
    p_load = _branch_pressure_at_force(trace, last.loading, half)
    p_unload = _branch_pressure_at_force(trace, last.unloading, half)
    hyst_abs = float(abs(np.polyval(inv, p_load)
                         - np.polyval(inv, p_unload)))

    p0_first = _cycle_zero_value(trace, cycles[0])
    p0_last = _cycle_zero_value(trace, cycles[-1])
    drift_frac = abs(p0_last - p0_first) / p0_first

    return CalibrationModel(poly_inverse=tuple(float(c) for c in inv),
                            degree=degree, r_squared=r_squared,
                            p0_est=p0_est, range_est=range_est,
                            sensitivity_est=sens, hysteresis_abs=hyst_abs,
                            hysteresis_frac=hyst_abs / range_est,
                            drift_frac=drift_frac,
                            pressure_span=(p_lo, p_hi))


def _cycle_zero_value(trace: LoadingTrace, cycle: Cycle) -> float:
    """Settled zero-force reading of one cycle: the minimum pressure over
    the cycle's near-zero-force samples (the raw turnaround sample still
    carries filter lag from the preceding unload)."""
    f = trace.reference_force[cycle.loading]
    p = trace.pressure[cycle.loading]
    near_zero = f < 0.05 * float(trace.reference_force.max())
    if not near_zero.any():
        return float(p[0])
    return float(p[near_zero].min())


def factory_calibration(model, degree: int = 1) -> CalibrationModel:
    """Idealized calibration straight from a sensor model's static map (no
    synthetic cycling): fits the inverse polynomial on a noiseless dense
    grid. Used where a transfer function is needed without running the full
    calibration protocol, e.g. inside the hand loop."""
    f = np.linspace(0.0, model.range_n, 512)
    p = model.p0 + model.pressure_of_force(f)
    inv = np.polyfit(p, f, degree)
    return CalibrationModel(poly_inverse=tuple(float(c) for c in inv),
                            degree=degree, r_squared=1.0,
                            p0_est=float(model.p0),
                            range_est=float(model.range_n),
                            sensitivity_est=float(model.sensitivity_true),
                            hysteresis_abs=0.0, hysteresis_frac=0.0,
                            drift_frac=0.0,
                            pressure_span=(float(p[0]), float(p[-1])))


def _noise_estimate(trace: LoadingTrace) -> float:
    """Noise floor from the high-frequency residual of second differences."""
    d2 = np.diff(trace.pressure, n=2)
    return float(np.std(d2) / np.sqrt(6.0)) if len(d2) else 0.0


def _zero_crossing(inv, p_lo, p_hi) -> float:
    """Pressure at which the fitted force crosses zero, nearest the low end
    of the calibrated span."""
    grid = np.linspace(p_lo - 0.1 * (p_hi - p_lo), p_hi, 4096)
    vals = np.polyval(inv, grid)
    sign_change = np.nonzero(np.diff(np.sign(vals)))[0]
    if len(sign_change) == 0:
        return p_lo
    i = sign_change[0]
    x0, x1 = grid[i], grid[i + 1]
    y0, y1 = vals[i], vals[i + 1]
    return float(x0 - y0 * (x1 - x0) / (y1 - y0))


def estimate_force(c: CalibrationModel, pressure) -> np.ndarray:
    """Apply the inverse transfer function; clamps to [0, range_est] and
    warns outside the calibrated span."""
    p = np.asarray(pressure, dtype=float)
    lo, hi = c.pressure_span
    margin = 0.02 * (hi - lo)
    if np.any(p < lo - margin) or np.any(p > hi + margin):
        warnings.warn("pressure outside calibrated span",
                      ExtrapolationWarning, stacklevel=2)
    f = np.polyval(np.asarray(c.poly_inverse), p)
    out = np.clip(f, 0.0, c.range_est)
    return float(out) if np.isscalar(pressure) else out


def characterize_dynamic(c: CalibrationModel, traces: dict) -> dict:
    """Accuracy table per loading velocity: mean and standard deviation of
    the absolute force error as percent of range."""
    table = {}
    for v in sorted(traces):
        tr = traces[v]
        dev = np.abs(estimate_force(c, tr.pressure) - tr.reference_force)
        table[v] = {"delta_f_pct": float(dev.mean() / c.range_est * 100.0),
                    "sigma_pct": float(dev.std() / c.range_est * 100.0)}
    return table


def characterize_quasistatic(c: CalibrationModel, trace: LoadingTrace,
                             min_dwell_s: float = 5.0) -> dict:
    """Relaxation split over the loaded dwell: mechanical component from the
    ground-truth force decay, sensor component from the estimated force
    decay, plus overall accuracy."""
    t = trace.timestamps
    f = trace.reference_force
    dt = float(np.median(np.diff(t)))
    rate = np.abs(np.gradient(f, dt))
    peak = float(f.max())
    # ramps run orders of magnitude faster than the relaxation decay, so a
    # generous rate threshold catches the dwell from its first sample
    dwelling = rate < 0.25 * peak

    segments = []
    start = None
    for i, d in enumerate(dwelling):
        if d and start is None:
            start = i
        elif not d and start is not None:
            segments.append((start, i))
            start = None
    if start is not None:
        segments.append((start, len(dwelling)))
    segments = [(a, b) for a, b in segments
                if t[b - 1] - t[a] >= min_dwell_s and f[a] > 0.5 * peak]
    if not segments:
        raise DwellNotFound("no loaded dwell of sufficient duration")

    a, b = segments[0]
    f_est = estimate_force(c, trace.pressure)
    r_m = (f[a] - f[b - 1]) / c.range_est * 100.0
    r_s = (f_est[a] - f_est[b - 1]) / c.range_est * 100.0

    dev = np.abs(f_est - f)
    return {"delta_f_pct": float(dev.mean() / c.range_est * 100.0),
            "sigma_pct": float(dev.std() / c.range_est * 100.0),
            "r_m_pct": float(r_m), "r_s_pct": float(r_s)}
