"""Forward simulation of a silicone-encased barometer taxel.

The measured phenomenology is reproduced by composing, in order: the two
relaxation paths (mechanical creep on the ground-truth force, a smaller
internal creep on the force seen by the die), a first-order lag, a scalar
play operator for hysteresis, a saturation clamp at the force range, the
polynomial force-to-pressure map plus accumulated per-cycle drift, the
BMP-style IIR smoother y <- (y*c + x)/(c + 1), and Gaussian read noise.

The model integrates at an internal rate of OVERSAMPLE x sample_rate (the
IIR runs per internal step) and records samples at sample_rate. The play
radius tapers to zero below a fraction of range, closing the loop at both
ends, keeping the smallest forces detectable, and making the zero-force
reading drift-only between cycles.

Indentation maps linearly to force: stroke_mm of travel from first contact
spans the full force range.
"""

import math
from dataclasses import dataclass, field

import numpy as np

OVERSAMPLE = 10
# the commanded force counts as dwelling while it changes slower than this
# fraction of range per second; the same fraction of range scales the
# motion-driven creep reset
DWELL_RATE_FRAC = 0.02
# the play radius reaches its full value at this fraction of range
PLAY_TAPER_FRAC = 0.3


@dataclass(frozen=True)
class SensorModel:
    p0: float                    # hPa, ambient zero value
    range_n: float               # N, saturation force R
    sensitivity_true: float      # hPa/N, effective linear slope
    poly_true: tuple             # (c1,) or (c1, c2): p - p0 = c1 F + c2 F^2
    hysteresis_frac: float       # play width as a fraction of range
    drift_per_cycle: float       # hPa per completed loading cycle
    lag_time_constant: float     # s
    relax_sensor_frac: float
    relax_mech_frac: float
    relax_time_constant: float = 5.0   # s
    iir_constant: int = 3
    sample_rate: float = 100.0   # Hz
    noise_std: float = 0.05      # hPa
    stroke_mm: float = 20.0      # indentation from contact to range

    def __post_init__(self):
        if self.range_n <= 0:
            raise ValueError("range_n must be > 0")
        if not (900.0 <= self.p0 <= 1100.0):
            raise ValueError("p0 must be near ambient (900-1100 hPa)")
        if self.iir_constant < 0:
            raise ValueError("iir_constant must be >= 0")

    def pressure_of_force(self, f):
        """Static force->pressure map above p0 (no dynamics)."""
        f = np.clip(f, 0.0, self.range_n)
        p = self.poly_true[0] * f
        if len(self.poly_true) > 1:
            p = p + self.poly_true[1] * f * f
        return p

    def force_rate(self, velocity_mm_s: float) -> float:
        """N/s equivalent of an indentation velocity."""
        return velocity_mm_s / self.stroke_mm * self.range_n


@dataclass
class LoadingTrace:
    timestamps: np.ndarray       # s
    reference_force: np.ndarray  # N, ground truth
    pressure: np.ndarray         # hPa
    velocity_label: float = 0.0  # mm/s

    def __post_init__(self):
        if not (len(self.timestamps) == len(self.reference_force)
                == len(self.pressure)):
            raise ValueError("trace arrays must have equal length")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")


def _play_operator(f, radii, z0=0.0):
    """Scalar play (backlash) operator with a per-sample radius, sequential
    by nature. The radius tapers to zero at zero force so the loop closes at
    the ends and small signals stay detectable."""
    z = np.empty_like(f)
    prev = z0
    for i in range(len(f)):
        v = f[i]
        r = radii[i]
        lo = v - r
        hi = v + r
        if prev < lo:
            prev = lo
        elif prev > hi:
            prev = hi
        z[i] = prev
    return z


def _relaxation(f_cmd, dt, frac, tau, range_n):
    """Stress-relaxation creep: during dwells the state rises toward
    frac*force with time constant tau; motion re-engages the contact and
    knocks the state down in proportion to how far the force moved. Cycling
    and staircase protocols therefore stay creep-free while long holds decay
    as measured."""
    creep = np.empty_like(f_cmd)
    steps = np.empty_like(f_cmd)
    steps[1:] = np.abs(np.diff(f_cmd))
    steps[0] = 0.0
    reset_scale = DWELL_RATE_FRAC * range_n
    dwell = steps / dt < DWELL_RATE_FRAC * range_n
    c = 0.0
    k_dwell = 1.0 - math.exp(-dt / tau)
    for i in range(len(f_cmd)):
        if dwell[i]:
            c += k_dwell * (frac * f_cmd[i] - c)
        else:
            c *= math.exp(-steps[i] / reset_scale)
        creep[i] = c
    return creep


def _cycle_starts(f_cmd, range_n):
    """Indices where a new loading begins (direction flips - to +), with a
    small force hysteresis band against jitter."""
    band = 0.02 * range_n
    starts = []
    direction = 0
    ref = f_cmd[0]
    for i in range(1, len(f_cmd)):
        dv = f_cmd[i] - ref
        if direction <= 0 and dv > band:
            if direction == -1:
                starts.append(i)
            direction = 1
            ref = f_cmd[i]
        elif direction >= 0 and dv < -band:
            direction = -1
            ref = f_cmd[i]
        elif (direction == 1 and dv > 0) or (direction == -1 and dv < 0):
            ref = f_cmd[i]
    return starts


def simulate_sensor(m: SensorModel, force_fn, duration: float,
                    seed: int = 0) -> LoadingTrace:
    """Run the forward model against a commanded force profile.

    force_fn maps time (s) to commanded force (N, clamped >= 0). Returns the
    trace sampled at m.sample_rate with the mechanically-relaxed ground
    truth in reference_force.
    """
    from scipy.signal import lfilter

    if duration <= 0:
        raise ValueError("duration must be > 0")
    dt = 1.0 / (m.sample_rate * OVERSAMPLE)
    n = int(round(duration * m.sample_rate * OVERSAMPLE))
    t = np.arange(n) * dt
    f_cmd = np.clip(np.array([force_fn(ti) for ti in t], dtype=float),
                    0.0, None)

    creep_m = _relaxation(f_cmd, dt, m.relax_mech_frac,
                          m.relax_time_constant, m.range_n)
    creep_s = _relaxation(f_cmd, dt, m.relax_sensor_frac,
                          m.relax_time_constant, m.range_n)
    f_ref = np.clip(f_cmd - creep_m, 0.0, None)
    f_sens = np.clip(f_cmd - creep_s, 0.0, None)

    # first-order lag, exact discrete pole
    if m.lag_time_constant > 0:
        a_lag = math.exp(-dt / m.lag_time_constant)
        f_lag = lfilter([1.0 - a_lag], [1.0, -a_lag], f_sens,
                        zi=[a_lag * f_sens[0]])[0]
    else:
        f_lag = f_sens

    radius = 0.5 * m.hysteresis_frac * m.range_n
    radii = radius * np.minimum(1.0, f_lag / (PLAY_TAPER_FRAC * m.range_n))
    z = _play_operator(f_lag, radii)
    z = np.clip(z, 0.0, m.range_n)

    drift = np.zeros(n)
    for i in _cycle_starts(f_cmd, m.range_n):
        drift[i:] += m.drift_per_cycle

    p_pre = m.p0 + m.pressure_of_force(z) + drift

    if m.iir_constant > 0:
        c = float(m.iir_constant)
        a_iir = c / (c + 1.0)
        p_iir = lfilter([1.0 - a_iir], [1.0, -a_iir], p_pre,
                        zi=[a_iir * p_pre[0]])[0]
    else:
        p_iir = p_pre

    idx = np.arange(0, n, OVERSAMPLE)
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, m.noise_std, size=len(idx))
    return LoadingTrace(timestamps=t[idx], reference_force=f_ref[idx],
                        pressure=p_iir[idx] + noise)


def triangle_profile(m: SensorModel, cycles: int, velocity_mm_s: float,
                     f_max: float = None):
    """Commanded-force triangle cycles 0 -> f_max -> 0 at the indentation
    velocity. Returns (force_fn, duration)."""
    if f_max is None:
        f_max = 0.98 * m.range_n
    rate = m.force_rate(velocity_mm_s)
    half = f_max / rate
    period = 2.0 * half

    def fn(t):
        if t >= cycles * period:
            return 0.0
        tau = t % period
        return rate * tau if tau < half else f_max - rate * (tau - half)

    return fn, cycles * period


def calibration_cycles(m: SensorModel, cycles: int = 25,
                       velocity_mm_s: float = 10.0, seed: int = 0):
    """The linear loading/unloading protocol used for calibration."""
    fn, duration = triangle_profile(m, cycles, velocity_mm_s)
    tr = simulate_sensor(m, fn, duration, seed=seed)
    tr.velocity_label = velocity_mm_s
    return tr


def dynamic_cycles(m: SensorModel, velocities=(10.0, 25.0, 50.0, 100.0),
                   cycles: int = 5, seed: int = 0):
    """Per-velocity traces for the dynamic characterization."""
    out = {}
    for k, v in enumerate(velocities):
        fn, duration = triangle_profile(m, cycles, v)
        tr = simulate_sensor(m, fn, duration, seed=seed + 1000 + k)
        tr.velocity_label = v
        out[v] = tr
    return out


def quasistatic_profile(m: SensorModel, dwell_s: float = 20.0,
                        velocity_mm_s: float = 300.0,
                        load_frac: float = 0.9):
    """Fast ramp to load_frac*range, dwell, fast unload, dwell."""
    f_d = load_frac * m.range_n
    rate = m.force_rate(velocity_mm_s)
    t_ramp = f_d / rate
    t1_end = t_ramp + dwell_s
    t2_start = t1_end + t_ramp

    def fn(t):
        if t < t_ramp:
            return rate * t
        if t < t1_end:
            return f_d
        if t < t2_start:
            return f_d - rate * (t - t1_end)
        return 0.0

    return fn, t2_start + dwell_s


def quasistatic_trace(m: SensorModel, dwell_s: float = 20.0, seed: int = 0):
    fn, duration = quasistatic_profile(m, dwell_s)
    tr = simulate_sensor(m, fn, duration, seed=seed + 77)
    tr.velocity_label = 300.0
    return tr


@dataclass(frozen=True)
class RangeResult:
    threshold: float        # N, minimum detectable force
    range_n: float          # N, saturation force
    saturation_found: bool


class NoSaturationFound(RuntimeError):
    def __init__(self, result):
        super().__init__("saturation knee not reached; returning max tested")
        self.result = result


def determine_range(m, step_fine_mm: float = 0.01,
                    step_coarse_mm: float = 0.1, step_dwell_s: float = 0.3,
                    max_travel_factor: float = 1.3,
                    seed: int = 0) -> RangeResult:
    """Staircase indentation: fine steps until the reading deviates from the
    zero value by more than 3x the noise floor (threshold), then coarse
    steps until the pressure/force slope falls below 5% of the mid-span
    sensitivity (saturation knee).

    Accepts a SensorModel (the staircase is simulated, and forces are the
    commanded staircase levels) or a recorded staircase LoadingTrace (step
    plateaus are detected in its reference force)."""
    if isinstance(m, LoadingTrace):
        forces, p_steps, noise_std = _staircase_from_trace(m)
        return _analyze_staircase(forces, p_steps, noise_std)

    f_per_mm = m.range_n / m.stroke_mm
    depths = [0.0]
    d = 0.0
    # fine steps through the detection region, coarse steps to saturation
    while d < max_travel_factor * m.stroke_mm:
        d += step_fine_mm if d < 0.05 * m.stroke_mm else step_coarse_mm
        depths.append(d)
    forces = np.array(depths) * f_per_mm

    def fn(t):
        k = min(int(t / step_dwell_s), len(forces) - 1)
        return float(forces[k])

    tr = simulate_sensor(m, fn, len(forces) * step_dwell_s, seed=seed)
    # mean reading over the settled second half of each step
    per_step = int(round(step_dwell_s * m.sample_rate))
    p_steps = np.array([
        tr.pressure[k * per_step + per_step // 2:(k + 1) * per_step].mean()
        for k in range(len(forces))])
    return _analyze_staircase(forces, p_steps, m.noise_std)


def _staircase_from_trace(tr: LoadingTrace):
    """Step plateaus of a recorded staircase: boundaries where the reference
    force jumps clearly above its within-dwell drift."""
    f = tr.reference_force
    p = tr.pressure
    diffs = np.abs(np.diff(f))
    drift = float(np.median(diffs))
    jump = max(5.0 * drift, 1e-4 * float(f.max()), 1e-9)
    bounds = [0] + [i + 1 for i in np.nonzero(diffs > jump)[0]] + [len(f)]
    forces, p_steps = [], []
    for start, end in zip(bounds[:-1], bounds[1:]):
        if end - start >= 2:
            forces.append(float(np.median(f[start:end])))
            p_steps.append(float(np.mean(p[(start + end) // 2:end])))
    d2 = np.diff(p, n=2)
    noise = float(np.std(d2) / np.sqrt(6.0)) if len(d2) else 1e-6
    return np.array(forces), np.array(p_steps), max(noise, 1e-6)


def _analyze_staircase(forces, p_steps, noise_std) -> RangeResult:
    p_zero = p_steps[0]
    threshold = None
    for k in range(1, len(forces)):
        if abs(p_steps[k] - p_zero) > 3.0 * noise_std:
            threshold = float(forces[k])
            break
    if threshold is None:
        threshold = float(forces[-1])

    # reference sensitivity from the mid-span slopes (20..70% of the total
    # pressure rise), then the knee is the first step falling below 5% of it
    spans = p_steps - p_zero
    total = spans[-1]
    slopes = np.diff(p_steps) / np.diff(forces)
    mid = (spans[1:] > 0.2 * total) & (spans[1:] < 0.7 * total)
    if not mid.any():
        result = RangeResult(threshold=threshold, range_n=float(forces[-1]),
                             saturation_found=False)
        raise NoSaturationFound(result)
    sens_ref = float(np.median(slopes[mid]))
    range_n = None
    for k in range(1, len(forces)):
        if spans[k] > 0.3 * total and slopes[k - 1] < 0.05 * sens_ref:
            range_n = float(forces[k - 1])
            break
    if range_n is None:
        result = RangeResult(threshold=threshold, range_n=float(forces[-1]),
                             saturation_found=False)
        raise NoSaturationFound(result)
    return RangeResult(threshold=threshold, range_n=range_n,
                       saturation_found=True)


def trace_to_csv(tr: LoadingTrace) -> str:
    lines = ["t_s,f_ref_N,p_hPa,v_label_mm_s"]
    for t, f, p in zip(tr.timestamps, tr.reference_force, tr.pressure):
        lines.append(f"{t:.6f},{f:.9g},{p:.9g},{tr.velocity_label:g}")
    return "\n".join(lines) + "\n"


def trace_from_csv(text: str) -> LoadingTrace:
    rows = [ln for ln in text.strip().splitlines()[1:] if ln]
    cols = np.array([[float(v) for v in ln.split(",")] for ln in rows])
    return LoadingTrace(timestamps=cols[:, 0], reference_force=cols[:, 1],
                        pressure=cols[:, 2],
                        velocity_label=float(cols[0, 3]))
