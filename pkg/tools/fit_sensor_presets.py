#!/usr/bin/env python3
"""Fit the per-finger sensor-model constants against each prototype's
published characteristics (range, zero value, sensitivity, hysteresis,
velocity-dependent accuracy, dwell relaxation split) and emit the preset
YAML.

Derivations, then one numeric correction pass each:
  - stroke: the accuracy-vs-velocity slope is (iir lag + sensor lag)/stroke,
    so stroke = 100 * tau_total / slope_target with lag fixed at 2 ms.
  - hysteresis width: recovered hysteresis = play width + lag widening;
    initialized at the target and corrected after a synthetic calibration.
  - drift per cycle: 24 increments spanning the drift target (0.6% of zero
    value, the middle of the published 0.2..1% band).
  - relaxation fractions: r = frac * load_frac * (1 - exp(-dwell/tau)),
    inverted for the targets, then corrected after a synthetic run.
  - quadratic shaping (index, thumb): c2 = kappa*c1_eq/R with kappa = 0.25;
    the linear-equivalent slope c1 + c2*Fmax is held at the target
    sensitivity.

Run:  python3 tools/fit_sensor_presets.py
Writes src/tacthand/data/sensors.yaml.
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tacthand.tactile import (SensorModel, calibrate, calibration_cycles,
                              characterize_dynamic, characterize_quasistatic,
                              determine_range, dynamic_cycles,
                              quasistatic_trace)

# published per-prototype characteristics the presets must reproduce
TARGETS = {
    "pinky":  dict(range_n=4.30, zero_hpa=995.0, sens=246.97, hyst_pct=2.16,
                   dyn=[1.06, 1.70, 2.27, 3.67], r_m=14.43, r_s=12.68,
                   degree=1),
    "ring":   dict(range_n=4.57, zero_hpa=973.0, sens=201.54, hyst_pct=2.28,
                   dyn=[1.41, 1.97, 2.33, 3.59], r_m=15.58, r_s=12.46,
                   degree=1),
    "middle": dict(range_n=3.66, zero_hpa=989.0, sens=298.75, hyst_pct=2.83,
                   dyn=[1.36, 2.04, 2.53, 3.99], r_m=15.20, r_s=12.24,
                   degree=1),
    "index":  dict(range_n=9.46, zero_hpa=1008.0, sens=103.47, hyst_pct=2.96,
                   dyn=[1.49, 2.00, 2.45, 3.89], r_m=13.12, r_s=7.51,
                   degree=2),
    "thumb":  dict(range_n=2.32, zero_hpa=974.0, sens=462.08, hyst_pct=1.75,
                   dyn=[1.26, 1.59, 2.44, 3.69], r_m=37.99, r_s=15.05,
                   degree=2),
}

LAG_S = 0.002
TAU_IIR = -0.001 / math.log(3.0 / 4.0)
DRIFT_TARGET_FRAC = 0.006
QUAD_KAPPA = 0.25
DWELL_S = 20.0
LOAD_FRAC = 0.9
TAU_RELAX = 5.0


def build_model(t, stroke, w_frac, drift_pc, frac_m, frac_s, sens_scale=1.0):
    s = t["sens"] * sens_scale
    if t["degree"] == 1:
        poly = (s,)
    else:
        c2 = QUAD_KAPPA * s / t["range_n"]
        poly = (s - c2 * 0.98 * t["range_n"], c2)
    return SensorModel(p0=t["zero_hpa"], range_n=t["range_n"],
                       sensitivity_true=t["sens"], poly_true=poly,
                       hysteresis_frac=w_frac, drift_per_cycle=drift_pc,
                       lag_time_constant=LAG_S, relax_sensor_frac=frac_s,
                       relax_mech_frac=frac_m,
                       relax_time_constant=TAU_RELAX, stroke_mm=stroke)


def measure(m, t):
    tr = calibration_cycles(m, seed=3)
    cal = calibrate(tr, degree=t["degree"])
    dyn = characterize_dynamic(cal, dynamic_cycles(m, seed=5))
    qs = characterize_quasistatic(cal, quasistatic_trace(m, seed=7))
    return cal, dyn, qs


def fit_finger(name, t):
    slope = (t["dyn"][3] - t["dyn"][0]) / 90.0
    stroke = 100.0 * (TAU_IIR + LAG_S) / slope
    # published hysteresis, capped so the recovered value stays safely
    # below the 3%-of-range bound
    h_target = min(t["hyst_pct"], 2.85) / 100.0
    w_frac = h_target
    drift_pc = DRIFT_TARGET_FRAC * t["zero_hpa"] / 24.0
    settle = LOAD_FRAC * (1.0 - math.exp(-DWELL_S / TAU_RELAX))
    frac_m = t["r_m"] / 100.0 / settle
    frac_s = t["r_s"] / 100.0 / settle
    sens_scale = 1.0

    # iterative correction: hysteresis width, sensitivity scale, relax
    # fractions, and the stroke setting the accuracy-vs-velocity slope
    m = build_model(t, stroke, w_frac, drift_pc, frac_m, frac_s)
    cal, dyn, qs = measure(m, t)
    for _ in range(3):
        w_frac = max(w_frac + (h_target - cal.hysteresis_frac), 1e-4)
        sens_scale *= t["sens"] / cal.sensitivity_est
        frac_m *= t["r_m"] / qs["r_m_pct"]
        frac_s *= t["r_s"] / qs["r_s_pct"]
        vels = sorted(dyn)
        slope_meas = (dyn[vels[-1]]["delta_f_pct"]
                      - dyn[vels[0]]["delta_f_pct"]) / (vels[-1] - vels[0])
        stroke *= slope_meas / slope
        m = build_model(t, stroke, w_frac, drift_pc, frac_m, frac_s,
                        sens_scale)
        cal, dyn, qs = measure(m, t)

    rng = determine_range(m)
    vels = sorted(dyn)
    print(f"{name:7s} sens {cal.sensitivity_est:8.2f}/{t['sens']:8.2f}  "
          f"R2 {cal.r_squared:.5f}  h {cal.hysteresis_frac*100:.2f}/"
          f"{t['hyst_pct']:.2f}%  drift {cal.drift_frac*100:.2f}%  "
          f"dF {[round(dyn[v]['delta_f_pct'], 2) for v in vels]} "
          f"vs {t['dyn']}  r_m {qs['r_m_pct']:.2f}/{t['r_m']:.2f}  "
          f"r_s {qs['r_s_pct']:.2f}/{t['r_s']:.2f}  "
          f"range {rng.range_n:.3f}/{t['range_n']:.2f}  "
          f"thr {rng.threshold:.4f}")
    return m


def main():
    out = ["# Per-finger taxel presets: constants fitted by",
           "# tools/fit_sensor_presets.py to each prototype's published",
           "# characteristics (all values below are fitted, not measured).",
           "sensors:"]
    for name, t in TARGETS.items():
        m = fit_finger(name, t)
        out.append(f"  {name}:")
        out.append(f"    p0: {m.p0}")
        out.append(f"    range_n: {m.range_n}")
        out.append(f"    sensitivity_true: {m.sensitivity_true}")
        out.append(f"    poly_true: [{', '.join(repr(c) for c in m.poly_true)}]")
        out.append(f"    hysteresis_frac: {m.hysteresis_frac!r}")
        out.append(f"    drift_per_cycle: {m.drift_per_cycle!r}")
        out.append(f"    lag_time_constant: {m.lag_time_constant!r}")
        out.append(f"    relax_sensor_frac: {m.relax_sensor_frac!r}")
        out.append(f"    relax_mech_frac: {m.relax_mech_frac!r}")
        out.append(f"    relax_time_constant: {m.relax_time_constant!r}")
        out.append(f"    iir_constant: {m.iir_constant}")
        out.append(f"    sample_rate: {m.sample_rate!r}")
        out.append(f"    noise_std: {m.noise_std!r}")
        out.append(f"    stroke_mm: {m.stroke_mm!r}")
        out.append(f"    fit_degree: {t['degree']}")
    path = Path(__file__).resolve().parents[1] / "src/tacthand/data/sensors.yaml"
    path.write_text("\n".join(out) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
