#!/usr/bin/env python3
"""Gain tuning for the cascaded controller against the default plant.

Procedure (documented, reproducible):
  1. Current loop: PI by pole-zero cancellation on the winding model
     G(s) = (1/R)/(tau s + 1) with tau = L/R. Setting ki/kp = R/L turns the
     loop into an integrator with crossover w_c = kp/L; kp = L*w_c.
     Target crossover: 500 Hz (inner rate / 20).
  2. Velocity loop: P+I on the mechanical model w/i = k_t/(J s + b) reflected
     to the output shaft. kp sets crossover w_c,vel = kp*k_t*N/J (N = total
     reduction); integrator corner a decade below. Target: 8 Hz.
  3. Position loop: P gain set for a first-order response a half-decade below
     the velocity loop. The omega limit dominates large moves by design.
  4. Verify: closed-loop step checks (current tracking, position overshoot
     < 10%) against the simulated plant; print the verdicts.

Run:  python3 tools/tune_gains.py
Paste the printed gains into src/tacthand/data/controller.yaml.
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tacthand.control import (ControllerConfig, ControllerState, Mode,
                              PlantMeasurement, scheduler_step)
from tacthand.plant import MotorParams, MotorState, sense_current, step_motor


def design_gains(p: MotorParams) -> dict:
    tau_e = p.inductance / p.resistance
    n = p.total_ratio

    w_c_cur = 2.0 * math.pi * 500.0
    kp_cur = p.inductance * w_c_cur
    ki_cur = kp_cur * p.resistance / p.inductance

    # omega here is output-shaft speed: plant gain k_t*N/(J s + b) per amp.
    w_c_vel = 2.0 * math.pi * 8.0
    kp_vel = w_c_vel * p.rotor_inertia / (p.torque_constant * n) * n * n
    # equivalently w_c_vel * J_reflected / k_t_reflected with J_r = J*N^2,
    # k_t_r = k_t*N (both at the output shaft)
    ki_vel = kp_vel * w_c_vel / 5.0
    kd_vel = 0.0008  # token damping; encoder-difference velocity is quantized

    kp_pos = w_c_vel / 3.0

    return dict(kp_pos=kp_pos, kp_vel=kp_vel, ki_vel=ki_vel, kd_vel=kd_vel,
                kp_cur=kp_cur, ki_cur=ki_cur, tau_e=tau_e)


def run_closed_loop(cfg: ControllerConfig, p: MotorParams, duration: float,
                    setpoint: float):
    st = ControllerState()
    if cfg.mode is Mode.POSITION:
        st.theta_set = setpoint
    elif cfg.mode is Mode.VELOCITY:
        st.omega_set = setpoint
    else:
        st.i_set = setpoint
    s = MotorState()
    dt = 1.0 / cfg.rate_inner
    hist = []
    u = 0.0
    n = int(round(duration / dt))
    for k in range(n):
        meas = PlantMeasurement(theta_raw=s.output_angle,
                                omega_raw=s.rotor_speed / p.total_ratio,
                                i_raw_abs=sense_current(s))
        u = scheduler_step(cfg, st, meas, dt)
        s = step_motor(p, s, u, 0.0, dt)
        hist.append((k * dt, s.output_angle, s.rotor_speed / p.total_ratio,
                     s.current, u))
    return hist


def main():
    p = MotorParams()
    g = design_gains(p)
    print("designed gains:")
    for k, v in g.items():
        print(f"  {k} = {v:.6g}")

    cfg = ControllerConfig(kp_pos=g["kp_pos"], kp_vel=g["kp_vel"],
                           ki_vel=g["ki_vel"], kd_vel=g["kd_vel"],
                           kp_cur=g["kp_cur"], ki_cur=g["ki_cur"],
                           mode=Mode.CURRENT)
    hist = run_closed_loop(cfg, p, 0.02, 0.3)
    i_at_10ms = [h[3] for h in hist if abs(h[0] - 0.010) < 1e-9][0]
    print(f"current step: i(10ms) = {i_at_10ms:.4f} A (target 0.3 +- 2%)")

    cfg = ControllerConfig(kp_pos=g["kp_pos"], kp_vel=g["kp_vel"],
                           ki_vel=g["ki_vel"], kd_vel=g["kd_vel"],
                           kp_cur=g["kp_cur"], ki_cur=g["ki_cur"],
                           mode=Mode.VELOCITY)
    hist = run_closed_loop(cfg, p, 0.5, 0.5)
    w_end = hist[-1][2]
    w_max = max(h[2] for h in hist)
    print(f"velocity step: w(0.5s) = {w_end:.4f} rad/s, peak {w_max:.4f} "
          f"(target 0.5, overshoot < 10%)")

    cfg = ControllerConfig(kp_pos=g["kp_pos"], kp_vel=g["kp_vel"],
                           ki_vel=g["ki_vel"], kd_vel=g["kd_vel"],
                           kp_cur=g["kp_cur"], ki_cur=g["ki_cur"],
                           mode=Mode.POSITION)
    hist = run_closed_loop(cfg, p, 2.0, 0.8)
    th_end = hist[-1][1]
    th_max = max(h[1] for h in hist)
    overshoot = (th_max - 0.8) / 0.8 * 100
    print(f"position step: th(2s) = {th_end:.5f} rad, peak {th_max:.5f} "
          f"({overshoot:.2f}% overshoot, target < 10%)")


if __name__ == "__main__":
    main()
