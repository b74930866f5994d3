import math

import numpy as np
import pytest

from tacthand.plant import (MotorParams, MotorState, derive_torque_constant,
                            read_encoder, sense_current, size_actuation,
                            step_motor)


def simulate_current_step(p, u, dt, t_end, hold_rotor=True):
    """Drive the motor with a voltage step and return (t, i) arrays.

    hold_rotor pins omega = 0 so the electrical response is a pure LR step.
    """
    s = MotorState()
    ts, cur = [], []
    t = 0.0
    while t < t_end - 1e-15:
        s = step_motor(p, s, u, 0.0, dt)
        if hold_rotor:
            s = MotorState(current=s.current, rotor_speed=0.0,
                           output_angle=0.0, applied_voltage=s.applied_voltage,
                           powered=True, clamp_count=s.clamp_count)
        t += dt
        ts.append(t)
        cur.append(s.current)
    return np.array(ts), np.array(cur)


class TestStepMotor:
    def test_lr_step_reaches_99_3_percent_after_5_tau(self):
        p = MotorParams()
        tau = p.inductance / p.resistance
        assert tau == pytest.approx(37.5e-6)
        # 20 steps of 9.375 us land exactly on t = 5 tau = 187.5 us.
        t, i = simulate_current_step(p, 6.0, dt=5 * tau / 20, t_end=5 * tau)
        assert t[-1] == pytest.approx(187.5e-6)
        i_final = 6.0 / p.resistance
        assert i[-1] / i_final == pytest.approx(0.993, abs=2e-3)

    def test_lr_step_matches_analytic_everywhere(self):
        p = MotorParams()
        tau = p.inductance / p.resistance
        t, i = simulate_current_step(p, 6.0, dt=1e-5, t_end=10 * tau)
        i_final = 6.0 / p.resistance
        analytic = i_final * (1.0 - np.exp(-t / tau))
        assert np.max(np.abs(i - analytic)) < 0.005 * i_final

    def test_steady_state_matches_dc_solution(self):
        # Under constant voltage with no load the closed-form DC operating
        # point is i = (u - k_e w)/R and w from k_t i = b w.
        p = MotorParams()
        u = 3.0
        s = MotorState()
        for _ in range(30000):
            s = step_motor(p, s, u, 0.0, 1e-4)
        w_expected = p.torque_constant * u / (
            p.viscous_friction * p.resistance
            + p.torque_constant * p.backemf_constant)
        i_expected = (u - p.backemf_constant * w_expected) / p.resistance
        assert s.rotor_speed == pytest.approx(w_expected, rel=1e-6)
        assert s.current == pytest.approx(i_expected, rel=1e-6)

    def test_unpowered_angle_frozen_under_any_load(self):
        p = MotorParams()
        s = MotorState(output_angle=1.234, powered=False)
        rng = np.random.default_rng(7)
        for load in rng.uniform(-5000, 5000, size=200):
            s = step_motor(p, s, 0.0, float(load), 1e-4)
        assert s.output_angle == 1.234
        assert s.rotor_speed == 0.0
        assert s.current == 0.0

    def test_load_cannot_accelerate_rotor_from_rest(self):
        p = MotorParams()
        s = MotorState()
        s = step_motor(p, s, 0.0, 2000.0, 1e-4)
        assert s.rotor_speed == 0.0
        assert s.output_angle == 0.0

    def test_opposing_load_stalls_but_does_not_reverse(self):
        p = MotorParams()
        s = MotorState()
        # Huge opposing load: the rotor must stay at rest, never run backward.
        for _ in range(2000):
            s = step_motor(p, s, 6.0, -1.0e6, 1e-4)
            assert s.rotor_speed >= 0.0
        assert s.rotor_speed == 0.0

    def test_kinetic_energy_nonincreasing_with_zero_voltage(self):
        p = MotorParams()
        s = MotorState(rotor_speed=800.0)
        ke_prev = s.rotor_speed ** 2
        for _ in range(5000):
            s = step_motor(p, s, 0.0, 0.0, 1e-4)
            ke = s.rotor_speed ** 2
            assert ke <= ke_prev + 1e-12
            ke_prev = ke

    def test_stall_torque_consistency(self):
        # At stall with full voltage the gearbox-output torque must match
        # the data-sheet stall torque.
        p = MotorParams()
        i_stall = p.supply_voltage / p.resistance
        gearbox_torque_nmm = p.torque_constant * i_stall * p.gearbox_ratio * 1e3
        assert gearbox_torque_nmm == pytest.approx(p.gearbox_stall_torque,
                                                   rel=0.02)
        assert derive_torque_constant(p) == pytest.approx(p.torque_constant,
                                                          rel=1e-4)

    def test_voltage_clamped_and_counted(self):
        p = MotorParams()
        s = step_motor(p, MotorState(), 9.0, 0.0, 1e-4)
        assert s.applied_voltage == 6.0
        assert s.clamp_count == 1


class TestEncoder:
    def test_zero_angle_zero_counts(self):
        assert read_encoder(MotorState(), 12, MotorParams()) == 0

    def test_full_output_revolution(self):
        p = MotorParams(gearbox_ratio=75.0, worm_ratio=20.0)
        s = MotorState(output_angle=2.0 * math.pi)
        assert read_encoder(s, 12, p) == 75 * 20 * 12

    def test_half_motor_revolution(self):
        p = MotorParams()
        s = MotorState(output_angle=math.pi / p.total_ratio)
        assert read_encoder(s, 12, p) == 6


class TestSenseCurrent:
    def test_sign_destroyed(self):
        assert sense_current(MotorState(current=-0.3)) == pytest.approx(0.3)
        assert sense_current(MotorState(current=0.0)) == 0.0

    def test_always_nonnegative_over_trace(self):
        p = MotorParams()
        s = MotorState()
        rng = np.random.default_rng(3)
        for u in rng.uniform(-6, 6, size=500):
            s = step_motor(p, s, float(u), 0.0, 1e-4)
            assert sense_current(s) >= 0.0


class TestSizing:
    def test_published_design_point(self):
        r = size_actuation(2.75, 36.0, 20.0, 107.0)
        assert r.grip_force == pytest.approx(27.0, abs=0.1)
        assert r.mcp_torque == pytest.approx(971.0, abs=2.0)
        assert r.motor_torque == pytest.approx(49.0, abs=1.0)
        assert r.safety_factor == pytest.approx(2.2, abs=0.05)

    def test_unit_case(self):
        r = size_actuation(1.0, 1.0, 1.0, 1.0)
        assert r.grip_force == pytest.approx(9.81)
        assert r.mcp_torque == pytest.approx(9.81)
        assert r.motor_torque == pytest.approx(9.81)

    def test_linearity_in_payload(self):
        a = size_actuation(1.3, 36.0, 20.0, 107.0)
        b = size_actuation(2.6, 36.0, 20.0, 107.0)
        assert b.grip_force == pytest.approx(2 * a.grip_force)
        assert b.mcp_torque == pytest.approx(2 * a.mcp_torque)
        assert b.motor_torque == pytest.approx(2 * a.motor_torque)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            size_actuation(0.0, 36.0, 20.0, 107.0)
