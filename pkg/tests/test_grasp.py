import math

import numpy as np
import pytest

from tacthand.configio import load_grasp_library
from tacthand.grasp import (Busy, GraspDefinition, GraspPhase, GraspSession,
                            InvalidGrasp, NotClosing, N_UNITS)


def session(**kw):
    args = dict(position_tolerance=[3.5e-4] * N_UNITS, omega_max=0.65,
                i_lim=0.3, travel=(0.0, math.radians(100)))
    args.update(kw)
    return GraspSession(**args)


def grasp(prep=0.2, target=1.5, factors=1.0):
    return GraspDefinition(name="test", prep_position=(prep,) * N_UNITS,
                           target_position=(target,) * N_UNITS,
                           finger_speed_factor=(factors,) * N_UNITS)


class TestGraspDefinition:
    def test_shipped_library_has_the_seven_grasps(self):
        lib = load_grasp_library()
        assert set(lib) == {"Tripod", "PowerSphere", "Thumb2Finger",
                            "LateralPinch", "MediumWrap", "Pinch", "Edge"}
        for g in lib.values():
            g.validate_limits(0.0, math.radians(100))

    def test_rejects_bad_factor(self):
        with pytest.raises(InvalidGrasp):
            GraspDefinition(name="x", prep_position=(0,) * 6,
                            target_position=(1,) * 6,
                            finger_speed_factor=(0.5,) * 5 + (0.0,))

    def test_rejects_wrong_arity(self):
        with pytest.raises(InvalidGrasp):
            GraspDefinition(name="x", prep_position=(0,) * 5,
                            target_position=(1,) * 6,
                            finger_speed_factor=(1.0,) * 6)

    def test_limit_validation(self):
        g = grasp(target=3.0)
        with pytest.raises(InvalidGrasp):
            g.validate_limits(0.0, math.radians(100))


class TestSessionFlow:
    def test_velocity_limits_scale_with_factors(self):
        s = session()
        g = GraspDefinition(name="x", prep_position=(0.1,) * 6,
                            target_position=(1.0,) * 6,
                            finger_speed_factor=(1.0, 0.5) + (1.0,) * 4)
        cmds = s.start_grasp(g, global_speed=0.6)
        assert cmds[0].omega_limit == pytest.approx(0.65 * 1.0 * 0.6)
        assert cmds[1].omega_limit == pytest.approx(0.65 * 0.5 * 0.6)

    def test_busy_when_not_idle(self):
        s = session()
        s.start_grasp(grasp())
        with pytest.raises(Busy):
            s.start_grasp(grasp())

    def test_global_speed_range(self):
        s = session()
        with pytest.raises(InvalidGrasp):
            s.start_grasp(grasp(), global_speed=1.5)

    def test_full_phase_chain(self):
        s = session()
        g = grasp(prep=0.2, target=1.0)
        s.start_grasp(g)
        assert s.phase is GraspPhase.MOVING_TO_PREP
        s.on_tick(0.0, [0.2] * N_UNITS, [0.0] * N_UNITS)
        assert s.phase is GraspPhase.READY_TO_CLOSE
        cmds = s.on_tick(0.001, [0.2] * N_UNITS, [0.0] * N_UNITS)
        assert s.phase is GraspPhase.CLOSING
        assert all(c.theta_set == 1.0 for c in cmds)
        cmds = s.on_tick(0.002, [1.0] * N_UNITS, [0.0] * N_UNITS)
        assert s.phase is GraspPhase.HOLDING
        assert all(c.powered is False for c in cmds)

    def test_blocked_finger_stalls_while_others_finish(self):
        s = session()
        s.start_grasp(grasp(prep=0.0, target=1.0))
        s.on_tick(0.0, [0.0] * N_UNITS, [0.0] * N_UNITS)
        s.on_tick(0.001, [0.0] * N_UNITS, [0.0] * N_UNITS)
        assert s.phase is GraspPhase.CLOSING
        # finger 0 pinned at 0.4 rad drawing limit current; others at target
        thetas = [0.4] + [1.0] * (N_UNITS - 1)
        currents = [0.3] + [0.0] * (N_UNITS - 1)
        t = 0.002
        for _ in range(400):
            t += 0.001
            s.on_tick(t, thetas, currents)
        assert s.phase is GraspPhase.CLOSING  # waits for the operator
        assert s.stalled_units == [0]

    def test_manual_stop_only_while_closing(self):
        s = session()
        with pytest.raises(NotClosing):
            s.manual_stop()
        s.start_grasp(grasp(prep=0.1, target=1.0))
        with pytest.raises(NotClosing):
            s.manual_stop()
        s.on_tick(0.0, [0.1] * N_UNITS, [0.0] * N_UNITS)
        s.on_tick(0.001, [0.1] * N_UNITS, [0.0] * N_UNITS)
        cmds = s.manual_stop()
        assert s.phase is GraspPhase.STOPPED
        assert all(c.powered is False for c in cmds)
        with pytest.raises(NotClosing):
            s.manual_stop()


class TestStateMachineTotality:
    def test_fuzzed_event_sequences_never_undefined(self):
        rng = np.random.default_rng(12)
        for trial in range(300):
            s = session()
            t = 0.0
            for _ in range(60):
                roll = rng.random()
                t += float(rng.uniform(0.001, 0.2))
                try:
                    if roll < 0.15:
                        s.start_grasp(grasp(
                            prep=float(rng.uniform(0, 0.5)),
                            target=float(rng.uniform(0.5, 1.7))),
                            global_speed=float(rng.uniform(0.05, 1.0)))
                    elif roll < 0.25:
                        s.manual_stop()
                    elif roll < 0.30:
                        s.reset()
                    else:
                        s.on_tick(t,
                                  rng.uniform(0, 1.8, N_UNITS).tolist(),
                                  rng.uniform(-0.4, 0.4, N_UNITS).tolist())
                except (Busy, NotClosing, InvalidGrasp):
                    pass  # defined rejections are fine
                assert isinstance(s.phase, GraspPhase)
