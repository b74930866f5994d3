"""Whole-hand simulation: six actuation units (controller + motor each),
five fingertip taxels, the grasp session, the command queue and the
telemetry stream, advanced on a fixed 1 kHz outer / 10 kHz inner clock.

Per outer tick, in this order: drain the command queue, tick the grasp
session, refresh contact loads, read the encoders (position at the outer
rate, velocity from an 8-tick encoder difference), run the fused inner loop
(current control + plant at the inner rate, absolute current sensed fresh
every inner tick), step the taxels at the tactile bus rate, then poll the
telemetry scheduler. The inner loop inlines the controller and plant
arithmetic for speed; tests assert bit-equality against the module-level
operations.

An unpowered unit is skipped entirely (worm self-locking freezes it; the
open H-bridge carries no current) and its controller state is cleared so a
later re-power starts clean.
"""

import math
from dataclasses import replace

from . import configio
from .control import ControllerState, Mode
from .grasp import GraspPhase, GraspSession, InvalidGrasp, N_UNITS
from .plant import MotorState, read_encoder
from .protocol import (ExecuteGrasp, ParseError, QueryState, SetMode,
                       SetParam, SetSetpoint, Stop, TelemetryScheduler,
                       parse_console)
from .tactile.calibration import estimate_force, factory_calibration
from .tactile.model import PLAY_TAPER_FRAC

OMEGA_WINDOW = 8  # outer ticks per encoder-difference velocity estimate
MODE_MAP = {"pos": Mode.POSITION, "vel": Mode.VELOCITY, "cur": Mode.CURRENT}


class OnlineTaxel:
    """Streaming version of the taxel model for the in-hand tactile bus:
    same constants as the batch simulator, stepped at the bus rate."""

    def __init__(self, model, rng, dt):
        self.m = model
        self.rng = rng
        self.dt = dt
        self.lag = 0.0
        self.play = 0.0
        self.creep = 0.0
        self.prev_force = 0.0
        self.iir = model.p0
        self.pressure = model.p0
        self._a_lag = (math.exp(-dt / model.lag_time_constant)
                       if model.lag_time_constant > 0 else 0.0)
        c = float(model.iir_constant)
        self._a_iir = c / (c + 1.0) if model.iir_constant > 0 else 0.0
        self._k_dwell = 1.0 - math.exp(-dt / model.relax_time_constant)

    def step(self, force):
        m = self.m
        step = abs(force - self.prev_force)
        self.prev_force = force
        if step / self.dt < 0.02 * m.range_n:
            self.creep += self._k_dwell * (m.relax_sensor_frac * force
                                           - self.creep)
        else:
            self.creep *= math.exp(-step / (0.02 * m.range_n))
        f_sens = max(force - self.creep, 0.0)
        self.lag = f_sens + (self.lag - f_sens) * self._a_lag
        radius = (0.5 * m.hysteresis_frac * m.range_n
                  * min(1.0, self.lag / (PLAY_TAPER_FRAC * m.range_n)))
        self.play = min(max(self.play, self.lag - radius), self.lag + radius)
        z = min(max(self.play, 0.0), m.range_n)
        p = m.p0 + float(m.pressure_of_force(z))
        self.iir = self._a_iir * self.iir + (1.0 - self._a_iir) * p
        self.pressure = self.iir + self.rng.normal(0.0, m.noise_std)
        return self.pressure


class Unit:
    def __init__(self, name, motor_params, controller_cfg, cpr, taxel, cal):
        self.name = name
        self.p = motor_params
        self.s = MotorState()
        self.cfg = controller_cfg
        self.cst = ControllerState()
        self.cpr = cpr
        self.base_omega_lim = controller_cfg.omega_lim
        self.taxel = taxel
        self.cal = cal
        self.enc_hist = [0] * (OMEGA_WINDOW + 1)
        self.theta_raw = 0.0
        self.omega_raw = 0.0
        self.load_nmm = 0.0
        self.contact_force = 0.0
        self.force_n = 0.0

    @property
    def count_rad(self):
        return 2.0 * math.pi / (self.cpr * self.p.total_ratio)


class HandSimulation:
    def __init__(self, seed: int = 0, contact_provider=None,
                 geometry=None, grasp_library=None, debug_unit=None):
        import numpy as np

        hand_cfg = configio.load_hand_config()
        self.geometry = geometry or configio.load_geometry()
        self.grasps = grasp_library or configio.load_grasp_library()
        sensors = configio.load_sensors()
        cpr = configio.load_encoder_cpr()
        self.dt_outer = 1.0 / configio.load_controller().rate_outer
        tactile_every = int(round(configio.load_controller().rate_outer
                                  / hand_cfg["tactile_rate"]))
        self._tactile_every = tactile_every
        self._tactile_dt = tactile_every * self.dt_outer

        self.units = []
        rng = np.random.default_rng(seed)
        for name in hand_cfg["units"]:
            motor = configio.load_motor(hand_cfg["motor_variant"][name])
            cfg = configio.load_controller(mode=Mode.POSITION)
            taxel_name = hand_cfg["taxel"].get(name)
            taxel = None
            cal = None
            if taxel_name:
                model, degree = sensors[taxel_name]
                taxel = OnlineTaxel(model,
                                    np.random.default_rng(rng.integers(2**32)),
                                    self._tactile_dt)
                cal = factory_calibration(model, degree)
            self.units.append(Unit(name, motor, cfg, cpr, taxel, cal))

        tol = [hand_cfg["position_tolerance_counts"] * u.count_rad
               for u in self.units]
        base = self.units[0].cfg
        self.session = GraspSession(position_tolerance=tol,
                                    omega_max=base.omega_lim,
                                    i_lim=base.i_lim,
                                    travel=(self.geometry.theta_min,
                                            self.geometry.theta_max))
        self.contact_provider = contact_provider
        self.telemetry = TelemetryScheduler()
        self.t = 0.0
        self.tick_count = 0
        self.frames = []
        self.replies = []
        self._queue = []
        self.debug_unit = debug_unit
        self.debug_rows = []

    # ---------------- command surface ----------------

    def enqueue_line(self, line: str):
        try:
            self._queue.append(parse_console(line))
        except ParseError as e:
            self.replies.append(f"err parse {e}")

    def enqueue(self, cmd):
        self._queue.append(cmd)

    def _apply_unit_commands(self, cmds):
        for i, cmd in enumerate(cmds or []):
            if cmd is None:
                continue
            u = self.units[i]
            if cmd.theta_set is not None:
                u.cst.theta_set = cmd.theta_set
            if cmd.omega_limit is not None:
                u.cfg.omega_lim = min(cmd.omega_limit, u.base_omega_lim)
            if cmd.powered is not None:
                self._set_power(u, cmd.powered)

    def _set_power(self, u, powered):
        if powered and not u.s.powered:
            u.s = replace(u.s, powered=True)
        elif not powered and u.s.powered:
            u.s = replace(u.s, powered=False, current=0.0, rotor_speed=0.0,
                          applied_voltage=0.0)
            u.cst = ControllerState(theta_set=u.cst.theta_set,
                                    omega_set=0.0, i_set=0.0)

    def _drain_queue(self):
        queue, self._queue = self._queue, []
        for cmd in queue:
            try:
                self._apply_command(cmd)
            except (RuntimeError, ValueError, KeyError) as e:
                self.replies.append(f"err {type(e).__name__}: {e}")

    def _apply_command(self, cmd):
        if isinstance(cmd, ExecuteGrasp):
            grasp = self._resolve_grasp(cmd.name)
            self._apply_unit_commands(
                self.session.start_grasp(grasp, cmd.global_speed))
            for u in self.units:
                self._set_power(u, True)
                u.cfg.mode = Mode.POSITION
            self.replies.append(
                f"ok grasp {grasp.name} speed {cmd.global_speed:g}")
        elif isinstance(cmd, Stop):
            self._apply_unit_commands(self.session.manual_stop())
            self.replies.append("ok stop")
        elif isinstance(cmd, SetMode):
            u = self.units[cmd.finger]
            u.cfg.mode = MODE_MAP[cmd.mode]
            self.replies.append(f"ok mode {cmd.finger} {cmd.mode}")
        elif isinstance(cmd, SetSetpoint):
            u = self.units[cmd.finger]
            self._set_power(u, True)
            if u.cfg.mode is Mode.POSITION:
                u.cst.theta_set = cmd.value
            elif u.cfg.mode is Mode.VELOCITY:
                u.cst.omega_set = cmd.value
            else:
                u.cst.i_set = cmd.value
            self.replies.append(f"ok set {cmd.finger} {cmd.value:g}")
        elif isinstance(cmd, QueryState):
            self.replies.append(self.state_line())
        elif isinstance(cmd, SetParam):
            self._set_param(cmd.path, cmd.value)
            self.replies.append(f"ok param {cmd.path} {cmd.value:g}")
        else:
            raise ValueError(f"unknown command {cmd!r}")

    def _resolve_grasp(self, name):
        for key, g in self.grasps.items():
            if key.lower() == name.lower():
                return g
        raise InvalidGrasp(f"unknown grasp {name!r}")

    def _set_param(self, path, value):
        parts = path.split(".")
        if len(parts) == 3 and parts[0] == "controller":
            u = self.units[int(parts[1])]
            if not hasattr(u.cfg, parts[2]):
                raise KeyError(path)
            setattr(u.cfg, parts[2], value)
        elif len(parts) == 2 and parts[0] == "session":
            if parts[1] == "global_speed":
                self.session.global_speed = value
            else:
                raise KeyError(path)
        else:
            raise KeyError(path)

    def state_line(self):
        th = " ".join(f"{u.theta_raw:.4f}" for u in self.units)
        cur = " ".join(f"{abs(u.s.current):.3f}" for u in self.units)
        fr = " ".join(f"{u.force_n:.3f}" for u in self.units)
        return (f"ok state t={self.t:.3f} phase={self.session.phase.value} "
                f"theta=[{th}] i=[{cur}] f=[{fr}]")

    # ---------------- physics ----------------

    def _snapshot(self):
        return ([u.theta_raw for u in self.units],
                [abs(u.s.current) for u in self.units],
                [u.force_n for u in self.units])

    def step_outer(self):
        """One outer-rate tick: see module docstring for the order."""
        self._drain_queue()
        self._apply_unit_commands(self.session.on_tick(
            self.t, [u.theta_raw for u in self.units],
            [u.s.current for u in self.units]))

        if self.contact_provider is not None:
            for i, u in enumerate(self.units):
                u.load_nmm, u.contact_force = self.contact_provider(
                    i, u.s.output_angle)
        else:
            for u in self.units:
                u.load_nmm = 0.0
                u.contact_force = 0.0

        for u in self.units:
            counts = read_encoder(u.s, u.cpr, u.p)
            u.enc_hist.append(counts)
            del u.enc_hist[0]
            u.theta_raw = counts * u.count_rad
            u.omega_raw = ((u.enc_hist[-1] - u.enc_hist[0]) * u.count_rad
                           / (OMEGA_WINDOW * self.dt_outer))
            if u.s.powered:
                self._run_unit_inner(u)

        if self.tick_count % self._tactile_every == 0:
            for u in self.units:
                if u.taxel is not None:
                    p = u.taxel.step(u.contact_force)
                    u.force_n = float(estimate_force(u.cal, p))

        self.tick_count += 1
        self.t = self.tick_count * self.dt_outer
        frame = self.telemetry.tick(self.t, self._snapshot)
        if frame is not None:
            self.frames.append(frame)
        return frame

    DEBUG_CSV_HEADER = ("t,theta_set,theta_raw,omega_set,omega_raw,"
                        "i_set,i_signed,u_set")

    def debug_csv(self) -> str:
        lines = [self.DEBUG_CSV_HEADER]
        lines += [",".join(f"{v:.9g}" for v in row)
                  for row in self.debug_rows]
        return "\n".join(lines) + "\n"

    def advance(self, duration_s: float):
        for _ in range(int(round(duration_s / self.dt_outer))):
            self.step_outer()

    def _run_unit_inner(self, u):
        """Inner-rate loop for one unit over one outer period; inlined
        controller + plant arithmetic (must mirror control.scheduler_step
        and plant.step_motor exactly)."""
        cfg = u.cfg
        cst = u.cst
        p = u.p
        dt = self.dt_outer / cfg.rate_ratio
        mode = cfg.mode

        # outer loops (tick_phase 0)
        if mode is Mode.POSITION:
            w = cfg.kp_pos * (cst.theta_set - u.theta_raw)
            lim = cfg.omega_lim
            cst.omega_set = lim if w > lim else (-lim if w < -lim else w)
        if mode is not Mode.CURRENT:
            err = cst.omega_set - u.omega_raw
            d_raw = (err - cst.prev_vel_err) / self.dt_outer
            cst.prev_vel_err = err
            cst.d_filt += cfg.d_filter_alpha * (d_raw - cst.d_filt)
            unsat = cfg.kp_vel * err + cst.integ_vel + cfg.kd_vel * cst.d_filt
            lim = cfg.i_lim
            out = lim if unsat > lim else (-lim if unsat < -lim else unsat)
            if not (out != unsat and err * unsat > 0.0):
                iv = cst.integ_vel + cfg.ki_vel * err * self.dt_outer
                cst.integ_vel = lim if iv > lim else (-lim if iv < -lim
                                                      else iv)
            cst.i_set = out

        # locals for the inner iterations
        ema_u = cst.ema_u
        ema_i = cst.ema_i_abs
        integ_cur = cst.integ_cur
        last_u = cst.last_u_set
        i_set = cst.i_set
        a_u = cfg.ema_u_alpha
        a_i = cfg.ema_i_alpha
        kp_c = cfg.kp_cur
        ki_c = cfg.ki_cur
        u_lim = cfg.u_lim
        s = u.s
        cur = s.current
        w_rot = s.rotor_speed
        angle = s.output_angle
        clamps = s.clamp_count
        r_ohm = p.resistance
        k_e = p.backemf_constant
        k_t = p.torque_constant
        b = p.viscous_friction
        inertia = p.rotor_inertia
        n_ratio = p.total_ratio
        decay = math.exp(-dt / p.electrical_tau)
        u_max = p.supply_voltage
        ext = (u.load_nmm * 1e-3) / (n_ratio * p.worm_efficiency)
        applied = s.applied_voltage
        debug = (self.debug_rows
                 if self.debug_unit is not None
                 and self.units[self.debug_unit] is u else None)

        for k in range(cfg.rate_ratio):
            # signed-current reconstruction
            ema_u += a_u * (last_u - ema_u)
            i_raw = cur if cur >= 0.0 else -cur
            ema_i += a_i * (i_raw - ema_i)
            i_signed = ema_i if ema_u > 0.0 else (-ema_i if ema_u < 0.0
                                                  else 0.0)
            # PI current loop
            err_c = i_set - i_signed
            unsat = kp_c * err_c + integ_cur
            u_out = u_lim if unsat > u_lim else (-u_lim if unsat < -u_lim
                                                 else unsat)
            if not (u_out != unsat and err_c * unsat > 0.0):
                ic = integ_cur + ki_c * err_c * dt
                integ_cur = u_lim if ic > u_lim else (-u_lim if ic < -u_lim
                                                      else ic)
            last_u = u_out

            # plant: clamp, exact LR update, mechanical step with worm lock
            uv = u_out
            if uv > u_max:
                uv = u_max
                clamps += 1
            elif uv < -u_max:
                uv = -u_max
                clamps += 1
            i_inf = (uv - k_e * w_rot) / r_ohm
            cur = i_inf + (cur - i_inf) * decay
            drive = k_t * cur - b * w_rot
            direction = w_rot if w_rot != 0.0 else drive
            if direction > 0.0:
                net = drive + (ext if ext < 0.0 else 0.0)
            elif direction < 0.0:
                net = drive + (ext if ext > 0.0 else 0.0)
            else:
                net = 0.0
            if w_rot == 0.0 and net * drive <= 0.0:
                net = 0.0
            w_new = w_rot + dt * net / inertia
            if w_rot != 0.0 and w_new * w_rot < 0.0:
                if (w_rot + dt * drive / inertia) * w_rot >= 0.0:
                    w_new = 0.0
            w_rot = w_new
            angle += dt * w_rot / n_ratio
            applied = uv
            if debug is not None:
                debug.append((self.t + (k + 1) * dt, cst.theta_set,
                              u.theta_raw, cst.omega_set, u.omega_raw,
                              i_set, i_signed, last_u))

        cst.ema_u = ema_u
        cst.ema_i_abs = ema_i
        cst.integ_cur = integ_cur
        cst.last_u_set = last_u
        u.s = MotorState(current=cur, rotor_speed=w_rot, output_angle=angle,
                         applied_voltage=applied, powered=True,
                         clamp_count=clamps)
