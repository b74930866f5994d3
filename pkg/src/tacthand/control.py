"""Cascaded multi-rate motor controller: P position and PID velocity loops at
the outer rate, PI current loop at the inner rate, conditional-integration
anti-windup, and signed-current reconstruction from the absolute current
sensor via two exponential moving averages.

All angles and speeds are at the output shaft. One controller instance per
motor; instances share nothing.
"""

import math
from dataclasses import dataclass, field
from enum import Enum


class Mode(Enum):
    POSITION = "pos"
    VELOCITY = "vel"
    CURRENT = "cur"


def _clamp(x: float, lim: float) -> float:
    if x > lim:
        return lim
    if x < -lim:
        return -lim
    return x


def ema_alpha(time_constant_s: float, dt: float) -> float:
    """Per-sample weight of a first-order discrete low pass with the given
    continuous time constant."""
    return 1.0 - math.exp(-dt / time_constant_s)


# Electrical settle time of the drive: a voltage step reaches 99.3% of the
# final current after 187.5 us, so the emulation EMA uses tau = 37.5 us.
U_EMA_TAU = 37.5e-6
# The absolute-current filter acts as a 15 kHz first-order low pass applied
# at the current-sense sampling instant.
I_EMA_CUTOFF_HZ = 15000.0


@dataclass
class ControllerConfig:
    # Gains from tools/tune_gains.py against the default plant (pole-zero
    # cancellation for the current loop, 8 Hz velocity crossover, position
    # a third of that).
    kp_pos: float = 16.7552    # (rad/s) per rad
    kp_vel: float = 0.396369   # A per (rad/s)
    ki_vel: float = 3.96       # A per rad
    kd_vel: float = 0.0008     # A per (rad/s^2)
    kp_cur: float = 0.376991   # V per A
    ki_cur: float = 10053.1    # V per (A*s)
    omega_lim: float = 0.65   # rad/s at the output shaft
    i_lim: float = 0.3        # A
    u_lim: float = 6.0        # V
    rate_outer: int = 1000    # Hz
    rate_inner: int = 10000   # Hz
    ema_u_alpha: float = ema_alpha(U_EMA_TAU, 1e-4)
    ema_i_alpha: float = ema_alpha(1.0 / (2.0 * math.pi * I_EMA_CUTOFF_HZ), 1e-4)
    d_filter_alpha: float = 0.2
    mode: Mode = Mode.POSITION

    def __post_init__(self):
        if self.rate_inner < self.rate_outer:
            raise ValueError("rate_inner must be >= rate_outer")
        if self.rate_inner % self.rate_outer != 0:
            raise ValueError("rate_inner must be an integer multiple of rate_outer")
        if min(self.omega_lim, self.i_lim, self.u_lim) <= 0:
            raise ValueError("limits must be > 0")
        for a in (self.ema_u_alpha, self.ema_i_alpha):
            if not (0.0 < a <= 1.0):
                raise ValueError("EMA alphas must be in (0, 1]")

    @property
    def rate_ratio(self) -> int:
        return self.rate_inner // self.rate_outer


@dataclass
class ControllerState:
    integ_vel: float = 0.0      # stored in output units (A)
    integ_cur: float = 0.0      # stored in output units (V)
    prev_vel_err: float = 0.0
    d_filt: float = 0.0
    ema_u: float = 0.0          # V
    ema_i_abs: float = 0.0      # A
    theta_set: float = 0.0      # rad
    omega_set: float = 0.0      # rad/s
    i_set: float = 0.0          # A
    last_u_set: float = 0.0     # V
    tick_phase: int = 0


@dataclass
class PlantMeasurement:
    theta_raw: float    # rad, encoder-derived output angle
    omega_raw: float    # rad/s, encoder-difference velocity
    i_raw_abs: float    # A, absolute current


def tick_position(cfg: ControllerConfig, st: ControllerState,
                  theta_meas: float) -> float:
    """P position loop: theta error to velocity setpoint, clamped."""
    st.omega_set = _clamp(cfg.kp_pos * (st.theta_set - theta_meas),
                          cfg.omega_lim)
    return st.omega_set


def tick_velocity(cfg: ControllerConfig, st: ControllerState,
                  omega_meas: float, dt: float) -> float:
    """PID velocity loop with filtered derivative and conditional-integration
    anti-windup: the integrator freezes while the output is saturated and the
    error would push it further."""
    err = st.omega_set - omega_meas
    d_raw = (err - st.prev_vel_err) / dt
    st.prev_vel_err = err
    st.d_filt += cfg.d_filter_alpha * (d_raw - st.d_filt)

    unsat = cfg.kp_vel * err + st.integ_vel + cfg.kd_vel * st.d_filt
    out = _clamp(unsat, cfg.i_lim)
    saturated = out != unsat
    if not (saturated and err * unsat > 0.0):
        st.integ_vel = _clamp(st.integ_vel + cfg.ki_vel * err * dt, cfg.i_lim)
    st.i_set = out
    return out


def reconstruct_signed_current(cfg: ControllerConfig, st: ControllerState,
                               i_raw_abs: float, u_set_prev: float) -> float:
    """Recover the current's sign from the recent voltage commands.

    The sensor destroys the sign; the winding inductance keeps the true
    current from flipping instantly after a voltage reversal, so the sign of
    an EMA of the set voltage (time constant matching the LR circuit) is a
    faithful proxy. A second EMA low-passes the absolute measurement.
    """
    st.ema_u += cfg.ema_u_alpha * (u_set_prev - st.ema_u)
    st.ema_i_abs += cfg.ema_i_alpha * (i_raw_abs - st.ema_i_abs)
    if st.ema_u > 0.0:
        return st.ema_i_abs
    if st.ema_u < 0.0:
        return -st.ema_i_abs
    return 0.0


def tick_current(cfg: ControllerConfig, st: ControllerState,
                 i_meas_signed: float, dt: float) -> float:
    """PI current loop, anti-windup as in tick_velocity."""
    err = st.i_set - i_meas_signed
    unsat = cfg.kp_cur * err + st.integ_cur
    out = _clamp(unsat, cfg.u_lim)
    saturated = out != unsat
    if not (saturated and err * unsat > 0.0):
        st.integ_cur = _clamp(st.integ_cur + cfg.ki_cur * err * dt, cfg.u_lim)
    st.last_u_set = out
    return out


def scheduler_step(cfg: ControllerConfig, st: ControllerState,
                   meas: PlantMeasurement, dt_inner: float) -> float:
    """One inner-rate tick of the cascade.

    The position and velocity loops run on every rate_ratio-th call according
    to the mode (POSITION runs all three loops, VELOCITY skips the position
    loop, CURRENT skips both outer loops); sign reconstruction and the
    current loop run on every call.
    """
    if st.tick_phase == 0:
        dt_outer = 1.0 / cfg.rate_outer
        if cfg.mode is Mode.POSITION:
            tick_position(cfg, st, meas.theta_raw)
        if cfg.mode in (Mode.POSITION, Mode.VELOCITY):
            tick_velocity(cfg, st, meas.omega_raw, dt_outer)
    st.tick_phase += 1
    if st.tick_phase >= cfg.rate_ratio:
        st.tick_phase = 0

    i_signed = reconstruct_signed_current(cfg, st, meas.i_raw_abs,
                                          st.last_u_set)
    return tick_current(cfg, st, i_signed, dt_inner)
