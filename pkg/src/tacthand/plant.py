"""Brushed-DC actuation unit: LR electrical dynamics, gearbox + self-locking
worm gear, quadrature encoder and absolute-value current sensing, plus the
actuator sizing calculator.

Units: SI internally (A, V, rad/s, N*m) except where a field name says
otherwise (config files and torques at the output shaft are in N*mm, matching
the data sheets they come from).
"""

import math
from dataclasses import dataclass, replace

GRAVITY = 9.81  # m/s^2


@dataclass(frozen=True)
class MotorParams:
    """Electrical and mechanical parameters of one actuation unit.

    torque_constant is derived from the gearbox stall data (stall current =
    supply/R, motor-shaft stall torque = gearbox stall torque / gearbox
    ratio); backemf_constant equals it in SI units. Inertia and friction are
    chosen for a ~50 ms no-load settling time, not measured.

    The default inductance is set by the winding's step-response settle
    time: the current reaches 99.3% of target 187.5 us after a voltage step,
    so tau = L/R = 37.5 us. The motor data sheet's 0.6 mH figure is
    inconsistent with that settle time; the settle time wins because the
    controller's sign-reconstruction filter is sized from it.
    """

    resistance: float = 3.2             # ohm
    inductance: float = 0.12e-3         # H
    torque_constant: float = 7.60889e-4   # N*m/A
    backemf_constant: float = 7.60889e-4  # V*s/rad
    rotor_inertia: float = 4.0e-9       # kg*m^2 at the motor shaft
    viscous_friction: float = 2.0e-7    # N*m*s/rad at the motor shaft
    gearbox_ratio: float = 75.0
    worm_ratio: float = 20.0
    supply_voltage: float = 6.0         # V
    gearbox_stall_torque: float = 107.0   # N*mm at the gearbox output
    worm_efficiency: float = 0.5        # forward-drive efficiency of the worm stage

    def __post_init__(self):
        if self.resistance <= 0 or self.inductance <= 0:
            raise ValueError("resistance and inductance must be > 0")

    @property
    def total_ratio(self) -> float:
        return self.gearbox_ratio * self.worm_ratio

    @property
    def electrical_tau(self) -> float:
        return self.inductance / self.resistance


@dataclass(frozen=True)
class MotorState:
    """Instantaneous state of one actuation unit. Value type: stepping is
    state in, state out."""

    current: float = 0.0          # A, signed
    rotor_speed: float = 0.0      # rad/s at the motor shaft
    output_angle: float = 0.0     # rad after gearbox and worm
    applied_voltage: float = 0.0  # V actually applied after clamping
    powered: bool = True
    clamp_count: int = 0          # diagnostic: how many inputs were clamped


@dataclass(frozen=True)
class SizingResult:
    grip_force: float     # N
    mcp_torque: float     # N*mm
    motor_torque: float   # N*mm required at the worm input
    safety_factor: float


def derive_torque_constant(p: MotorParams) -> float:
    """Torque constant consistent with the published gearbox stall torque."""
    stall_current = p.supply_voltage / p.resistance
    motor_stall_torque = p.gearbox_stall_torque * 1e-3 / p.gearbox_ratio
    return motor_stall_torque / stall_current


def step_motor(p: MotorParams, s: MotorState, u: float,
               load_torque_output: float, dt: float) -> MotorState:
    """Advance the motor by one fixed step dt.

    u is the commanded terminal voltage (clamped to the supply).
    load_torque_output is the external torque applied at the output shaft in
    N*mm, same sign convention as output_angle.

    The electrical state uses the exact exponential update of the LR circuit
    (u and omega held over the step); the mechanical state is semi-implicit
    Euler using the updated current. The worm gear cannot be overhauled: an
    external torque transmits to the rotor only as resistance to motion, it
    can stall the drive but never reverse or accelerate it. When the unit is
    unpowered the output angle is frozen regardless of load and the open
    H-bridge carries no current.
    """
    if not (0.0 < dt <= 1e-3):
        raise ValueError("dt must be in (0, 1e-3] s")

    if not s.powered:
        return replace(s, current=0.0, rotor_speed=0.0, applied_voltage=0.0)

    clamp_count = s.clamp_count
    u_max = p.supply_voltage
    if u > u_max:
        u = u_max
        clamp_count += 1
    elif u < -u_max:
        u = -u_max
        clamp_count += 1

    # Electrical: di/dt = (u - R i - k_e w) / L.
    tau_e = p.inductance / p.resistance
    decay = math.exp(-dt / tau_e)
    i_inf = (u - p.backemf_constant * s.rotor_speed) / p.resistance
    i_new = i_inf + (s.current - i_inf) * decay

    # Mechanical: J dw/dt = k_t i - b w - transmitted load.
    w = s.rotor_speed
    drive = p.torque_constant * i_new - p.viscous_friction * w
    ext = (load_torque_output * 1e-3) / (p.total_ratio * p.worm_efficiency)

    direction = w if w != 0.0 else drive
    if direction > 0.0:
        net = drive + min(ext, 0.0)   # only an opposing load transmits
    elif direction < 0.0:
        net = drive + max(ext, 0.0)
    else:
        net = 0.0
    if w == 0.0 and net * drive <= 0.0:
        net = 0.0  # stalled against the load; worm holds

    w_new = w + dt * net / p.rotor_inertia
    if w != 0.0 and w_new * w < 0.0:
        # Reversal through zero is legitimate only if the motor alone would
        # have produced it; a load-driven reversal is blocked by the worm.
        if (w + dt * drive / p.rotor_inertia) * w >= 0.0:
            w_new = 0.0
    angle_new = s.output_angle + dt * w_new / p.total_ratio

    return MotorState(current=i_new, rotor_speed=w_new, output_angle=angle_new,
                      applied_voltage=u, powered=True, clamp_count=clamp_count)


def read_encoder(s: MotorState, counts_per_motor_rev: int, p: MotorParams) -> int:
    """Encoder count for the accumulated motor-shaft angle."""
    if counts_per_motor_rev <= 0:
        raise ValueError("counts_per_motor_rev must be > 0")
    motor_angle = s.output_angle * p.total_ratio
    # Snap to the grid before flooring so exact count boundaries are stable
    # against float rounding.
    return math.floor(motor_angle / (2.0 * math.pi) * counts_per_motor_rev
                      + 1e-9)


def sense_current(s: MotorState) -> float:
    """The drive hardware only exposes the magnitude of the motor current."""
    return abs(s.current)


def size_actuation(payload_mass: float, lever_arm: float, worm_ratio: float,
                   gearbox_stall_torque: float) -> SizingResult:
    """Actuator sizing chain: payload -> grip force -> MCP torque -> required
    motor torque -> safety factor against the gearbox stall torque.

    payload_mass in kg, lever_arm in mm, torques in N*mm.
    """
    if min(payload_mass, lever_arm, worm_ratio, gearbox_stall_torque) <= 0:
        raise ValueError("all sizing inputs must be > 0")
    grip_force = payload_mass * GRAVITY
    mcp_torque = grip_force * lever_arm
    motor_torque = mcp_torque / worm_ratio
    return SizingResult(grip_force=grip_force, mcp_torque=mcp_torque,
                        motor_torque=motor_torque,
                        safety_factor=gearbox_stall_torque / motor_torque)
