"""Grasp execution: named grasp recipes and the per-hand session state
machine. The session never touches motors directly; each tick it returns
per-unit commands (setpoint, velocity limit, power) for the hand to apply.

Phase flow: IDLE -> MOVING_TO_PREP -> READY_TO_CLOSE -> CLOSING ->
HOLDING | STOPPED. A unit that physically stalls against an object (no
motion at the current limit) counts as arrived for phase purposes; on
reaching its target a unit's motor is unpowered and the worm self-locking
holds it, so HOLDING draws no current at all.
"""

from dataclasses import dataclass, field
from enum import Enum

N_UNITS = 6


class GraspPhase(Enum):
    IDLE = "idle"
    MOVING_TO_PREP = "moving_to_prep"
    READY_TO_CLOSE = "ready_to_close"
    CLOSING = "closing"
    HOLDING = "holding"
    STOPPED = "stopped"


class Busy(RuntimeError):
    pass


class InvalidGrasp(ValueError):
    pass


class NotClosing(RuntimeError):
    pass


@dataclass(frozen=True)
class GraspDefinition:
    name: str
    prep_position: tuple      # 6 x rad
    target_position: tuple    # 6 x rad
    finger_speed_factor: tuple  # 6 x (0, 1]

    def __post_init__(self):
        for fieldname in ("prep_position", "target_position",
                          "finger_speed_factor"):
            if len(getattr(self, fieldname)) != N_UNITS:
                raise InvalidGrasp(f"{fieldname} must have {N_UNITS} entries")
        for f in self.finger_speed_factor:
            if not (0.0 < f <= 1.0):
                raise InvalidGrasp("speed factors must be in (0, 1]")

    def validate_limits(self, lo: float, hi: float):
        for v in self.prep_position + self.target_position:
            if not (lo - 1e-9 <= v <= hi + 1e-9):
                raise InvalidGrasp(
                    f"{self.name}: position {v:.3f} outside [{lo:.3f}, "
                    f"{hi:.3f}]")


@dataclass
class UnitCommand:
    theta_set: float = None
    omega_limit: float = None
    powered: bool = None


@dataclass
class UnitProgress:
    arrived: bool = False
    stalled: bool = False


class GraspSession:
    """State machine for one hand. position_tolerance is per unit (one
    encoder count at output scale); stall detection marks a unit arrived
    when it has stopped moving at saturated current against an obstacle."""

    STALL_WINDOW_S = 0.3
    STALL_CURRENT_FRAC = 0.85

    def __init__(self, position_tolerance, omega_max: float, i_lim: float,
                 travel=(0.0, None)):
        self.position_tolerance = tuple(position_tolerance)
        self.omega_max = omega_max
        self.i_lim = i_lim
        self.travel = travel
        self.phase = GraspPhase.IDLE
        self.active_grasp = None
        self.global_speed = 1.0
        self._progress = [UnitProgress() for _ in range(N_UNITS)]
        self._stall_ref = [(0.0, 0.0)] * N_UNITS  # (t, theta) anchors

    def reset(self):
        self.phase = GraspPhase.IDLE
        self.active_grasp = None
        self._progress = [UnitProgress() for _ in range(N_UNITS)]

    def start_grasp(self, g: GraspDefinition, global_speed: float = 1.0):
        """Command the prep move; returns the per-unit commands."""
        if self.phase is not GraspPhase.IDLE:
            raise Busy(f"session is {self.phase.value}")
        if not (0.0 < global_speed <= 1.0):
            raise InvalidGrasp("global_speed must be in (0, 1]")
        if self.travel[1] is not None:
            g.validate_limits(self.travel[0], self.travel[1])
        self.active_grasp = g
        self.global_speed = global_speed
        self.phase = GraspPhase.MOVING_TO_PREP
        self._progress = [UnitProgress() for _ in range(N_UNITS)]
        return [UnitCommand(theta_set=g.prep_position[i],
                            omega_limit=(self.omega_max
                                         * g.finger_speed_factor[i]
                                         * global_speed),
                            powered=True)
                for i in range(N_UNITS)]

    def _arrived(self, i, theta, target):
        return abs(theta - target) < self.position_tolerance[i]

    def _update_stall(self, i, t, theta, current):
        t_ref, th_ref = self._stall_ref[i]
        if abs(theta - th_ref) > 2.0 * self.position_tolerance[i]:
            self._stall_ref[i] = (t, theta)
            return False
        if (t - t_ref >= self.STALL_WINDOW_S
                and abs(current) >= self.STALL_CURRENT_FRAC * self.i_lim):
            return True
        return False

    def on_tick(self, t: float, thetas, currents):
        """Advance the state machine; returns per-unit commands (None where
        nothing changes)."""
        cmds = [None] * N_UNITS
        g = self.active_grasp

        if self.phase is GraspPhase.MOVING_TO_PREP:
            done = True
            for i in range(N_UNITS):
                if self._arrived(i, thetas[i], g.prep_position[i]):
                    continue
                if self._update_stall(i, t, thetas[i], currents[i]):
                    continue
                done = False
            if done:
                self.phase = GraspPhase.READY_TO_CLOSE
                for i in range(N_UNITS):
                    self._stall_ref[i] = (t, thetas[i])

        elif self.phase is GraspPhase.READY_TO_CLOSE:
            self.phase = GraspPhase.CLOSING
            for i in range(N_UNITS):
                cmds[i] = UnitCommand(theta_set=g.target_position[i])
                self._progress[i] = UnitProgress()
                self._stall_ref[i] = (t, thetas[i])

        elif self.phase is GraspPhase.CLOSING:
            all_done = True
            for i in range(N_UNITS):
                prog = self._progress[i]
                if prog.arrived:
                    continue
                if self._arrived(i, thetas[i], g.target_position[i]):
                    prog.arrived = True
                    cmds[i] = UnitCommand(powered=False)
                    continue
                if self._update_stall(i, t, thetas[i], currents[i]):
                    prog.stalled = True
                all_done = False
            if all_done:
                self.phase = GraspPhase.HOLDING

        return cmds

    def manual_stop(self):
        """Unpower everything immediately; only legal while closing."""
        if self.phase is not GraspPhase.CLOSING:
            raise NotClosing(f"session is {self.phase.value}")
        self.phase = GraspPhase.STOPPED
        return [UnitCommand(powered=False) for _ in range(N_UNITS)]

    @property
    def holding(self):
        return self.phase in (GraspPhase.HOLDING, GraspPhase.STOPPED)

    @property
    def stalled_units(self):
        return [i for i, p in enumerate(self._progress) if p.stalled]
