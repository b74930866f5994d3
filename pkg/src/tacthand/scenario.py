"""Experiment harness: lumped object contact, the grasp/hold/move/hold/shake
procedure, the speed test and the payload hold test.

Object model: a cylinder of effective_radius resting against the palm line
at grip_offset_mm (negative = over the palm, proximal of the MCP, where the
curling finger descends onto it), seen identically by every sensorized
finger (a 1-D radial spring per finger). The shake disturbance is a jerk-limited S-curve whose
inertial force (mass x acceleration) is shared equally across contacting
fingertips, fingers and thumb on opposite sides. Lifting holds if the
friction capacity of the wrap contacts (weighted by how far above the
object's equator each contact sits) carries the weight; otherwise the
object drops and all contact collapses to zero.
"""

import math
from dataclasses import dataclass, field

from . import configio
from .grasp import GraspPhase, N_UNITS
from .hand import HandSimulation
from .kinematics import solve_fourbar
from .protocol import ExecuteGrasp, Stop, frame_to_csv, TELEMETRY_CSV_HEADER

MU_EFF = 1.2            # silicone-on-object friction equivalent
SECURE_MIN_ELEV = math.radians(5.0)
SECURE_MIN_FORCE = 0.5  # N
CONTACT_LOSS_S = 0.2
GRASP_TIMEOUT_S = 90.0
THUMB_UNITS = (4,)      # units opposing the fingers across the object


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    effective_radius: float  # mm
    mass: float              # kg
    stiffness: float         # N/mm


@dataclass(frozen=True)
class Scenario:
    object: ObjectSpec
    grasp_name: str = "MediumWrap"
    global_speed: float = 1.0
    hold_s: float = 10.0
    hold2_s: float = 10.0
    move_s: float = 2.0
    shake_velocity: float = 0.8   # m/s peak
    shake_amplitude: float = 0.05  # m
    shake_cycles: int = 5
    grip_offset_mm: float = -25.0
    seed: int = 0

    def __post_init__(self):
        if min(self.hold_s, self.hold2_s, self.move_s) <= 0:
            raise ValueError("phase durations must be > 0")


class ShakeProfile:
    """One stroke sweeps the amplitude with a sinusoidal-squared velocity
    shape (jerk-limited S-curve) peaking at the requested velocity; a cycle
    is a stroke and its return."""

    def __init__(self, v_peak: float, amplitude: float, cycles: int):
        self.v_peak = v_peak
        self.stroke_s = 2.0 * amplitude / v_peak
        self.cycles = cycles
        self.duration = 2.0 * cycles * self.stroke_s
        self.a_max = v_peak * math.pi / self.stroke_s

    def acceleration(self, t: float) -> float:
        if t < 0.0 or t >= self.duration:
            return 0.0
        stroke = int(t / self.stroke_s)
        tau = t - stroke * self.stroke_s
        a = self.a_max * math.sin(2.0 * math.pi * tau / self.stroke_s)
        return a if stroke % 2 == 0 else -a


def _point_segment_dist(px, py, ax, ay, bx, by):
    vx, vy = bx - ax, by - ay
    wx, wy = px - ax, py - ay
    vv = vx * vx + vy * vy
    t = 0.0 if vv == 0.0 else max(0.0, min(1.0, (wx * vx + wy * vy) / vv))
    dx, dy = px - (ax + t * vx), py - (ay + t * vy)
    return math.hypot(dx, dy), (ax + t * vx, ay + t * vy)


@dataclass
class Contact:
    force: float = 0.0       # N, spring force before shake modulation
    elevation: float = 0.0   # rad of the contact point above the equator
    torque: float = 0.0      # N*mm about the MCP


class ObjectInteraction:
    """Per-finger contact state against the shared object."""

    def __init__(self, spec: ObjectSpec, geometry, grip_offset_mm: float):
        self.spec = spec
        self.geometry = geometry
        self.center = (grip_offset_mm, spec.effective_radius)
        self.present = True
        self.shake_accel = 0.0
        self.contacts = [Contact() for _ in range(N_UNITS)]
        self._pose_cache = {}

    def drop(self):
        self.present = False
        for c in self.contacts:
            c.force = 0.0
            c.torque = 0.0

    def _chain(self, theta):
        key = round(theta, 9)
        chain = self._pose_cache.get(key)
        if chain is None:
            theta_c = min(max(theta, self.geometry.theta_min),
                          self.geometry.theta_max)
            chain = solve_fourbar(self.geometry, theta_c).chain()
            if len(self._pose_cache) > 4096:
                self._pose_cache.clear()
            self._pose_cache[key] = chain
        return chain

    def provider(self, unit: int, theta: float):
        """Contact callback for the hand: (load torque N*mm, taxel force N).
        The abduction unit (last) carries no contact."""
        c = self.contacts[unit]
        if not self.present or unit == N_UNITS - 1:
            c.force = 0.0
            c.torque = 0.0
            return 0.0, 0.0
        chain = self._chain(theta)
        cx, cy = self.center
        r = self.spec.effective_radius
        best, best_pt = float("inf"), None
        for (ax, ay), (bx, by) in zip(chain[:-1], chain[1:]):
            d, pt = _point_segment_dist(cx, cy, ax, ay, bx, by)
            if d < best:
                best, best_pt = d, pt
        depth = r - best
        if depth <= 0.0:
            c.force = 0.0
            c.torque = 0.0
            return 0.0, 0.0
        force = self.spec.stiffness * depth
        ux = (best_pt[0] - cx) / best
        uy = (best_pt[1] - cy) / best
        # torque of the outward normal force about the MCP at the origin
        torque = force * (best_pt[0] * uy - best_pt[1] * ux)
        c.force = force
        c.elevation = math.asin(max(-1.0, min(1.0, uy)))
        c.torque = torque

        taxel_force = force
        if self.shake_accel != 0.0:
            n_c = sum(1 for k, cc in enumerate(self.contacts)
                      if cc.force > 0.0 and k != N_UNITS - 1)
            if n_c:
                side = -1.0 if unit in THUMB_UNITS else 1.0
                inertial = self.spec.mass * self.shake_accel / n_c
                taxel_force = max(0.0, force - side * inertial)
        return torque, taxel_force

    def lift_capacity(self) -> float:
        """N of weight the wrap can carry by friction."""
        return MU_EFF * sum(c.force * max(math.sin(c.elevation), 0.0)
                            for c in self.contacts)

    def secured(self) -> bool:
        total = sum(c.force for c in self.contacts)
        wrap = any(c.force > 0.0 and c.elevation >= SECURE_MIN_ELEV
                   for c in self.contacts)
        return total >= SECURE_MIN_FORCE and wrap


@dataclass
class PhaseMark:
    name: str
    t_start: float
    t_end: float = None


@dataclass
class ExperimentLog:
    scenario: Scenario
    frames: list = field(default_factory=list)
    phases: list = field(default_factory=list)
    events: list = field(default_factory=list)
    retained: bool = None
    grasp_failed: bool = False
    stop_time: float = None

    def telemetry_csv(self) -> str:
        lines = [TELEMETRY_CSV_HEADER]
        lines += [frame_to_csv(f) for f in self.frames]
        return "\n".join(lines) + "\n"

    def phase_csv(self) -> str:
        lines = ["phase,t_start,t_end"]
        lines += [f"{p.name},{p.t_start:.3f},{p.t_end:.3f}"
                  for p in self.phases]
        return "\n".join(lines) + "\n"


class ScenarioSession:
    """Drives one experiment: hand + object + the phase timeline. The
    operator's manual stop is issued automatically when the grasp is
    achieved unless auto_stop=False (console operation)."""

    PHASES = ("grasp", "hold", "move", "hold2", "shake", "done")

    def __init__(self, scenario: Scenario, auto_stop: bool = True):
        self.scenario = scenario
        self.interaction = ObjectInteraction(scenario.object,
                                             configio.load_geometry(),
                                             scenario.grip_offset_mm)
        self.hand = HandSimulation(seed=scenario.seed,
                                   contact_provider=self.interaction.provider)
        self.auto_stop = auto_stop
        self.log = ExperimentLog(scenario=scenario)
        self.phase = "grasp"
        self.phase_start = 0.0
        self.shake = ShakeProfile(scenario.shake_velocity,
                                  scenario.shake_amplitude,
                                  scenario.shake_cycles)
        self._stop_sent = False
        self._loss_clock = [0.0] * N_UNITS
        self._retained = True
        self._started = False
        self.log.phases.append(PhaseMark("grasp", 0.0))

    # -- helpers ----------------------------------------------------------

    def _grasp_achieved(self) -> bool:
        sess = self.hand.session
        if sess.phase is GraspPhase.HOLDING:
            return True
        if sess.phase is not GraspPhase.CLOSING:
            return False
        prog = sess._progress
        settled = all(p.arrived or p.stalled for p in prog)
        return settled and any(c.force > 0.0
                               for c in self.interaction.contacts)

    def _enter(self, phase):
        t = self.hand.t
        self.log.phases[-1].t_end = t
        self.phase = phase
        self.phase_start = t
        if phase != "done":
            self.log.phases.append(PhaseMark(phase, t))

    def _event(self, text):
        self.log.events.append((self.hand.t, text))

    # -- main loop --------------------------------------------------------

    def step(self):
        if not self._started:
            self._started = True
            if self.auto_stop:
                self.hand.enqueue(ExecuteGrasp(self.scenario.grasp_name,
                                               self.scenario.global_speed))
        frame = self.hand.step_outer()
        if frame is not None:
            self.log.frames.append(frame)
        t = self.hand.t
        elapsed = t - self.phase_start

        if self.phase == "grasp":
            if self.auto_stop and not self._stop_sent \
                    and self._grasp_achieved() \
                    and self.hand.session.phase is GraspPhase.CLOSING:
                self.hand.enqueue(Stop())
                self._stop_sent = True
            if self.hand.session.holding:
                self.log.stop_time = t
                if not self.interaction.secured():
                    self.log.grasp_failed = True
                    self._event("GraspFailed: grasp not secured")
                self._enter("hold")
            elif self.auto_stop and elapsed > GRASP_TIMEOUT_S:
                self.log.grasp_failed = True
                self._event("GraspFailed: timeout")
                if self.hand.session.phase is GraspPhase.CLOSING:
                    self.hand.enqueue(Stop())

        elif self.phase == "hold":
            if elapsed >= self.scenario.hold_s:
                self._enter("move")
                weight = self.scenario.object.mass * 9.81
                if (not self.interaction.secured()
                        or self.interaction.lift_capacity() < weight):
                    self.interaction.drop()
                    self.log.grasp_failed = True
                    self._event("GraspFailed: object dropped during move")

        elif self.phase == "move":
            if elapsed >= self.scenario.move_s:
                self._enter("hold2")

        elif self.phase == "hold2":
            if elapsed >= self.scenario.hold2_s:
                self._enter("shake")

        elif self.phase == "shake":
            self.interaction.shake_accel = self.shake.acceleration(elapsed)
            if self.interaction.present:
                # the hand's contact_force carries the shake-modulated
                # value from this tick's provider calls
                for i in range(N_UNITS - 1):
                    engaged = self.interaction.contacts[i].force > 0.0
                    if engaged and self.hand.units[i].contact_force == 0.0:
                        self._loss_clock[i] += self.hand.dt_outer
                        if self._loss_clock[i] > CONTACT_LOSS_S:
                            self._retained = False
                    else:
                        self._loss_clock[i] = 0.0
            if elapsed >= self.shake.duration:
                self.interaction.shake_accel = 0.0
                self.log.retained = (self._retained
                                     and self.interaction.present
                                     and not self.log.grasp_failed)
                self._enter("done")

        return self.phase != "done"

    def run(self) -> ExperimentLog:
        while self.step():
            pass
        self.log.phases[-1].t_end = self.hand.t
        return self.log


def run_experiment(scenario: Scenario) -> ExperimentLog:
    return ScenarioSession(scenario).run()


def speed_test(factors=(0.1, 0.5, 1.0), grasp_name="MediumWrap") -> dict:
    """Closing (idle to holding) and opening (back to the preparatory pose)
    times for a bare hand at each global speed factor."""
    results = {}
    for factor in factors:
        hand = HandSimulation(seed=0)
        grasp = hand.grasps[grasp_name]
        hand.enqueue(ExecuteGrasp(grasp_name, factor))
        t_close = None
        limit = int(240.0 / hand.dt_outer)
        for _ in range(limit):
            hand.step_outer()
            if hand.session.phase is GraspPhase.HOLDING:
                t_close = hand.t
                break
        if t_close is None:
            raise RuntimeError(f"closing did not finish at factor {factor}")

        # opening: drive every unit back to the preparatory pose at the
        # same per-finger velocity budget
        t0 = hand.t
        for i, u in enumerate(hand.units):
            hand._set_power(u, True)
            u.cst.theta_set = grasp.prep_position[i]
            u.cfg.omega_lim = min(u.base_omega_lim
                                  * grasp.finger_speed_factor[i] * factor,
                                  u.base_omega_lim)
        tol = hand.session.position_tolerance
        t_open = None
        for _ in range(limit):
            hand.step_outer()
            if all(abs(u.s.output_angle - grasp.prep_position[i]) < tol[i]
                   for i, u in enumerate(hand.units)):
                t_open = hand.t - t0
                break
        if t_open is None:
            raise RuntimeError(f"opening did not finish at factor {factor}")
        results[factor] = {"closing_s": t_close, "opening_s": t_open}
    return results


def payload_hold_test(mass: float, base_object: str = "block_box") -> dict:
    """MediumWrap on a handle object of the given mass; passes when the
    grasp is retained through the shake with zero holding current."""
    if mass < 0:
        raise ValueError("mass must be >= 0")
    objects = configio.load_objects()
    base = objects[base_object]
    spec = ObjectSpec(name=f"{base_object}_{mass:g}kg",
                      effective_radius=base.effective_radius, mass=mass,
                      stiffness=base.stiffness)
    log = run_experiment(Scenario(object=spec, grasp_name="MediumWrap"))
    hold_frames = _frames_in_phases(log, ("hold", "hold2", "shake"))
    currents_zero = all(c == 0.0 for f in hold_frames for c in f.currents)
    passed = bool(log.retained and not log.grasp_failed and currents_zero)
    return {"passed": passed, "log": log}


def _frames_in_phases(log: ExperimentLog, names) -> list:
    spans = [(p.t_start, p.t_end) for p in log.phases if p.name in names]
    out = []
    for f in log.frames:
        t = f.t_ms / 1000.0
        if any(a < t <= b for a, b in spans):
            out.append(f)
    return out
