"""tacthand: in-silico stack for a tactile linkage-based robotic hand.

Subpackages cover the finger linkage kinematics, the DC motor plant, the
cascaded multi-rate motor controller, the barometric taxel model and its
calibration pipeline, grasp execution, the serial command/telemetry protocol,
and the experiment harness. A FastAPI service (tacthand.service) exposes the
whole stack; the `sim` CLI is a thin client of that service.
"""

__version__ = "0.1.0"
