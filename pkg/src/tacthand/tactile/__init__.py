from .calibration import (CalibrationModel, CycleSegmentation, DwellNotFound,
                          ExtrapolationWarning, IllConditioned, calibrate,
                          characterize_dynamic, characterize_quasistatic,
                          estimate_force, segment_cycles)
from .model import (LoadingTrace, NoSaturationFound, RangeResult, SensorModel,
                    calibration_cycles, determine_range, dynamic_cycles,
                    quasistatic_trace, simulate_sensor, trace_from_csv,
                    trace_to_csv, triangle_profile)

__all__ = [
    "CalibrationModel", "CycleSegmentation", "DwellNotFound",
    "ExtrapolationWarning", "IllConditioned", "LoadingTrace",
    "NoSaturationFound", "RangeResult", "SensorModel", "calibrate",
    "calibration_cycles", "characterize_dynamic", "characterize_quasistatic",
    "determine_range", "dynamic_cycles", "estimate_force",
    "quasistatic_trace", "segment_cycles", "simulate_sensor",
    "trace_from_csv", "trace_to_csv", "triangle_profile",
]
