"""Pydantic request/response models for the simulation service."""

from typing import List, Optional

from pydantic import BaseModel, Field


class SizingRequest(BaseModel):
    payload_kg: float = Field(..., gt=0)
    lever_mm: float = Field(..., gt=0)
    worm_ratio: float = Field(default=20.0, gt=0)
    stall_torque_nmm: float = Field(default=107.0, gt=0)


class SizingResponse(BaseModel):
    grip_force_n: float
    mcp_torque_nmm: float
    motor_torque_nmm: float
    safety_factor: float


class CalibrateRequest(BaseModel):
    trace_csv: str
    degree: int = Field(default=1, ge=1, le=2)
    expected_cycles: int = Field(default=25, ge=1)


class CalibrateResponse(BaseModel):
    degree: int
    r_squared: float
    p0_est_hpa: float
    range_est_n: float
    sensitivity_hpa_per_n: float
    hysteresis_n: float
    hysteresis_pct_of_range: float
    drift_pct_of_zero: float
    poly_inverse: List[float]


class CharacterizeRequest(BaseModel):
    fingers: Optional[List[str]] = None  # default: all presets


class FingerCharacterization(BaseModel):
    finger: str
    range_n: float
    p0_hpa: float
    sensitivity_hpa_per_n: float
    hysteresis_pct: float
    drift_pct: float
    r_squared: float
    dynamic: dict  # velocity -> {delta_f_pct, sigma_pct}
    quasistatic: dict  # delta_f_pct, sigma_pct, r_m_pct, r_s_pct
    detection_threshold_n: float


class CharacterizeResponse(BaseModel):
    rows: List[FingerCharacterization]
    report_csv: str


class ObjectModel(BaseModel):
    name: str = "custom"
    effective_radius: float = Field(..., gt=0)
    mass: float = Field(..., ge=0)
    stiffness: float = Field(default=50.0, gt=0)


class ShakeModel(BaseModel):
    velocity: float = 0.8
    amplitude: float = 0.05
    cycles: int = 5


class ScenarioModel(BaseModel):
    object_name: Optional[str] = None
    object_spec: Optional[ObjectModel] = None
    grasp: str = "MediumWrap"
    speed: float = Field(default=1.0, gt=0, le=1)
    hold_s: float = 10.0
    hold2_s: float = 10.0
    move_s: float = 2.0
    shake: ShakeModel = ShakeModel()
    grip_offset_mm: float = -25.0
    seed: int = 0


class PhaseModel(BaseModel):
    name: str
    t_start: float
    t_end: float


class ExperimentRequest(BaseModel):
    scenario: ScenarioModel
    include_telemetry: bool = False


class ExperimentResponse(BaseModel):
    phases: List[PhaseModel]
    events: List[str]
    retained: Optional[bool]
    grasp_failed: bool
    stop_time_s: Optional[float]
    duration_s: float
    telemetry_csv: Optional[str] = None


class SpeedTestRequest(BaseModel):
    factors: List[float] = [0.1, 0.5, 1.0]
    grasp: str = "MediumWrap"


class SpeedTestResponse(BaseModel):
    results: dict  # factor -> {closing_s, opening_s}


class PayloadTestRequest(BaseModel):
    mass_kg: float = Field(..., ge=0)


class PayloadTestResponse(BaseModel):
    passed: bool
    events: List[str]
    retained: Optional[bool]


class HandResetRequest(BaseModel):
    seed: int = 0
    scenario: Optional[ScenarioModel] = None


class ConsoleRequest(BaseModel):
    line: str


class ConsoleResponse(BaseModel):
    replies: List[str]
    t: float


class AdvanceRequest(BaseModel):
    duration_s: float = Field(..., gt=0, le=600)


class FrameModel(BaseModel):
    seq: int
    t_ms: int
    angles: List[float]
    currents: List[float]
    forces: List[float]


class AdvanceResponse(BaseModel):
    t: float
    frames: List[FrameModel]
    replies: List[str]


class HandStateResponse(BaseModel):
    t: float
    phase: str
    scenario_phase: Optional[str]
    theta_rad: List[float]
    currents_a: List[float]
    forces_n: List[float]
    state_line: str
