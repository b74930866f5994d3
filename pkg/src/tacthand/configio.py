"""Config file loading. All shipped defaults live as YAML under
tacthand/data; every loader takes an optional path to an override file with
the same schema."""

import math
from importlib import resources
from pathlib import Path

import yaml

from .control import ControllerConfig, Mode
from .kinematics import ComplianceModel, LinkageGeometry
from .plant import MotorParams
from .tactile.model import SensorModel


def _load_yaml(name: str, path=None) -> dict:
    if path is not None:
        return yaml.safe_load(Path(path).read_text())
    ref = resources.files("tacthand.data") / name
    return yaml.safe_load(ref.read_text())


def load_geometry(path=None) -> LinkageGeometry:
    g = _load_yaml("geometry.yaml", path)["geometry"]
    return LinkageGeometry(
        len_ab=g["len_ab"], len_bc=g["len_bc"], len_ad=g["len_ad"],
        len_cd_rest=g["len_cd_rest"], len_mp=g["len_mp"], len_dp=g["len_dp"],
        dip_angle=math.radians(g["dip_angle_deg"]),
        theta_min=math.radians(g["theta_min_deg"]),
        theta_max=math.radians(g["theta_max_deg"]),
        ground_angle_deg=g["ground_angle_deg"])


def load_compliance(path=None) -> ComplianceModel:
    c = _load_yaml("geometry.yaml", path)["compliance"]
    return ComplianceModel(stiffness=c["stiffness"],
                           max_extension=c["max_extension"])


def load_motor(variant: str = "motor_75", path=None) -> MotorParams:
    doc = _load_yaml("motor.yaml", path)
    if variant not in doc:
        raise KeyError(f"unknown motor variant {variant!r}")
    return MotorParams(**doc[variant])


def load_encoder_cpr(path=None) -> int:
    return int(_load_yaml("motor.yaml", path)["encoder"]
               ["counts_per_motor_rev"])


def load_controller(mode: Mode = Mode.POSITION, path=None) -> ControllerConfig:
    c = _load_yaml("controller.yaml", path)["controller"]
    return ControllerConfig(mode=mode, **c)


def load_sensors(path=None) -> dict:
    """Per-finger (SensorModel, fit_degree) presets."""
    doc = _load_yaml("sensors.yaml", path)["sensors"]
    out = {}
    for name, fields in doc.items():
        fields = dict(fields)
        degree = fields.pop("fit_degree")
        fields["poly_true"] = tuple(fields["poly_true"])
        out[name] = (SensorModel(**fields), degree)
    return out


def load_grasp_library(path=None) -> dict:
    from .grasp import GraspDefinition
    doc = _load_yaml("grasps.yaml", path)["grasps"]
    out = {}
    for name, g in doc.items():
        out[name] = GraspDefinition(
            name=name,
            prep_position=tuple(math.radians(v) for v in g["prep"]),
            target_position=tuple(math.radians(v) for v in g["target"]),
            finger_speed_factor=tuple(float(v) for v in g["factors"]))
    return out


def load_objects(path=None) -> dict:
    from .scenario import ObjectSpec
    doc = _load_yaml("objects.yaml", path)["objects"]
    return {name: ObjectSpec(name=name,
                             effective_radius=o["effective_radius"],
                             mass=o["mass"], stiffness=o["stiffness"])
            for name, o in doc.items()}


def load_hand_config(path=None) -> dict:
    return _load_yaml("hand.yaml", path)["hand"]
