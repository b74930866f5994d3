"""Planar four-bar finger mechanism: closure solver, fingertip chain, grasp
radius envelope and the compliant-follower equilibrium.

Frame conventions (fixed for the whole package):
  - The MCP joint A sits at the origin; the palm line is the x axis with +x
    pointing distally. Dimensions in mm, angles in rad unless a name says
    degrees.
  - theta is the input-link (proximal phalanx) angle measured CCW from +x;
    flexion increases theta, curling the finger over an object resting on
    the palm line (circle center (x_c, r)).
  - The ground joint D is placed len_ad from A in the direction
    ground_angle_deg (inside the palm structure).
  - The intermediate phalanx is rigidly attached to the coupler and points
    opposite it: the coupler arm B->C runs proximally into the finger, the
    phalanx B->DIP runs distally.
  - Branch rule: of the two circle intersections for C, always take the one
    with cross(D - B, C - B) > 0: joint C on the palmar side of line B-D,
    the side the finger interior curls toward. The rule is total: the
    tangent case has both solutions coincide.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

PALMAR_BRANCH = 1.0


class NotAssemblable(ValueError):
    """The circle intersection for joint C has no real solution."""


class ExtensionLimit(RuntimeError):
    """The compliant follower hit its extension stop."""

    def __init__(self, result):
        super().__init__("follower extension limit reached")
        self.result = result


@dataclass(frozen=True)
class LinkageGeometry:
    """Phalanx lengths are design constants; coupler, ground link, follower
    and ground direction come from tools/design_geometry.py (finger straight
    at theta = 0, monotone curl to ~100 deg PIP flexion, grasp envelope
    covering 15..70 mm) and are overridable via the geometry config file."""

    len_ab: float = 36.0        # input link = proximal phalanx, mm
    len_bc: float = 12.0        # coupler arm, mm
    len_ad: float = 12.0        # ground link, mm
    len_cd_rest: float = 28.63601491716597  # follower rest length, mm
    len_mp: float = 23.5        # intermediate phalanx, mm
    len_dp: float = 21.0        # distal phalanx, mm
    dip_angle: float = math.radians(20.0)  # fixed DIP flexion
    theta_min: float = 0.0
    theta_max: float = math.radians(100.0)
    ground_angle_deg: float = 100.0  # direction of A->D, degrees

    def __post_init__(self):
        for name in ("len_ab", "len_bc", "len_ad", "len_cd_rest",
                     "len_mp", "len_dp"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.theta_max <= self.theta_min:
            raise ValueError("theta_max must exceed theta_min")

    @property
    def joint_d(self) -> tuple:
        a = math.radians(self.ground_angle_deg)
        return (self.len_ad * math.cos(a), self.len_ad * math.sin(a))

    def scaled(self, k: float) -> "LinkageGeometry":
        return replace(self, len_ab=k * self.len_ab, len_bc=k * self.len_bc,
                       len_ad=k * self.len_ad,
                       len_cd_rest=k * self.len_cd_rest,
                       len_mp=k * self.len_mp, len_dp=k * self.len_dp)


@dataclass(frozen=True)
class LinkagePose:
    theta_input: float
    coupler_angle: float      # angle of B->C
    follower_angle: float     # angle of D->C
    joint_b: tuple
    joint_c: tuple
    fingertip: tuple
    fingertip_heading: float
    dip_joint: tuple
    follower_length: float

    def chain(self):
        """Finger surface polyline MCP -> PIP -> DIP -> tip."""
        return ((0.0, 0.0), self.joint_b, self.dip_joint, self.fingertip)


@dataclass(frozen=True)
class ComplianceModel:
    stiffness: float = 2.0      # N/mm along the follower
    max_extension: float = 6.0  # mm

    def __post_init__(self):
        if self.stiffness <= 0:
            raise ValueError("stiffness must be > 0")


def _circle_intersection(b, d, r_b, r_d, branch):
    """Intersection of circles centered at b (radius r_b) and d (radius r_d)
    on the requested side of line b-d."""
    dx = d[0] - b[0]
    dy = d[1] - b[1]
    dist = math.hypot(dx, dy)
    if dist > r_b + r_d or dist < abs(r_b - r_d) or dist == 0.0:
        raise NotAssemblable(
            f"no closure: |BD| = {dist:.6g} vs radii {r_b:.6g}, {r_d:.6g}")
    a = (r_b * r_b - r_d * r_d + dist * dist) / (2.0 * dist)
    h_sq = r_b * r_b - a * a
    h = math.sqrt(h_sq) if h_sq > 0.0 else 0.0
    ux, uy = dx / dist, dy / dist
    # perp rotated +90 deg from u; cross(d-b, base + h*perp - b) = dist*h > 0
    px, py = -uy, ux
    s = 1.0 if branch > 0 else -1.0
    return (b[0] + a * ux + s * h * px, b[1] + a * uy + s * h * py)


def _pose_from_joints(geom: LinkageGeometry, theta, b, c, follower_length):
    coupler_angle = math.atan2(c[1] - b[1], c[0] - b[0])
    d = geom.joint_d
    follower_angle = math.atan2(c[1] - d[1], c[0] - d[0])
    # intermediate phalanx points opposite the coupler arm
    mp_angle = coupler_angle + math.pi
    dip = (b[0] + geom.len_mp * math.cos(mp_angle),
           b[1] + geom.len_mp * math.sin(mp_angle))
    tip_angle = mp_angle + geom.dip_angle
    tip = (dip[0] + geom.len_dp * math.cos(tip_angle),
           dip[1] + geom.len_dp * math.sin(tip_angle))
    return LinkagePose(theta_input=theta, coupler_angle=coupler_angle,
                       follower_angle=follower_angle, joint_b=b, joint_c=c,
                       fingertip=tip, fingertip_heading=tip_angle,
                       dip_joint=dip, follower_length=follower_length)


def solve_fourbar(geom: LinkageGeometry, theta: float) -> LinkagePose:
    """Closure solution of the rigid four-bar at input angle theta."""
    if not (geom.theta_min - 1e-12 <= theta <= geom.theta_max + 1e-12):
        raise ValueError("theta outside travel range")
    b = (geom.len_ab * math.cos(theta), geom.len_ab * math.sin(theta))
    c = _circle_intersection(b, geom.joint_d, geom.len_bc, geom.len_cd_rest,
                             PALMAR_BRANCH)
    return _pose_from_joints(geom, theta, b, c, geom.len_cd_rest)


def fingertip_pose(geom: LinkageGeometry, theta: float) -> LinkagePose:
    """Pose with the phalanx chain evaluated (PP -> MP -> DP, DIP fixed)."""
    return solve_fourbar(geom, theta)


def pip_flexion(pose: LinkagePose) -> float:
    """Flexion of the PIP joint: how far the intermediate phalanx has curled
    past the proximal one."""
    mp_angle = pose.coupler_angle + math.pi
    a = mp_angle - pose.theta_input
    while a > math.pi:
        a -= 2.0 * math.pi
    while a < -math.pi:
        a += 2.0 * math.pi
    return a


def _chain_points(pose: LinkagePose, per_segment: int = 24):
    pts = []
    chain = pose.chain()
    for (x0, y0), (x1, y1) in zip(chain[:-1], chain[1:]):
        for i in range(per_segment):
            t = i / per_segment
            pts.append((x0 + t * (x1 - x0), y0 + t * (y1 - y0)))
    pts.append(chain[-1])
    return pts


# Grasp rule for a palm-resting circle (center (x_c, r)): the finger surface
# must touch it (within a tolerance scaling with the finger) without
# penetrating, and some finger material must reach over the object -- a
# chain point vertically above the circle at no less than OVERHANG_FRAC of
# its resting height. The overhang clause excludes the degenerate tangency
# of the extended finger along the palm line and mere side pokes.
CONTACT_TOL_FRAC = 0.003  # of total chain length
OVERHANG_FRAC = 0.8


def grasp_radius_envelope(geom: LinkageGeometry, samples: int = 180,
                          x_c_steps: int = 80):
    """Smallest and largest palm-resting cylinder radius the closing finger
    grasps per the contact + overhang rule, swept over the travel range.

    Palm positions x_c span [-1.12, 0.5] chain lengths around the MCP (the
    physical palm extent). For each pose and palm position the unique
    touching radius comes from bisection on the monotone gap function
    g(r) = dist(chain, (x_c, r)) - r (g' in [-2, 0]), vectorized across
    palm positions. All tolerances scale with the chain so uniform geometry
    scaling scales the envelope.
    """
    if samples < 16:
        raise ValueError("samples must be >= 16")
    chain_len = geom.len_ab + geom.len_mp + geom.len_dp
    tol = CONTACT_TOL_FRAC * chain_len
    xs = np.linspace(-1.12 * chain_len, 0.5 * chain_len, x_c_steps + 1)
    r_lo = np.full_like(xs, 0.00625 * chain_len)
    r_hi = np.full_like(xs, 5.0 * chain_len)
    r_min, r_max = float("inf"), 0.0
    for i in range(samples + 1):
        theta = geom.theta_min + (geom.theta_max - geom.theta_min) * i / samples
        pose = solve_fourbar(geom, theta)
        pts = np.asarray(_chain_points(pose))
        px = pts[:, 0][:, None]
        py = pts[:, 1][:, None]
        dx = px - xs[None, :]

        def gap(r):
            d = np.sqrt(dx * dx + (py - r[None, :]) ** 2)
            return d.min(axis=0) - r

        valid = (gap(r_lo) > 0.0) & (gap(r_hi) < 0.0)
        lo, hi = r_lo.copy(), r_hi.copy()
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            above = gap(mid) > 0.0
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        r = 0.5 * (lo + hi)

        d = np.sqrt(dx * dx + (py - r[None, :]) ** 2)
        penetrates = (d < r[None, :] - tol).any(axis=0)
        touches = (d <= r[None, :] + tol).any(axis=0)
        overhangs = ((np.abs(dx) <= r[None, :])
                     & (py >= OVERHANG_FRAC * r[None, :])).any(axis=0)
        ok = valid & ~penetrates & touches & overhangs
        if ok.any():
            r_ok = r[ok]
            r_min = min(r_min, float(r_ok.min()))
            r_max = max(r_max, float(r_ok.max()))
    if not math.isfinite(r_min):
        raise NotAssemblable("no grasping contact anywhere in the sweep")
    return {"r_min": r_min, "r_max": r_max}


def trajectory_csv(geom: LinkageGeometry, samples: int = 200) -> str:
    """Fingertip trajectory over the travel range as CSV
    (theta_deg, tip_x_mm, tip_y_mm, heading_deg)."""
    lines = ["theta_deg,tip_x_mm,tip_y_mm,heading_deg"]
    for i in range(samples + 1):
        theta = geom.theta_min + (geom.theta_max - geom.theta_min) * i / samples
        pose = fingertip_pose(geom, theta)
        lines.append(f"{math.degrees(theta):.4f},{pose.fingertip[0]:.6f},"
                     f"{pose.fingertip[1]:.6f},"
                     f"{math.degrees(pose.fingertip_heading):.4f}")
    return "\n".join(lines) + "\n"


def _distal_rotation_pose(geom, theta, delta):
    """Pose with the distal body (coupler + MP + DP) rotated about B by delta
    from the rigid closure, stretching or slackening the follower."""
    rigid = solve_fourbar(geom, theta)
    b = rigid.joint_b
    ca, sa = math.cos(delta), math.sin(delta)
    vx = rigid.joint_c[0] - b[0]
    vy = rigid.joint_c[1] - b[1]
    c = (b[0] + ca * vx - sa * vy, b[1] + sa * vx + ca * vy)
    d = geom.joint_d
    length = math.hypot(c[0] - d[0], c[1] - d[1])
    return _pose_from_joints(geom, theta, b, c, length)


def compliant_equilibrium(geom: LinkageGeometry, comp: ComplianceModel,
                          external_tip_torque: float, theta: float):
    """Equilibrium of the compliant follower under an external torque on the
    distal body about the PIP joint (N*mm, in the direction that stretches
    the follower).

    Returns {"pose": LinkagePose, "cd_extension": mm}. Raises ExtensionLimit
    (carrying the clamped result) if the spring cannot balance the torque
    within its extension stop.
    """
    from scipy.optimize import brentq

    if external_tip_torque < 0:
        raise ValueError("external_tip_torque must be >= 0")
    if external_tip_torque == 0.0:
        return {"pose": solve_fourbar(geom, theta), "cd_extension": 0.0}

    d = geom.joint_d

    def extension(delta):
        pose = _distal_rotation_pose(geom, theta, delta)
        return pose.follower_length - geom.len_cd_rest

    # pick the rotation direction that stretches the follower
    eps = 1e-6
    sign = 1.0 if extension(eps) > extension(-eps) else -1.0

    def spring_torque(delta):
        pose = _distal_rotation_pose(geom, theta, sign * delta)
        ext = pose.follower_length - geom.len_cd_rest
        if ext <= 0.0:
            return 0.0
        b, c = pose.joint_b, pose.joint_c
        ux = (d[0] - c[0]) / pose.follower_length
        uy = (d[1] - c[1]) / pose.follower_length
        arm = abs((c[0] - b[0]) * uy - (c[1] - b[1]) * ux)
        return comp.stiffness * ext * arm

    def delta_at_extension(target_ext):
        return brentq(lambda dl: extension(sign * dl) - target_ext,
                      0.0, math.pi / 2, xtol=1e-12)

    delta_max = delta_at_extension(comp.max_extension)
    f = lambda dl: spring_torque(dl) - external_tip_torque
    if f(delta_max) < 0.0:
        pose = _distal_rotation_pose(geom, theta, sign * delta_max)
        raise ExtensionLimit({"pose": pose,
                              "cd_extension": comp.max_extension})
    delta = brentq(f, 0.0, delta_max, xtol=1e-12)
    pose = _distal_rotation_pose(geom, theta, sign * delta)
    return {"pose": pose,
            "cd_extension": pose.follower_length - geom.len_cd_rest}
