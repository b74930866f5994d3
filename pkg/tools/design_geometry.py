#!/usr/bin/env python3
"""Search for the unpublished linkage dimensions (coupler, ground link,
follower, ground direction) by geometric simulation of the finger motion.

The phalanx lengths are fixed; the free dimensions are scanned for a
mechanism that
  - assembles over the whole 0..95 deg input sweep on one continuous branch,
  - starts straight (PIP flexion ~0 at theta = 0; the follower rest length
    is derived from that condition),
  - curls anatomically (PIP flexion monotone, reaching >= 70 deg at full
    flexion),
  - wraps palm-resting cylinders covering at least the 15..70 mm radius
    band.

Run:  python3 tools/design_geometry.py
Paste the winner into LinkageGeometry defaults / data/geometry.yaml.
"""

import itertools
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from tacthand import kinematics as kin
from tacthand.kinematics import LinkageGeometry, NotAssemblable, solve_fourbar


def candidate(len_bc, len_ad, ground_angle_deg):
    """Build a geometry whose follower rest length makes the finger straight
    at theta = 0 (coupler pointing proximally along -x)."""
    b0 = (36.0, 0.0)
    c0 = (36.0 - len_bc, 0.0)
    a = math.radians(ground_angle_deg)
    d = (len_ad * math.cos(a), len_ad * math.sin(a))
    len_cd = math.hypot(c0[0] - d[0], c0[1] - d[1])
    return LinkageGeometry(len_bc=len_bc, len_ad=len_ad, len_cd_rest=len_cd,
                           ground_angle_deg=ground_angle_deg,
                           theta_max=math.radians(100.0))


def evaluate(geom, verbose=False):
    thetas = [math.radians(t / 4.0) for t in range(0, 100 * 4 + 1)]
    flex = []
    prev_c = None
    for th in thetas:
        try:
            pose = solve_fourbar(geom, th)
        except NotAssemblable:
            return None
        if prev_c is not None:
            step = math.hypot(pose.joint_c[0] - prev_c[0],
                              pose.joint_c[1] - prev_c[1])
            if step > 3.0:  # branch jump
                return None
        prev_c = pose.joint_c
        flex.append(kin.pip_flexion(pose))
    f0, f_end = flex[0], flex[-1]
    if abs(f0) > math.radians(6.0):
        return None
    if f_end < math.radians(70.0) or f_end > math.radians(130.0):
        return None
    diffs = [b - a for a, b in zip(flex[:-1], flex[1:])]
    if min(diffs) < -1e-6:
        return None
    try:
        env = kin.grasp_radius_envelope(geom, samples=120)
    except NotAssemblable:
        return None
    if env["r_min"] > 15.0 or env["r_max"] < 70.0:
        if verbose:
            print(f"   envelope miss: {env}")
        return None
    return {"flex_end_deg": math.degrees(f_end), **env}


def main():
    hits = []
    for len_bc, len_ad, ang in itertools.product(
            [8, 10, 12, 14, 16, 18, 20], [8, 10, 12, 14, 16, 18],
            range(60, 170, 10)):
        geom = candidate(float(len_bc), float(len_ad), float(ang))
        res = evaluate(geom)
        if res:
            hits.append((geom, res))
            print(f"HIT bc={len_bc} ad={len_ad} ang={ang} "
                  f"cd={geom.len_cd_rest:.3f}  "
                  f"flex_end={res['flex_end_deg']:.1f} deg  "
                  f"r=[{res['r_min']:.1f}, {res['r_max']:.1f}]")
    print(f"{len(hits)} candidates")


if __name__ == "__main__":
    main()
