import math

import numpy as np
import pytest

from tacthand.kinematics import (ComplianceModel, ExtensionLimit,
                                 LinkageGeometry, NotAssemblable,
                                 compliant_equilibrium, fingertip_pose,
                                 grasp_radius_envelope, pip_flexion,
                                 solve_fourbar)


def oracle_circle_intersection(b, d, r_b, r_d):
    """Brute-force intersection: scan the full circle around b for points at
    distance r_d from d, refine each root by bisection. Returns both
    solutions (may coincide)."""
    b = np.asarray(b)
    d = np.asarray(d)
    phi = np.linspace(0.0, 2.0 * np.pi, 8193)
    pts = b + r_b * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    f = np.hypot(pts[:, 0] - d[0], pts[:, 1] - d[1]) - r_d
    roots = []
    for i in range(len(phi) - 1):
        if f[i] == 0.0:
            roots.append(phi[i])
        elif f[i] * f[i + 1] < 0.0:
            lo, hi = phi[i], phi[i + 1]
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                fm = math.hypot(b[0] + r_b * math.cos(mid) - d[0],
                                b[1] + r_b * math.sin(mid) - d[1]) - r_d
                flo = math.hypot(b[0] + r_b * math.cos(lo) - d[0],
                                 b[1] + r_b * math.sin(lo) - d[1]) - r_d
                if flo * fm <= 0.0:
                    hi = mid
                else:
                    lo = mid
            roots.append(0.5 * (lo + hi))
    return [(b[0] + r_b * math.cos(p), b[1] + r_b * math.sin(p))
            for p in roots]


def oracle_solve(geom, theta):
    """Independent closure solution: brute-force intersection, then pick the
    flexing branch by the same palmar-side sign."""
    b = (geom.len_ab * math.cos(theta), geom.len_ab * math.sin(theta))
    d = geom.joint_d
    sols = oracle_circle_intersection(b, d, geom.len_bc, geom.len_cd_rest)
    if not sols:
        raise NotAssemblable("oracle: no intersection")
    def cross(c):
        return ((d[0] - b[0]) * (c[1] - b[1])
                - (d[1] - b[1]) * (c[0] - b[0]))
    flexing = [c for c in sols if cross(c) > 0]
    return flexing[0] if flexing else sols[0]


def random_assemblable_geometries(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        geom = LinkageGeometry(
            len_ab=float(rng.uniform(15, 60)),
            len_bc=float(rng.uniform(5, 30)),
            len_ad=float(rng.uniform(5, 30)),
            len_cd_rest=float(rng.uniform(10, 60)),
            ground_angle_deg=float(rng.uniform(0, 360)),
            theta_min=0.0, theta_max=math.pi)
        theta = float(rng.uniform(0, math.pi))
        try:
            solve_fourbar(geom, theta)
        except NotAssemblable:
            continue
        out.append((geom, theta))
    return out


class TestSolveFourbar:
    def test_input_link_is_proximal_phalanx(self):
        pose = solve_fourbar(LinkageGeometry(), 0.7)
        assert math.hypot(*pose.joint_b) == pytest.approx(36.0, abs=1e-12)

    def test_open_pose_matches_oracle(self):
        geom = LinkageGeometry()
        pose = solve_fourbar(geom, geom.theta_min)
        c_oracle = oracle_solve(geom, geom.theta_min)
        assert pose.joint_c[0] == pytest.approx(c_oracle[0], abs=1e-6)
        assert pose.joint_c[1] == pytest.approx(c_oracle[1], abs=1e-6)

    def test_oracle_agreement_on_random_geometries(self):
        for geom, theta in random_assemblable_geometries(1000, seed=1):
            pose = solve_fourbar(geom, theta)
            c_oracle = oracle_solve(geom, theta)
            assert math.hypot(pose.joint_c[0] - c_oracle[0],
                              pose.joint_c[1] - c_oracle[1]) < 1e-6

    def test_loop_closure_residual(self):
        geom = LinkageGeometry()
        d = geom.joint_d
        for theta in np.linspace(geom.theta_min, geom.theta_max, 400):
            pose = solve_fourbar(geom, float(theta))
            bc = math.hypot(pose.joint_c[0] - pose.joint_b[0],
                            pose.joint_c[1] - pose.joint_b[1])
            cd = math.hypot(pose.joint_c[0] - d[0], pose.joint_c[1] - d[1])
            assert abs(bc - geom.len_bc) < 1e-9
            assert abs(cd - geom.len_cd_rest) < 1e-9

    def test_branch_continuity_at_fine_resolution(self):
        geom = LinkageGeometry()
        thetas = np.arange(geom.theta_min, geom.theta_max,
                           math.radians(0.1))
        prev = None
        for theta in thetas:
            pose = solve_fourbar(geom, float(theta))
            if prev is not None:
                assert abs(pose.coupler_angle - prev) < math.radians(2.0)
            prev = pose.coupler_angle

    def test_not_assemblable_degenerate(self):
        # coupler + follower can't span the B-D gap anywhere
        geom = LinkageGeometry(len_bc=2.0, len_cd_rest=2.0)
        with pytest.raises(NotAssemblable):
            solve_fourbar(geom, 0.5)

    def test_scaling_equivariance_exact_power_of_two(self):
        geom = LinkageGeometry()
        big = geom.scaled(2.0)
        for theta in (0.1, 0.7, 1.4):
            a = solve_fourbar(geom, theta)
            b = solve_fourbar(big, theta)
            assert b.joint_c[0] == 2.0 * a.joint_c[0]
            assert b.joint_c[1] == 2.0 * a.joint_c[1]
            assert b.fingertip[0] == 2.0 * a.fingertip[0]
            assert b.fingertip[1] == 2.0 * a.fingertip[1]
            assert b.coupler_angle == a.coupler_angle

    def test_scaling_equivariance_general(self):
        geom = LinkageGeometry()
        k = 1.7
        big = geom.scaled(k)
        a = solve_fourbar(geom, 0.9)
        b = solve_fourbar(big, 0.9)
        assert b.fingertip[0] == pytest.approx(k * a.fingertip[0], rel=1e-12)
        assert b.fingertip[1] == pytest.approx(k * a.fingertip[1], rel=1e-12)


class TestFingertipChain:
    def test_straight_chain_sum(self):
        geom = LinkageGeometry(dip_angle=0.0)
        # at theta = 0 the shipped geometry is straight by construction
        pose = fingertip_pose(geom, 0.0)
        assert math.hypot(*pose.fingertip) == pytest.approx(
            36.0 + 23.5 + 21.0, abs=1e-9)

    def test_chain_matches_transform_oracle(self):
        geom = LinkageGeometry()
        for theta in (0.0, 0.5, 1.1, 1.6):
            pose = fingertip_pose(geom, theta)
            mp_angle = pose.coupler_angle + math.pi

            def rot(a):
                return np.array([[math.cos(a), -math.sin(a), 0.0],
                                 [math.sin(a), math.cos(a), 0.0],
                                 [0.0, 0.0, 1.0]])

            def trans(x):
                return np.array([[1.0, 0.0, x], [0.0, 1.0, 0.0],
                                 [0.0, 0.0, 1.0]])

            t = (rot(theta) @ trans(geom.len_ab)
                 @ rot(mp_angle - theta) @ trans(geom.len_mp)
                 @ rot(geom.dip_angle) @ trans(geom.len_dp))
            tip = t @ np.array([0.0, 0.0, 1.0])
            assert pose.fingertip[0] == pytest.approx(tip[0], abs=1e-9)
            assert pose.fingertip[1] == pytest.approx(tip[1], abs=1e-9)

    def test_fingertip_path_continuous(self):
        geom = LinkageGeometry()
        step = math.radians(0.25)
        chain_len = geom.len_ab + geom.len_mp + geom.len_dp
        prev = None
        theta = geom.theta_min
        while theta <= geom.theta_max:
            tip = fingertip_pose(geom, theta).fingertip
            if prev is not None:
                jump = math.hypot(tip[0] - prev[0], tip[1] - prev[1])
                assert jump <= 3.0 * step * chain_len
            prev = tip
            theta += step

    def test_flexion_monotone_and_anatomical(self):
        geom = LinkageGeometry()
        flex = [pip_flexion(solve_fourbar(geom, float(t)))
                for t in np.linspace(geom.theta_min, geom.theta_max, 200)]
        assert abs(flex[0]) < math.radians(1.0)
        assert flex[-1] > math.radians(70.0)
        assert all(b >= a - 1e-9 for a, b in zip(flex[:-1], flex[1:]))


def oracle_envelope(geom, theta_samples, x_steps, r_step):
    """Dense-grid circle-fit oracle: test every (theta, x_c, r) cell against
    the contact + overhang rule directly."""
    from tacthand.kinematics import (CONTACT_TOL_FRAC, OVERHANG_FRAC,
                                     _chain_points)
    chain_len = geom.len_ab + geom.len_mp + geom.len_dp
    tol = CONTACT_TOL_FRAC * chain_len
    x_lo, x_hi = -1.12 * chain_len, 0.5 * chain_len
    radii = np.arange(r_step, 5.0 * chain_len, r_step)
    r_min, r_max = np.inf, 0.0
    for theta in np.linspace(geom.theta_min, geom.theta_max, theta_samples):
        pts = np.array(_chain_points(solve_fourbar(geom, float(theta))))
        for x_c in np.linspace(x_lo, x_hi, x_steps):
            dx = pts[:, 0] - x_c
            for r in radii:
                d = np.hypot(dx, pts[:, 1] - r)
                if (d < r - tol).any():
                    continue
                if not (d <= r + tol).any():
                    continue
                over = (np.abs(dx) <= r) & (pts[:, 1] >= OVERHANG_FRAC * r)
                if over.any():
                    r_min = min(r_min, r)
                    r_max = max(r_max, r)
    return {"r_min": float(r_min), "r_max": float(r_max)}


class TestGraspEnvelope:
    def test_default_geometry_covers_published_band(self):
        env = grasp_radius_envelope(LinkageGeometry(), samples=140)
        assert env["r_min"] <= 15.0
        assert env["r_max"] >= 70.0

    def test_scaling_doubles_radii(self):
        geom = LinkageGeometry()
        a = grasp_radius_envelope(geom, samples=60, x_c_steps=40)
        b = grasp_radius_envelope(geom.scaled(2.0), samples=60, x_c_steps=40)
        assert b["r_min"] == pytest.approx(2.0 * a["r_min"], rel=0.01)
        assert b["r_max"] == pytest.approx(2.0 * a["r_max"], rel=0.01)

    def test_matches_dense_grid_oracle(self):
        geom = LinkageGeometry().scaled(0.5)
        impl = grasp_radius_envelope(geom, samples=60, x_c_steps=40)
        orc = oracle_envelope(geom, theta_samples=61, x_steps=41, r_step=0.25)
        assert impl["r_min"] == pytest.approx(orc["r_min"], abs=1.0)
        assert impl["r_max"] == pytest.approx(orc["r_max"], abs=1.5)

    def test_rejects_too_few_samples(self):
        with pytest.raises(ValueError):
            grasp_radius_envelope(LinkageGeometry(), samples=8)


class TestCompliantEquilibrium:
    def test_zero_torque_zero_extension(self):
        geom = LinkageGeometry()
        comp = ComplianceModel()
        res = compliant_equilibrium(geom, comp, 0.0, 0.8)
        assert res["cd_extension"] == 0.0
        rigid = solve_fourbar(geom, 0.8)
        assert res["pose"].joint_c == rigid.joint_c

    def test_closed_form_check_at_one_mm(self):
        geom = LinkageGeometry()
        comp = ComplianceModel(stiffness=2.0, max_extension=6.0)
        theta = 0.8
        # torque that balances the spring at exactly 1 mm extension
        from tacthand.kinematics import _distal_rotation_pose
        from scipy.optimize import brentq

        def ext_of(delta):
            return (_distal_rotation_pose(geom, theta, delta).follower_length
                    - geom.len_cd_rest)

        sgn = 1.0 if ext_of(1e-6) > 0 else -1.0
        delta1 = brentq(lambda dl: ext_of(sgn * dl) - 1.0, 0.0, 1.0,
                        xtol=1e-14)
        pose1 = _distal_rotation_pose(geom, theta, sgn * delta1)
        d = geom.joint_d
        ux = (d[0] - pose1.joint_c[0]) / pose1.follower_length
        uy = (d[1] - pose1.joint_c[1]) / pose1.follower_length
        arm = abs((pose1.joint_c[0] - pose1.joint_b[0]) * uy
                  - (pose1.joint_c[1] - pose1.joint_b[1]) * ux)
        torque = comp.stiffness * 1.0 * arm
        res = compliant_equilibrium(geom, comp, torque, theta)
        assert res["cd_extension"] == pytest.approx(1.0, abs=1e-6)

    def test_extension_limit_raised_with_clamped_pose(self):
        geom = LinkageGeometry()
        comp = ComplianceModel(stiffness=2.0, max_extension=2.0)
        with pytest.raises(ExtensionLimit) as exc:
            compliant_equilibrium(geom, comp, 1e6, 0.8)
        clamped = exc.value.result
        assert clamped["cd_extension"] == pytest.approx(2.0)

    def test_rejects_negative_torque(self):
        with pytest.raises(ValueError):
            compliant_equilibrium(LinkageGeometry(), ComplianceModel(),
                                  -1.0, 0.5)
