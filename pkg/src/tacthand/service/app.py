"""FastAPI service exposing the simulation stack: stateless compute
endpoints (sizing, calibration, characterization, experiments, speed and
payload tests) and one stateful hand session driven through the console
grammar, mirroring how the physical device is operated over its serial
interfaces."""

from fastapi import FastAPI, HTTPException

from ..plant import size_actuation
from . import schemas as S

# simulation modules are imported inside the handlers that need them so the
# cheap endpoints (sizing) stay fast to reach on a cold start

app = FastAPI(title="tacthand simulation service", version="0.1.0")


def _scenario_from_model(m: S.ScenarioModel):
    from .. import configio
    from ..scenario import ObjectSpec, Scenario

    if m.object_spec is not None:
        obj = ObjectSpec(name=m.object_spec.name,
                         effective_radius=m.object_spec.effective_radius,
                         mass=m.object_spec.mass,
                         stiffness=m.object_spec.stiffness)
    elif m.object_name is not None:
        objects = configio.load_objects()
        if m.object_name not in objects:
            raise HTTPException(404, f"unknown object {m.object_name!r}")
        obj = objects[m.object_name]
    else:
        raise HTTPException(422, "scenario needs object_name or object_spec")
    return Scenario(object=obj, grasp_name=m.grasp, global_speed=m.speed,
                    hold_s=m.hold_s, hold2_s=m.hold2_s, move_s=m.move_s,
                    shake_velocity=m.shake.velocity,
                    shake_amplitude=m.shake.amplitude,
                    shake_cycles=m.shake.cycles,
                    grip_offset_mm=m.grip_offset_mm, seed=m.seed)


@app.get("/health")
def health():
    return {"status": "ok", "service": app.title, "version": app.version}


@app.post("/size", response_model=S.SizingResponse)
def size(req: S.SizingRequest):
    r = size_actuation(req.payload_kg, req.lever_mm, req.worm_ratio,
                       req.stall_torque_nmm)
    return S.SizingResponse(grip_force_n=r.grip_force,
                            mcp_torque_nmm=r.mcp_torque,
                            motor_torque_nmm=r.motor_torque,
                            safety_factor=r.safety_factor)


@app.post("/calibrate", response_model=S.CalibrateResponse)
def calibrate_trace(req: S.CalibrateRequest):
    from ..tactile import (CycleSegmentation, IllConditioned, calibrate,
                           trace_from_csv)
    try:
        trace = trace_from_csv(req.trace_csv)
    except (ValueError, IndexError) as e:
        raise HTTPException(422, f"bad trace csv: {e}")
    try:
        cal = calibrate(trace, degree=req.degree,
                        expected_cycles=req.expected_cycles)
    except (CycleSegmentation, IllConditioned) as e:
        raise HTTPException(422, f"{type(e).__name__}: {e}")
    return S.CalibrateResponse(
        degree=cal.degree, r_squared=cal.r_squared, p0_est_hpa=cal.p0_est,
        range_est_n=cal.range_est,
        sensitivity_hpa_per_n=cal.sensitivity_est,
        hysteresis_n=cal.hysteresis_abs,
        hysteresis_pct_of_range=cal.hysteresis_frac * 100.0,
        drift_pct_of_zero=cal.drift_frac * 100.0,
        poly_inverse=list(cal.poly_inverse))


REPORT_COLUMNS = ("finger,R_n,P0_hPa,s_hPa_per_N,h_pct,"
                  "dF10_pct,sig10_pct,dF25_pct,sig25_pct,"
                  "dF50_pct,sig50_pct,dF100_pct,sig100_pct,"
                  "dFqs_pct,sigqs_pct,r_m_pct,r_s_pct")


@app.post("/characterize", response_model=S.CharacterizeResponse)
def characterize(req: S.CharacterizeRequest):
    from .. import configio
    from ..tactile import (calibrate, calibration_cycles,
                           characterize_dynamic, characterize_quasistatic,
                           determine_range, dynamic_cycles,
                           quasistatic_trace)
    presets = configio.load_sensors()
    fingers = req.fingers or list(presets)
    rows = []
    csv_lines = [REPORT_COLUMNS]
    for finger in fingers:
        if finger not in presets:
            raise HTTPException(404, f"unknown finger preset {finger!r}")
        model, degree = presets[finger]
        cal = calibrate(calibration_cycles(model, seed=101), degree=degree)
        dyn = characterize_dynamic(cal, dynamic_cycles(model, seed=102))
        qs = characterize_quasistatic(cal, quasistatic_trace(model, seed=103))
        rng = determine_range(model)
        rows.append(S.FingerCharacterization(
            finger=finger, range_n=rng.range_n, p0_hpa=cal.p0_est,
            sensitivity_hpa_per_n=cal.sensitivity_est,
            hysteresis_pct=cal.hysteresis_frac * 100.0,
            drift_pct=cal.drift_frac * 100.0, r_squared=cal.r_squared,
            dynamic={str(v): dyn[v] for v in sorted(dyn)},
            quasistatic=qs, detection_threshold_n=rng.threshold))
        cells = [finger, f"{rng.range_n:.2f}", f"{cal.p0_est:.2f}",
                 f"{cal.sensitivity_est:.2f}",
                 f"{cal.hysteresis_frac * 100:.2f}"]
        for v in sorted(dyn):
            cells += [f"{dyn[v]['delta_f_pct']:.2f}",
                      f"{dyn[v]['sigma_pct']:.2f}"]
        cells += [f"{qs['delta_f_pct']:.2f}", f"{qs['sigma_pct']:.2f}",
                  f"{qs['r_m_pct']:.2f}", f"{qs['r_s_pct']:.2f}"]
        csv_lines.append(",".join(cells))
    return S.CharacterizeResponse(rows=rows,
                                  report_csv="\n".join(csv_lines) + "\n")


@app.post("/experiments/run", response_model=S.ExperimentResponse)
def experiments_run(req: S.ExperimentRequest):
    from ..scenario import run_experiment
    log = run_experiment(_scenario_from_model(req.scenario))
    return S.ExperimentResponse(
        phases=[S.PhaseModel(name=p.name, t_start=p.t_start, t_end=p.t_end)
                for p in log.phases],
        events=[f"{t:.3f} {e}" for t, e in log.events],
        retained=log.retained, grasp_failed=log.grasp_failed,
        stop_time_s=log.stop_time,
        duration_s=log.phases[-1].t_end,
        telemetry_csv=log.telemetry_csv() if req.include_telemetry else None)


@app.post("/speedtest", response_model=S.SpeedTestResponse)
def speedtest(req: S.SpeedTestRequest):
    from ..scenario import speed_test
    table = speed_test(tuple(req.factors), grasp_name=req.grasp)
    return S.SpeedTestResponse(results={str(k): v for k, v in table.items()})


@app.post("/payload-test", response_model=S.PayloadTestResponse)
def payload(req: S.PayloadTestRequest):
    from ..scenario import payload_hold_test
    res = payload_hold_test(req.mass_kg)
    return S.PayloadTestResponse(
        passed=res["passed"],
        events=[f"{t:.3f} {e}" for t, e in res["log"].events],
        retained=res["log"].retained)


class HandService:
    """One live hand session: a bare hand, or a hand inside a scenario
    environment with the operator (not the service) in charge of stopping."""

    def __init__(self, seed: int = 0, scenario=None):
        from ..hand import HandSimulation
        from ..scenario import ScenarioSession

        self.scenario_session = None
        if scenario is not None:
            self.scenario_session = ScenarioSession(scenario,
                                                    auto_stop=False)
            self.hand = self.scenario_session.hand
        else:
            self.hand = HandSimulation(seed=seed)
        self._frame_cursor = 0
        self._reply_cursor = 0

    def step_once(self):
        if self.scenario_session is not None:
            self.scenario_session.step()
        else:
            self.hand.step_outer()

    def advance(self, duration_s: float):
        for _ in range(int(round(duration_s / self.hand.dt_outer))):
            self.step_once()

    def take_replies(self):
        out = self.hand.replies[self._reply_cursor:]
        self._reply_cursor = len(self.hand.replies)
        return out

    def take_frames(self):
        out = self.hand.frames[self._frame_cursor:]
        self._frame_cursor = len(self.hand.frames)
        return out

    @property
    def scenario_phase(self):
        if self.scenario_session is None:
            return None
        return self.scenario_session.phase


_hand_service = None


def get_hand_service() -> HandService:
    global _hand_service
    if _hand_service is None:
        _hand_service = HandService()
    return _hand_service


@app.post("/hand/reset")
def hand_reset(req: S.HandResetRequest):
    global _hand_service
    scenario = (_scenario_from_model(req.scenario)
                if req.scenario is not None else None)
    _hand_service = HandService(seed=req.seed, scenario=scenario)
    return {"ok": True, "scenario": req.scenario is not None}


@app.post("/hand/console", response_model=S.ConsoleResponse)
def hand_console(req: S.ConsoleRequest):
    svc = get_hand_service()
    svc.hand.enqueue_line(req.line)
    svc.step_once()  # the device applies queued commands on its next tick
    return S.ConsoleResponse(replies=svc.take_replies(), t=svc.hand.t)


@app.post("/hand/advance", response_model=S.AdvanceResponse)
def hand_advance(req: S.AdvanceRequest):
    svc = get_hand_service()
    svc.advance(req.duration_s)
    frames = [S.FrameModel(seq=f.seq, t_ms=f.t_ms, angles=list(f.angles),
                           currents=list(f.currents), forces=list(f.forces))
              for f in svc.take_frames()]
    return S.AdvanceResponse(t=svc.hand.t, frames=frames,
                             replies=svc.take_replies())


@app.get("/hand/state", response_model=S.HandStateResponse)
def hand_state():
    svc = get_hand_service()
    hand = svc.hand
    return S.HandStateResponse(
        t=hand.t, phase=hand.session.phase.value,
        scenario_phase=svc.scenario_phase,
        theta_rad=[u.theta_raw for u in hand.units],
        currents_a=[abs(u.s.current) for u in hand.units],
        forces_n=[u.force_n for u in hand.units],
        state_line=hand.state_line())
