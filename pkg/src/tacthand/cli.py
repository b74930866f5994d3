"""`sim` command line: a thin client of the simulation service. By default
it spins the FastAPI app up in-process; point --server at a running
`sim serve` instance to operate that one instead."""

import sys
import warnings

import click
import yaml


def make_client(server: str):
    if server:
        import httpx
        return httpx.Client(base_url=server, timeout=600.0)
    warnings.filterwarnings("ignore", message="Using `httpx` with")
    from fastapi.testclient import TestClient

    from .service import app
    return TestClient(app)


def check(resp):
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        raise click.ClickException(f"service error {resp.status_code}: "
                                   f"{detail}")
    return resp.json()


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="base URL of a running service (default: in-process)")
@click.pass_context
def main(ctx, server):
    """Tactile linkage-hand simulation."""
    ctx.obj = server


@main.command()
@click.option("--payload", type=float, required=True, help="payload mass, kg")
@click.option("--lever", type=float, required=True, help="lever arm, mm")
@click.option("--worm", type=float, default=20.0, show_default=True,
              help="worm gear ratio")
@click.option("--stall", type=float, default=107.0, show_default=True,
              help="gearbox stall torque, N*mm")
@click.pass_obj
def size(server, payload, lever, worm, stall):
    """Actuator sizing from payload to safety factor."""
    data = check(make_client(server).post("/size", json={
        "payload_kg": payload, "lever_mm": lever, "worm_ratio": worm,
        "stall_torque_nmm": stall}))
    click.echo(f"F_G = {data['grip_force_n']:.2f} N")
    click.echo(f"M_MCP = {data['mcp_torque_nmm']:.1f} N*mm")
    click.echo(f"M_motor = {data['motor_torque_nmm']:.1f} N*mm")
    click.echo(f"safety = {data['safety_factor']:.3f}")


@main.command()
@click.argument("traces", type=click.Path(exists=True, dir_okay=False))
@click.option("--degree", type=click.IntRange(1, 2), default=1,
              show_default=True)
@click.option("--cycles", type=int, default=25, show_default=True,
              help="expected loading/unloading cycles")
@click.pass_obj
def calibrate(server, traces, degree, cycles):
    """Fit the transfer function from a recorded trace CSV."""
    with open(traces) as fh:
        csv_text = fh.read()
    data = check(make_client(server).post("/calibrate", json={
        "trace_csv": csv_text, "degree": degree, "expected_cycles": cycles}))
    click.echo(f"degree = {data['degree']}")
    click.echo(f"R^2 = {data['r_squared']:.5f}")
    click.echo(f"P0 = {data['p0_est_hpa']:.2f} hPa")
    click.echo(f"range = {data['range_est_n']:.3f} N")
    click.echo(f"sensitivity = {data['sensitivity_hpa_per_n']:.2f} hPa/N")
    click.echo(f"hysteresis = {data['hysteresis_n']:.4f} N "
               f"({data['hysteresis_pct_of_range']:.2f}% of range)")
    click.echo(f"drift = {data['drift_pct_of_zero']:.2f}% of zero value")


@main.command()
@click.option("--finger", "fingers", multiple=True,
              help="preset name; repeatable (default: all)")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="write the report CSV here instead of stdout")
@click.pass_obj
def characterize(server, fingers, out):
    """Full characterization report over the shipped finger presets."""
    data = check(make_client(server).post("/characterize", json={
        "fingers": list(fingers) or None}))
    if out:
        with open(out, "w") as fh:
            fh.write(data["report_csv"])
        click.echo(f"wrote {out}")
    else:
        click.echo(data["report_csv"], nl=False)


def _scenario_payload(doc: dict) -> dict:
    sc = doc.get("scenario", doc)
    body = {
        "grasp": sc.get("grasp", "MediumWrap"),
        "speed": sc.get("speed", 1.0),
        "hold_s": sc.get("hold_s", 10.0),
        "hold2_s": sc.get("hold2_s", 10.0),
        "move_s": sc.get("move_s", 2.0),
        "grip_offset_mm": sc.get("grip_offset_mm", -25.0),
        "seed": sc.get("seed", 0),
    }
    if "shake" in sc:
        body["shake"] = sc["shake"]
    obj = sc.get("object")
    if isinstance(obj, str):
        body["object_name"] = obj
    elif isinstance(obj, dict):
        body["object_spec"] = obj
    else:
        raise click.ClickException("scenario.object must be a preset name "
                                   "or a mapping")
    return body


@main.command()
@click.argument("scenario_file", type=click.Path(exists=True,
                                                 dir_okay=False))
@click.option("--telemetry", type=click.Path(dir_okay=False), default=None,
              help="write the telemetry CSV here")
@click.pass_obj
def run(server, scenario_file, telemetry):
    """Run a grasp/hold/move/hold/shake experiment from a scenario file.

    Exit code 0 only if the file's `expect:` assertions hold (default
    expectation: the grasp does not fail)."""
    doc = yaml.safe_load(open(scenario_file))
    data = check(make_client(server).post("/experiments/run", json={
        "scenario": _scenario_payload(doc),
        "include_telemetry": telemetry is not None}))
    for p in data["phases"]:
        click.echo(f"phase {p['name']:6s} {p['t_start']:8.3f} .. "
                   f"{p['t_end']:8.3f} s")
    for e in data["events"]:
        click.echo(f"event {e}")
    click.echo(f"retained = {data['retained']}")
    click.echo(f"grasp_failed = {data['grasp_failed']}")
    if telemetry:
        with open(telemetry, "w") as fh:
            fh.write(data["telemetry_csv"])
        click.echo(f"wrote {telemetry}")

    expect = doc.get("expect", {"grasp_failed": False})
    failures = []
    for key, want in expect.items():
        got = data.get(key)
        if got != want:
            failures.append(f"{key}: expected {want!r}, got {got!r}")
    for f in failures:
        click.echo(f"EXPECT FAILED {f}", err=True)
    if failures:
        sys.exit(1)


@main.command()
@click.option("--factors", default="0.1,0.5,1.0", show_default=True,
              help="comma-separated global speed factors")
@click.pass_obj
def speedtest(server, factors):
    """Closing/opening times over global speed factors."""
    flist = [float(v) for v in factors.split(",")]
    data = check(make_client(server).post("/speedtest",
                                          json={"factors": flist}))
    click.echo("factor  closing_s  opening_s")
    for f in flist:
        r = data["results"][str(f)]
        click.echo(f"{f:6.2f} {r['closing_s']:10.3f} {r['opening_s']:10.3f}")


@main.command()
@click.option("--mass", type=float, required=True, help="payload mass, kg")
@click.pass_obj
def payload(server, mass):
    """Payload hold test: grasp, lift and shake a handle of this mass."""
    data = check(make_client(server).post("/payload-test",
                                          json={"mass_kg": mass}))
    for e in data["events"]:
        click.echo(f"event {e}")
    click.echo("PASS" if data["passed"] else "FAIL")
    if not data["passed"]:
        sys.exit(1)


@main.command()
@click.option("--scenario", "scenario_file", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="load an object/environment around the hand")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
def console(server, scenario_file, seed):
    """Interactive operator console.

    Hand commands follow the device grammar (grasp/stop/mode/set/state/
    param). Console-side controls: `wait <seconds>` advances the
    simulation, `stream on|off` toggles printing telemetry lines during
    waits, `quit` leaves."""
    client = make_client(server)
    reset = {"seed": seed}
    if scenario_file:
        reset["scenario"] = _scenario_payload(
            yaml.safe_load(open(scenario_file)))
    check(client.post("/hand/reset", json=reset))
    stream = False
    click.echo("console ready (wait <s> | stream on|off | quit | "
               "grasp/stop/mode/set/state/param ...)")
    while True:
        try:
            line = input("sim> ")
        except EOFError:
            break
        words = line.split()
        if not words:
            continue
        meta = words[0].lower()
        if meta == "quit":
            break
        if meta == "wait" and len(words) == 2:
            try:
                duration = float(words[1])
            except ValueError:
                click.echo("err wait needs a number of seconds")
                continue
            data = check(client.post("/hand/advance",
                                     json={"duration_s": duration}))
            for reply in data["replies"]:
                click.echo(reply)
            if stream:
                for f in data["frames"]:
                    click.echo(_frame_line(f))
            click.echo(f"ok t={data['t']:.3f}")
            continue
        if meta == "stream" and len(words) == 2:
            stream = words[1].lower() == "on"
            click.echo(f"ok stream {'on' if stream else 'off'}")
            continue
        data = check(client.post("/hand/console", json={"line": line}))
        for reply in data["replies"]:
            click.echo(reply)


def _frame_line(f: dict) -> str:
    angles = " ".join(f"{v:.4f}" for v in f["angles"])
    currents = " ".join(f"{v:.3f}" for v in f["currents"])
    forces = " ".join(f"{v:.3f}" for v in f["forces"])
    return (f"tlm seq={f['seq']} t={f['t_ms']/1000.0:.1f} "
            f"theta=[{angles}] i=[{currents}] f=[{forces}]")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8411, show_default=True)
def serve(host, port):
    """Run the simulation service."""
    import uvicorn

    from .service import app
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
