"""Command-line entry points.

`bvp-synth` and `hr-estimate` are local file utilities; `device-node` runs a
simulated device against its broker; `orchestrator` brings up a session and
serves the operator bridge. `piheart session ...` subcommands are thin HTTP
clients of a running bridge.
"""

from __future__ import annotations

import json
import signal
import threading
from pathlib import Path

import click

from piheart import __version__
from piheart.estimator import estimate_stream
from piheart.node import DeviceConfig, run_node
from piheart.orchestrator import (
    DeviceRef,
    Session,
    generate_condition_orders,
    load_plan,
    save_plan,
    validate_log,
)
from piheart.service import SessionManager, bridge_serve
from piheart.simulation import LocalSimulation, SimulationConfig
from piheart.synth import BvpConfig, ConfigError, HrProfile, ReplayError, replay, synthesize, write_csv


def _host_port(value: str) -> tuple[str, int]:
    try:
        host, port = value.rsplit(":", 1)
        return host, int(port)
    except ValueError:
        raise click.BadParameter(f"expected host:port, got {value!r}") from None


def _bvp_source(spec: str, rate: float, seed: int) -> dict:
    """`synth:hr=72,noise=0.02` or a CSV path."""
    if not spec.startswith("synth:"):
        return {"bvp_replay_path": Path(spec)}
    params = {}
    for item in spec[len("synth:"):].split(","):
        if not item:
            continue
        try:
            key, value = item.split("=")
            params[key] = float(value)
        except ValueError:
            raise click.BadParameter(f"bad synth parameter {item!r}") from None
    known = {"hr", "noise", "seed", "artifact_rate", "burst_amplitude"}
    unknown = set(params) - known
    if unknown:
        raise click.BadParameter(f"unknown synth parameters: {sorted(unknown)}")
    return {
        "bvp_synth": BvpConfig(
            sample_rate_hz=rate,
            hr_profile=HrProfile.constant(params.get("hr", 72.0)),
            noise_sigma=params.get("noise", 0.0),
            artifact_rate_per_min=params.get("artifact_rate", 0.0),
            artifact_burst_amplitude=params.get("burst_amplitude", 4.0),
            seed=int(params.get("seed", seed)),
        )
    }


def _wait_for_interrupt() -> None:
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    stop.wait()


@click.command("bvp-synth")
@click.option("--hr", default=72.0, show_default=True, help="Target heart rate (bpm).")
@click.option("--duration", default=60.0, show_default=True, help="Stream length (s).")
@click.option("--noise", default=0.0, show_default=True, help="Gaussian noise sigma.")
@click.option("--artifact-rate", default=0.0, show_default=True, help="Artifact bursts per minute.")
@click.option("--burst-amplitude", default=4.0, show_default=True)
@click.option("--rate", default=100.0, show_default=True, help="Sample rate (Hz).")
@click.option("--seed", default=42, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path))
def bvp_synth(hr, duration, noise, artifact_rate, burst_amplitude, rate, seed, out):
    """Generate a synthetic BVP stream as CSV (t_ms,value)."""
    try:
        config = BvpConfig(
            sample_rate_hz=rate,
            hr_profile=HrProfile.constant(hr),
            noise_sigma=noise,
            artifact_rate_per_min=artifact_rate,
            artifact_burst_amplitude=burst_amplitude,
            seed=seed,
        )
        samples = synthesize(config, duration)
    except ConfigError as exc:
        raise click.ClickException(str(exc)) from exc
    write_csv(samples, out)
    click.echo(f"wrote {len(samples)} samples ({duration} s at {rate:g} Hz) to {out}")


@click.command("hr-estimate")
@click.option("--in", "in_path", required=True, type=click.Path(exists=False, path_type=Path))
@click.option("--mode", type=click.Choice(["magnitude", "real-part"]), default="magnitude",
              show_default=True)
@click.option("--rate", default=100.0, show_default=True, help="Sample rate (Hz).")
@click.option("--emit-jsonl", is_flag=True, help="One JSON object per estimate on stdout.")
def hr_estimate(in_path, mode, rate, emit_jsonl):
    """Estimate heart rate from a BVP CSV file."""
    try:
        samples = replay(in_path)
        estimates = estimate_stream(((s.t, s.value) for s in samples), rate, mode)
    except ReplayError as exc:
        raise click.ClickException(str(exc)) from exc
    for est in estimates:
        if emit_jsonl:
            click.echo(json.dumps(
                {"t_ms": est.window_end_t, "bpm": est.bpm, "bin": est.bin_index, "mode": est.mode}
            ))
        else:
            click.echo(f"t={est.window_end_t / 1000.0:8.1f}s  {est.bpm:6.1f} bpm  (bin {est.bin_index})")
    if not estimates and not emit_jsonl:
        click.echo("stream shorter than one 30 s window; no estimates", err=True)


@click.command("device-node")
@click.option("--id", "device_id", required=True)
@click.option("--broker", required=True, help="host:port of this device's broker.")
@click.option("--bvp", "bvp_spec", default="synth:hr=72", show_default=True,
              help="synth:k=v,... or a CSV path to replay.")
@click.option("--accel", default=1.0, show_default=True, help="Clock acceleration factor.")
@click.option("--duration", default=600.0, show_default=True, help="Synth source length (s).")
@click.option("--mode", type=click.Choice(["magnitude", "real-part"]), default="magnitude")
@click.option("--rate", default=100.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
def device_node(device_id, broker, bvp_spec, accel, duration, mode, rate, seed):
    """Run one simulated device against its local broker."""
    host, port = _host_port(broker)
    source = _bvp_source(bvp_spec, rate, seed)
    config = DeviceConfig(
        device_id=device_id,
        broker_host=host,
        broker_port=port,
        duration_s=duration,
        estimator_mode=mode,
        clock_factor=accel,
        **source,
    )
    node = run_node(config)
    click.echo(f"device {device_id} up (broker {broker}, x{accel:g} clock); Ctrl+C to stop")
    try:
        while not node.wait_stream_end(timeout=0.5):
            if node.error:
                raise click.ClickException(node.error)
        click.echo("BVP stream finished")
        _wait_for_interrupt()
    except KeyboardInterrupt:
        pass
    finally:
        node.stop()


@click.command("orchestrator")
@click.option("--plan", "plan_path", type=click.Path(exists=True, path_type=Path),
              help="Plan JSON; default is a generated single-pair plan.")
@click.option("--devA", "dev_a", required=True, help="host:port of device A's broker.")
@click.option("--devB", "dev_b", required=True, help="host:port of device B's broker.")
@click.option("--ids", default="A,B", show_default=True, help="device ids as idA,idB.")
@click.option("--ws", default="127.0.0.1:8080", show_default=True,
              help="host:port for the operator bridge (REST + WebSocket /ws).")
@click.option("--log", "log_path", required=True, type=click.Path(path_type=Path))
@click.option("--autostart/--no-autostart", default=True, show_default=True)
@click.option("--seed", default=0, show_default=True)
def orchestrator_cmd(plan_path, dev_a, dev_b, ids, ws, log_path, autostart, seed):
    """Connect to both device brokers, run the session, serve the bridge."""
    plan = load_plan(plan_path) if plan_path else generate_condition_orders(1, seed=seed)[0]
    id_a, id_b = (x.strip() for x in ids.split(","))
    host_a, port_a = _host_port(dev_a)
    host_b, port_b = _host_port(dev_b)
    manager = SessionManager(
        lambda: Session(plan, DeviceRef(id_a, host_a, port_a), DeviceRef(id_b, host_b, port_b),
                        log_path)
    )
    ws_host, ws_port = _host_port(ws)
    bridge = bridge_serve(manager, ws_host, ws_port)
    click.echo(f"bridge at http://{ws_host}:{ws_port} (WebSocket /ws)")
    if autostart:
        try:
            manager.start()
            click.echo(f"session {plan.pair_id} started, logging to {log_path}")
        except Exception as exc:
            bridge.stop()
            raise click.ClickException(str(exc)) from exc
    try:
        _wait_for_interrupt()
    finally:
        try:
            if manager.session is not None:
                manager.stop()
        except Exception:
            pass
        bridge.stop()


@click.group()
@click.version_option(__version__)
def main():
    """Simulated tangible heart-rate displays."""


main.add_command(bvp_synth)
main.add_command(hr_estimate)
main.add_command(device_node)
main.add_command(orchestrator_cmd, name="serve")


@main.command("demo")
@click.option("--accel", default=100.0, show_default=True)
@click.option("--hr-a", default=72.0, show_default=True)
@click.option("--hr-b", default=64.0, show_default=True)
@click.option("--noise", default=0.0, show_default=True)
@click.option("--duration", default=600.0, show_default=True, help="Signal seconds per device.")
@click.option("--ws", default="127.0.0.1:8080", show_default=True)
@click.option("--log", "log_path", default=Path("demo-session.jsonl"), show_default=True,
              type=click.Path(path_type=Path))
@click.option("--seed", default=0, show_default=True)
def demo(accel, hr_a, hr_b, noise, duration, ws, log_path, seed):
    """Whole deployment in one process: 2 brokers, 2 devices, orchestrator."""
    sim = LocalSimulation(
        SimulationConfig(
            log_path=log_path,
            plan=generate_condition_orders(1, seed=seed)[0],
            bvp_a=BvpConfig(hr_profile=HrProfile.constant(hr_a), noise_sigma=noise, seed=seed + 1),
            bvp_b=BvpConfig(hr_profile=HrProfile.constant(hr_b), noise_sigma=noise, seed=seed + 2),
            duration_s=duration,
            accel=accel,
        )
    ).start_brokers()
    manager = SessionManager(sim.build_session, on_started=lambda _s: sim.start_nodes())
    ws_host, ws_port = _host_port(ws)
    bridge = bridge_serve(manager, ws_host, ws_port)
    try:
        manager.start()
    except Exception as exc:
        bridge.stop()
        sim.stop()
        raise click.ClickException(str(exc)) from exc
    for device_id, broker in sim.brokers.items():
        click.echo(f"device {device_id}: broker 127.0.0.1:{broker.port}")
    click.echo(f"bridge at http://{ws_host}:{ws_port} (WebSocket /ws); log {log_path}")
    click.echo("advance segments with: piheart session next; Ctrl+C to stop")
    try:
        _wait_for_interrupt()
    finally:
        try:
            manager.stop()
        except Exception:
            pass
        bridge.stop()
        sim.stop()


@main.command("broker")
@click.option("--bind", default="127.0.0.1:1883", show_default=True, help="host:port to listen on.")
@click.option("--max-clients", default=64, show_default=True)
def broker_cmd(bind, max_clients):
    """Run one standalone device broker."""
    from piheart.mqtt import MqttBroker

    host, port = _host_port(bind)
    try:
        broker = MqttBroker(host, port, max_clients=max_clients).start()
    except OSError as exc:
        raise click.ClickException(f"cannot bind {bind}: {exc}") from exc
    click.echo(f"broker listening on {broker.host}:{broker.port}; Ctrl+C to stop")
    try:
        _wait_for_interrupt()
    finally:
        broker.stop()


@main.command("plans")
@click.option("--n", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path),
              help="Write pairNN.json files instead of printing.")
def plans_cmd(n, seed, out_dir):
    """Generate counterbalanced session plans."""
    plans = generate_condition_orders(n, seed=seed)
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
        for plan in plans:
            save_plan(plan, out_dir / f"{plan.pair_id}.json")
        click.echo(f"wrote {len(plans)} plans to {out_dir}")
    else:
        click.echo(json.dumps([p.to_dict() for p in plans], indent=2))


@main.command("validate-log")
@click.argument("path", type=click.Path(exists=True, path_type=Path))
def validate_log_cmd(path):
    """Check a session log for schema and timestamp-monotonicity problems."""
    problems = validate_log(path)
    for problem in problems:
        click.echo(problem)
    if problems:
        raise click.ClickException(f"{len(problems)} problem(s) found")
    click.echo("log OK")


@main.group("session")
@click.option("--url", default="http://127.0.0.1:8080", show_default=True,
              help="Bridge base URL.")
@click.pass_context
def session_group(ctx, url):
    """Control a running orchestrator over its REST API."""
    ctx.obj = url.rstrip("/")


def _api(ctx, method: str, path: str, body: dict | None = None) -> dict:
    import httpx

    try:
        response = httpx.request(method, f"{ctx.obj}{path}", json=body, timeout=10.0)
    except httpx.HTTPError as exc:
        raise click.ClickException(f"bridge unreachable: {exc}") from exc
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except ValueError:
            detail = response.text
        raise click.ClickException(f"{response.status_code}: {detail}")
    return response.json()


@session_group.command("status")
@click.pass_context
def session_status(ctx):
    click.echo(json.dumps(_api(ctx, "GET", "/session/status"), indent=2))


@session_group.command("start")
@click.pass_context
def session_start(ctx):
    click.echo(json.dumps(_api(ctx, "POST", "/session/start"), indent=2))


@session_group.command("stop")
@click.pass_context
def session_stop(ctx):
    click.echo(json.dumps(_api(ctx, "POST", "/session/stop"), indent=2))


@session_group.command("modality")
@click.argument("value")
@click.pass_context
def session_modality(ctx, value):
    _api(ctx, "POST", "/session/modality", {"value": value})
    click.echo(f"modality set to {value}")


@session_group.command("movie")
@click.argument("title")
@click.pass_context
def session_movie(ctx, title):
    _api(ctx, "POST", "/session/movie", {"value": title})
    click.echo(f"movie set to {title}")


@session_group.command("next")
@click.pass_context
def session_next(ctx):
    result = _api(ctx, "POST", "/session/next-segment")
    click.echo("advanced" if result.get("ok") else result.get("detail", "end of plan"))


if __name__ == "__main__":
    main()
