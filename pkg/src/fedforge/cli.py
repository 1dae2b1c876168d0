"""Operator entry points for the daemons, task submission, search, and data tooling."""

from __future__ import annotations

import asyncio
import json
import os
import sys
from pathlib import Path

import click
import websockets

from . import data as data_mod
from . import nas as nas_mod
from .config import apply_defaults, canonical_json, parse_task_config
from .data import load_dataset
from .errors import FedForgeError
from .intent import default_gateway, translate_intent
from .modelspec import ModelSpec
from .protocol import WireMessage, decode, encode

DEFAULT_SERVER_URL = os.environ.get("FEDFORGE_SERVER_URL", "ws://localhost:8080")


@click.group()
def main():
    """Federated-learning orchestration toolkit."""


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True)
@click.option("--data-dir", default="fedforge-data", show_default=True,
              help="Metrics log and server-test split location.")
@click.option("--round-deadline", default=120.0, show_default=True,
              help="Seconds to wait for client updates each round.")
@click.option("--static-dir", default=None, help="Dashboard asset bundle to serve at /.")
@click.option("--log-level", default="info", show_default=True)
def serve(host, port, data_dir, round_deadline, static_dir, log_level):
    """Run the parameter-server daemon."""
    from .server import serve as run_server

    run_server(
        host=host,
        port=port,
        data_dir=data_dir,
        round_deadline=round_deadline,
        static_dir=static_dir,
        log_level=log_level,
    )


@main.command()
@click.option("--server-url", default=DEFAULT_SERVER_URL, show_default=True)
@click.option("--data-dir", required=True, help="Folder holding data.csv and dataconfig.json.")
@click.option("--client-id", required=True)
@click.option("--seed-base", default=0, show_default=True)
def client(server_url, data_dir, client_id, seed_base):
    """Run an edge-client daemon."""
    from .client import main_loop

    main_loop(client_id, data_dir, server_url, seed_base)


async def _resolve_intent_remote(server_url: str, text: str) -> dict:
    async with websockets.connect(server_url.rstrip("/") + "/intent") as ws:
        await ws.send(encode(WireMessage(type="IntentSubmit", body={"text": text})))
        msg = decode(await ws.recv())
        if msg.type == "Error":
            raise FedForgeError(f"{msg.body.get('error')}: {msg.body.get('detail')}")
        return msg.body["config"]


async def _submit_and_stream(server_url: str, config_dict: dict, seed: int) -> int:
    async with websockets.connect(server_url.rstrip("/") + "/ui") as ws:
        await ws.send(
            encode(WireMessage(type="TaskSubmit", body={"config": config_dict, "seed": seed}))
        )
        task_id = None
        async for raw in ws:
            if isinstance(raw, bytes):
                continue
            msg = decode(raw)
            if msg.type == "TaskAccepted":
                task_id = msg.taskId
                click.echo(f"accepted: {task_id}")
            elif msg.type == "Error" and (task_id is None or msg.taskId in ("", task_id)):
                click.echo(f"error: {msg.body.get('error')}: {msg.body.get('detail')}", err=True)
                return 1
            elif task_id is None or msg.taskId != task_id:
                continue
            elif msg.type == "RoundResult":
                click.echo(json.dumps(msg.body, separators=(",", ":")))
            elif msg.type == "TaskComplete":
                b = msg.body
                click.echo(
                    f"complete: accuracy={b.get('finalAccuracy'):.4f} "
                    f"bytesUp={b.get('totalBytesUp')} "
                    f"seconds={b.get('totalSeconds'):.2f} rounds={b.get('rounds')}"
                )
                return 0
    click.echo("connection closed before completion", err=True)
    return 1


@main.command()
@click.argument("config_path", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--intent", "intent_text", default=None, help="Natural-language task description.")
@click.option("--server-url", default=DEFAULT_SERVER_URL, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--model", "model_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="JSON model spec (e.g. output of the nas command).")
def submit(config_path, intent_text, server_url, seed, model_path):
    """Submit a task from a config file or an intent; stream round results."""
    if (config_path is None) == (intent_text is None):
        raise click.UsageError("provide exactly one of CONFIG_PATH or --intent")
    try:
        if config_path:
            config = parse_task_config(Path(config_path).read_bytes())
            config_dict = config.to_dict()
        else:
            config_dict = None
        if model_path:
            raw = json.loads(Path(model_path).read_text())
            model = raw["model"] if "model" in raw else raw
            if config_dict is None:
                config_dict = {}
            config_dict["model"] = ModelSpec.from_dict(model).to_dict()
            if "lr" in raw and config_path is None:
                config_dict.setdefault("lr", raw["lr"])
    except (FedForgeError, json.JSONDecodeError) as e:
        click.echo(f"invalid configuration: {e}", err=True)
        sys.exit(1)

    async def run():
        if intent_text is not None:
            resolved = await _resolve_intent_remote(server_url, intent_text)
            if config_dict:
                resolved.update(config_dict)
            return await _submit_and_stream(server_url, resolved, seed)
        return await _submit_and_stream(server_url, config_dict, seed)

    try:
        sys.exit(asyncio.run(run()))
    except (OSError, websockets.exceptions.WebSocketException) as e:
        click.echo(f"cannot reach server at {server_url}: {e}", err=True)
        sys.exit(2)
    except FedForgeError as e:
        click.echo(str(e), err=True)
        sys.exit(1)


@main.command()
@click.argument("text")
def intent(text):
    """Translate an intent into a task configuration and print it."""
    try:
        config = translate_intent(text, default_gateway())
    except FedForgeError as e:
        click.echo(f"{type(e).__name__}: {e}", err=True)
        sys.exit(1)
    click.echo(canonical_json(config).decode("utf-8"))


@main.command(name="gen-data")
@click.option("--kind", type=click.Choice(sorted(data_mod.GENERATORS)), default="blobs",
              show_default=True)
@click.option("--n", default=600, show_default=True, help="Total datapoints before the test split.")
@click.option("--clients", default=3, show_default=True)
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True)
def gen_data(kind, n, clients, out_dir, seed):
    """Generate per-client synthetic data folders plus a held-out server test split."""
    written = data_mod.gen_data(kind, n, clients, out_dir, seed)
    for folder in written:
        click.echo(str(folder))


@main.command()
@click.option("--dataset-dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory containing client-*/ data folders.")
@click.option("--rounds", default=5, show_default=True, help="Architecture search rounds.")
@click.option("--hpo-rounds", default=2, show_default=True)
@click.option("--epochs", default=20, show_default=True)
@click.option("--candidates", default=20, show_default=True, help="Learning rates per HPO space.")
@click.option("--batch", default=250, show_default=True, help="Initial HPO batch size.")
@click.option("--client-fraction", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default="nas-result.json", show_default=True)
def nas(dataset_dir, rounds, hpo_rounds, epochs, candidates, batch, client_fraction, seed, out):
    """Search for a model and learning rate over the local client datasets."""
    folders = sorted(Path(dataset_dir).glob("client-*"))
    if not folders:
        click.echo(f"no client-*/ folders under {dataset_dir}", err=True)
        sys.exit(1)
    datasets = [load_dataset(f) for f in folders]
    cfg = nas_mod.SearchConfig(
        search_rounds=rounds,
        hpo_rounds=hpo_rounds,
        explorer_epochs=epochs,
        client_fraction=client_fraction,
        num_candidates=candidates,
        initial_batch=batch,
        seed=seed,
    )
    model, lr, perf = nas_mod.run_search(cfg, datasets[0].config, datasets, default_gateway())
    nas_mod.save_search_result(out, model, lr, perf)
    click.echo(f"best lr={lr:.6g} validationAccuracy={perf:.4f} -> {out}")


@main.command()
@click.option("--data-dir", default="fedforge-data", show_default=True)
@click.option("--task-id", required=True)
def metrics(data_dir, task_id):
    """Print the persisted per-round metrics log for a task."""
    from .server import MetricsStore

    store = MetricsStore(data_dir)
    for m in store.read(task_id):
        click.echo(json.dumps(m.to_dict(), separators=(",", ":")))


if __name__ == "__main__":
    main()
