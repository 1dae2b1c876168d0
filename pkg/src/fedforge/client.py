"""Edge-node daemon: trains on local data when the server asks, never ships it."""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import websockets

from . import compression
from .config import TaskConfig, apply_defaults
from .data import load_data_config, load_dataset
from .errors import DimensionMismatch, FedForgeError, NonFiniteLoss
from .nn import Dataset, FlatWeights, client_update
from .modelspec import ModelSpec
from .protocol import WireMessage, decode, encode

log = logging.getLogger("fedforge.client")


@dataclass
class ClientRuntime:
    client_id: str
    data_dir: Path
    server_url: str
    seed_base: int = 0

    def __post_init__(self):
        self.data_dir = Path(self.data_dir)
        self.dataset: Dataset = load_dataset(self.data_dir)

    def round_seed(self, round_index: int) -> int:
        # deterministic per-round seed so distributed runs are replayable
        return (self.seed_base ^ round_index) & 0xFFFFFFFFFFFFFFFF

    def train(self, config: TaskConfig, weights: FlatWeights, round_index: int):
        """Run the local update and compress it; returns (payload, n_k, seconds)."""
        t0 = time.process_time()
        updated = client_update(weights, self.dataset, config, self.round_seed(round_index))
        seconds = time.process_time() - t0
        payload = compression.compress(
            updated.values,
            config.compress,
            k=config.compressParam,
            seed=self.round_seed(round_index),
        )
        return compression.encode_frame(payload), len(self.dataset), seconds


async def _handle_train_request(ws, runtime: ClientRuntime, msg: WireMessage, payload: bytes):
    try:
        config = apply_defaults(msg.body.get("config", {}))
        declared = int(msg.body.get("byteLength", -1))
        if declared != len(payload):
            raise FedForgeError(f"declared {declared} bytes, received {len(payload)}")
        dense = compression.decode_frame(payload)
        spec = ModelSpec.from_dict(msg.body["config"]["model"]) if (
            isinstance(msg.body.get("config"), dict) and msg.body["config"].get("model")
        ) else None
        if spec is None:
            raise FedForgeError("train request carries no model spec")
        weights = FlatWeights(compression.decompress(dense), spec)
        frame, n_k, seconds = await asyncio.to_thread(
            runtime.train, config, weights, msg.round or 0
        )
        header = WireMessage(
            type="LocalUpdateHeader",
            taskId=msg.taskId,
            round=msg.round,
            body={
                "clientId": runtime.client_id,
                "numDatapoints": n_k,
                "trainSeconds": seconds,
                "byteLength": len(frame),
            },
        )
        await ws.send(encode(header))
        await ws.send(frame)
    except (DimensionMismatch, NonFiniteLoss, FedForgeError, KeyError) as e:
        await ws.send(
            encode(
                WireMessage(
                    type="Error",
                    taskId=msg.taskId,
                    round=msg.round,
                    body={"error": type(e).__name__, "detail": str(e)},
                )
            )
        )


async def run_client(runtime: ClientRuntime) -> None:
    url = runtime.server_url.rstrip("/") + f"/fl?clientId={runtime.client_id}"
    async with websockets.connect(url, max_size=256 * 1024 * 1024) as ws:
        log.info("connected to %s", url)
        pending_header: WireMessage | None = None
        async for raw in ws:
            if isinstance(raw, bytes):
                if pending_header is None:
                    continue
                msg, pending_header = pending_header, None
                await _handle_train_request(ws, runtime, msg, raw)
                continue
            try:
                msg = decode(raw)
            except FedForgeError as e:
                log.warning("bad frame from server: %s", e)
                continue
            if msg.type == "TrainRequest":
                pending_header = msg  # binary weights frame follows
            elif msg.type == "DataConfigRequest":
                cfg = load_data_config(runtime.data_dir)
                await ws.send(
                    encode(WireMessage(type="DataConfigResponse", body=cfg.to_dict()))
                )
            elif msg.type == "Error":
                log.warning("server error: %s", msg.body)


def main_loop(client_id: str, data_dir: str, server_url: str, seed_base: int = 0) -> None:
    runtime = ClientRuntime(client_id, Path(data_dir), server_url, seed_base)
    while True:
        try:
            asyncio.run(run_client(runtime))
            return
        except (OSError, websockets.exceptions.WebSocketException) as e:
            log.warning("connection lost (%s), retrying in 1s", e)
            time.sleep(1.0)
