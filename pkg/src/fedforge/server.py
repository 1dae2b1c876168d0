"""Parameter-server daemon: orchestration loop, aggregation, metrics, endpoints."""

from __future__ import annotations

import asyncio
import dataclasses
import json
import logging
import os
import secrets
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from . import compression, protocol, scheduling
from .config import DataConfig, TaskConfig, apply_defaults
from .data import load_dataset
from .errors import (
    AllClientsTimedOut,
    EmptyUpdateSet,
    FedForgeError,
    LengthMismatch,
    MalformedFrame,
    NoClientsAvailable,
    StorageFailure,
)
from .intent import LlmGateway, default_gateway, request_model_spec, translate_intent
from .modelspec import ModelSpec
from .nn import Dataset, FlatWeights, build_model, evaluate
from .protocol import RoundMetrics, WireMessage, decode, encode

log = logging.getLogger("fedforge.server")


def aggregate(updates: list[tuple[np.ndarray, int]]) -> np.ndarray:
    """Sample-count weighted mean, accumulated in float64 then narrowed."""
    if not updates:
        raise EmptyUpdateSet("no client updates to aggregate")
    d = len(updates[0][0])
    total = 0
    acc = np.zeros(d, dtype=np.float64)
    for vec, n_k in updates:
        if len(vec) != d:
            raise LengthMismatch("update length mismatch")
        if n_k < 1:
            raise ValueError("n_k must be >= 1")
        acc += np.asarray(vec, dtype=np.float64) * n_k
        total += n_k
    return (acc / total).astype(np.float32)


class MetricsStore:
    """Append-only line-delimited JSON metrics log, one file per task."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir) / "metrics"
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, task_id: str) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in task_id)
        return self.root / f"{safe}.jsonl"

    def append(self, task_id: str, metrics: RoundMetrics) -> None:
        line = json.dumps(metrics.to_dict(), separators=(",", ":")) + "\n"
        try:
            with open(self.path(task_id), "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as e:
            raise StorageFailure(str(e)) from e

    def read(self, task_id: str) -> list[RoundMetrics]:
        path = self.path(task_id)
        if not path.exists():
            return []
        out = []
        for line in path.read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            try:
                out.append(RoundMetrics.from_dict(json.loads(line)))
            except (json.JSONDecodeError, MalformedFrame):
                # a torn trailing line from a crash is skipped, earlier lines stand
                continue
        return out


@dataclass
class ClientConn:
    id: str
    ws: WebSocket
    # one pending exchange at a time per client; orchestration serializes access
    pending: asyncio.Future | None = None
    expect_binary_for: WireMessage | None = None
    send_lock: asyncio.Lock = field(default_factory=asyncio.Lock)

    async def send_control(self, msg: WireMessage) -> None:
        async with self.send_lock:
            await self.ws.send_text(encode(msg))

    async def send_with_payload(self, msg: WireMessage, payload: bytes) -> None:
        async with self.send_lock:
            await self.ws.send_text(encode(msg))
            await self.ws.send_bytes(payload)


@dataclass
class TaskState:
    task_id: str
    config: TaskConfig
    seed: int
    status: str = "pending"  # pending -> running -> complete | failed
    round: int = 0
    weights: FlatWeights | None = None
    metrics: list[RoundMetrics] = field(default_factory=list)
    total_bytes_up: int = 0
    total_bytes_down: int = 0
    total_seconds: float = 0.0


class FLServer:
    """All mutable orchestration state; one instance per daemon process."""

    def __init__(
        self,
        data_dir: str | Path = "fedforge-data",
        round_deadline: float = 120.0,
        gateway: LlmGateway | None = None,
    ):
        self.data_dir = Path(data_dir)
        self.round_deadline = round_deadline
        self.gateway = gateway
        self.roster = scheduling.ClientRoster()
        self.clients: dict[str, ClientConn] = {}
        self.ui_conns: set[WebSocket] = set()
        self.metrics_store = MetricsStore(self.data_dir)
        self.tasks: dict[str, TaskState] = {}
        self._test_data: Dataset | None = None

    # ---- test split -------------------------------------------------------

    def test_dataset(self) -> Dataset | None:
        if self._test_data is None:
            folder = self.data_dir / "server-test"
            if (folder / "data.csv").exists():
                self._test_data = load_dataset(folder)
        return self._test_data

    # ---- final model persistence ------------------------------------------

    def weights_path(self, task_id: str) -> Path:
        safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in task_id)
        return self.data_dir / "models" / f"{safe}.npy"

    def save_weights(self, task: TaskState) -> None:
        if task.weights is None:
            return
        path = self.weights_path(task.task_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, task.weights.values)

    # ---- ui streaming -----------------------------------------------------

    async def broadcast_ui(self, msg: WireMessage) -> None:
        dead = []
        for ws in self.ui_conns:
            try:
                await ws.send_text(encode(msg))
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.ui_conns.discard(ws)

    # ---- model resolution -------------------------------------------------

    async def resolve_model(self, config: TaskConfig) -> ModelSpec:
        if config.model is not None:
            return config.model
        # ask a connected client to describe its data, then derive a model
        for cid in self.roster.ids():
            conn = self.clients.get(cid)
            if conn is None:
                continue
            try:
                reply = await self._exchange(
                    conn, WireMessage(type="DataConfigRequest"), timeout=10.0
                )
                data_cfg = DataConfig.from_dict(reply.body)
                return request_model_spec(data_cfg, self.gateway)
            except (FedForgeError, asyncio.TimeoutError):
                continue
        raise NoClientsAvailable("no model spec supplied and no client could provide one")

    # ---- client exchanges -------------------------------------------------

    async def _exchange(
        self, conn: ClientConn, msg: WireMessage, payload: bytes | None = None,
        timeout: float = 30.0,
    ):
        loop = asyncio.get_running_loop()
        fut: asyncio.Future = loop.create_future()
        conn.pending = fut
        try:
            if payload is None:
                await conn.send_control(msg)
            else:
                await conn.send_with_payload(msg, payload)
            return await asyncio.wait_for(fut, timeout)
        finally:
            conn.pending = None

    # ---- orchestration ----------------------------------------------------

    async def run_task(self, task: TaskState) -> None:
        config = task.config
        try:
            spec = await self.resolve_model(config)
            if config.model is None:
                # clients need the spec; embed it for every TrainRequest
                task.config = config = dataclasses.replace(config, model=spec)
            weights = build_model(spec, task.seed)
            task.weights = weights
            task.status = "running"
            test_data = self.test_dataset()

            for rnd in range(1, config.comRounds + 1):
                metrics = await self._run_round(task, rnd, test_data)
                task.round = rnd
                task.metrics.append(metrics)
                task.total_bytes_up += metrics.bytesUp
                task.total_bytes_down += metrics.bytesDown
                task.total_seconds += metrics.elapsedSeconds
                self.metrics_store.append(task.task_id, metrics)
                await self.broadcast_ui(
                    WireMessage(
                        type="RoundResult",
                        taskId=task.task_id,
                        round=rnd,
                        body=metrics.to_dict(),
                    )
                )
            task.status = "complete"
            self.save_weights(task)
            final = task.metrics[-1].testAccuracy if task.metrics else 0.0
            await self.broadcast_ui(
                WireMessage(
                    type="TaskComplete",
                    taskId=task.task_id,
                    body={
                        "finalAccuracy": final,
                        "totalBytesUp": task.total_bytes_up,
                        "totalBytesDown": task.total_bytes_down,
                        "totalSeconds": task.total_seconds,
                        "rounds": task.round,
                    },
                )
            )
        except Exception as e:
            log.exception("task %s failed", task.task_id)
            task.status = "failed"
            await self.broadcast_ui(
                WireMessage(
                    type="Error",
                    taskId=task.task_id,
                    body={"error": type(e).__name__, "detail": str(e)},
                )
            )

    async def _run_round(
        self, task: TaskState, rnd: int, test_data: Dataset | None
    ) -> RoundMetrics:
        config = task.config
        for attempt in (0, 1):  # one retry when every scheduled client times out
            started = time.monotonic()
            k = len(self.roster)
            if k == 0:
                raise NoClientsAvailable("no clients registered")
            m = scheduling.participant_count(config.clientFraction, k)
            selected = sorted(
                scheduling.select_clients(
                    self.roster, config.scheduler, m, rnd, seed=task.seed
                )
            )
            frame = compression.encode_frame(compression.Dense(task.weights.values))
            train_msg = lambda: WireMessage(
                type="TrainRequest",
                taskId=task.task_id,
                round=rnd,
                body={"config": task.config.to_dict(), "byteLength": len(frame)},
            )

            bytes_down = 0
            results = {}

            async def ask(cid: str):
                conn = self.clients.get(cid)
                if conn is None:
                    return
                t0 = time.monotonic()
                reply, payload = await self._exchange(
                    conn, train_msg(), frame, timeout=self.round_deadline
                )
                scheduling.record_latency(self.roster, cid, time.monotonic() - t0)
                results[cid] = (reply, payload)

            pending = [asyncio.create_task(ask(cid)) for cid in selected]
            done, not_done = await asyncio.wait(pending, timeout=self.round_deadline)
            for p in not_done:
                p.cancel()
            for p in done:
                exc = p.exception()
                if exc is not None and not isinstance(
                    exc, (asyncio.TimeoutError, WebSocketDisconnect)
                ):
                    log.warning("client exchange failed: %s", exc)
            bytes_down = len(frame) * len(selected)

            if results:
                break
            if attempt == 1:
                raise AllClientsTimedOut(f"round {rnd}")

        updates = []
        bytes_up = 0
        for cid in sorted(results):
            reply, payload = results[cid]
            bytes_up += len(payload)
            vec = compression.decompress(compression.decode_frame(payload))
            n_k = int(reply.body.get("numDatapoints", 1))
            updates.append((vec, n_k))
        new_values = aggregate(updates)
        task.weights = FlatWeights(new_values, task.weights.spec)

        if test_data is not None:
            m_eval = evaluate(task.weights, test_data, config.minibatchtest)
            acc, loss = m_eval.accuracy, m_eval.loss
        else:
            acc, loss = 0.0, 0.0
        return RoundMetrics(
            round=rnd,
            testAccuracy=acc,
            testLoss=loss,
            bytesUp=bytes_up,
            bytesDown=bytes_down,
            elapsedSeconds=time.monotonic() - started,
            participants=tuple(sorted(results)),
        )

    # ---- task intake ------------------------------------------------------

    def create_task(self, config: TaskConfig, seed: int) -> TaskState:
        base = config.taskName or "task"
        task_id = f"{base}-{secrets.token_hex(4)}"
        task = TaskState(task_id=task_id, config=config, seed=seed)
        self.tasks[task_id] = task
        return task


def build_app(server: FLServer, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="fedforge parameter server")
    app.state.fl = server

    @app.websocket("/fl")
    async def fl_endpoint(ws: WebSocket):
        client_id = ws.query_params.get("clientId", "")
        await ws.accept()
        if not client_id:
            await ws.send_text(
                encode(WireMessage(type="Error", body={"error": "MissingClientId"}))
            )
            await ws.close()
            return
        conn = ClientConn(id=client_id, ws=ws)
        server.clients[client_id] = conn
        server.roster.add(client_id)
        log.info("client %s connected", client_id)
        try:
            while True:
                frame = await ws.receive()
                if frame.get("type") == "websocket.disconnect":
                    break
                if frame.get("bytes") is not None:
                    header = conn.expect_binary_for
                    conn.expect_binary_for = None
                    payload = frame["bytes"]
                    if header is None:
                        await conn.send_control(
                            WireMessage(type="Error", body={"error": "UnexpectedBinaryFrame"})
                        )
                        continue
                    declared = int(header.body.get("byteLength", -1))
                    if declared != len(payload):
                        if conn.pending and not conn.pending.done():
                            conn.pending.set_exception(
                                LengthMismatch(
                                    f"declared {declared} bytes, got {len(payload)}"
                                )
                            )
                        continue
                    if conn.pending and not conn.pending.done():
                        conn.pending.set_result((header, payload))
                    continue
                text = frame.get("text", "")
                try:
                    msg = decode(text)
                except MalformedFrame as e:
                    await conn.send_control(
                        WireMessage(type="Error", body={"error": type(e).__name__, "detail": str(e)})
                    )
                    continue
                if msg.type == "LocalUpdateHeader":
                    if conn.pending is None or conn.pending.done():
                        await conn.send_control(
                            WireMessage(
                                type="Error",
                                taskId=msg.taskId,
                                body={"error": "UnexpectedMessage", "detail": "no training in flight"},
                            )
                        )
                        continue
                    conn.expect_binary_for = msg
                elif msg.type in ("DataConfigResponse", "HPOResult", "Error"):
                    if conn.pending and not conn.pending.done():
                        if msg.type == "Error":
                            conn.pending.set_exception(
                                FedForgeError(msg.body.get("detail", "client error"))
                            )
                        else:
                            conn.pending.set_result(msg)
                else:
                    await conn.send_control(
                        WireMessage(
                            type="Error",
                            body={"error": "UnexpectedMessage", "detail": msg.type},
                        )
                    )
        except WebSocketDisconnect:
            pass
        finally:
            server.clients.pop(client_id, None)
            server.roster.remove(client_id)
            if conn.pending and not conn.pending.done():
                conn.pending.set_exception(WebSocketDisconnect(1006))
            log.info("client %s disconnected", client_id)

    async def _handle_submit(ws: WebSocket, msg: WireMessage) -> None:
        try:
            config = apply_defaults(msg.body.get("config", {}))
            seed = int(msg.body.get("seed", 0))
        except FedForgeError as e:
            await ws.send_text(
                encode(WireMessage(type="Error", body={"error": type(e).__name__, "detail": str(e)}))
            )
            return
        task = server.create_task(config, seed)
        await ws.send_text(
            encode(WireMessage(type="TaskAccepted", taskId=task.task_id))
        )
        asyncio.create_task(server.run_task(task))

    async def _handle_intent(ws: WebSocket, msg: WireMessage) -> None:
        text = msg.body.get("text", "")
        mode = "remote" if server.gateway is not None else "fallback"
        try:
            config = translate_intent(text, server.gateway)
        except FedForgeError as e:
            await ws.send_text(
                encode(WireMessage(type="Error", body={"error": type(e).__name__, "detail": str(e)}))
            )
            return
        await ws.send_text(
            encode(
                WireMessage(
                    type="IntentResolved",
                    body={"config": config.to_dict(), "mode": mode},
                )
            )
        )

    @app.websocket("/ui")
    async def ui_endpoint(ws: WebSocket):
        await ws.accept()
        server.ui_conns.add(ws)
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = decode(text)
                except MalformedFrame as e:
                    await ws.send_text(
                        encode(WireMessage(type="Error", body={"error": type(e).__name__, "detail": str(e)}))
                    )
                    continue
                if msg.type == "TaskSubmit":
                    await _handle_submit(ws, msg)
                elif msg.type == "IntentSubmit":
                    await _handle_intent(ws, msg)
                else:
                    await ws.send_text(
                        encode(
                            WireMessage(
                                type="Error",
                                body={"error": "UnexpectedMessage", "detail": msg.type},
                            )
                        )
                    )
        except WebSocketDisconnect:
            pass
        finally:
            server.ui_conns.discard(ws)

    @app.websocket("/intent")
    async def intent_endpoint(ws: WebSocket):
        await ws.accept()
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = decode(text)
                except MalformedFrame as e:
                    await ws.send_text(
                        encode(WireMessage(type="Error", body={"error": type(e).__name__, "detail": str(e)}))
                    )
                    continue
                if msg.type == "IntentSubmit":
                    await _handle_intent(ws, msg)
                else:
                    await ws.send_text(
                        encode(
                            WireMessage(
                                type="Error",
                                body={"error": "UnexpectedMessage", "detail": msg.type},
                            )
                        )
                    )
        except WebSocketDisconnect:
            pass

    @app.get("/healthz")
    async def healthz():
        return {
            "clients": server.roster.ids(),
            "tasks": {tid: t.status for tid, t in server.tasks.items()},
        }

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="dashboard")
    return app


def serve(
    host: str = "127.0.0.1",
    port: int = 8080,
    data_dir: str = "fedforge-data",
    round_deadline: float = 120.0,
    static_dir: str | None = None,
    log_level: str = "info",
) -> None:
    import uvicorn

    server = FLServer(
        data_dir=data_dir, round_deadline=round_deadline, gateway=default_gateway()
    )
    app = build_app(server, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level=log_level, ws_max_size=256 * 1024 * 1024)
