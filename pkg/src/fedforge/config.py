"""Task and dataset configuration: validation, defaults, canonical serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from decimal import Decimal

from .errors import (
    BadEnumValue,
    MalformedDataConfig,
    MissingRequiredKey,
    UnknownKey,
    ValueOutOfRange,
)
from .modelspec import ModelSpec

ALGOS = ("Classification", "Regression")
SCHEDULERS = ("full", "random", "round_robin", "latency_proportional")
OPTIMIZERS = ("Adam", "SGD", "AdaGrad", "RMSProp")
LOSSES = ("CrossEntropyLoss", "MSELoss")
COMPRESSIONS = ("No", "quantize", "topk", "randk")

# lr defaults are optimizer-dependent
DEFAULT_LR = {"Adam": 0.0001, "SGD": 0.001, "AdaGrad": 0.004, "RMSProp": 0.0004}

# canonical key emission order (core keys first, added keys after)
CORE_KEYS = (
    "algo", "minibatch", "epoch", "lr", "scheduler", "clientFraction",
    "minibatchtest", "comRounds", "optimizer", "loss", "compress", "dataset",
)
EXTRA_KEYS = ("compressParam", "dtype", "taskName", "clients", "model")
ALL_KEYS = CORE_KEYS + EXTRA_KEYS


@dataclass(frozen=True)
class TaskConfig:
    algo: str
    minibatch: int
    epoch: int
    lr: float
    scheduler: str
    clientFraction: float
    minibatchtest: int
    comRounds: int
    optimizer: str
    loss: str
    compress: str
    dataset: str
    compressParam: float | None = None
    dtype: str = "img"
    taskName: str = ""
    clients: tuple[str, ...] = ()
    model: ModelSpec | None = None

    def validate(self) -> "TaskConfig":
        if self.algo not in ALGOS:
            raise BadEnumValue("algo")
        if self.scheduler not in SCHEDULERS:
            raise BadEnumValue("scheduler")
        if self.optimizer not in OPTIMIZERS:
            raise BadEnumValue("optimizer")
        if self.loss not in LOSSES:
            raise BadEnumValue("loss")
        if self.compress not in COMPRESSIONS:
            raise BadEnumValue("compress")
        if self.minibatch < 1:
            raise ValueOutOfRange("minibatch")
        if self.epoch < 0:
            raise ValueOutOfRange("epoch")
        if self.lr <= 0:
            raise ValueOutOfRange("lr")
        if not 0 < self.clientFraction <= 1:
            raise ValueOutOfRange("clientFraction")
        if self.minibatchtest < 1:
            raise ValueOutOfRange("minibatchtest")
        if self.comRounds < 0:
            raise ValueOutOfRange("comRounds")
        if not self.dataset:
            raise MissingRequiredKey("dataset")
        sparse = self.compress in ("topk", "randk")
        if sparse:
            if self.compressParam is None:
                raise MissingRequiredKey("compressParam")
            if not 0 < self.compressParam <= 1:
                raise ValueOutOfRange("compressParam")
        elif self.compressParam is not None:
            raise UnknownKey("compressParam")
        if self.model is not None:
            self.model.validate()
        return self

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in CORE_KEYS}
        if self.compressParam is not None:
            d["compressParam"] = self.compressParam
        if self.dtype != "img":
            d["dtype"] = self.dtype
        if self.taskName:
            d["taskName"] = self.taskName
        if self.clients:
            d["clients"] = list(self.clients)
        if self.model is not None:
            d["model"] = self.model.to_dict()
        return d


@dataclass(frozen=True)
class DataConfig:
    shape: tuple[int, ...]
    numDatapoints: int
    task: str
    numLabels: int

    def validate(self) -> "DataConfig":
        if not self.shape or any(v < 1 for v in self.shape):
            raise MalformedDataConfig("shape entries must be positive")
        if self.numDatapoints < 1:
            raise MalformedDataConfig("numDatapoints must be >= 1")
        if self.task not in ALGOS:
            raise MalformedDataConfig(f"unknown task {self.task!r}")
        if self.task == "Classification" and self.numLabels < 2:
            raise MalformedDataConfig("Classification needs numLabels >= 2")
        return self

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "numDatapoints": self.numDatapoints,
            "task": self.task,
            "numLabels": self.numLabels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DataConfig":
        try:
            cfg = cls(
                shape=tuple(int(v) for v in d["shape"]),
                numDatapoints=int(d["numDatapoints"]),
                task=str(d["task"]),
                numLabels=int(d["numLabels"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedDataConfig(str(e)) from e
        return cfg.validate()


def _as_int(key: str, value) -> int:
    if isinstance(value, bool):
        raise ValueOutOfRange(key)
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if value != int(value):
            raise ValueOutOfRange(key)
        return int(value)
    if isinstance(value, str):
        try:
            f = float(value)
        except ValueError:
            raise ValueOutOfRange(key) from None
        if f != int(f):
            raise ValueOutOfRange(key)
        return int(f)
    raise ValueOutOfRange(key)


def _as_float(key: str, value) -> float:
    if isinstance(value, bool):
        raise ValueOutOfRange(key)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ValueOutOfRange(key) from None
    raise ValueOutOfRange(key)


def apply_defaults(partial: dict) -> TaskConfig:
    """Fill every absent key with its default and validate the result.

    Numeric values are accepted both as JSON numbers and as strings.
    Idempotent: feeding back ``to_dict`` of the result is a fixed point.
    """
    if "dataset" not in partial or not str(partial["dataset"]):
        raise MissingRequiredKey("dataset")

    p = dict(partial)
    optimizer = str(p.get("optimizer", "Adam"))
    client_fraction = _as_float("clientFraction", p.get("clientFraction", 1))
    compress = str(p.get("compress", "No"))

    if "scheduler" in p:
        scheduler = str(p["scheduler"])
    else:
        scheduler = "full" if client_fraction >= 1 else "random"

    compress_param = p.get("compressParam")
    if compress in ("topk", "randk"):
        compress_param = _as_float(
            "compressParam", compress_param if compress_param is not None else 0.1
        )
    elif compress_param is not None:
        compress_param = _as_float("compressParam", compress_param)

    model = p.get("model")
    if isinstance(model, dict):
        model = ModelSpec.from_dict(model)

    clients = p.get("clients", ())
    if isinstance(clients, str):
        clients = [c.strip() for c in clients.split(",") if c.strip()]

    cfg = TaskConfig(
        algo=str(p.get("algo", "Classification")),
        minibatch=_as_int("minibatch", p.get("minibatch", 16)),
        epoch=_as_int("epoch", p.get("epoch", 5)),
        lr=_as_float("lr", p.get("lr", DEFAULT_LR.get(optimizer, 0.0001))),
        scheduler=scheduler,
        clientFraction=client_fraction,
        minibatchtest=_as_int("minibatchtest", p.get("minibatchtest", 32)),
        comRounds=_as_int("comRounds", p.get("comRounds", 10)),
        optimizer=optimizer,
        loss=str(p.get("loss", "CrossEntropyLoss")),
        compress=compress,
        dataset=str(p["dataset"]),
        compressParam=compress_param,
        dtype=str(p.get("dtype", "img")),
        taskName=str(p.get("taskName", "")),
        clients=tuple(str(c) for c in clients),
        model=model,
    )
    return cfg.validate()


def parse_task_config(text: bytes | str) -> TaskConfig:
    """Parse a task JSON into a validated config; unknown keys are rejected."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        raw = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ValueOutOfRange("<document>", f"not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ValueOutOfRange("<document>", "top-level value must be an object")
    for key in raw:
        if key not in ALL_KEYS:
            raise UnknownKey(key)
    return apply_defaults(raw)


def _scalar_str(value) -> str:
    """Decimal-style rendering without exponents; integral floats lose the dot."""
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e15:
            return str(int(value))
        return format(Decimal(repr(value)), "f")
    return str(value)


def canonical_json(config: TaskConfig) -> bytes:
    """Byte-stable serialization: fixed key order, all scalars as JSON strings."""
    out: dict = {}
    for key, value in config.to_dict().items():
        if key == "clients":
            out[key] = list(value)
        elif key == "model":
            out[key] = value
        else:
            out[key] = _scalar_str(value)
    return json.dumps(out, separators=(", ", ": ")).encode("utf-8")


def parse_data_config(text: bytes | str) -> DataConfig:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedDataConfig(f"not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise MalformedDataConfig("top-level value must be an object")
    return DataConfig.from_dict(raw)
