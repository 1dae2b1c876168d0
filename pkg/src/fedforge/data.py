"""Dataset file I/O and synthetic desk-scale dataset generation.

Each client folder holds ``data.csv`` (label column last) and ``dataconfig.json``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .config import DataConfig, parse_data_config
from .errors import MissingDataConfig
from .nn import Dataset


def load_data_config(folder: str | Path) -> DataConfig:
    path = Path(folder) / "dataconfig.json"
    if not path.exists():
        raise MissingDataConfig(str(path))
    return parse_data_config(path.read_bytes())


def load_dataset(folder: str | Path) -> Dataset:
    folder = Path(folder)
    cfg = load_data_config(folder)
    raw = np.loadtxt(folder / "data.csv", delimiter=",", ndmin=2)
    features = raw[:, :-1].astype(np.float32)
    labels = raw[:, -1]
    if cfg.task == "Classification":
        labels = labels.astype(np.int64)
    return Dataset(features=features, labels=labels, config=cfg)


def save_dataset(folder: str | Path, features: np.ndarray, labels: np.ndarray, task: str, num_labels: int) -> None:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    rows = np.column_stack([features, labels.reshape(-1, 1)])
    np.savetxt(folder / "data.csv", rows, delimiter=",", fmt="%.8g")
    cfg = DataConfig(
        shape=(1, features.shape[1]),
        numDatapoints=len(features),
        task=task,
        numLabels=num_labels,
    ).validate()
    (folder / "dataconfig.json").write_text(json.dumps(cfg.to_dict(), indent=2))


def make_blobs(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two well-separated 2-D Gaussian clusters, balanced classes."""
    rng = np.random.default_rng(seed)
    half = n // 2
    centers = np.array([[-2.0, -2.0], [2.0, 2.0]])
    counts = [half, n - half]
    xs, ys = [], []
    for label, (center, count) in enumerate(zip(centers, counts)):
        xs.append(center + rng.normal(0.0, 1.0, size=(count, 2)))
        ys.append(np.full(count, label))
    x = np.concatenate(xs).astype(np.float32)
    y = np.concatenate(ys).astype(np.int64)
    perm = rng.permutation(n)
    return x[perm], y[perm]


def make_moons(n: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two interleaved half circles with mild noise."""
    rng = np.random.default_rng(seed)
    half = n // 2
    t1 = rng.uniform(0, np.pi, half)
    t2 = rng.uniform(0, np.pi, n - half)
    x1 = np.column_stack([np.cos(t1), np.sin(t1)])
    x2 = np.column_stack([1 - np.cos(t2), 0.5 - np.sin(t2)])
    x = np.concatenate([x1, x2]) + rng.normal(0.0, 0.1, size=(n, 2))
    y = np.concatenate([np.zeros(half), np.ones(n - half)])
    perm = rng.permutation(n)
    return x[perm].astype(np.float32), y[perm].astype(np.int64)


GENERATORS = {"blobs": make_blobs, "moons": make_moons}


def gen_data(kind: str, n: int, clients: int, out_dir: str | Path, seed: int = 0) -> list[Path]:
    """Write per-client train folders plus a held-out ``server-test`` split (80/20)."""
    if kind not in GENERATORS:
        raise ValueError(f"unknown dataset kind {kind!r}")
    if n < clients:
        raise ValueError("need at least one datapoint per client")
    out_dir = Path(out_dir)
    x, y = GENERATORS[kind](n, seed)
    n_train = int(round(n * 0.8))
    train_x, train_y = x[:n_train], y[:n_train]
    test_x, test_y = x[n_train:], y[n_train:]

    written = []
    splits = np.array_split(np.arange(n_train), clients)
    for i, idx in enumerate(splits):
        folder = out_dir / f"client-{i + 1}"
        save_dataset(folder, train_x[idx], train_y[idx], "Classification", 2)
        written.append(folder)
    test_folder = out_dir / "server-test"
    save_dataset(test_folder, test_x, test_y, "Classification", 2)
    written.append(test_folder)
    return written
