"""Shared test oracles: reference FedAvg simulator and brute-force checks."""

from __future__ import annotations

import numpy as np

from fedforge.config import TaskConfig
from fedforge.nn import Dataset, FlatWeights, build_model, client_update


def reference_fedavg(
    config: TaskConfig,
    client_datasets: dict[str, Dataset],
    seed: int,
    seed_bases: dict[str, int],
) -> tuple[FlatWeights, list[set[str]]]:
    """Plain single-process FedAvg with the documented seeding contract.

    Selection: sorted client ids, rng streams [seed, round]; aggregation:
    float64 weighted mean over updates ordered by client id, narrowed to
    float32. Returns the final weights and the per-round participant sets.
    """
    assert config.model is not None
    ids = sorted(client_datasets)
    k = len(ids)
    weights = build_model(config.model, seed)
    participants_log = []
    for rnd in range(1, config.comRounds + 1):
        m = max(int(config.clientFraction * k), 1)
        if config.scheduler == "full":
            selected = set(ids)
        elif config.scheduler == "random":
            rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, rnd])
            selected = {ids[i] for i in rng.choice(k, size=min(m, k), replace=False)}
        else:
            raise NotImplementedError(config.scheduler)
        participants_log.append(selected)
        acc = None
        total = 0
        for cid in sorted(selected):
            local_seed = (seed_bases[cid] ^ rnd) & 0xFFFFFFFFFFFFFFFF
            updated = client_update(weights, client_datasets[cid], config, local_seed)
            n_k = len(client_datasets[cid])
            term = updated.values.astype(np.float64) * n_k
            acc = term if acc is None else acc + term
            total += n_k
        weights = FlatWeights((acc / total).astype(np.float32), config.model)
    return weights, participants_log


def brute_force_weighted_mean(updates: list[tuple[np.ndarray, int]]) -> np.ndarray:
    vectors = np.stack([np.asarray(v, dtype=np.float64) for v, _ in updates])
    counts = np.array([n for _, n in updates], dtype=np.float64)
    return (vectors * counts[:, None]).sum(axis=0) / counts.sum()
