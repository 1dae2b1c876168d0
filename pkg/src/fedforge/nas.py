"""Federated architecture search plus selective-halving learning-rate search."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import DataConfig
from .errors import (
    AllModelsInvalid,
    DivergentCandidate,
    GatewayUnreachable,
    InvalidArchitecture,
    NoClientsAvailable,
    NonFiniteLoss,
)
from .intent import LlmGateway, _spec_from_gateway, build_arch_prompt
from .modelspec import ModelSpec, mlp_spec
from .nn import Dataset, Metrics, build_model, evaluate, train_epochs

LR_LOW, LR_HIGH = 1e-5, 5e-2


@dataclass(frozen=True)
class SearchConfig:
    search_rounds: int = 5       # outer architecture rounds
    hpo_rounds: int = 2          # learning-rate searches per client per round
    explorer_epochs: int = 20    # epochs per candidate training run
    client_fraction: float = 1.0
    num_candidates: int = 20     # learning rates per HPO space
    initial_batch: int = 250
    lr_bounds: tuple[float, float] = (LR_LOW, LR_HIGH)
    seed: int = 0

    def validate(self) -> "SearchConfig":
        if min(self.search_rounds, self.hpo_rounds, self.explorer_epochs,
               self.num_candidates, self.initial_batch) < 1:
            raise ValueError("search parameters must be >= 1")
        if not self.lr_bounds[0] < self.lr_bounds[1]:
            raise ValueError("lr bounds must be ordered")
        return self


@dataclass(frozen=True)
class CandidateResult:
    model: ModelSpec
    lr: float
    perf: float  # validation accuracy in [0, 1]


class BuiltinSearchSpace:
    """Deterministic dense-model family over depth {1,2,3} x width {32,64,128,256}.

    Never repeats a spec within one search; combinations are walked in a
    seeded order so distinct searches explore differently.
    """

    DEPTHS = (1, 2, 3)
    WIDTHS = (32, 64, 128, 256)

    def __init__(self, d: DataConfig, seed: int = 0):
        self.d = d
        combos = [(dep, wid) for dep in self.DEPTHS for wid in self.WIDTHS]
        rng = np.random.default_rng(seed)
        self._queue = [combos[i] for i in rng.permutation(len(combos))]
        self._issued: set = set()

    def propose(self, m: int, feedback=None) -> list[ModelSpec]:
        out = []
        out_dim = self.d.numLabels if self.d.task == "Classification" else 1
        while len(out) < m and self._queue:
            depth, width = self._queue.pop(0)
            spec = mlp_spec(tuple(self.d.shape), [width] * depth, out_dim)
            key = tuple((l.in_dim, l.out_dim, l.activation) for l in spec.layers)
            if key in self._issued:
                continue
            self._issued.add(key)
            out.append(spec)
        if not out:
            raise AllModelsInvalid("builtin search space exhausted")
        return out


class GatewaySearchSpace:
    """Remote architecture provider with corrective-retry on invalid models."""

    def __init__(self, d: DataConfig, gateway: LlmGateway):
        self.d = d
        self.gateway = gateway
        self._fallback = BuiltinSearchSpace(d)
        self.best: tuple[ModelSpec, float] | None = None

    def propose(self, m: int, feedback=None) -> list[ModelSpec]:
        if feedback is not None:
            self.best = feedback
        try:
            out = []
            for _ in range(m):
                reply = self.gateway.architecture(build_arch_prompt(self.d))
                try:
                    out.append(_spec_from_gateway(reply, self.d))
                except InvalidArchitecture:
                    retry = self.gateway.architecture(build_arch_prompt(self.d))
                    out.append(_spec_from_gateway(retry, self.d))
            return out
        except (GatewayUnreachable, InvalidArchitecture):
            return self._fallback.propose(m, feedback)


def create_hpo_space(count: int, seed: int, bounds: tuple[float, float] = (LR_LOW, LR_HIGH)) -> list[float]:
    """Log-uniform learning-rate samples, sorted descending for deterministic ties."""
    rng = np.random.default_rng(seed)
    lo, hi = bounds
    values = np.exp(rng.uniform(np.log(lo), np.log(hi), size=count))
    return sorted((float(v) for v in values), reverse=True)


def split_train_validation(data: Dataset, seed: int, fraction: float = 0.2) -> tuple[Dataset, Dataset]:
    """Seeded 80/20 split of a client's local data."""
    n = len(data)
    perm = np.random.default_rng(seed).permutation(n)
    n_val = max(1, int(round(n * fraction)))
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    mk = lambda idx: Dataset(data.features[idx], data.labels[idx], data.config)
    return mk(train_idx), mk(val_idx)


def perform_hpo(
    model: ModelSpec,
    lr_space: list[float],
    epochs: int,
    initial_batch: int,
    train: Dataset,
    validation: Dataset,
    seed: int = 0,
    trace: list | None = None,
) -> tuple[float, float]:
    """Selective halving over learning rates with a doubling training budget.

    Each iteration trains a fresh model per surviving rate on a seeded sample
    of the current budget, evaluates on the validation split, and keeps the
    global best seen anywhere in the run. After the first iteration the top
    ceil(|O|/2) rates survive (ties toward larger lr) and the budget doubles,
    capped at the training-set size. ``trace`` (optional) collects
    (iteration, survivor-count, batch, evaluations) tuples for inspection.
    """
    if not lr_space:
        raise ValueError("empty hyperparameter space")
    survivors = sorted(lr_space, reverse=True)
    batch = min(initial_batch, len(train))
    best_lr, best_perf = survivors[0], -1.0
    iteration = 0
    while True:
        if iteration > 0:
            keep = math.ceil(len(survivors) / 2)
            ranked = sorted(perfs.items(), key=lambda kv: (-kv[1], -kv[0]))
            survivors = [lr for lr, _ in ranked[:keep]]
            batch = min(batch * 2, len(train))
        sample = np.random.default_rng([seed, iteration]).choice(
            len(train), size=batch, replace=False
        )
        subset = Dataset(train.features[sample], train.labels[sample], train.config)
        perfs: dict[float, float] = {}
        for lr in survivors:
            try:
                w = build_model(model, seed)
                w, _ = train_epochs(
                    w,
                    subset,
                    epochs=epochs,
                    batch_size=len(subset),
                    lr=lr,
                    optimizer="Adam",
                    loss="CrossEntropyLoss" if train.config.task == "Classification" else "MSELoss",
                    seed=seed,
                )
                perf = _performance(w, validation)
            except NonFiniteLoss:
                perf = -1.0  # divergent candidate drops out at the next halving
            perfs[lr] = perf
            if perf > best_perf:
                best_perf, best_lr = perf, lr
        if trace is not None:
            trace.append((iteration, len(survivors), batch, dict(perfs)))
        iteration += 1
        if len(survivors) <= 1:
            break
    if best_perf < 0:
        raise DivergentCandidate("every learning rate diverged")
    return best_lr, best_perf


def _performance(weights, validation: Dataset) -> float:
    metrics: Metrics = evaluate(weights, validation, batch=256)
    if validation.config.task == "Classification":
        return metrics.accuracy
    # map regression loss into [0, 1] so it composes with the argmax selection
    return 1.0 / (1.0 + metrics.loss)


def run_search(
    cfg: SearchConfig,
    d: DataConfig,
    client_data: list[Dataset],
    gateway: LlmGateway | None = None,
) -> tuple[ModelSpec, float, float]:
    """Full architecture + learning-rate search over the given client datasets.

    Returns (winning model, winning lr, its validation accuracy): the argmax
    over per-round bests, which are themselves argmaxes over per-client bests.
    """
    cfg.validate()
    if not client_data:
        raise NoClientsAvailable("search needs at least one client dataset")
    provider = (
        GatewaySearchSpace(d, gateway) if gateway is not None else BuiltinSearchSpace(d, cfg.seed)
    )
    total = len(client_data)
    m = max(int(cfg.client_fraction * total), 1)
    round_bests: list[CandidateResult] = []
    feedback = None
    for t in range(cfg.search_rounds):
        specs = provider.propose(m, feedback)
        participants = list(range(total))[:m]
        client_bests: list[CandidateResult] = []
        for slot, ci in enumerate(participants):
            spec = specs[slot % len(specs)]
            train, validation = split_train_validation(client_data[ci], seed=cfg.seed + ci)
            best: tuple[float, float] | None = None
            for j in range(cfg.hpo_rounds):
                space = create_hpo_space(
                    cfg.num_candidates, seed=[cfg.seed, t, ci, j], bounds=cfg.lr_bounds
                )
                try:
                    lr, perf = perform_hpo(
                        spec,
                        space,
                        cfg.explorer_epochs,
                        cfg.initial_batch,
                        train,
                        validation,
                        seed=cfg.seed + 1000 * t + 10 * ci + j,
                    )
                except DivergentCandidate:
                    continue
                if best is None or perf > best[1]:
                    best = (lr, perf)
            if best is not None:
                client_bests.append(CandidateResult(spec, best[0], best[1]))
        if not client_bests:
            raise AllModelsInvalid(f"no usable candidate in search round {t}")
        round_best = max(client_bests, key=lambda c: c.perf)
        round_bests.append(round_best)
        feedback = (round_best.model, round_best.perf)
    winner = max(round_bests, key=lambda c: c.perf)
    return winner.model, winner.lr, winner.perf


def save_search_result(path: str | Path, model: ModelSpec, lr: float, perf: float) -> None:
    """Winning (model, lr) as JSON consumable by task submission."""
    Path(path).write_text(
        json.dumps({"model": model.to_dict(), "lr": lr, "validationAccuracy": perf}, indent=2)
    )
