"""Per-round participant selection policies and latency bookkeeping."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRoster, UnknownClient

LATENCY_WINDOW = 5  # rounds of history kept per client


@dataclass
class ClientEntry:
    id: str
    address: str = ""
    latency_history: deque = field(default_factory=lambda: deque(maxlen=LATENCY_WINDOW))

    def mean_latency(self) -> float:
        # cold-start clients rank first so new arrivals are not starved
        if not self.latency_history:
            return 0.0
        return sum(self.latency_history) / len(self.latency_history)


@dataclass
class ClientRoster:
    clients: dict[str, ClientEntry] = field(default_factory=dict)
    rr_cursor: int = 0

    def add(self, client_id: str, address: str = "") -> None:
        if client_id not in self.clients:
            self.clients[client_id] = ClientEntry(client_id, address)

    def remove(self, client_id: str) -> None:
        self.clients.pop(client_id, None)

    def ids(self) -> list[str]:
        return sorted(self.clients)

    def __len__(self) -> int:
        return len(self.clients)


def participant_count(fraction: float, total: int) -> int:
    """Participants per round: floor of fraction*total, at least one."""
    return max(int(fraction * total), 1)


def select_clients(
    roster: ClientRoster, policy: str, m: int, round_index: int, seed: int = 0
) -> set[str]:
    """Pick the participant set for one round according to the configured policy."""
    if not roster.clients:
        raise EmptyRoster("no registered clients")
    ids = roster.ids()
    k = len(ids)
    m = min(m, k)
    if policy == "full":
        return set(ids)
    if policy == "random":
        rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, round_index])
        picks = rng.choice(k, size=m, replace=False)
        return {ids[i] for i in picks}
    if policy == "round_robin":
        start = roster.rr_cursor % k
        chosen = {ids[(start + i) % k] for i in range(m)}
        roster.rr_cursor = (start + m) % k
        return chosen
    if policy == "latency_proportional":
        ranked = sorted(ids, key=lambda cid: (roster.clients[cid].mean_latency(), cid))
        return set(ranked[:m])
    raise ValueError(f"unknown scheduling policy {policy!r}")


def record_latency(roster: ClientRoster, client_id: str, round_seconds: float) -> None:
    entry = roster.clients.get(client_id)
    if entry is None:
        raise UnknownClient(client_id)
    entry.latency_history.append(float(round_seconds))
