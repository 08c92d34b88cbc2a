"""Deterministic simulated datagram network for one device pair.

Loss, uniform delay, and duplication are drawn from a single seeded
generator in send-call order, so an identical (config, send sequence)
always produces an identical delivery schedule — failing fuzz cases replay
exactly. Messages are never altered in flight; each send yields 0, 1, or 2
deliveries.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass

from .messages import ControlMessage


@dataclass(frozen=True)
class NetworkConfig:
    loss_probability: float = 0.0
    delay_min_ms: int = 0
    delay_max_ms: int = 0
    duplicate_probability: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.loss_probability <= 1.0):
            raise ValueError("loss_probability must be in [0, 1]")
        if not (0.0 <= self.duplicate_probability <= 1.0):
            raise ValueError("duplicate_probability must be in [0, 1]")
        if self.delay_min_ms < 0 or self.delay_max_ms < self.delay_min_ms:
            raise ValueError("delay bounds must satisfy 0 <= min <= max")


IDEAL_NETWORK = NetworkConfig()


@dataclass(frozen=True)
class DeliveryEvent:
    deliver_at_ms: int
    msg: ControlMessage
    recipient: str


class SimNet:
    """Single-owner structure; mutated only by the simulation loop."""

    def __init__(self, config: NetworkConfig):
        self.config = config
        self._rng = random.Random(config.seed)
        self._heap: list[tuple[int, int, DeliveryEvent]] = []
        self._insert_counter = 0

    def send(self, msg: ControlMessage, send_ms: int, recipient: str) -> list[DeliveryEvent]:
        """Queue a datagram; returns the deliveries it will produce (possibly
        none when lost, two when duplicated)."""
        cfg = self.config
        if self._rng.random() < cfg.loss_probability:
            return []
        events = [self._schedule(msg, send_ms, recipient)]
        if self._rng.random() < cfg.duplicate_probability:
            events.append(self._schedule(msg, send_ms, recipient))
        return events

    def _schedule(self, msg: ControlMessage, send_ms: int, recipient: str) -> DeliveryEvent:
        delay = self._rng.randint(self.config.delay_min_ms, self.config.delay_max_ms)
        event = DeliveryEvent(send_ms + delay, msg, recipient)
        heapq.heappush(self._heap, (event.deliver_at_ms, self._insert_counter, event))
        self._insert_counter += 1
        return event

    def drain_due(self, now_ms: int) -> list[DeliveryEvent]:
        """Remove and return all deliveries due by now_ms, ordered by
        (deliver_at_ms, insertion index)."""
        due = []
        while self._heap and self._heap[0][0] <= now_ms:
            due.append(heapq.heappop(self._heap)[2])
        return due

    def pending(self) -> int:
        return len(self._heap)
