"""Quantitative measures: sign-count information, choice uncertainty, and
per-trace communication statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .simulator import Trace


class DomainError(ValueError):
    """An argument falls outside a formula's domain."""


def _check_count(value, name: str, minimum: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")


def hartley(n: int, s: int, base: float = 2.0) -> float:
    """Information carried by n signs over a vocabulary of s symbols:
    n * log_base(s). A one-symbol vocabulary carries nothing."""
    _check_count(n, "sign count n", 1)
    _check_count(s, "vocabulary size s", 1)
    if not base > 1:
        raise DomainError(f"log base must be > 1, got {base}")
    if base == 2:
        return n * math.log2(s)
    return n * (math.log(s) / math.log(base))


def shannon_choices(c: int) -> float:
    """Information as reduction of uncertainty over c equally likely
    choices: log2(c)."""
    _check_count(c, "choice count c", 1)
    return math.log2(c)


@dataclass(frozen=True)
class TraceMetrics:
    created: int
    delivered: int
    destroyed: int
    stored: int
    in_flight: int
    corrupted_delivered: int
    noise_created: int
    mean_latency: float

    def lines(self) -> list[str]:
        return [
            f"created\t{self.created}",
            f"delivered\t{self.delivered}",
            f"destroyed\t{self.destroyed}",
            f"stored\t{self.stored}",
            f"in_flight\t{self.in_flight}",
            f"corrupted_delivered\t{self.corrupted_delivered}",
            f"noise_created\t{self.noise_created}",
            f"mean_latency\t{self.mean_latency:.4f}",
        ]


def trace_metrics(trace: Trace) -> TraceMetrics:
    """Communication statistics recomputed from the event list alone.

    Latency is measured per delivered token from the injection time of its
    lineage root; tokens without an injected ancestor (noise let through)
    are excluded from the mean.
    """
    created_at: dict[int, int] = {}
    origin: dict[int, str] = {}
    parent: dict[int, int] = {}
    corrupted: set[int] = set()
    terminal: dict[int, str] = {}
    delivered_at: dict[int, int] = {}

    for event in trace.events:
        if event.name == "Created":
            created_at[event.token] = event.time
            detail = dict(event.detail)
            origin[event.token] = detail.get("origin", "")
            if "parent" in detail:
                parent[event.token] = int(detail["parent"])
            if detail.get("corrupted") == "true":
                corrupted.add(event.token)
        elif event.name == "CorruptionApplied":
            corrupted.add(event.token)
        elif event.name in ("Delivered", "Destroyed", "Stored"):
            terminal[event.token] = event.name
            if event.name == "Delivered":
                delivered_at[event.token] = event.time

    def root(token: int) -> int:
        while token in parent:
            token = parent[token]
        return token

    created = len(created_at)
    delivered = sum(1 for t in terminal.values() if t == "Delivered")
    destroyed = sum(1 for t in terminal.values() if t == "Destroyed")
    stored = sum(1 for t in terminal.values() if t == "Stored")
    corrupted_delivered = sum(1 for tok in delivered_at if tok in corrupted)
    noise_created = sum(1 for o in origin.values() if o == "noise")

    latencies = [
        time - created_at[root(tok)]
        for tok, time in sorted(delivered_at.items())
        if origin[root(tok)] == "injected"
    ]
    mean_latency = sum(latencies) / len(latencies) if latencies else 0.0

    return TraceMetrics(
        created=created,
        delivered=delivered,
        destroyed=destroyed,
        stored=stored,
        in_flight=created - delivered - destroyed - stored,
        corrupted_delivered=corrupted_delivered,
        noise_created=noise_created,
        mean_latency=mean_latency,
    )
