"""Deterministic TFloat / TSmall / TLarge event generators.

Values are float32 drawn uniformly from [0, 1) by numpy's PCG64, seeded via
``SeedSequence(seed, spawn_key=(kind,))`` so each kind has its own stream.

* TFloat: one value repeated 6 times (24 bytes).
* TSmall: 1000 values, each fresh value filling 6 consecutive slots
  (the last group is cut short), 4000 bytes.
* TLarge: the same fill with 1,000,000 values, 4,000,000 bytes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from .errors import InvalidMix

RNG_ALGORITHM = "numpy.PCG64+SeedSequence/float32-uniform"
PERIOD = 6
MIB = 1 << 20


class Kind(enum.IntEnum):
    TFLOAT = 0
    TSMALL = 1
    TLARGE = 2

    @property
    def values_per_event(self) -> int:
        return (PERIOD, 1000, 1_000_000)[self]

    @property
    def event_size(self) -> int:
        return 4 * self.values_per_event

    @property
    def branch(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, name: str) -> "Kind":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise InvalidMix(f"unknown event kind {name!r}") from None


@dataclass(frozen=True)
class EventPayload:
    bytes: bytes
    logical_index: int


@dataclass(frozen=True)
class GenSpec:
    kind: Kind
    seed: int
    count: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.count < 1:
            raise InvalidMix("count must be >= 1")
        if not 0 <= self.seed < 1 << 64:
            raise InvalidMix("seed must fit in 64 bits")

    @property
    def raw_bytes(self) -> int:
        return self.count * self.kind.event_size


def _rng(kind: Kind, seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(int(kind),))))


def iter_batches(spec: GenSpec, batch_bytes: int = 4 * MIB) -> Iterator[np.ndarray]:
    """Yield float32 arrays of shape (events, values_per_event), in order.

    Batching only bounds memory; the concatenated stream is the same for
    any batch size.
    """
    kind = spec.kind
    nvals = kind.values_per_event
    groups = -(-nvals // PERIOD)
    per_batch = max(1, batch_bytes // kind.event_size)
    rng = _rng(kind, spec.seed)
    left = spec.count
    while left:
        n = min(per_batch, left)
        fresh = rng.random(n * groups, dtype=np.float32).reshape(n, groups)
        yield np.repeat(fresh, PERIOD, axis=1)[:, :nvals]
        left -= n


def iter_payloads(spec: GenSpec, batch_bytes: int = 4 * MIB) -> Iterator[bytes]:
    """Event byte strings only; cheaper than :func:`generate` for bulk writes."""
    for batch in iter_batches(spec, batch_bytes):
        raw = batch.tobytes()
        size = spec.kind.event_size
        for pos in range(0, len(raw), size):
            yield raw[pos:pos + size]


def generate(spec: GenSpec) -> Iterator[EventPayload]:
    for i, payload in enumerate(iter_payloads(spec)):
        yield EventPayload(payload, i)


def counts_for(total_bytes: int, mix: Mapping[Kind, float] | None = None,
               tolerance: float = 0.05) -> dict[Kind, int]:
    """Per-kind event counts whose raw bytes land within ``tolerance`` of each share."""
    if total_bytes < MIB:
        raise InvalidMix("corpus needs at least 1 MiB")
    mix = {Kind(k): float(v) for k, v in (mix or {k: 1.0 for k in Kind}).items()}
    weight = sum(mix.values())
    if any(v < 0 for v in mix.values()) or weight <= 0:
        raise InvalidMix("mix proportions must be non-negative with a positive sum")
    counts = {}
    for kind, w in mix.items():
        if w == 0:
            continue
        share = total_bytes * w / weight
        n = max(1, round(share / kind.event_size))
        if abs(n * kind.event_size - share) > tolerance * share:
            raise InvalidMix(
                f"{kind.branch}: {share:.0f}-byte share cannot be met within {tolerance:.0%} "
                f"using {kind.event_size}-byte events")
        counts[kind] = n
    return counts


def corpus(total_bytes: int, mix: Mapping[Kind, float] | None = None,
           seed: int = 0) -> dict[Kind, GenSpec]:
    """Generator specs for a corpus whose branches hold roughly equal bytes.

    Iterate each with :func:`generate` or :func:`iter_payloads`.
    """
    return {kind: GenSpec(kind, seed, n) for kind, n in counts_for(total_bytes, mix).items()}
