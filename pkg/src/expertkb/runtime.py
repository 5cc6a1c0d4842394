"""Identity, clock, and hashing primitives.

IDs are 128-bit values rendered as 32 lowercase hex chars. The default
generator draws from the OS CSPRNG; a seeded generator exists so fixture
pipelines can produce reproducible stores.
"""

from __future__ import annotations

import random
import secrets
from datetime import date, datetime, timezone

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & _MASK64
    return h


class IdGenerator:
    """Fresh 32-hex identifiers from the OS CSPRNG."""

    def new_id(self) -> str:
        return secrets.token_hex(16)


class SeededIdGenerator(IdGenerator):
    """Deterministic id stream for reproducible fixtures and golden files.

    The stream position is serializable so that successive CLI invocations
    against one data directory continue the stream instead of restarting it.
    """

    def __init__(self, seed: int):
        self._rng = random.Random(seed)

    def new_id(self) -> str:
        return f"{self._rng.getrandbits(128):032x}"

    def get_state(self) -> dict:
        version, internal, gauss = self._rng.getstate()
        return {"version": version, "internal": list(internal), "gauss": gauss}

    def set_state(self, state: dict) -> None:
        self._rng.setstate((state["version"], tuple(state["internal"]), state["gauss"]))


def is_hex_id(value: str) -> bool:
    return len(value) == 32 and all(c in "0123456789abcdef" for c in value)


class Clock:
    """UTC time source; swap in FixedClock for deterministic tests."""

    def now(self) -> datetime:
        return datetime.now(timezone.utc)

    def today(self) -> date:
        return self.now().date()


class FixedClock(Clock):
    def __init__(self, at: datetime):
        if at.tzinfo is None:
            at = at.replace(tzinfo=timezone.utc)
        self._at = at

    def now(self) -> datetime:
        return self._at

    def advance_to(self, at: datetime) -> None:
        if at.tzinfo is None:
            at = at.replace(tzinfo=timezone.utc)
        self._at = at


def parse_timestamp(value: str) -> datetime:
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()
