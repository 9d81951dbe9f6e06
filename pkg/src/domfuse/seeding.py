"""Deterministic derivation of independent random streams."""

from __future__ import annotations

import hashlib
import random


def derive_seed(*parts) -> int:
    """Hash ``parts`` into a 64-bit seed; stable across processes and platforms."""
    digest = hashlib.blake2b(repr(parts).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def stream(*parts) -> random.Random:
    return random.Random(derive_seed(*parts))
