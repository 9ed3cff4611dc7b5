"""Deterministic derivation of per-purpose RNG seeds from one master seed."""

import hashlib

import numpy as np

__all__ = ["derive_seed", "derive_rng"]


def derive_seed(master: int, label: str) -> int:
    """Stable 63-bit seed for a named random stream under a master seed."""
    digest = hashlib.sha256(f"{master}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def derive_rng(master: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, label))
