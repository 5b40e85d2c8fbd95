"""Random-seed control.

One seed pins dataset shuffling, negative-label sampling and attack random
starts. Purpose-specific generators are derived with :func:`spawn` so that
adding a consumer never shifts another consumer's stream.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

import numpy as np
import torch


@dataclass(frozen=True)
class Seed:
    value: int

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("seed must be a non-negative integer")


def as_seed(seed: "Seed | int") -> Seed:
    return seed if isinstance(seed, Seed) else Seed(int(seed))


def spawn(seed: "Seed | int", tag: str) -> int:
    """Derive a stable sub-seed from (seed, tag)."""
    digest = hashlib.sha256(f"{as_seed(seed).value}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def make_generator(seed: "Seed | int", tag: str = "") -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(spawn(seed, tag) if tag else as_seed(seed).value)
    return g


def make_rng(seed: "Seed | int", tag: str = "") -> np.random.Generator:
    return np.random.default_rng(spawn(seed, tag) if tag else as_seed(seed).value)


def seed_all(seed: "Seed | int") -> None:
    value = as_seed(seed).value
    random.seed(value)
    np.random.seed(value % 2**32)
    torch.manual_seed(value)
