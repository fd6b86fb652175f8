"""Deterministic seed derivation for independent RNG streams.

Every stochastic stage of an experiment owns a child seed derived from the
master seed and a path of labels (stage name, cell index, repetition, ...).
Derivation goes through SHA-256 so streams are independent of each other and
stable across platforms and Python hash randomization.
"""

import hashlib

import numpy as np


def child_seed(master: int, *path) -> int:
    """Derive a 64-bit seed from a master seed and a label path."""
    token = repr((int(master),) + tuple(path)).encode("utf-8")
    digest = hashlib.sha256(token).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master: int, *path) -> np.random.Generator:
    """A fresh Generator for the stream identified by (master, *path)."""
    return np.random.default_rng(child_seed(master, *path))
