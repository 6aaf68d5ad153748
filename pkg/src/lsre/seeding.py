"""Deterministic seed derivation.

Every random stream in the package is keyed by a tuple of integers and/or
strings, so a run is reproducible from its master seed alone and does not
depend on scheduling order.
"""
import hashlib

import numpy as np


def _as_int(part):
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        # SeedSequence only accepts non-negative entropy.
        v = int(part)
        return v if v >= 0 else (1 << 64) + v
    if isinstance(part, str):
        return int.from_bytes(hashlib.sha256(part.encode()).digest()[:8], "little")
    raise TypeError(f"cannot derive a seed from {type(part).__name__}")


def derive_seed(*parts) -> int:
    """Hash ``parts`` into a 63-bit seed."""
    ss = np.random.SeedSequence([_as_int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def make_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


def text_hash(text: str) -> int:
    return _as_int(text)
