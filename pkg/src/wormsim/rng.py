"""Deterministic seed derivation for hierarchical Monte Carlo experiments.

Every random stream in an experiment is keyed by a path of labels under a
single master seed, e.g. ``derive_seed(master, "graph", 10000, 0)`` or
``derive_seed(master, "run", 137)``.  The mixing function is a SHA-256 hash
of the canonical path string, truncated to 64 bits, so any subset of the
experiment (one cell, one run) can be reproduced in isolation and results
do not depend on execution order or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = "\x1f"  # unit separator; cannot appear in the str() of ints/floats


def derive_seed(master_seed: int, *parts: int | float | str) -> int:
    """Derive a 64-bit child seed from a master seed and a label path.

    The path is encoded as ``str(master_seed) + SEP + str(part1) + ...`` and
    hashed with SHA-256; the first 8 bytes (little-endian) are the child
    seed.  Stable across platforms and Python versions.
    """
    key = _SEP.join([str(int(master_seed))] + [_part_token(p) for p in parts])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def _part_token(part: int | float | str) -> str:
    if isinstance(part, bool):
        raise TypeError("bool path parts are ambiguous; use an explicit label")
    if isinstance(part, (int, np.integer)):
        return str(int(part))
    if isinstance(part, (float, np.floating)):
        return repr(float(part))
    if isinstance(part, str):
        if _SEP in part:
            raise ValueError("path label contains the separator byte")
        return part
    raise TypeError(f"unsupported seed path part: {type(part)!r}")


def generator_for(master_seed: int, *parts: int | float | str) -> np.random.Generator:
    """A fresh PCG64 generator for the given label path."""
    return np.random.default_rng(derive_seed(master_seed, *parts))
