"""Deterministic seed derivation.

Every random decision in a run flows from one master seed through
`derive_seed`, which hashes the master seed together with a path of string
or integer labels ("train", round, device, ...). Labelled streams make
results independent of execution order, so a run gives identical output for
any worker count.
"""

import hashlib

_MASK63 = (1 << 63) - 1


def derive_seed(master: int, *parts: int | str) -> int:
    """Map (master seed, label path) to an independent 63-bit seed."""
    digest = hashlib.sha256()
    digest.update(str(int(master)).encode("ascii"))
    for part in parts:
        digest.update(b"/")
        digest.update(str(part).encode("utf-8"))
    return int.from_bytes(digest.digest()[:8], "big") & _MASK63
