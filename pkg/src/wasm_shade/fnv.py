"""FNV-1a 64-bit hashing."""

import numba
import numpy as np

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


@numba.njit(cache=True)
def _fnv1a_array(buf):
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for b in buf:
        h = (h ^ np.uint64(b)) * prime
    return h


def fnv1a64(data) -> int:
    """Hash a bytes-like object. Large inputs go through a compiled loop."""
    if len(data) < 256:
        h = FNV_OFFSET
        for b in bytes(data):
            h = ((h ^ b) * FNV_PRIME) & _MASK
        return h
    return int(_fnv1a_array(np.frombuffer(data, dtype=np.uint8)))


def fnv1a64_text(text: str) -> int:
    return fnv1a64(text.encode("utf-8"))
