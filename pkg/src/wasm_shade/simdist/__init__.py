"""Instruction-sequence distance: hashed sequences aligned with DTW or FastDTW."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from ..errors import EmptySequence, SequenceTooLong
from ..fnv import fnv1a64_text
from ..wasm import extract_instruction_sequence, instr_text
from . import kernels

COSTS = ("mismatch", "absdiff")
EXACT, FAST = "exact", "fast"
DEFAULT_RADIUS = 10
MIN_SIZE = 64  # below this FastDTW falls back to the exact DP
MAX_CELLS = 200_000_000
BUCKETS = 64  # histogram width for coarse levels under the mismatch cost


@dataclass(frozen=True)
class DistanceReport:
    distance: float
    method: str
    len_a: int
    len_b: int
    cost: str = "mismatch"
    radius: int | None = None

    def to_json(self):
        return asdict(self)


@lru_cache(maxsize=65536)
def _hash_text(text):
    return fnv1a64_text(text)


def hash_instructions(seq) -> np.ndarray:
    """FNV-1a-64 of each instruction's canonical text, as uint64."""
    return np.fromiter((_hash_text(instr_text(i)) for i in seq), dtype=np.uint64, count=len(seq))


def hash_collisions(seqs) -> list:
    """Distinct instruction texts that share a hash, over any number of sequences."""
    seen = {}
    for seq in seqs:
        for ins in seq:
            t = instr_text(ins)
            seen.setdefault(_hash_text(t), set()).add(t)
    return sorted(sorted(v) for v in seen.values() if len(v) > 1)


def _prep(a, b, cost):
    if cost not in COSTS:
        raise ValueError(f"cost must be one of {COSTS}")
    a = np.ascontiguousarray(a, dtype=np.uint64)
    b = np.ascontiguousarray(b, dtype=np.uint64)
    if a.size == 0 or b.size == 0:
        raise EmptySequence("DTW needs two non-empty sequences")
    return a, b


def _mode(cost):
    return kernels.MISMATCH if cost == "mismatch" else kernels.ABSDIFF


def dtw(a, b, cost: str = "mismatch") -> DistanceReport:
    """Exact DTW distance."""
    a, b = _prep(a, b, cost)
    if a.size * b.size > MAX_CELLS:
        raise SequenceTooLong(f"{a.size}x{b.size} cells exceed {MAX_CELLS}; use fastdtw")
    d = float(kernels.dtw_full(_mode(cost), a, b))
    return DistanceReport(d, EXACT, int(a.size), int(b.size), cost)


def dtw_path(a, b, cost: str = "mismatch"):
    """Exact DTW distance and one optimal warping path as a list of index pairs."""
    a, b = _prep(a, b, cost)
    lo = np.zeros(a.size, dtype=np.int64)
    hi = np.full(a.size, b.size - 1, dtype=np.int64)
    empty = np.zeros((1, 1))
    d, pi, pj = kernels.dtw_window(_mode(cost), a, b, empty, empty, lo, hi)
    return float(d), list(zip(pi.tolist(), pj.tolist()))


def _features(raw, cost):
    """Level-1 coarse features from raw values: bucket histograms or pair means."""
    n = (raw.size + 1) // 2
    if cost == "mismatch":
        f = np.zeros((n, BUCKETS))
        np.add.at(f, (np.arange(raw.size) // 2, (raw % np.uint64(BUCKETS)).astype(np.int64)), 1.0)
    else:
        f = np.zeros((n, 1))
        np.add.at(f[:, 0], np.arange(raw.size) // 2, raw.astype(np.float64))
    sizes = np.bincount(np.arange(raw.size) // 2).astype(np.float64)
    return f, sizes


def _coarsen(f, sizes):
    n = (f.shape[0] + 1) // 2
    idx = np.arange(f.shape[0]) // 2
    g = np.zeros((n, f.shape[1]))
    np.add.at(g, idx, f)
    return g, np.bincount(idx, weights=sizes)


def _window_dtw(mode, xa, ya, xf, yf, lo, hi):
    return kernels.dtw_window(mode, xa, ya, xf, yf, lo, hi)


def _fast(level, a, b, fa, fb, cost, radius):
    """One FastDTW level. Level 0 works on raw values, deeper levels on features."""
    if level == 0:
        n, m = a.size, b.size
        mode = _mode(cost)
        xf = yf = np.zeros((1, 1))
    else:
        (xf, xs), (yf, ys) = fa, fb
        n, m = xf.shape[0], yf.shape[0]
        mode = kernels.HISTOGRAM if cost == "mismatch" else kernels.MEAN
        xf = xf / xs[:, None]
        yf = yf / ys[:, None]
        a = b = np.zeros(1, dtype=np.uint64)
    if n < MIN_SIZE or m < MIN_SIZE:
        lo = np.zeros(n, dtype=np.int64)
        hi = np.full(n, m - 1, dtype=np.int64)
    else:
        if level == 0:
            ca, cb = _features(a, cost), _features(b, cost)
        else:
            ca, cb = _coarsen(*fa), _coarsen(*fb)
        _, pi, pj = _fast(level + 1, None, None, ca, cb, cost, radius)
        lo, hi = kernels.expand_window(pi, pj, ca[0].shape[0], cb[0].shape[0], n, m, radius)
    return _window_dtw(mode, a, b, xf, yf, lo, hi)


def fastdtw(a, b, radius: int = DEFAULT_RADIUS, cost: str = "mismatch") -> DistanceReport:
    """Coarsen, solve, project and refine within ``radius``; an upper bound on exact DTW."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    a, b = _prep(a, b, cost)
    d, _, _ = _fast(0, a, b, None, None, cost, int(radius))
    return DistanceReport(float(d), FAST, int(a.size), int(b.size), cost, int(radius))


def distance_report(orig, obf, method: str = FAST, cost: str = "mismatch",
                    radius: int = DEFAULT_RADIUS) -> DistanceReport:
    """Extract, hash and align the instruction sequences of two modules."""
    a = hash_instructions(extract_instruction_sequence(orig))
    b = hash_instructions(extract_instruction_sequence(obf))
    if method == EXACT:
        return dtw(a, b, cost)
    if method == FAST:
        return fastdtw(a, b, radius, cost)
    raise ValueError(f"method must be {EXACT!r} or {FAST!r}")


CSV_FIELDS = ("pair", "len_a", "len_b", "method", "radius", "cost", "distance")


def write_csv(rows, fh):
    """Write (pair id, DistanceReport) rows as CSV."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for pair, r in rows:
        w.writerow((pair, r.len_a, r.len_b, r.method, "" if r.radius is None else r.radius, r.cost,
                    repr(r.distance)))


__all__ = [
    "COSTS", "DEFAULT_RADIUS", "DistanceReport", "EXACT", "FAST", "MAX_CELLS", "MIN_SIZE",
    "distance_report", "dtw", "dtw_path", "fastdtw", "hash_collisions", "hash_instructions",
    "write_csv",
]
