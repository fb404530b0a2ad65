"""XOR parity sketches over edge names.

A parity vector for a hash h and an edge multiset S has l+1 bits;
bit i is the parity of |{e in S : h(e) < 2^i}| (half-open ranges
throughout, i = 0..l).  XOR of vectors is the vector of the symmetric
difference, so edges internal to a node set cancel and the aggregate
over a tree describes exactly its cut.

Vectors are plain ints used as bitmasks; bit i of the int is vector
index i.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .hashing import HashFn, output_bits, sample_hash

__all__ = [
    "parity_vector",
    "name_xor_in_range",
    "lowest_set_index",
    "vector_bits",
    "sample_once",
    "approx_cut_estimate",
    "approx_cut_threshold",
]


def parity_vector(h: HashFn, names) -> int:
    """(l+1)-bit parity vector of the given edge names under h."""
    arr = np.asarray(list(names) if not isinstance(names, np.ndarray) else names, dtype=np.uint64)
    if arr.size == 0:
        return 0
    hv = h.apply(arr)
    # h contributes to bit i iff h < 2^i, i.e. for all i >= bit_length(h)
    bl = np.zeros(arr.shape, dtype=np.int64)
    nz = hv > 0
    bl[nz] = np.floor(np.log2(hv[nz].astype(np.float64))).astype(np.int64) + 1
    # float log2 can round across a power of two; fix both directions exactly
    over = nz & (hv < np.left_shift(np.uint64(1), np.maximum(bl - 1, 0).astype(np.uint64)))
    bl[over] -= 1
    under = hv >= np.left_shift(np.uint64(1), np.minimum(bl, 63).astype(np.uint64))
    bl[under] += 1
    counts = np.bincount(bl, minlength=h.l + 1)
    # bit i = parity of sum of counts[0..i]
    running = np.cumsum(counts[: h.l + 1]) & 1
    mask = 0
    for i in np.nonzero(running)[0]:
        mask |= 1 << int(i)
    return mask


def name_xor_in_range(h: HashFn, names, bound_index: int) -> int:
    """XOR of names whose hash lands in [0, 2^bound_index)."""
    arr = np.asarray(list(names) if not isinstance(names, np.ndarray) else names, dtype=np.uint64)
    if arr.size == 0:
        return 0
    hv = h.apply(arr)
    sel = arr[hv < np.uint64(1 << bound_index)]
    if sel.size == 0:
        return 0
    return int(np.bitwise_xor.reduce(sel))


def lowest_set_index(mask: int) -> int | None:
    if mask == 0:
        return None
    return (mask & -mask).bit_length() - 1


def vector_bits(n: int, c: int) -> int:
    """Serialized size of one parity vector: l + 1 bits."""
    return output_bits(n, c) + 1


@dataclass(frozen=True)
class SampleOutcome:
    """Result of one hash draw against a cut."""

    edge: int | None  # recovered and verified edge name
    zero_vector: bool  # aggregate vector was all-zero


def sample_once(rng: random.Random, cut_names, n: int, c: int,
                verify=None) -> SampleOutcome:
    """One FindAny-style sampling round over a known cut (pure form).

    Draws a hash, builds the aggregate vector (internal edges cancel,
    so only the cut matters), picks the lowest set index, XORs names in
    that range, and accepts the candidate iff `verify` does (default:
    membership in the cut).  Mirrors the decision logic the protocol
    leader runs on convergecast results.
    """
    cut = list(cut_names)
    h = sample_hash(rng, n, c)
    vec = parity_vector(h, cut)
    if vec == 0:
        return SampleOutcome(edge=None, zero_vector=True)
    i = lowest_set_index(vec)
    cand = name_xor_in_range(h, cut, i)
    ok = verify(cand) if verify is not None else cand in set(cut)
    return SampleOutcome(edge=cand if ok else None, zero_vector=False)


def approx_cut_threshold(n: int, c: int) -> float:
    """Index acceptance threshold (3/2) * c * log2(n) / 16.

    With c * log n hash draws, the expected hit count at the index whose
    range captures ~1/16 of the cut is c * log n / 16; requiring 3/2 of
    that keeps smaller indices (whose acceptance would overestimate the
    cut) below threshold except with vanishing probability, while the
    target index still clears it comfortably.
    """
    return 1.5 * c * math.log2(max(n, 2)) / 16.0


def approx_cut_estimate(index_sums, n: int, c: int) -> int:
    """Estimate from per-index counts X_i over c*log n hash draws.

    min is the smallest i with X_i >= (3/2) c log n / 16; the estimate
    is 2^(l - min) / 64, or 0 when no index reaches the threshold.
    """
    l = output_bits(n, c)
    thr = approx_cut_threshold(n, c)
    for i in range(l + 1):
        if index_sums[i] >= thr:
            return (1 << (l - i)) // 64
    return 0
