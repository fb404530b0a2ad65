"""Pairwise-independent hash family over a Mersenne prime field.

h(x) = ((a*x + b) mod p) mod 2^l with a != 0 and p = 2^k - 1, the
smallest Mersenne prime whose field covers the edge-name domain
(k >= 2b + 1 for b ID bits, so every name is a field element).  The
family is 2-wise independent over the field; truncation to l bits adds
skew at most 2^l / p, which the Monte Carlo margins absorb.

Mersenne moduli keep coefficients within the CONGEST bit budget at
small n and allow exact vectorized reduction for numpy uint64 arrays:
2^k = 1 (mod p), so wide products reduce by shift-and-add folding with
no intermediate exceeding 64 bits.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MERSENNE_EXPONENTS",
    "field_exponent",
    "output_bits",
    "HashFn",
    "sample_hash",
    "sample_family",
]

MERSENNE_EXPONENTS = (2, 3, 5, 7, 13, 17, 19, 31, 61)


def field_exponent(domain_bits: int) -> int:
    """Smallest k with 2^k - 1 prime and > the domain of 2^domain_bits names."""
    for k in MERSENNE_EXPONENTS:
        if k >= domain_bits + 1:
            return k
    raise ValueError(f"edge-name domain of {domain_bits} bits exceeds 2^60")


def output_bits(n: int, c: int) -> int:
    """l = 2c * ceil(log2 n): range bits matching the edge-name width."""
    return 2 * c * (math.ceil(math.log2(n)) if n >= 2 else 1)


def _fold_full(x: np.ndarray, k: int, p: np.uint64) -> np.ndarray:
    """Reduce values < 2^64 mod 2^k - 1."""
    mask = p  # 2^k - 1
    kk = np.uint64(k)
    for _ in range(max(1, -(-64 // k) - 1)):
        x = (x >> kk) + (x & mask)
    x = (x >> kk) + (x & mask)
    return np.where(x >= p, x - p, x)


def _mulmod(a: int, x: np.ndarray, k: int) -> np.ndarray:
    """(a * x) mod 2^k - 1 for uint64 arrays, all values < 2^k."""
    p = np.uint64((1 << k) - 1)
    x = x.astype(np.uint64, copy=False)
    if k <= 31:
        return _fold_full(np.uint64(a) * x, k, p)
    # split both factors at 31 bits; k <= 61 keeps every product < 2^64
    m31 = np.uint64((1 << 31) - 1)
    a_hi, a_lo = np.uint64(a >> 31), np.uint64(a & 0x7FFFFFFF)
    x_hi, x_lo = x >> np.uint64(31), x & m31
    top = _fold_full(a_hi * x_hi, k, p)  # carries weight 2^62
    top = _fold_full(top << np.uint64(62 - k), k, p)  # top < 2^k so this fits
    mid = _fold_full(a_hi * x_lo + a_lo * x_hi, k, p)  # weight 2^31
    m1 = mid >> np.uint64(k - 31)
    m0 = mid & np.uint64((1 << (k - 31)) - 1)
    mid = _fold_full(m1 + (m0 << np.uint64(31)), k, p)
    low = _fold_full(a_lo * x_lo, k, p)
    return _fold_full(top + mid + low, k, p)


@dataclass(frozen=True)
class HashFn:
    """One affine hash over 2^k - 1, truncated to l output bits."""

    a: int
    b: int
    k: int
    l: int

    @property
    def p(self) -> int:
        return (1 << self.k) - 1

    def __call__(self, x: int) -> int:
        return ((self.a * x + self.b) % self.p) & ((1 << self.l) - 1)

    def apply(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on a uint64 array of edge names."""
        k = self.k
        p = np.uint64((1 << k) - 1)
        h = _fold_full(_mulmod(self.a, xs, k) + np.uint64(self.b), k, p)
        return h & np.uint64((1 << self.l) - 1)


def sample_hash(rng: random.Random, n: int, c: int) -> HashFn:
    """Draw one hash for the edge-name domain of an (n, c) graph."""
    l = output_bits(n, c)
    k = field_exponent(l)  # names are 2b = l bits wide
    p = (1 << k) - 1
    a = rng.randrange(1, p)
    b = rng.randrange(0, p)
    return HashFn(a=a, b=b, k=k, l=min(l, k - 1))


def sample_family(seed: int, count: int, n: int, c: int) -> list[HashFn]:
    """Draw `count` independent hash functions, reproducible from seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = random.Random(seed)
    return [sample_hash(rng, n, c) for _ in range(count)]
