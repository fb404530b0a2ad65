"""Bit-exact message layouts and the CONGEST size budget.

Every message kind used on the simulated wire is registered here with a
field layout whose widths are functions of (n, c).  The simulator meters
each send against ``congest_budget(n, c)``; tests assert that every
registered kind fits for all supported sizes.

Width conventions, with L = ceil(log2 n) and b = c*L ID bits:

* node / fragment ID: b bits
* edge name: 2b bits (two packed IDs)
* weight key: 2L + 2b bits (base weight in [0, 2^(2L)) plus the edge
  name as a tiebreak, making keys totally ordered and unique)
* full header: kind tag (6) + fragment ID (b) + round ID (3L).  The
  lightweight GHS kinds carry only the kind tag; their fragment
  identity travels in the payload.

Hash coefficients live in a Mersenne field of k bits (see hashing);
because Mersenne exponents are sparse, k can exceed the room left in
one message, so HashBcast is sent in parts (coefficient a, coefficient
b, optional weight cap), each part within budget on its own.

Probe rounds ship a PRNG seed instead of coefficients; members expand
it into PROBE_R hash functions locally and convergecast the XOR of all
PROBE_R parity vectors as a sequence of ProbeUp chunks, each chunk
filling whatever the budget leaves after the header.

n = 2 is rejected for sketch-carrying kinds: with L = 1 the budget is
16c bits and even a split hash coefficient does not fit.
"""

from __future__ import annotations

import math

from .hashing import field_exponent

__all__ = [
    "K_BUDGET",
    "congest_budget",
    "KINDS",
    "layout",
    "message_bits",
    "oversized_kinds",
]

K_BUDGET = 8  # budget = K * c * ceil(log2 n) bits


def congest_budget(n: int, c: int = 2) -> int:
    """Per-message bit budget: K*c*ceil(log2 n)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    return K_BUDGET * c * math.ceil(math.log2(n))


def _L(n: int) -> int:
    return math.ceil(math.log2(n))


# Each entry maps a field name to a width function of (n, c).  Order is
# the serialization order.  "hdr" expands to kind/fid/rid.

_KIND_TAG = 6
_RANK = 6  # ranks and GHS levels are <= log2 n <= 60 < 2^6


def _hdr(n, c):
    L = _L(n)
    return [("kind", _KIND_TAG), ("fid", c * L), ("rid", 3 * L)]


def _wkey(n, c):
    # base weight in [1, n^c] (c*L + 1 bits) plus the edge name tiebreak
    return c * _L(n) + 1 + 2 * c * _L(n)


def _name(n, c):
    return 2 * c * _L(n)


def _coeff(n, c):
    # one hash coefficient: an element of the Mersenne field covering
    # the edge-name domain of 2b bits
    return field_exponent(_name(n, c))


def weight_key_bits(n: int, c: int = 2) -> int:
    """Serialized width of a packed weight key."""
    return _wkey(n, c)


def hash_packed(n: int, c: int = 2) -> bool:
    """True when both hash coefficients fit in a single HashBcast part."""
    hdr = _KIND_TAG + c * _L(n) + 3 * _L(n) + 3
    return hdr + 2 * _coeff(n, c) <= congest_budget(n, c)


def hash_value_bits(n: int, c: int = 2) -> int:
    """Width of the HashBcast value field (coefficients or weight cap)."""
    k = _coeff(n, c)
    per_part = 2 * k if hash_packed(n, c) else k
    return max(per_part, _wkey(n, c))


PROBE_R = 16  # hash functions per batched probe round


def probe_value_bits(n: int, c: int = 2) -> int:
    """Width of the ProbeBcast value field (family seed or weight cap).

    The seed is expanded to PROBE_R hash functions locally, so no
    coefficient travels on the wire; the field is sized to whatever room
    the budget leaves so the seed carries as much entropy as possible.
    """
    hdr = _KIND_TAG + c * _L(n) + 3 * _L(n) + 3
    return max(_wkey(n, c), congest_budget(n, c) - hdr)


def probe_chunk_bits(n: int, c: int = 2) -> int:
    """Payload bits of one ProbeUp part."""
    hdr = _KIND_TAG + c * _L(n) + 3 * _L(n) + 5
    return max(1, congest_budget(n, c) - hdr)


def probe_parts(n: int, c: int = 2) -> int:
    """ProbeUp messages needed to convergecast PROBE_R parity vectors."""
    total = PROBE_R * (2 * c * _L(n) + 1)
    return -(-total // probe_chunk_bits(n, c))


def _layouts(n: int, c: int) -> dict[str, list[tuple[str, int]]]:
    L = _L(n)
    b = c * L
    hdr = _hdr(n, c)
    return {
        # tree sub-protocol rounds (broadcast / convergecast)
        "HashBcast": hdr + [("part", 3), ("value", hash_value_bits(n, c))],
        "VecUp": hdr + [("vector", _name(n, c) + 1)],
        "ProbeBcast": hdr + [("part", 2), ("grid", 1),
                             ("value", probe_value_bits(n, c))],
        "ProbeUp": hdr + [("part", 5), ("chunk", probe_chunk_bits(n, c))],
        "IndexBcast": hdr + [("index", 6), ("fi", 5)],
        "NameUp": hdr + [("names_xor", _name(n, c))],
        "VerifyBcast": hdr + [("edge", _name(n, c)), ("commit", 1), ("mark", 1)],
        "VerifyUp": hdr + [("count", 2), ("low_degree", 1), ("wkey", _wkey(n, c))],
        "SendTrigger": hdr + [("r", 2 * L + 2), ("phase", L + 4)],
        "Trigger": hdr + [("phase", L + 4)],
        # spanning-tree construction
        "Star": hdr,
        "LowDegree": hdr,
        "Expand": hdr + [("phase", L + 4), ("fin", 1)],
        "DoneByAccept": hdr + [("size", L + 1)],
        "DoneByReject": hdr,
        "DegQuery": hdr,
        "DegReply": hdr + [("low_degree", 1)],
        # rank-synchronized MST merging
        "RankRequest": hdr,
        "RankUp": hdr + [("rank", _RANK), ("done", 1)],
        "Proceed": hdr + [("rank", _RANK), ("done", 1)],
        "Connect": hdr + [("rank", _RANK)],
        "Accept": hdr + [("rank", _RANK)],
        "Done": hdr + [("size", L + 1)],
        "IdentityUpdate": hdr + [("new_fid", b), ("new_rank", _RANK)],
        # multi-leader expansion (forest stage)
        "ExpandID": hdr + [("vid", b), ("phase", L + 4)],
        "AcceptID": hdr + [("vid", b)],
        "RejectedLowerID": hdr + [("vid", b)],
        "RejectSameTree": hdr + [("vid", b)],
        "Ack": hdr,
        # classic GHS for small components (fragment identity = core
        # edge weight key, carried in payload; no shared header fields)
        "GhsConnect": [("kind", _KIND_TAG), ("level", _RANK)],
        "GhsInitiate": [("kind", _KIND_TAG), ("level", _RANK),
                        ("core", _wkey(n, c)), ("state", 2)],
        "GhsTest": [("kind", _KIND_TAG), ("level", _RANK), ("core", _wkey(n, c))],
        "GhsAccept": [("kind", _KIND_TAG)],
        "GhsReject": [("kind", _KIND_TAG)],
        "GhsReport": [("kind", _KIND_TAG), ("level", _RANK),
                      ("wkey", _wkey(n, c)), ("none", 1)],
        "GhsChangeRoot": [("kind", _KIND_TAG)],
    }


KINDS = tuple(sorted(_layouts(4, 2)))

# kinds that cannot fit at n = 2 by construction (hash coefficients /
# parity sketches leave no room under a 16c-bit budget)
_SKETCH_KINDS = frozenset({"HashBcast", "VecUp", "ProbeBcast", "ProbeUp"})


def layout(kind: str, n: int, c: int = 2) -> list[tuple[str, int]]:
    """(field, bits) serialization layout for one message kind."""
    table = _layouts(n, c)
    if kind not in table:
        raise KeyError(f"unknown message kind {kind!r}")
    return table[kind]


def message_bits(kind: str, n: int, c: int = 2) -> int:
    """Total serialized size of a message kind at graph size (n, c)."""
    return sum(w for _, w in layout(kind, n, c))


def oversized_kinds(n: int, c: int = 2) -> list[str]:
    """Kinds whose layout exceeds the budget at (n, c); empty for n >= 3."""
    budget = congest_budget(n, c)
    return [k for k in sorted(_layouts(n, c)) if message_bits(k, n, c) > budget]
