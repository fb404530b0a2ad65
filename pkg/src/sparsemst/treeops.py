"""Fragment-tree sub-protocols: broadcast/convergecast rounds and the
leader procedures built from them (FindAny, FindMin, ApproxCut,
ThresholdDetection).

A fragment is a rooted tree of graph nodes.  The leader runs procedures
written as generators that yield :class:`RoundCmd` objects; a driver
(the owning protocol node) executes each command by starting a
broadcast/convergecast round and resumes the generator with the
aggregated result.  Members are purely reactive: every round is a
broadcast down the tree followed by an exact convergecast (each node
waits for all children plus its own contribution), so when the leader
holds a result, no message of that round is still in flight.  That
flush property is what lets round IDs be small wrapping tags instead of
unbounded counters.

Round types:

* ``hash``   -- distribute a hash function (and optional weight cap) in
               parts; aggregate XOR of per-node parity vectors.
* ``probe``  -- distribute a PRNG seed (and optional weight cap); every
               node expands the seed into a family of PROBE_R hashes
               and the round aggregates all PROBE_R parity vectors at
               once, convergecast as fixed-size chunks.
* ``index``  -- distribute a bit index and a family position; aggregate
               XOR of eligible edge names hashing below ``2^index``.
* ``verify`` -- distribute a candidate edge name; aggregate how many
               fragment nodes own it, the weight key, and whether the
               external endpoint is low-degree (learned over the edge).
* ``commit`` -- like verify but the owning endpoint records the edge:
               it is excluded from later sketches and, when ``mark`` is
               set, reported to the protocol via ``on_found``.

ThresholdDetection is not a round: SendTrigger fans out once and
Trigger messages trickle up whenever local coin flips fire.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import codec
from .graph import edge_name, is_low_degree, pack_weight_key, split_edge_name
from .hashing import HashFn, field_exponent, output_bits, sample_family, sample_hash
from .sketch import approx_cut_estimate, lowest_set_index, parity_vector

__all__ = [
    "PENDING",
    "RoundCmd",
    "ThresholdCmd",
    "FindOutcome",
    "TreeOps",
    "LeaderDriver",
    "find_any",
    "find_min",
    "approx_cut",
    "trigger_probability",
    "trigger_quota",
    "coin_process",
    "max_weight_cap",
]

PENDING = object()  # sentinel: command outcome will arrive asynchronously


@dataclass
class RoundCmd:
    rtype: str
    params: dict


@dataclass
class ThresholdCmd:
    r: int
    phase: int


@dataclass(frozen=True)
class FindOutcome:
    """Result of one FindAny attempt."""

    edge: int | None
    low_degree: bool = False
    wkey: int = 0  # packed weight key of the edge, when found
    zero_vector: bool = False


def max_weight_cap(n: int, c: int) -> int:
    """All-ones sentinel: no real packed weight key reaches it."""
    return (1 << codec.weight_key_bits(n, c)) - 1


def trigger_probability(n: int, c: int, r: int) -> float:
    L = math.ceil(math.log2(n))
    return min(c * L / max(r, 1), 1.0)


def trigger_quota(n: int, c: int) -> int:
    L = math.ceil(math.log2(n))
    return math.ceil(c * L / 2)


def coin_process(rng: random.Random, events: int, r: int, n: int, c: int):
    """Pure model of ThresholdDetection's counting process.

    Returns the 1-based event index at which the leader triggers, or
    None if the quota is never reached within `events` events.
    """
    p = trigger_probability(n, c, r)
    quota = trigger_quota(n, c)
    heads = 0
    for i in range(1, events + 1):
        if rng.random() < p:
            heads += 1
            if heads >= quota:
                return i
    return None


class _Round:
    __slots__ = ("rid", "rtype", "params", "parts", "last_part", "need",
                 "have", "acc", "awaiting_deg", "mark", "up", "fid")

    def __init__(self, rid, rtype, need, up=None, fid=0):
        self.rid = rid
        self.rtype = rtype
        self.params = None
        self.parts = {}
        self.last_part = None
        self.need = need
        self.have = 0
        self.acc = None
        self.awaiting_deg = None  # neighbor id we asked about
        self.mark = False
        # snapshots at round start: merges may re-root the tree and
        # change the fragment identity mid-round, but the convergecast
        # must finish under the topology and identity it was opened with
        self.up = up
        self.fid = fid


_UP_KIND = {"hash": "VecUp", "probe": "ProbeUp", "index": "NameUp",
            "verify": "VerifyUp", "commit": "VerifyUp"}


class TreeOps:
    """Per-node round engine over the current fragment tree.

    The owning protocol keeps ``parent``/``children``/``fid``/``phase``
    up to date; rounds never run concurrently with tree changes (the
    leader serializes sub-protocols).
    """

    def __init__(self, g, v: int, rng: random.Random):
        self.g = g
        self.v = v
        self.rng = rng
        self.n, self.c = g.n, g.c
        self.L = math.ceil(math.log2(self.n))
        self.parent: int | None = None
        self.children: list[int] = []
        self.fid = v
        self.phase = 0
        self.excluded: set[int] = set()
        self.deg_cache: dict[int, bool] = {}  # neighbor -> is low-degree
        self.on_result = None          # leader: round/threshold completion
        self.on_found = None           # commit marking: (edge, low_degree)
        self.on_send_trigger = None    # member: (ctx, r, phase)
        self.on_round_close = None     # member: local round fully drained
        self._rid = 0
        # open rounds keyed by (fid, rid).  Usually at most one: rounds
        # of a single fragment are serialized.  A second entry appears
        # when this node is merged into another fragment mid-round: the
        # old fragment's in-flight commit keeps draining under its own
        # tag while the new fragment's rounds proceed.
        self._rounds: dict[tuple[int, int], _Round] = {}
        self._family: list[HashFn] = []  # hashes of the last hash/probe round
        self._cap = max_weight_cap(self.n, self.c)
        self._caps: list[int] = [self._cap]  # per-family-slot weight caps
        self._in_lead = False
        self._lead_value = PENDING
        self._trig_phase = -1
        self._trig_count = 0
        # cumulative accounting (read by the global inspector): triggers
        # this node originated vs. triggers that reached it as leader
        self.trig_emitted = 0
        self.trig_received = 0
        self._names = sorted(g.incident_names(v))
        self._k = field_exponent(output_bits(self.n, self.c))

    # -- helpers -----------------------------------------------------------

    def _tree_edges(self) -> set[int]:
        """Names of this node's current fragment-tree links.

        These are filtered out of sketches on *both* sides: a committed
        connect edge is excluded only at its owner, and without the
        symmetric filter the surviving endpoint would re-surface the
        edge as outgoing after the merge makes it internal.
        """
        b = self.g.b
        out = {edge_name(self.v, ch, b) for ch in self.children}
        if self.parent is not None:
            out.add(edge_name(self.v, self.parent, b))
        return out

    def _eligible(self, cap: int) -> list[int]:
        ex = self.excluded
        tree = self._tree_edges()
        g = self.g
        return [e for e in self._names
                if e not in ex and e not in tree
                and pack_weight_key(g.edge_weight_key(e), g.b) < cap]

    def _other_end(self, edge: int) -> int:
        lo, hi = split_edge_name(edge, self.g.b)
        return hi if lo == self.v else lo

    def clear_phase_marks(self):
        """Drop per-phase sketch exclusions (called at expansion)."""
        self.excluded.clear()

    @property
    def round_open(self) -> bool:
        return bool(self._rounds)

    # -- leader side -------------------------------------------------------

    def lead_round(self, ctx, rtype: str, params: dict):
        """Start a round as fragment leader.

        Returns the aggregate synchronously if it completed during the
        call (single-node fragments, cached degree), else PENDING and
        ``on_result`` fires later.
        """
        assert self.parent is None
        self._rid = (self._rid + 1) % (1 << (3 * self.L))
        r = _Round(self._rid, rtype,
                   self._need(rtype, len(self.children) + 1), fid=self.fid)
        r.params = params
        r.mark = bool(params.get("mark"))
        assert (r.fid, r.rid) not in self._rounds
        self._rounds[(r.fid, r.rid)] = r
        self._in_lead = True
        self._lead_value = PENDING
        for msg in self._wire_messages(rtype, params):
            for ch in self.children:
                ctx.send(ch, msg[0], **msg[1])
        self._apply_params(ctx, r)
        self._in_lead = False
        return self._lead_value

    def _need(self, rtype, contributors: int) -> int:
        """Completion target in contribution units.

        Probe convergecasts travel as fixed-size chunks, so each
        contributor is worth `probe_parts` units; everything else is a
        single message per contributor.
        """
        if rtype == "probe":
            return contributors * codec.probe_parts(self.n, self.c)
        return contributors

    def _wire_messages(self, rtype, params):
        base = {"fid": self.fid, "rid": self._rid}
        if rtype == "hash":
            h: HashFn = params["h"]
            cap = params.get("cap")
            parts = []
            if codec.hash_packed(self.n, self.c):
                parts.append((h.a << self._k) | h.b)
            else:
                parts.append(h.a)
                parts.append(h.b)
            if cap is not None:
                parts.append(cap)
            out = []
            for i, val in enumerate(parts):
                last = 1 if i == len(parts) - 1 else 0
                out.append(("HashBcast",
                            dict(base, part=(i << 1) | last, value=val)))
            return out
        if rtype == "probe":
            parts = [params["seed"]]
            if params.get("cap") is not None:
                parts.append(params["cap"])
            grid = 1 if params.get("grid") else 0
            out = []
            for i, val in enumerate(parts):
                last = 1 if i == len(parts) - 1 else 0
                out.append(("ProbeBcast",
                            dict(base, part=(i << 1) | last, grid=grid,
                                 value=val)))
            return out
        if rtype == "index":
            return [("IndexBcast",
                     dict(base, index=params["index"],
                          fi=params.get("fi", 0)))]
        if rtype in ("verify", "commit"):
            return [("VerifyBcast",
                     dict(base, edge=params["edge"],
                          commit=1 if rtype == "commit" else 0,
                          mark=1 if params.get("mark") else 0))]
        raise ValueError(f"unknown round type {rtype!r}")

    def start_threshold(self, ctx, r: int, phase: int):
        """Leader: broadcast SendTrigger and start counting Triggers."""
        self._trig_phase = phase
        self._trig_count = 0
        for ch in self.children:
            ctx.send(ch, "SendTrigger", fid=self.fid, rid=0, r=r, phase=phase)

    def emit_trigger(self, ctx, phase: int):
        """Report one heads coin flip toward the leader."""
        self.trig_emitted += 1
        if self.parent is None:
            self._leader_trigger(phase)
        else:
            ctx.send(self.parent, "Trigger", fid=self.fid, rid=0, phase=phase)

    def _leader_trigger(self, phase):
        self.trig_received += 1
        if phase != self._trig_phase:
            return
        self._trig_count += 1
        if self._trig_count == trigger_quota(self.n, self.c):
            self._trig_phase = -1
            self.on_result(("threshold", phase))

    # -- member side / shared round machinery ------------------------------

    def handle(self, ctx, src: int, kind: str, payload: dict) -> bool:
        """Process one treeops message; False if the kind is not ours."""
        if kind == "DegQuery":
            ctx.send(src, "DegReply", fid=payload["fid"], rid=payload["rid"],
                     low_degree=1 if is_low_degree(self.g.degree(self.v), self.n) else 0)
            return True
        if kind == "DegReply":
            self.deg_cache[src] = bool(payload["low_degree"])
            for r in list(self._rounds.values()):
                if r.awaiting_deg == src:
                    r.awaiting_deg = None
                    self._contribute(ctx, r, self._verify_value(r))
            return True
        # Round broadcasts are not filtered by current fragment identity:
        # tree links are always intra-fragment, but an identity update can
        # overtake an in-flight broadcast of the round that triggered the
        # merge, so the round's own fid snapshot is authoritative.
        if kind == "HashBcast":
            r = self._open(payload["rid"], "hash", src, payload["fid"])
            idx, last = payload["part"] >> 1, payload["part"] & 1
            if idx in r.parts:
                return True  # duplicate delivery
            self._forward(ctx, "HashBcast", payload, skip=src)
            r.parts[idx] = payload["value"]
            if last:
                r.last_part = idx
            if r.last_part is not None and len(r.parts) == r.last_part + 1:
                r.params = self._decode_hash(r)
                self._apply_params(ctx, r)
            return True
        if kind == "ProbeBcast":
            r = self._open(payload["rid"], "probe", src, payload["fid"])
            idx, last = payload["part"] >> 1, payload["part"] & 1
            if idx in r.parts:
                return True  # duplicate delivery
            self._forward(ctx, "ProbeBcast", payload, skip=src)
            r.parts[idx] = payload["value"]
            if last:
                r.last_part = idx
            if r.last_part is not None and len(r.parts) == r.last_part + 1:
                r.params = {"seed": r.parts[0], "cap": r.parts.get(1),
                            "grid": bool(payload["grid"])}
                self._apply_params(ctx, r)
            return True
        if kind == "IndexBcast":
            r = self._open(payload["rid"], "index", src, payload["fid"])
            if r.params is not None:
                return True
            self._forward(ctx, "IndexBcast", payload, skip=src)
            r.params = {"index": payload["index"], "fi": payload["fi"]}
            self._apply_params(ctx, r)
            return True
        if kind == "VerifyBcast":
            rtype = "commit" if payload["commit"] else "verify"
            r = self._open(payload["rid"], rtype, src, payload["fid"])
            if r.params is not None:
                return True
            self._forward(ctx, "VerifyBcast", payload, skip=src)
            r.mark = bool(payload["mark"])
            r.params = {"edge": payload["edge"]}
            self._apply_params(ctx, r)
            return True
        if kind in ("VecUp", "ProbeUp", "NameUp", "VerifyUp"):
            r = self._rounds.get((payload["fid"], payload["rid"]))
            if r is None:
                return True  # stale tag from an already-drained round
            self._merge_up(r, kind, payload)
            r.have += 1
            self._maybe_finish(ctx, r)
            return True
        if kind == "SendTrigger":
            if payload["fid"] != self.fid:
                return True
            for ch in self.children:
                ctx.send(ch, "SendTrigger", **payload)
            if self.on_send_trigger is not None:
                self.on_send_trigger(ctx, payload["r"], payload["phase"])
            return True
        if kind == "Trigger":
            ph = payload["phase"]
            if self.parent is None:
                self._leader_trigger(ph)
            elif ph == self.phase:
                ctx.send(self.parent, "Trigger", **payload)
            return True
        return False

    def _open(self, rid, rtype, src, fid) -> _Round:
        r = self._rounds.get((fid, rid))
        if r is not None:
            return r
        # the reply goes to whoever broadcast to us; a merge may have
        # re-rooted the tree since, so src can differ from the parent
        need = self._need(rtype, sum(1 for ch in self.children if ch != src) + 1)
        r = _Round(rid, rtype, need, up=src, fid=fid)
        self._rounds[(fid, rid)] = r
        return r

    def _forward(self, ctx, kind, payload, skip=None):
        for ch in self.children:
            if ch != skip:
                ctx.send(ch, kind, **payload)

    def _decode_hash(self, r: _Round) -> dict:
        k = self._k
        if codec.hash_packed(self.n, self.c):
            a = r.parts[0] >> k
            b = r.parts[0] & ((1 << k) - 1)
            cap_idx = 1
        else:
            a, b = r.parts[0], r.parts[1]
            cap_idx = 2
        l = min(output_bits(self.n, self.c), k - 1)
        cap = r.parts.get(cap_idx)
        return {"h": HashFn(a=a, b=b, k=k, l=l), "cap": cap}

    def _apply_params(self, ctx, r: _Round):
        """Compute this node's contribution once parameters are known."""
        rtype = r.rtype
        if rtype == "hash":
            h = r.params["h"]
            cap = r.params.get("cap")
            self._family = [h]
            self._cap = cap if cap is not None else max_weight_cap(self.n, self.c)
            self._caps = [self._cap]
            vec = parity_vector(h, self._eligible(self._cap))
            self._contribute(ctx, r, vec)
        elif rtype == "probe":
            cap = r.params.get("cap")
            grid = r.params.get("grid", False)
            self._family = sample_family(r.params["seed"], codec.PROBE_R,
                                         self.n, self.c)
            capv = cap if cap is not None else max_weight_cap(self.n, self.c)
            self._cap = capv
            # grid rounds probe geometrically shrinking sub-caps: slot i
            # sees only edges with packed key below cap >> i
            self._caps = [capv >> i if grid else capv
                          for i in range(codec.PROBE_R)]
            pairs = [(e, pack_weight_key(self.g.edge_weight_key(e), self.g.b))
                     for e in self._eligible(capv)]
            stride = output_bits(self.n, self.c) + 1
            wide = 0
            for i, h in enumerate(self._family):
                ci = self._caps[i]
                elig = [e for e, w in pairs if w < ci]
                wide |= parity_vector(h, elig) << (i * stride)
            self._contribute(ctx, r, wide)
        elif rtype == "index":
            fi = r.params.get("fi", 0)
            if fi >= len(self._family) or fi >= len(self._caps):
                # no preceding hash/probe round seen here (stale state
                # after a tree change); a zero contribution only makes
                # the recovery fail, which the verify round tolerates
                self._contribute(ctx, r, 0)
                return
            bound = 1 << r.params["index"]
            acc = 0
            h = self._family[fi]
            for e in self._eligible(self._caps[fi]):
                if h(e) < bound:
                    acc ^= e
            self._contribute(ctx, r, acc)
        elif rtype == "verify":
            edge = r.params["edge"]
            if (edge not in self.g.edges() or self.v not in
                    split_edge_name(edge, self.g.b)):
                self._contribute(ctx, r, (0, False, 0))
                return
            if edge in self.excluded or edge in self._tree_edges() or not (
                    pack_weight_key(self.g.edge_weight_key(edge), self.g.b)
                    < self._cap):
                self._contribute(ctx, r, (0, False, 0))
                return
            other = self._other_end(edge)
            if other not in self.deg_cache:
                r.awaiting_deg = other
                ctx.send(other, "DegQuery", fid=r.fid, rid=r.rid)
                return
            self._contribute(ctx, r, self._verify_value(r))
        elif rtype == "commit":
            edge = r.params["edge"]
            lo_hi = split_edge_name(edge, self.g.b)
            if self.v in lo_hi and edge in self.g.edges():
                self.excluded.add(edge)
                if r.mark and self.on_found is not None:
                    self.on_found(edge, self.deg_cache.get(self._other_end(edge), True))
            self._contribute(ctx, r, (0, False, 0))

    def _verify_value(self, r: _Round):
        edge = r.params["edge"]
        wkey = pack_weight_key(self.g.edge_weight_key(edge), self.g.b)
        return (1, self.deg_cache[self._other_end(edge)], wkey)

    def _contribute(self, ctx, r: _Round, value):
        if r.acc is None:
            r.acc = value
        else:
            r.acc = self._merge(r.rtype, r.acc, value)
        r.have += self._need(r.rtype, 1)
        self._maybe_finish(ctx, r)

    def _merge_up(self, r: _Round, kind, payload):
        if kind == "VecUp":
            val = payload["vector"]
        elif kind == "ProbeUp":
            val = payload["chunk"] << (payload["part"]
                                       * codec.probe_chunk_bits(self.n, self.c))
        elif kind == "NameUp":
            val = payload["names_xor"]
        else:
            val = (payload["count"], bool(payload["low_degree"]), payload["wkey"])
        r.acc = val if r.acc is None else self._merge(r.rtype, r.acc, val)

    @staticmethod
    def _merge(rtype, a, b):
        if rtype in ("hash", "probe", "index"):
            return a ^ b
        ca, la, wa = a
        cb, lb, wb = b
        if ca == 0:
            return b if cb else (0, False, 0)
        if cb == 0:
            return a
        return (min(ca + cb, 3), la or lb, min(wa, wb))

    def _maybe_finish(self, ctx, r: _Round):
        if r.have != r.need or r.awaiting_deg is not None:
            return
        del self._rounds[(r.fid, r.rid)]
        acc = r.acc
        if r.up is None:
            if self._in_lead:
                self._lead_value = acc
            else:
                self.on_result((r.rtype, acc))
            if self.on_round_close is not None:
                self.on_round_close(ctx)
            return
        if r.rtype == "hash":
            ctx.send(r.up, "VecUp", fid=r.fid, rid=r.rid, vector=acc)
        elif r.rtype == "probe":
            cb = codec.probe_chunk_bits(self.n, self.c)
            mask = (1 << cb) - 1
            for i in range(codec.probe_parts(self.n, self.c)):
                ctx.send(r.up, "ProbeUp", fid=r.fid, rid=r.rid, part=i,
                         chunk=(acc >> (i * cb)) & mask)
        elif r.rtype == "index":
            ctx.send(r.up, "NameUp", fid=r.fid, rid=r.rid, names_xor=acc)
        else:
            cnt, low, wkey = acc
            ctx.send(r.up, "VerifyUp", fid=r.fid, rid=r.rid,
                     count=cnt, low_degree=1 if low else 0, wkey=wkey)
        if self.on_round_close is not None:
            self.on_round_close(ctx)


class LeaderDriver:
    """Pumps a leader generator, executing RoundCmds via TreeOps.

    Unknown command objects are delegated to ``on_command`` (protocol
    specific, e.g. expansion); generator completion goes to ``on_done``.
    """

    def __init__(self, ops: TreeOps, gen, on_command=None, on_done=None):
        self.ops = ops
        self.gen = gen
        self.on_command = on_command
        self.on_done = on_done
        ops.on_result = self._on_result
        self._ctx = None

    def start(self, ctx):
        self._ctx = ctx
        self._advance(None, first=True)

    def resume(self, value):
        self._advance(value)

    def _on_result(self, tagged):
        # tagged is (rtype-or-"threshold", value); the generator waits
        # on exactly one command at a time, so just unwrap
        kind, value = tagged
        self._advance(value if kind != "threshold" else value)

    def _advance(self, value, first=False):
        ctx = self._ctx
        while True:
            try:
                cmd = self.gen.send(None if first else value)
            except StopIteration as stop:
                if self.on_done is not None:
                    self.on_done(ctx, stop.value)
                return
            first = False
            if isinstance(cmd, RoundCmd):
                value = self.ops.lead_round(ctx, cmd.rtype, cmd.params)
            elif isinstance(cmd, ThresholdCmd):
                self.ops.start_threshold(ctx, cmd.r, cmd.phase)
                value = PENDING
            else:
                value = self.on_command(ctx, cmd)
            if value is PENDING:
                return


# ---------------------------------------------------------------------------
# leader procedures (generators driven by LeaderDriver)

def _attempt(ops: TreeOps, cap=None, commit=False, mark=False):
    """One FindAny sampling attempt; see FindOutcome."""
    h = sample_hash(ops.rng, ops.n, ops.c)
    vec = yield RoundCmd("hash", {"h": h, "cap": cap})
    if vec == 0:
        return FindOutcome(None, zero_vector=True)
    name = yield RoundCmd("index", {"index": lowest_set_index(vec)})
    if name == 0:
        return FindOutcome(None)
    count, low, wkey = yield RoundCmd("verify", {"edge": name})
    if count != 1:
        return FindOutcome(None)
    if commit:
        yield RoundCmd("commit", {"edge": name, "mark": mark})
    return FindOutcome(name, low_degree=low, wkey=wkey)


def find_any(ops: TreeOps, cap=None, commit=True, mark=True, retries=1):
    """Sample an outgoing edge; retries re-draws the hash on failure."""
    out = FindOutcome(None)
    for _ in range(max(1, retries)):
        out = yield from _attempt(ops, cap=cap, commit=commit, mark=mark)
        if out.edge is not None:
            return out
    return out


def find_min(ops: TreeOps):
    """Minimum-weight outgoing edge via geometric-grid probe descent.

    Each probe round evaluates a family of PROBE_R independent hashes
    in one broadcast/convergecast.  Grid rounds give slot i the weight
    cap ``cap >> i``: packed weight keys are near-uniform, so the
    deepest slot with a non-zero parity vector covers an expected O(1)
    edges and its recovered edge (index + verify) lands close to the
    true minimum, cutting the cap by roughly a factor 2^slot.  A
    descent therefore needs O(1) probe batches rather than one per
    halving of the cut size.

    An all-zero grid batch is ambiguous (deep slots are usually empty),
    so it triggers a certification batch with a fresh family all at the
    full cap.  Per-hash probability of a zero vector against a
    non-empty cut stays under ~0.35 across cut sizes (worst at size 2,
    where the vectors of two edges hashed to the same level cancel), so
    an all-zero certification batch mis-certifies with probability at
    most ~0.35^16 ~ 5e-8; only then is the best edge seen declared the
    minimum.  Failed recoveries never certify anything: any non-zero
    vector already witnesses a non-empty cut, so the descent just draws
    a new family.  Returns (edge, packed key) or None when the fragment
    has no outgoing edge at all.
    """
    cap = max_weight_cap(ops.n, ops.c)
    stride = output_bits(ops.n, ops.c) + 1
    mask = (1 << stride) - 1
    seed_bits = min(codec.probe_value_bits(ops.n, ops.c), 64)
    best = None
    while True:
        seed = ops.rng.getrandbits(seed_bits)
        wide = yield RoundCmd("probe", {"seed": seed, "cap": cap, "grid": True})
        vecs = [(wide >> (i * stride)) & mask for i in range(codec.PROBE_R)]
        nz = [i for i, v in enumerate(vecs) if v]
        if nz:
            # deepest non-zero slot first: tightest cap, fewest edges
            order = sorted(nz, reverse=True)
        else:
            seed = ops.rng.getrandbits(seed_bits)
            wide = yield RoundCmd("probe", {"seed": seed, "cap": cap})
            vecs = [(wide >> (i * stride)) & mask
                    for i in range(codec.PROBE_R)]
            order = [i for i, v in enumerate(vecs) if v]
            if not order:
                return best
        for fi in order:
            name = yield RoundCmd("index",
                                  {"index": lowest_set_index(vecs[fi]),
                                   "fi": fi})
            if name == 0:
                continue
            count, _low, wkey = yield RoundCmd("verify", {"edge": name})
            if count == 1 and wkey < cap:
                best = (name, wkey)
                cap = wkey
                break


def approx_cut(ops: TreeOps):
    """Estimate the number of outgoing edges within [k/32, k] w.h.p."""
    l = output_bits(ops.n, ops.c)
    sums = [0] * (l + 1)
    for _ in range(ops.c * ops.L):
        h = sample_hash(ops.rng, ops.n, ops.c)
        vec = yield RoundCmd("hash", {"h": h, "cap": None})
        i = 0
        while vec:
            if vec & 1:
                sums[i] += 1
            vec >>= 1
            i += 1
    return approx_cut_estimate(sums, ops.n, ops.c)
