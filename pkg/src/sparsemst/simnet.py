"""Deterministic discrete-event simulator for asynchronous message passing.

Nodes exchange messages only with graph neighbors; delivery order is
controlled by a pluggable delay policy drawing from a seeded RNG, so a
run is a pure function of (graph, handlers, policy, seeds).  Virtual
time exists only to order deliveries and is never exposed to handlers.

Handlers implement three things: ``start(ctx)`` (wake-up actions, run
for every node before any delivery), ``receive(ctx, src, kind,
payload)``, and a ``terminal`` property.  ``ctx.send`` is the only way
to affect other nodes.  Quiescence requires an empty queue and all
handlers terminal; an empty queue with non-terminal handlers is a
deadlock, and exceeding the event cap is a livelock -- both raised as
:class:`LivelockError` so callers can map them to one failure class.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from collections import Counter
from dataclasses import dataclass, field

from . import codec
from .graph import Graph, edge_name

__all__ = [
    "derive_seed",
    "DelayPolicy",
    "make_policy",
    "POLICY_NAMES",
    "Metrics",
    "ModelViolationError",
    "CongestViolationError",
    "LivelockError",
    "Simulator",
    "run",
]


def derive_seed(seed: int, *labels) -> int:
    """Stable sub-seed from a master seed and string/int labels."""
    h = hashlib.sha256()
    h.update(str(seed).encode())
    for lab in labels:
        h.update(b"/")
        h.update(str(lab).encode())
    return int.from_bytes(h.digest()[:8], "big")


class ModelViolationError(Exception):
    """A handler sent to a non-neighbor."""


class CongestViolationError(Exception):
    """A message exceeded the CONGEST bit budget."""


class LivelockError(Exception):
    """Event cap exceeded, or queue drained with non-terminal handlers."""


# ---------------------------------------------------------------------------
# delay policies

class DelayPolicy:
    """Maps each send to a virtual delivery delay.

    Subclasses override :meth:`delay`.  The RNG is owned by the policy
    so delay draws are independent of protocol randomness.
    """

    name = "base"

    def __init__(self, seed: int = 0):
        self.rng = random.Random(derive_seed(seed, "delay", self.name))

    def delay(self, src: int, dst: int) -> float:
        raise NotImplementedError


class UniformRandomDelay(DelayPolicy):
    """i.i.d. uniform delays in (0, max]; arbitrary interleavings."""

    name = "uniform-random"

    def __init__(self, seed: int = 0, max_delay: float = 16.0):
        super().__init__(seed)
        self.max_delay = max_delay

    def delay(self, src, dst):
        return self.rng.uniform(0.0, self.max_delay) + 1e-9


class FifoPerEdgeDelay(DelayPolicy):
    """Random per-message delays, but order preserved on each directed edge."""

    name = "fifo-per-edge"

    def __init__(self, seed: int = 0, max_delay: float = 16.0):
        super().__init__(seed)
        self.max_delay = max_delay
        self._last: dict[tuple[int, int], float] = {}

    def delay(self, src, dst):
        d = self.rng.uniform(0.0, self.max_delay) + 1e-9
        # returned value is relative to the send; enforce monotone
        # delivery keys per directed edge via a floor
        return d

    def delivery_time(self, now: float, src: int, dst: int) -> float:
        t = now + self.delay(src, dst)
        floor = self._last.get((src, dst), 0.0)
        t = max(t, floor + 1e-9)
        self._last[(src, dst)] = t
        return t


class ReorderAdversaryDelay(DelayPolicy):
    """Heavy-tailed i.i.d. delays that aggressively scramble edge order."""

    name = "reorder-adversary"

    def __init__(self, seed: int = 0, alpha: float = 1.1, cap: float = 4096.0):
        super().__init__(seed)
        self.alpha = alpha
        self.cap = cap

    def delay(self, src, dst):
        return min(self.rng.paretovariate(self.alpha), self.cap)


class RegionStallDelay(DelayPolicy):
    """Uniform delays, multiplied for messages into a stalled node set."""

    name = "region-stall"

    def __init__(self, seed: int = 0, stalled=(), stall_factor: float = 64.0,
                 max_delay: float = 16.0):
        super().__init__(seed)
        self.stalled = frozenset(stalled)
        self.stall_factor = stall_factor
        self.max_delay = max_delay

    def delay(self, src, dst):
        d = self.rng.uniform(0.0, self.max_delay) + 1e-9
        if dst in self.stalled:
            d *= self.stall_factor
        return d


POLICY_NAMES = ("uniform-random", "fifo-per-edge", "reorder-adversary",
                "region-stall")


def make_policy(name: str, seed: int = 0, **params) -> DelayPolicy:
    """Build a delay policy by name; unknown names raise ValueError."""
    table = {
        "uniform-random": UniformRandomDelay,
        "fifo-per-edge": FifoPerEdgeDelay,
        "reorder-adversary": ReorderAdversaryDelay,
        "region-stall": RegionStallDelay,
    }
    if name not in table:
        raise ValueError(f"unknown delay policy {name!r}")
    return table[name](seed=seed, **params)


# ---------------------------------------------------------------------------
# metrics and the simulator proper

@dataclass
class Metrics:
    """Message accounting for one run.

    ``total`` counts deliveries, which equals sends unless a fault hook
    dropped or duplicated messages; both tallies are kept so tampering
    is visible.
    """

    per_edge: Counter = field(default_factory=Counter)
    per_kind: Counter = field(default_factory=Counter)
    total: int = 0
    sends: int = 0
    dropped: int = 0
    duplicated: int = 0
    max_payload_bits: int = 0
    events: int = 0

    def merge(self, other: "Metrics") -> None:
        """Fold another run's tallies into this one (staged pipelines)."""
        self.per_edge.update(other.per_edge)
        self.per_kind.update(other.per_kind)
        self.total += other.total
        self.sends += other.sends
        self.dropped += other.dropped
        self.duplicated += other.duplicated
        self.max_payload_bits = max(self.max_payload_bits,
                                    other.max_payload_bits)
        self.events += other.events


class _Ctx:
    """Per-node send capability handed to handlers."""

    __slots__ = ("sim", "node_id")

    def __init__(self, sim, node_id):
        self.sim = sim
        self.node_id = node_id

    def send(self, dst: int, kind: str, **payload):
        self.sim._send(self.node_id, dst, kind, payload)


class Simulator:
    """One deterministic run over a graph.

    fault: optional callable(src, dst, kind, payload) -> action in
    {"deliver", "drop", "duplicate"}; used by tests to inject faults
    that the invariant inspector must catch.
    """

    def __init__(self, g: Graph, handlers: dict, policy: DelayPolicy,
                 event_cap: int | None = None, trace: list | None = None,
                 fault=None, check_congest: bool = True):
        if set(handlers) != set(g.nodes):
            raise ValueError("need exactly one handler per node")
        self.g = g
        self.handlers = handlers
        self.policy = policy
        self.event_cap = event_cap if event_cap is not None else 10 * g.n ** 3
        self.trace = trace
        self.fault = fault
        self.check_congest = check_congest
        self.budget = codec.congest_budget(g.n, g.c)
        self._bits = {k: codec.message_bits(k, g.n, g.c) for k in codec.KINDS}
        self.metrics = Metrics()
        self._queue: list = []  # (time, seq, src, dst, kind, payload)
        self._seq = 0
        self._now = 0.0
        self._ctx = {v: _Ctx(self, v) for v in g.nodes}

    def _enqueue(self, src, dst, kind, payload):
        t = (self.policy.delivery_time(self._now, src, dst)
             if isinstance(self.policy, FifoPerEdgeDelay)
             else self._now + self.policy.delay(src, dst))
        heapq.heappush(self._queue, (t, self._seq, src, dst, kind, payload))
        self._seq += 1

    def _send(self, src, dst, kind, payload):
        if not self.g.adjacent(src, dst):
            raise ModelViolationError(f"{src} -> {dst} is not a graph edge")
        bits = self._bits[kind]
        if self.check_congest and bits > self.budget:
            raise CongestViolationError(
                f"{kind}: {bits} bits > budget {self.budget} at n={self.g.n}")
        m = self.metrics
        m.sends += 1
        if bits > m.max_payload_bits:
            m.max_payload_bits = bits
        action = self.fault(src, dst, kind, payload) if self.fault else "deliver"
        if action == "drop":
            m.dropped += 1
            return
        self._enqueue(src, dst, kind, payload)
        if action == "duplicate":
            m.duplicated += 1
            self._enqueue(src, dst, kind, payload)

    def run(self) -> Metrics:
        for v in self.g.nodes:  # all nodes wake simultaneously
            self.handlers[v].start(self._ctx[v])
        m = self.metrics
        while self._queue:
            t, seq, src, dst, kind, payload = heapq.heappop(self._queue)
            self._now = t
            m.events += 1
            if m.events > self.event_cap:
                raise LivelockError(
                    f"event cap {self.event_cap} exceeded (last: "
                    f"{src}->{dst} {kind})")
            m.total += 1
            m.per_edge[edge_name(src, dst, self.g.b)] += 1
            m.per_kind[kind] += 1
            if self.trace is not None:
                self.trace.append(f"{seq} {src} {dst} {kind}")
            self.handlers[dst].receive(self._ctx[dst], src, kind, payload)
        stuck = sorted(v for v, h in self.handlers.items() if not h.terminal)
        if stuck:
            raise LivelockError(
                f"queue drained with non-terminal nodes {stuck[:8]}"
                f"{'...' if len(stuck) > 8 else ''}")
        return m


def run(g: Graph, handlers: dict, policy: DelayPolicy, **kw) -> Metrics:
    """Convenience wrapper: build a Simulator and drain it."""
    return Simulator(g, handlers, policy, **kw).run()
