"""Classic distributed MST by fragment merging (Gallager-Humblet-Spira).

Fragments carry a level and a core identity (the packed weight key of
the edge the fragment last merged over); each fragment finds its
minimum-weight outgoing edge by testing basic edges in weight order and
converging reports to the core.  A lower-level fragment connecting to a
higher-level one is absorbed; two fragments of equal level connecting
over the same edge merge and bump the level.  Every node wakes
simultaneously and immediately connects over its lightest edge.

Messages are sent across every tested edge, so the cost is proportional
to the component's edge count - acceptable only where components are
known to be sparse.  The forest stage runs this protocol on low-degree
nodes alone and relies on silence elsewhere, so handlers tolerate
neighbors that never answer: a test against a silent node simply stalls
the fragment, which a concurrently expanding star fragment later
absorbs.

The module is usable standalone (`run_ghs`) on graphs whose components
should be solved exactly; there it must run over all nodes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .graph import Graph, edge_name, pack_weight_key, split_edge_name
from .simnet import Metrics, Simulator, derive_seed, make_policy

__all__ = [
    "GhsState",
    "GhsNode",
    "GhsResult",
    "run_ghs",
]

BASIC, BRANCH, REJECTED = 0, 1, 2
FOUND, FIND = 0, 1

GHS_KINDS = frozenset({
    "GhsConnect", "GhsInitiate", "GhsTest", "GhsAccept", "GhsReject",
    "GhsReport", "GhsChangeRoot",
})


class GhsState:
    """Per-node protocol state; embeddable behind any message handler.

    The owner wires in a `send(dst, kind, **payload)` callable per call.
    Deferred messages (a Connect racing ahead of the local level, a Test
    from a higher-level fragment) are retried after every state change,
    mirroring the requeue-at-end discipline of the original algorithm.
    """

    def __init__(self, g: Graph, v: int):
        self.g = g
        self.v = v
        self.level = 0
        self.core = 0
        self.sn = FOUND
        self.se = {e: BASIC for e in g.incident_names(v)}
        self.in_branch: int | None = None
        self.best_edge: int | None = None
        self.best_wt = self._inf()
        self.find_count = 0
        self.test_edge: int | None = None
        self.halted = False
        self.abandoned = False
        self._deferred: list[tuple[int, str, dict]] = []

    # -- helpers -----------------------------------------------------------

    def _inf(self) -> int:
        return 1 << (3 * self.g.b + 1)

    def _wkey(self, e: int) -> int:
        return pack_weight_key(self.g.edge_weight_key(e), self.g.b)

    def _other(self, e: int) -> int:
        lo, hi = split_edge_name(e, self.g.b)
        return hi if lo == self.v else lo

    def _edge(self, src: int) -> int:
        return edge_name(self.v, src, self.g.b)

    def branch_edges(self) -> set[int]:
        return {e for e, s in self.se.items() if s == BRANCH}

    # -- entry points ------------------------------------------------------

    def wakeup(self, send):
        if not self.se:
            self.halted = True  # isolated node: empty tree
            return
        e = min(self.se, key=self._wkey)
        self.se[e] = BRANCH
        send(self._other(e), "GhsConnect", level=0)

    def handle(self, send, src, kind, payload) -> bool:
        if kind not in GHS_KINDS:
            return False
        if self.abandoned or self.halted:
            return True
        self._dispatch(send, src, kind, payload)
        self._drain(send)
        return True

    def _drain(self, send):
        progress = True
        while progress and not (self.abandoned or self.halted):
            progress = False
            pending, self._deferred = self._deferred, []
            for src, kind, payload in pending:
                if self._ready(src, kind, payload):
                    self._dispatch(send, src, kind, payload)
                    progress = True
                else:
                    self._deferred.append((src, kind, payload))

    def _ready(self, src, kind, payload) -> bool:
        if kind == "GhsConnect":
            return (payload["level"] < self.level
                    or self.se[self._edge(src)] != BASIC)
        if kind == "GhsTest":
            return payload["level"] <= self.level
        if kind == "GhsReport":
            if payload["level"] != self.level:
                return payload["level"] < self.level  # stale: drop on dispatch
            return self._edge(src) != self.in_branch or self.sn != FIND
        return True

    # -- message handling --------------------------------------------------

    def _dispatch(self, send, src, kind, payload):
        if kind == "GhsConnect":
            self._on_connect(send, src, payload["level"])
        elif kind == "GhsInitiate":
            self._on_initiate(send, src, payload["level"], payload["core"],
                              payload["state"])
        elif kind == "GhsTest":
            self._on_test(send, src, payload["level"], payload["core"])
        elif kind == "GhsAccept":
            self._on_accept(send, src)
        elif kind == "GhsReject":
            self._on_reject(send, src)
        elif kind == "GhsReport":
            wt = self._inf() if payload["none"] else payload["wkey"]
            self._on_report(send, src, payload["level"], wt)
        elif kind == "GhsChangeRoot":
            self._change_root(send)

    def _on_connect(self, send, src, lvl):
        e = self._edge(src)
        if lvl < self.level:
            if self.se[e] == BRANCH:
                # mutual Connect on the merge edge, overtaken by the
                # peer's merge reply: the peer is still waiting for our
                # side of the Initiate handshake, not for an absorb
                send(src, "GhsInitiate", level=self.level, core=self.core,
                     state=FIND)
                return
            # absorb the lower-level fragment
            self.se[e] = BRANCH
            send(src, "GhsInitiate", level=self.level, core=self.core,
                 state=self.sn)
            if self.sn == FIND:
                self.find_count += 1
        elif self.se[e] == BASIC:
            self._deferred.append((src, "GhsConnect", {"level": lvl}))
        else:
            # both ends connected over e: merge, e becomes the new core
            send(src, "GhsInitiate", level=self.level + 1,
                 core=self._wkey(e), state=FIND)

    def _on_initiate(self, send, src, lvl, core, state):
        if lvl <= self.level:
            # a valid Initiate always raises the level (absorb comes from
            # a strictly higher-level fragment, a merge bumps the level);
            # anything else is a reordered leftover
            return
        self.level = lvl
        self.core = core
        self.sn = state
        self.in_branch = self._edge(src)
        self.best_edge = None
        self.best_wt = self._inf()
        self.find_count = 0
        for e, s in self.se.items():
            if s == BRANCH and e != self.in_branch:
                send(self._other(e), "GhsInitiate", level=lvl, core=core,
                     state=state)
                if state == FIND:
                    self.find_count += 1
        if state == FIND:
            self._test(send)

    def _test(self, send):
        basics = [e for e, s in self.se.items() if s == BASIC]
        if basics:
            self.test_edge = min(basics, key=self._wkey)
            send(self._other(self.test_edge), "GhsTest", level=self.level,
                 core=self.core)
        else:
            self.test_edge = None
            self._report(send)

    def _on_test(self, send, src, lvl, core):
        if lvl > self.level:
            self._deferred.append((src, "GhsTest",
                                   {"level": lvl, "core": core}))
            return
        e = self._edge(src)
        if core != self.core:
            send(src, "GhsAccept")
            return
        if self.se[e] == BASIC:
            self.se[e] = REJECTED
        if self.test_edge != e:
            send(src, "GhsReject")
        else:
            self._test(send)

    def _on_accept(self, send, src):
        e = self._edge(src)
        self.test_edge = None
        if self._wkey(e) < self.best_wt:
            self.best_wt = self._wkey(e)
            self.best_edge = e
        self._report(send)

    def _on_reject(self, send, src):
        e = self._edge(src)
        if self.se[e] == BASIC:
            self.se[e] = REJECTED
        self._test(send)

    def _report(self, send):
        if self.find_count == 0 and self.test_edge is None:
            self.sn = FOUND
            none = self.best_wt >= self._inf()
            send(self._other(self.in_branch), "GhsReport", level=self.level,
                 wkey=0 if none else self.best_wt, none=int(none))

    def _on_report(self, send, src, lvl, wt):
        if lvl < self.level:
            return  # report for a find the fragment has moved past
        if lvl > self.level or (self._edge(src) == self.in_branch
                                and self.sn == FIND):
            self._deferred.append((src, "GhsReport",
                                   {"level": lvl, "wkey": wt,
                                    "none": wt >= self._inf()}))
            return
        e = self._edge(src)
        if e != self.in_branch:
            self.find_count -= 1
            if wt < self.best_wt:
                self.best_wt = wt
                self.best_edge = e
            self._report(send)
        elif wt > self.best_wt:
            self._change_root(send)
        elif wt >= self._inf() and self.best_wt >= self._inf():
            self.halted = True

    def _change_root(self, send):
        if self.se[self.best_edge] == BRANCH:
            send(self._other(self.best_edge), "GhsChangeRoot")
        else:
            send(self._other(self.best_edge), "GhsConnect", level=self.level)
            self.se[self.best_edge] = BRANCH


class GhsNode:
    """Standalone simulator handler running GhsState at every node.

    The protocol has no termination broadcast - only the two core nodes
    learn the fragment is finished - so quiescence is the normal end
    state and every handler counts as terminal.  Callers validate the
    collected branch edges instead.
    """

    terminal = True

    def __init__(self, g: Graph, v: int):
        self.state = GhsState(g, v)

    def start(self, ctx):
        self.state.wakeup(ctx.send)

    def receive(self, ctx, src, kind, payload):
        self.state.handle(ctx.send, src, kind, payload)


@dataclass
class GhsResult:
    edges: set
    metrics: Metrics


def run_ghs(g: Graph, seed: int = 0, policy="uniform-random",
            policy_params: dict | None = None,
            event_cap: int | None = None) -> GhsResult:
    """Run the protocol over all nodes; returns the spanning forest."""
    if isinstance(policy, str):
        policy = make_policy(policy, seed=derive_seed(seed, "policy"),
                             **(policy_params or {}))
    handlers = {v: GhsNode(g, v) for v in g.nodes}
    sim = Simulator(g, handlers, policy, event_cap=event_cap)
    metrics = sim.run()
    edges = set()
    for h in handlers.values():
        edges |= h.state.branch_edges()
    return GhsResult(edges=edges, metrics=metrics)
