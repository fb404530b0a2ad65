"""Minimum spanning tree via rank-synchronized fragment merging.

Every node starts as a singleton fragment (rank 0).  A coordination
tree S (any spanning tree of the graph, typically the one built by
findst) carries a barrier loop run by its root:

1. Proceed(r) floods down S.  Every fragment whose rank is exactly r
   finds its minimum outgoing edge (find_min over the fragment tree)
   and the owning endpoint sends Connect(r) across it.
2. Merging: a fragment of higher rank answers a Connect immediately
   with Accept and the sender's fragment is absorbed, adopting the
   acceptor's identity (fragment ID and rank) via an IdentityUpdate
   flood that re-roots the old tree at the connect owner.  Between
   equal ranks the answer is deferred until the receiver's own rank
   rises -- except when both fragments chose the same edge, where the
   higher-ID endpoint becomes leader of the union at rank r+1.  Unique
   weights guarantee every chain of equal-rank connects contains such
   a mutual pair, so every rank-r fragment merges (or learns it has no
   outgoing edge and is complete) without further coordination.
3. The barrier: every member of a rank-r fragment withholds its
   RankUp reply until its fragment's fate is settled locally, i.e.
   until an IdentityUpdate (rank increase) or a fragment-wide Done
   (no outgoing edge) reaches it.  The root therefore sees the full
   RankUp convergecast only after all rank-r activity has drained,
   and the aggregated (min rank, done) is accurate.  Min rank rises
   every cycle and ranks are bounded by log2 n, so the loop ends in
   at most log2 n + 1 cycles with Proceed(done=1).

The MST is exactly the set of fragment-tree edges at termination.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from . import treeops
from .graph import Graph, edge_name, split_edge_name
from .simnet import Metrics, Simulator, derive_seed, make_policy
from .treeops import LeaderDriver, RoundCmd, TreeOps

__all__ = [
    "FindMSTNode",
    "MSTResult",
    "run_findmst",
]


@dataclass
class MSTResult:
    root: int
    edges: set            # edge names of the minimum spanning tree
    cycles: int           # barrier iterations run by the root
    metrics: Metrics


class FindMSTNode:
    """Handler for one node: fragment member plus barrier participant."""

    def __init__(self, g: Graph, v: int, sync_parent: int | None,
                 sync_children: list[int], seed: int):
        self.g = g
        self.v = v
        self.rng = random.Random(derive_seed(seed, "mst", v))
        self.ops = TreeOps(g, v, self.rng)
        self.ops.on_found = self._on_found
        self.ops.on_round_close = self._release_hold
        self.fid = v
        self.rank = 0
        self.complete = False      # fragment has no outgoing edge
        self.sync_parent = sync_parent
        self.sync_children = sync_children
        self.cycles = 0
        self.terminal_flag = False
        self.ctx = None
        self.driver = None
        self._pending_connect: int | None = None   # neighbor we connected to
        self._deferred: list[tuple[int, int]] = []  # (src, their rank)
        self._hold = False
        self._settled = True   # this cycle's fragment fate is known here
        # one barrier wave at a time (the loop is fully serialized)
        self._wave = None  # dict(rid, need, have, acc, contributed)
        # root only: called at each barrier cycle start, when all of the
        # previous cycle's activity has provably drained (inspector hook)
        self.on_cycle = None

    # -- simulator interface ----------------------------------------------

    @property
    def terminal(self):
        return self.terminal_flag

    def start(self, ctx):
        self.ctx = ctx
        if self.sync_parent is None:
            self._begin_wave(ctx, proceed_rank=None)

    def receive(self, ctx, src, kind, payload):
        if self.ops.handle(ctx, src, kind, payload):
            return
        if kind == "RankRequest":
            self._open_wave(ctx, payload["rid"])
            for ch in self.sync_children:
                ctx.send(ch, "RankRequest", **payload)
            self._try_contribute(ctx)
        elif kind == "Proceed":
            if payload["done"]:
                self.terminal_flag = True
                for ch in self.sync_children:
                    ctx.send(ch, "Proceed", **payload)
                return
            self._open_wave(ctx, payload["rid"])
            for ch in self.sync_children:
                ctx.send(ch, "Proceed", **payload)
            self._on_proceed(ctx, payload["rank"])
            self._try_contribute(ctx)
        elif kind == "RankUp":
            w = self._wave
            if w is None or payload["rid"] != w["rid"]:
                return
            self._wave_merge((payload["rank"], bool(payload["done"])))
            w["have"] += 1
            self._maybe_close_wave(ctx)
        elif kind == "Connect":
            self._on_connect(ctx, src, payload["rank"])
        elif kind == "Accept":
            self._on_accept(ctx, src, payload["fid"], payload["rank"])
        elif kind == "IdentityUpdate":
            self._on_identity(ctx, src, payload["new_fid"], payload["new_rank"])
        elif kind == "Done":
            # fragment-wide: no outgoing edge, the MST is finished here
            self.complete = True
            for ch in self.ops.children:
                ctx.send(ch, "Done", fid=self.fid, rid=0, size=0)
            self._settled = True
            self._release_hold(ctx)

    # -- barrier waves over the sync tree ----------------------------------

    def _begin_wave(self, ctx, proceed_rank, done=False):
        """Root only: flood the next wave (RankRequest or Proceed)."""
        if self.on_cycle is not None:
            self.on_cycle()
        self.cycles += 1
        rid = self.cycles % (1 << (3 * self.ops.L))
        self._open_wave(ctx, rid)
        if proceed_rank is None:
            for ch in self.sync_children:
                ctx.send(ch, "RankRequest", fid=self.fid, rid=rid)
        else:
            for ch in self.sync_children:
                ctx.send(ch, "Proceed", fid=self.fid, rid=rid,
                         rank=proceed_rank, done=0)
            self._on_proceed(ctx, proceed_rank)
        self._try_contribute(ctx)

    def _open_wave(self, ctx, rid):
        self._wave = {"rid": rid, "need": len(self.sync_children) + 1,
                      "have": 0, "acc": None, "contributed": False}

    def _wave_merge(self, value):
        w = self._wave
        if w["acc"] is None:
            w["acc"] = value
        else:
            w["acc"] = (min(w["acc"][0], value[0]), w["acc"][1] or value[1])

    def _try_contribute(self, ctx):
        w = self._wave
        if w is None or w["contributed"] or self._hold:
            return
        w["contributed"] = True
        self._wave_merge((self.rank, self.complete))
        w["have"] += 1
        self._maybe_close_wave(ctx)

    def _maybe_close_wave(self, ctx):
        w = self._wave
        if w["have"] != w["need"]:
            return
        self._wave = None
        rank, done = w["acc"]
        if self.sync_parent is not None:
            ctx.send(self.sync_parent, "RankUp", fid=self.fid, rid=w["rid"],
                     rank=rank, done=1 if done else 0)
            return
        if done:
            self.terminal_flag = True
            for ch in self.sync_children:
                ctx.send(ch, "Proceed", fid=self.fid, rid=0, rank=0, done=1)
        else:
            self._begin_wave(ctx, proceed_rank=rank)

    def _release_hold(self, ctx):
        # the barrier may lift only once the fragment's fate is settled
        # here AND any round opened under the old identity has drained;
        # otherwise convergecast messages could leak past the barrier
        if self._hold and self._settled and not self.ops.round_open:
            self._hold = False
            self._try_contribute(ctx)

    # -- fragment attempts --------------------------------------------------

    def _on_proceed(self, ctx, rank):
        # a complete fragment's rank is final and its Done has already
        # flooded; re-arming the hold would wait for a fate event that
        # never comes (the Done may even have overtaken this Proceed)
        if self.rank != rank or self.complete:
            return
        self._hold = True
        self._settled = False
        if self.ops.parent is None:
            self.driver = LeaderDriver(self.ops, self._attempt(),
                                       on_done=self._attempt_done)
            self.driver.start(ctx)

    def _attempt(self):
        best = yield from treeops.find_min(self.ops)
        if best is None:
            return None
        edge, _ = best
        # commit marks the owning endpoint, whose on_found sends Connect
        yield RoundCmd("commit", {"edge": edge, "mark": True})
        return edge

    def _attempt_done(self, ctx, edge):
        if edge is None:
            self.complete = True
            for ch in self.ops.children:
                ctx.send(ch, "Done", fid=self.fid, rid=0, size=0)
            self._settled = True
            self._release_hold(ctx)
        # else: the hold clears when the merge's IdentityUpdate arrives

    def _on_found(self, edge, low_degree):
        lo, hi = split_edge_name(edge, self.g.b)
        other = hi if lo == self.v else lo
        self._pending_connect = other
        self.ctx.send(other, "Connect", fid=self.fid, rid=0, rank=self.rank)
        for src, r_in in list(self._deferred):
            if src == other and r_in == self.rank:
                self._deferred.remove((src, r_in))
                self._rule2_merge(self.ctx, other)
                break

    # -- merging ------------------------------------------------------------

    def _on_connect(self, ctx, src, r_in):
        if self.rank > r_in:
            ctx.send(src, "Accept", fid=self.fid, rid=0, rank=self.rank)
            if src not in self.ops.children:
                self.ops.children.append(src)
        elif self._pending_connect == src:
            self._rule2_merge(ctx, src)
        else:
            # equal ranks over different edges: answer once our own
            # rank has risen (guaranteed within this barrier cycle)
            self._deferred.append((src, r_in))

    def _old_tree_neighbors(self, exclude=None):
        out = list(self.ops.children)
        if self.ops.parent is not None:
            out.append(self.ops.parent)
        if exclude is not None and exclude in out:
            out.remove(exclude)
        return out

    def _on_accept(self, ctx, src, new_fid, new_rank):
        nbrs = self._old_tree_neighbors()
        self.ops.parent = src
        self.ops.children = nbrs
        self._pending_connect = None
        self._adopt(ctx, new_fid, new_rank, flood_to=nbrs)

    def _on_identity(self, ctx, src, new_fid, new_rank):
        if new_rank <= self.rank:
            return  # adoption always raises the rank; drop duplicates
        nbrs = self._old_tree_neighbors(exclude=src)
        self.ops.parent = src
        self.ops.children = nbrs
        self._adopt(ctx, new_fid, new_rank, flood_to=nbrs)

    def _rule2_merge(self, ctx, other):
        new_rank = self.rank + 1
        new_fid = max(self.v, other)
        nbrs = self._old_tree_neighbors()
        if self.v == new_fid:
            self.ops.parent = None
            self.ops.children = nbrs + [other]
        else:
            self.ops.parent = other
            self.ops.children = nbrs
        self._pending_connect = None
        # each endpoint floods only its own old tree; the other side
        # performs the mirror merge when it sees our Connect
        self._adopt(ctx, new_fid, new_rank, flood_to=nbrs)

    def _adopt(self, ctx, new_fid, new_rank, flood_to):
        self.fid = new_fid
        self.ops.fid = new_fid
        self.rank = new_rank
        for x in flood_to:
            ctx.send(x, "IdentityUpdate", fid=new_fid, rid=0,
                     new_fid=new_fid, new_rank=new_rank)
        for src, r_in in list(self._deferred):
            if self.rank > r_in:
                self._deferred.remove((src, r_in))
                ctx.send(src, "Accept", fid=self.fid, rid=0, rank=self.rank)
                if src not in self.ops.children:
                    self.ops.children.append(src)
        self._settled = True
        self._release_hold(ctx)


def run_findmst(g: Graph, sync_parent: dict, seed: int = 0,
                policy="uniform-random", policy_params: dict | None = None,
                event_cap: int | None = None, fault=None,
                inspector=None) -> MSTResult:
    """Compute the MST of connected g.

    sync_parent: parent map of a spanning tree used only for barrier
    coordination (root maps to None); its edges must be graph edges.
    """
    if g.n < 3:
        raise ValueError("protocols need n >= 3 (sketch messages do not "
                         "fit the bit budget at n = 2)")
    roots = [v for v, p in sync_parent.items() if p is None]
    if len(roots) != 1 or set(sync_parent) != set(g.nodes):
        raise ValueError("sync_parent must be a spanning tree parent map")
    root = roots[0]
    kids: dict[int, list[int]] = {v: [] for v in g.nodes}
    for v, p in sync_parent.items():
        if p is not None:
            kids[p].append(v)
    if isinstance(policy, str):
        policy = make_policy(policy, seed=derive_seed(seed, "policy"),
                             **(policy_params or {}))
    handlers = {v: FindMSTNode(g, v, sync_parent[v], sorted(kids[v]), seed)
                for v in g.nodes}
    if inspector is not None:
        handlers[root].on_cycle = lambda: inspector.findmst_cycle(g, handlers)
    sim = Simulator(g, handlers, policy, event_cap=event_cap, fault=fault)
    try:
        metrics = sim.run()
    except Exception:
        if inspector is not None:
            inspector.findmst_final(g, handlers)
        raise
    if inspector is not None:
        inspector.findmst_final(g, handlers)
    edges = set()
    for v, h in handlers.items():
        if h.ops.parent is not None:
            edges.add(edge_name(v, h.ops.parent, g.b))
    return MSTResult(root=root, edges=edges, cycles=handlers[root].cycles,
                     metrics=metrics)
