"""Leader-driven spanning tree construction with sublinear messages.

One pre-selected leader grows a rooted tree T in phases:

1. Expansion: T absorbs every node reachable over edges on Found lists
   (invitations accumulated since the last expansion).  Low-degree and
   star joiners invite all their neighbors; high-degree non-star
   joiners first wait for a Star edge so the tree keeps a star node
   adjacent to every high-degree member.
2. Search: the leader samples outgoing edges without replacement via
   FindAny.  The phase ends early when a sampled edge reaches a
   high-degree node, when enough distinct low-degree edges are in hand,
   or when a run of zero aggregate vectors certifies that every
   remaining outgoing edge has been seen.
3. Wait: when the sample says at least half the outgoing edges go to
   low-degree nodes, the leader estimates the cut (ApproxCut) and
   blocks until ThresholdDetection reports that a constant fraction of
   those edges have contacted T.

Initialization: every low-degree node announces LowDegree and every
self-selected star announces Star to all neighbors; receipts land on
the receiver's Found lists and double as degree knowledge.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from . import treeops
from .graph import Graph, edge_name, is_low_degree, star_probability
from .simnet import Metrics, Simulator, derive_seed, make_policy
from .treeops import (FindOutcome, LeaderDriver, PENDING, ThresholdCmd,
                      TreeOps)

__all__ = [
    "FindSTConfig",
    "FindSTNode",
    "FindSTResult",
    "run_findst",
]


@dataclass
class FindSTConfig:
    """Tunables for the search loop; defaults follow the analysis."""

    exact_size_stop: bool = True     # leader knows |T| from Done sizes
    search_cap_factor: int = 48      # hard cap on FindAny attempts/phase
    sample_target: int = 2           # stop at sample_target*c*L low edges
    zero_streak_factor: int = 2      # zero vectors certifying exhaustion
    checkpoint: object = None        # callable(phase, node) at phase start


@dataclass
class ExpandCmd:
    phase: int


@dataclass
class FinishCmd:
    pass


@dataclass
class FindSTResult:
    leader: int
    parent: dict            # node -> parent (leader maps to None)
    tree_edges: set         # edge names of the spanning tree
    phases: int
    phase_log: list
    metrics: Metrics


class FindSTNode:
    """Handler for one node of the spanning-tree protocol."""

    def __init__(self, g: Graph, v: int, leader: int, seed: int,
                 config: FindSTConfig | None = None):
        self.g = g
        self.v = v
        self.leader = leader
        self.config = config or FindSTConfig()
        self.rng = random.Random(derive_seed(seed, "node", v))
        self.ops = TreeOps(g, v, self.rng)
        self.ops.fid = leader
        self.ops.on_found = self._on_found
        self.ops.on_send_trigger = self._on_send_trigger
        self.is_low = is_low_degree(g.degree(v), g.n)
        self.is_star = self.rng.random() < star_probability(g.n)
        self.in_T = v == leader
        self.parent: int | None = None
        self.children: list[int] = []
        self.T_neighbor: set[int] = set()
        self.found_L: set[int] = set()   # neighbor ids (one per edge)
        self.found_O: set[int] = set()
        self.star_received = False
        self.phase = 0
        self.terminal_flag = False
        self.ctx = None
        # expansion bookkeeping
        self._pending = 0
        self._accepts: list[int] = []
        self._size = 0
        self._deferred_join: tuple | None = None
        self._up_on_done: int | None = None
        self._in_expand_cmd = False
        self._expand_sync = PENDING
        # threshold bookkeeping
        self._trig: tuple | None = None      # (r, phase)
        self._counted: set[int] = set()
        self.phase_log: list[dict] = []
        self.driver = None
        if self.in_T:
            # by exception the leader starts with every incident edge
            # on its Found list
            self.found_L = set(g.neighbors(v))
            self.driver = LeaderDriver(self.ops, self._fsm(),
                                       on_command=self._command,
                                       on_done=self._on_fsm_done)

    # -- simulator interface ----------------------------------------------

    @property
    def terminal(self):
        return self.terminal_flag

    def start(self, ctx):
        self.ctx = ctx
        if self.is_low:
            for u in self.g.neighbors(self.v):
                ctx.send(u, "LowDegree", fid=self.v, rid=0)
        if self.is_star:
            for u in self.g.neighbors(self.v):
                ctx.send(u, "Star", fid=self.v, rid=0)
        if self.driver is not None:
            self.driver.start(ctx)

    def receive(self, ctx, src, kind, payload):
        if self.ops.handle(ctx, src, kind, payload):
            return
        if kind == "LowDegree":
            self.ops.deg_cache[src] = True
            self.found_L.add(src)
            self._maybe_event(ctx, src)
        elif kind == "Star":
            self.found_O.add(src)
            if not self.star_received:
                self.star_received = True
                if self._deferred_join is not None:
                    send_src, phase = self._deferred_join
                    self._deferred_join = None
                    self._join_forward(ctx, phase)
        elif kind == "Expand":
            self._on_expand(ctx, src, payload["phase"], payload["fin"])
        elif kind == "DoneByAccept":
            self._on_done(ctx, src, accepted=True, size=payload["size"])
        elif kind == "DoneByReject":
            self._on_done(ctx, src, accepted=False, size=0)

    # -- initialization-derived state -------------------------------------

    def _on_found(self, edge: int, low_degree: bool):
        """A sampled edge was committed; file it for the next expansion."""
        lo, hi = edge >> self.g.b, edge & ((1 << self.g.b) - 1)
        nbr = hi if lo == self.v else lo
        if low_degree:
            self.found_L.add(nbr)
            self._maybe_event(self.ctx, nbr)
        else:
            self.found_O.add(nbr)

    # -- expansion ---------------------------------------------------------

    def _on_expand(self, ctx, src, phase, fin):
        if fin:
            if not self.terminal_flag:
                self.terminal_flag = True
                for ch in self.children:
                    ctx.send(ch, "Expand", fid=self.leader, rid=0,
                             phase=phase, fin=1)
            return
        self.T_neighbor.add(src)
        if not self.in_T:
            self.in_T = True
            self.parent = src
            self.phase = phase
            self.ops.parent = src
            self.ops.phase = phase
            if not self.is_low and not self.is_star and not self.star_received:
                self._deferred_join = (src, phase)
                return
            self._join_forward(ctx, phase)
        elif src == self.parent:
            self._start_expansion(ctx, phase, up=src)
        else:
            ctx.send(src, "DoneByReject", fid=self.leader, rid=0)

    def _join_forward(self, ctx, phase):
        """First-time join: invite neighbors per degree/star class."""
        if self.is_low or self.is_star:
            targets = set(self.g.neighbors(self.v))
        else:
            targets = self.found_L | self.found_O
        targets.discard(self.parent)
        self.found_L.clear()
        self.found_O.clear()
        self._counted.clear()
        self._trig = None
        self.ops.clear_phase_marks()
        self._send_expand(ctx, phase, targets, up=self.parent)

    def _start_expansion(self, ctx, phase, up):
        """A node already in T participates in a new phase's expansion."""
        self.phase = phase
        self.ops.phase = phase
        self.ops.clear_phase_marks()
        self._trig = None
        self._counted.clear()
        targets = set(self.children) | self.found_L | self.found_O
        targets.discard(self.parent)
        self.found_L.clear()
        self.found_O.clear()
        self._send_expand(ctx, phase, targets, up=up)

    def _send_expand(self, ctx, phase, targets, up):
        self._pending = len(targets)
        self._accepts = []
        self._size = 1
        self._up_on_done = up
        if not targets:
            self._expansion_finished(ctx)
            return
        for t in sorted(targets):
            ctx.send(t, "Expand", fid=self.leader, rid=0, phase=phase, fin=0)

    def _on_done(self, ctx, src, accepted, size):
        self.T_neighbor.add(src)
        if accepted:
            self._accepts.append(src)
            self._size += size
        self._pending -= 1
        if self._pending == 0:
            self._expansion_finished(ctx)

    def _expansion_finished(self, ctx):
        self.children = sorted(self._accepts)
        self.ops.children = self.children
        if self._up_on_done is not None:
            ctx.send(self._up_on_done, "DoneByAccept", fid=self.leader,
                     rid=0, size=self._size)
        elif self._in_expand_cmd:
            # completed during the command call: hand back synchronously
            self._expand_sync = self._size
        else:
            self.driver.resume(self._size)

    # -- threshold events --------------------------------------------------

    def _on_send_trigger(self, ctx, r, phase):
        if phase != self.phase:
            return
        self._trig = (r, phase)
        for nbr in sorted(self.found_L):
            self._maybe_event(ctx, nbr)

    def _maybe_event(self, ctx, nbr):
        if self._trig is None or ctx is None:
            return
        r, phase = self._trig
        if phase != self.phase or nbr in self.T_neighbor or nbr in self._counted:
            return
        self._counted.add(nbr)
        if self.rng.random() < treeops.trigger_probability(self.g.n, self.g.c, r):
            self.ops.emit_trigger(ctx, phase)

    # -- leader FSM --------------------------------------------------------

    def _command(self, ctx, cmd):
        if isinstance(cmd, ExpandCmd):
            self.phase = cmd.phase
            self.ops.phase = cmd.phase
            self.ops.clear_phase_marks()
            self._trig = None
            self._counted.clear()
            targets = set(self.children) | self.found_L | self.found_O
            self.found_L = set()
            self.found_O = set()
            # reuse the shared expansion path with no parent to report to
            self._in_expand_cmd = True
            self._expand_sync = PENDING
            self._send_expand(ctx, cmd.phase, targets, up=None)
            self._in_expand_cmd = False
            return self._expand_sync
        if isinstance(cmd, FinishCmd):
            self.terminal_flag = True
            for ch in self.children:
                ctx.send(ch, "Expand", fid=self.leader, rid=0,
                         phase=self.phase, fin=1)
            return None
        raise TypeError(cmd)

    def _fsm(self):
        g = self.g
        c, L = g.c, math.ceil(math.log2(g.n))
        cL = c * L
        cap = self.config.search_cap_factor * cL
        target = self.config.sample_target * cL
        streak_cut = max(4, self.config.zero_streak_factor * cL)
        phase = 0
        waited = False
        while True:
            phase += 1
            size = yield ExpandCmd(phase)
            # after_wait: the previous phase ended in ThresholdDetection,
            # so this expansion should absorb a constant fraction of the
            # outgoing low-degree edges (type-B reduction)
            self.phase_log.append({"phase": phase, "tree_size": size,
                                   "after_wait": waited})
            waited = False
            if self.config.checkpoint is not None:
                self.config.checkpoint(phase, self)
            if self.config.exact_size_stop and size >= g.n:
                yield FinishCmd()
                return
            found: dict[int, bool] = {}
            high_found = False
            zero_streak = 0
            attempts = 0
            while attempts < cap:
                out: FindOutcome = yield from treeops.find_any(
                    self.ops, commit=True, mark=True)
                attempts += 1
                if out.edge is not None:
                    zero_streak = 0
                    found[out.edge] = out.low_degree
                    if not out.low_degree:
                        high_found = True
                        break
                    if len(found) >= target:
                        break
                elif out.zero_vector:
                    zero_streak += 1
                    if zero_streak >= streak_cut:
                        break
                else:
                    zero_streak = 0
            exhausted = zero_streak >= streak_cut
            if exhausted and not found:
                # no outgoing edges: T spans the component
                yield FinishCmd()
                return
            if high_found or len(found) < target:
                continue
            q = yield from treeops.approx_cut(self.ops)
            # the events counted during the wait come from the sampled
            # found edges, so cap the threshold by their number: a cut
            # overestimate would otherwise park the wait forever
            yield ThresholdCmd(max(1, min(q, len(found)) // 2), phase)
            waited = True

    def _on_fsm_done(self, ctx, value):
        pass


def _collect_result(g, handlers, leader, metrics) -> FindSTResult:
    parent = {}
    tree = set()
    for v, h in handlers.items():
        parent[v] = h.parent
        if h.parent is not None:
            tree.add(edge_name(v, h.parent, g.b))
    lead = handlers[leader]
    return FindSTResult(leader=leader, parent=parent, tree_edges=tree,
                        phases=len(lead.phase_log),
                        phase_log=lead.phase_log, metrics=metrics)


def run_findst(g: Graph, seed: int = 0, policy="uniform-random",
               leader: int | None = None,
               config: FindSTConfig | None = None,
               policy_params: dict | None = None,
               event_cap: int | None = None,
               fault=None, inspector=None) -> FindSTResult:
    """Build a spanning tree of the connected graph g; returns the tree
    rooted at the leader together with message metrics.

    An inspector, when given, snapshots global state at every phase
    boundary and at the end of the run (also on livelock, before the
    exception propagates).
    """
    if g.n < 3:
        raise ValueError("protocols need n >= 3 (sketch messages do not "
                         "fit the bit budget at n = 2)")
    if leader is None:
        leader = max(g.nodes)
    if isinstance(policy, str):
        policy = make_policy(policy, seed=derive_seed(seed, "policy"),
                             **(policy_params or {}))
    cfg = config or FindSTConfig()
    if inspector is not None:
        cfg = replace(cfg)
        user_cp = cfg.checkpoint

        def _checkpoint(phase, node, _user=user_cp):
            inspector.findst_checkpoint(phase, handlers, leader)
            if _user is not None:
                _user(phase, node)

        cfg.checkpoint = _checkpoint
    handlers = {v: FindSTNode(g, v, leader, seed, cfg) for v in g.nodes}
    sim = Simulator(g, handlers, policy, event_cap=event_cap, fault=fault)
    try:
        metrics = sim.run()
    except Exception:
        if inspector is not None:
            inspector.findst_final(handlers, leader)
        raise
    if inspector is not None:
        inspector.findst_final(handlers, leader)
    return _collect_result(g, handlers, leader, metrics)
