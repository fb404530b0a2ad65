"""Minimum spanning forest without a preselected leader.

Every self-selected star node runs the spanning-tree leader protocol
concurrently, labeling all of its fragment's messages with a fragment
identity (the star's node ID).  Low-degree non-star nodes run the
classic merging protocol (ghs) among themselves.  Collisions between
protocols resolve by a fixed priority:

1. a merging node contacted by a fragment expansion abandons merging
   and joins the fragment;
2. a high-degree or fragment node contacted by a merging node stays
   silent forever (the merging side stalls and is absorbed later);
3. between two fragments the higher identity wins: the losing side's
   expansion is answered Rejected-lower-ID immediately - even mid-
   expansion, so fragments never wait on each other in a cycle - and
   the rejecting node remembers one edge per rejected identity on its
   Reject list, over which the winner expands later.

Expansion therefore differs from the single-leader version: Expand
messages carry the fragment identity, a node that would join while its
own forward set is still outstanding defers the join until its current
expansion has finished (keeping forwards on a tree and the message
count subquadratic), and Rejected-lower-ID convergecasts up to the
losing leader, which stops its phase machine.

The acknowledgment discipline replaces the T-neighbor structure of the
single-leader protocol: low-degree nodes get an Ack for their initial
LowDegree message and hold any further traffic to a neighbor until
that neighbor has acknowledged.

After the network quiesces, each component is finished off locally:
a surviving star fragment spanning its component hands its tree to the
rank-synchronized merger (findmst) as the control tree; an all-low-
degree star-free component is already solved by ghs; a component with
high-degree nodes but no star (a low-probability selection event) is
reported as a stall.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass

from . import treeops
from .findmst import run_findmst
from .findst import FindSTConfig
from .ghs import GHS_KINDS, GhsState
from .graph import Graph, edge_name, is_low_degree, star_probability
from .simnet import Metrics, Simulator, derive_seed, make_policy
from .treeops import FindOutcome, LeaderDriver, PENDING, ThresholdCmd, TreeOps

__all__ = [
    "MsfStallError",
    "MsfNode",
    "MsfResult",
    "run_msf",
]

log = logging.getLogger(__name__)


class MsfStallError(Exception):
    """A component cannot finish (high-degree nodes but no star)."""


_ROUND_BCAST = ("HashBcast", "ProbeBcast", "IndexBcast", "VerifyBcast")


@dataclass
class ExpandCmd:
    phase: int


@dataclass
class MsfResult:
    edges: set             # edge names of the minimum spanning forest
    components: list       # per-component {"size", "mode", "leader"}
    metrics: Metrics       # all stages combined
    stage_a_metrics: Metrics


class MsfNode:
    """Handler for one node: fragment expansion, merging, collisions.

    Stage A has no termination broadcast (losing leaders just stop and
    winning leaders certify their fragment spans the component), so
    quiescence is the normal end state; run_msf validates the result.
    """

    terminal = True

    def __init__(self, g: Graph, v: int, seed: int,
                 config: FindSTConfig | None = None):
        self.g = g
        self.v = v
        self.config = config or FindSTConfig()
        self.rng = random.Random(derive_seed(seed, "node", v))
        self.is_low = is_low_degree(g.degree(v), g.n)
        self.is_star = self.rng.random() < star_probability(g.n)
        self.vid = v if self.is_star else 0
        self.vid_trace = [self.vid]
        self.ops = TreeOps(g, v, self.rng)
        self.ops.fid = self.vid
        self.ops.on_found = self._on_found
        self.ops.on_send_trigger = self._on_send_trigger
        self.parent: int | None = None
        self.children: list[int] = []
        self.found_L: set[int] = set()
        self.found_O: set[int] = set()
        self.reject: set[int] = set()
        self.seen_tids: set[int] = set()
        self.same_frag: set[int] = set()
        self.star_received = False
        self.phase = 0
        self.halted = False
        self.successful_expands = 0
        self.ghs = (GhsState(g, v)
                    if self.is_low and not self.is_star else None)
        self.ctx = None
        # ack discipline: low-degree nodes hold protocol traffic to a
        # neighbor until that neighbor acknowledged our LowDegree
        self._acked: set[int] = set()
        self._outbox: dict[int, list] = {}
        # one outstanding expansion at a time
        self._exp: dict | None = None
        self._deferred_expands: list[tuple[int, int, int]] = []
        self._deferred_join: tuple[int, int] | None = None
        self._in_expand_cmd = False
        self._expand_sync = PENDING
        # threshold bookkeeping (wait phase)
        self._trig: tuple | None = None
        self._counted: set[int] = set()
        self.counted_log: list[tuple] = []  # (neighbor, phase, intra)
        self.driver = None
        if self.is_star:
            # as fragment leader, every incident edge starts invited
            self.found_L = set(g.neighbors(v))
            self.driver = LeaderDriver(self.ops, self._fsm(),
                                       on_command=self._command,
                                       on_done=lambda ctx, val: None)

    # -- send gating --------------------------------------------------------

    def _send(self, ctx, dst, kind, **payload):
        if self.is_low and dst not in self._acked:
            self._outbox.setdefault(dst, []).append((kind, payload))
        else:
            ctx.send(dst, kind, **payload)

    def _ghs_send(self, ctx):
        return lambda dst, kind, **payload: self._send(ctx, dst, kind,
                                                       **payload)

    # -- simulator interface ------------------------------------------------

    def start(self, ctx):
        self.ctx = ctx
        if self.is_low:
            for u in self.g.neighbors(self.v):
                ctx.send(u, "LowDegree", fid=self.vid, rid=0)
        if self.is_star:
            for u in self.g.neighbors(self.v):
                ctx.send(u, "Star", fid=self.vid, rid=0)
        if self.ghs is not None:
            self.ghs.wakeup(self._ghs_send(ctx))
        if self.driver is not None:
            self.driver.start(ctx)

    def receive(self, ctx, src, kind, payload):
        if kind == "LowDegree":
            self.ops.deg_cache[src] = True
            self.found_L.add(src)
            ctx.send(src, "Ack", fid=self.vid, rid=0)
            self._maybe_event(ctx, src)
            return
        if kind == "Ack":
            self._acked.add(src)
            for k, p in self._outbox.pop(src, ()):
                ctx.send(src, k, **p)
            return
        if kind == "Star":
            self.found_O.add(src)
            if not self.star_received:
                self.star_received = True
                if self._deferred_join is not None:
                    up, phase = self._deferred_join
                    self._deferred_join = None
                    self._forward_join(ctx, up, phase, fresh=True)
            return
        if kind in GHS_KINDS:
            # collision rule 2: anyone not actively merging stays silent
            if self.ghs is not None:
                self.ghs.handle(self._ghs_send(ctx), src, kind, payload)
            return
        if kind in _ROUND_BCAST and payload["fid"] != self.vid:
            # a round of a fragment we have since left (our old parent
            # there still lists us as a child); letting it through would
            # clobber the round we are running for our current fragment
            return
        if self.ops.handle(ctx, src, kind, payload):
            return
        if kind == "ExpandID":
            self._on_expand(ctx, src, payload["vid"], payload["phase"])
        elif kind == "AcceptID":
            self._on_reply(ctx, src, payload["vid"], accept=True)
        elif kind == "RejectSameTree":
            self.same_frag.add(src)
            self._on_reply(ctx, src, payload["vid"], accept=False)
        elif kind == "RejectedLowerID":
            self._on_reply(ctx, src, payload["vid"], accept=False,
                           rejected=True)

    # -- expansion ----------------------------------------------------------

    @property
    def _busy(self) -> bool:
        return self._exp is not None or self._deferred_join is not None

    def _on_expand(self, ctx, src, tid, phase):
        first = tid not in self.seen_tids
        self.seen_tids.add(tid)
        if tid < self.vid:
            # collision rule 3, losing side: answer immediately (even
            # mid-expansion, so fragments never wait in a cycle) and
            # remember one takeover edge per rejected identity
            self._send(ctx, src, "RejectedLowerID", fid=self.vid, rid=0,
                       vid=tid)
            if first:
                self.reject.add(src)
            return
        if tid == self.vid:
            if src == self.parent:
                self._start_phase(ctx, src, tid, phase)
            else:
                self._send(ctx, src, "RejectSameTree", fid=self.vid, rid=0,
                           vid=tid)
                self.same_frag.add(src)
            return
        # tid > vid: join, but only between expansions - forwards must
        # stay on a tree while identities are being rewritten
        if self._busy:
            self._deferred_expands.append((src, tid, phase))
            return
        self._join(ctx, src, tid, phase)

    def _join(self, ctx, src, tid, phase):
        fresh = self.vid == 0 and self.parent is None and not self.children
        if self.ghs is not None:
            self.ghs.abandoned = True  # collision rule 1
        if self.driver is not None:
            self._halt_leader()
        self.vid = tid
        self.vid_trace.append(tid)
        self.ops.fid = tid
        self.parent = src
        self.ops.parent = src
        # fragment-relative knowledge does not survive an identity change
        self.same_frag = {src}
        # deferred expansions were classified against the old identity;
        # entries no longer higher than us get their answer now, else a
        # same-identity wait cycle can deadlock the new fragment
        self._filter_deferred(ctx)
        if fresh and not self.is_low and not self.is_star \
                and not self.star_received:
            # a high-degree non-star first waits to learn a star edge
            self._deferred_join = (src, phase)
            return
        self._forward_join(ctx, src, phase, fresh=fresh)

    def _filter_deferred(self, ctx):
        keep = []
        for src, tid, phase in self._deferred_expands:
            if tid < self.vid:
                self._send(ctx, src, "RejectedLowerID", fid=self.vid, rid=0,
                           vid=tid)
                self.reject.add(src)
            elif tid == self.vid and src != self.parent:
                self._send(ctx, src, "RejectSameTree", fid=self.vid, rid=0,
                           vid=tid)
                self.same_frag.add(src)
            else:
                keep.append((src, tid, phase))
        self._deferred_expands = keep

    def _forward_join(self, ctx, up, phase, fresh):
        if fresh:
            if self.is_low or self.is_star:
                targets = set(self.g.neighbors(self.v))
            else:
                targets = self.found_L | self.found_O
        else:
            targets = set(self.children)
        targets |= self.found_L | self.found_O | self.reject
        self._start_phase(ctx, up, self.vid, phase, targets=targets)

    def _start_phase(self, ctx, up, tid, phase, targets=None):
        """Forward an expansion and await one reply per forward."""
        if targets is None:
            targets = set(self.children) | self.found_L | self.found_O \
                | self.reject
        targets.discard(self.v)
        targets.discard(up)
        self.found_L.clear()
        self.found_O.clear()
        self.reject.clear()
        self.phase = phase
        self.ops.phase = phase
        self.ops.clear_phase_marks()
        self._trig = None
        self._counted.clear()
        self._exp = {"tid": tid, "up": up, "pending": len(targets),
                     "accepts": [], "rejected": False}
        for t in sorted(targets):
            self._send(ctx, t, "ExpandID", fid=tid, rid=0, vid=tid,
                       phase=phase)
        if not targets:
            self._expansion_finished(ctx)

    def _on_reply(self, ctx, src, tid, accept, rejected=False):
        exp = self._exp
        if exp is None or tid != exp["tid"]:
            return  # stale reply from an abandoned identity
        if accept:
            exp["accepts"].append(src)
        if rejected:
            exp["rejected"] = True
        exp["pending"] -= 1
        if exp["pending"] == 0:
            self._expansion_finished(ctx)

    def _expansion_finished(self, ctx):
        exp = self._exp
        self._exp = None
        self.children = sorted(exp["accepts"])
        self.ops.children = list(self.children)
        self.same_frag.update(self.children)
        if exp["up"] is not None:
            kind = "RejectedLowerID" if exp["rejected"] else "AcceptID"
            self._send(ctx, exp["up"], kind, fid=self.vid, rid=0,
                       vid=exp["tid"])
            self._process_deferred(ctx)
            return
        # leader path
        if exp["rejected"]:
            self._halt_leader()
            self._process_deferred(ctx)
            return
        self.successful_expands += 1
        self._process_deferred(ctx)
        if self.driver is None:
            return  # a deferred join absorbed this fragment
        if self._in_expand_cmd:
            self._expand_sync = True
        else:
            self.driver.resume(None)

    def _process_deferred(self, ctx):
        while self._deferred_expands and not self._busy:
            src, tid, phase = self._deferred_expands.pop(0)
            self._on_expand(ctx, src, tid, phase)

    def _halt_leader(self):
        self.halted = True
        self.driver = None
        self.ops.on_result = lambda tagged: None

    # -- leader FSM ---------------------------------------------------------

    def _command(self, ctx, cmd):
        if isinstance(cmd, ExpandCmd):
            assert self._exp is None
            self._in_expand_cmd = True
            self._expand_sync = PENDING
            self._start_phase(ctx, None, self.vid, cmd.phase)
            self._in_expand_cmd = False
            return self._expand_sync
        raise TypeError(cmd)

    def _fsm(self):
        g = self.g
        c, L = g.c, math.ceil(math.log2(g.n))
        cL = c * L
        cap = self.config.search_cap_factor * cL
        target = self.config.sample_target * cL
        streak_cut = max(4, self.config.zero_streak_factor * cL)
        phase = 0
        while True:
            phase += 1
            yield ExpandCmd(phase)
            if self.config.checkpoint is not None:
                self.config.checkpoint(phase, self)
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
            if zero_streak >= streak_cut and not found:
                # no outgoing edges: the fragment spans its component
                return
            if high_found or len(found) < target:
                continue
            q = yield from treeops.approx_cut(self.ops)
            # cap by the sampled found count: those edges are the only
            # wait-phase event sources, so a cut overestimate would
            # otherwise park the wait forever
            yield ThresholdCmd(max(1, min(q, len(found)) // 2), phase)

    # -- found edges and wait-phase events ----------------------------------

    def _on_found(self, edge: int, low_degree: bool):
        lo, hi = edge >> self.g.b, edge & ((1 << self.g.b) - 1)
        nbr = hi if lo == self.v else lo
        if low_degree:
            self.found_L.add(nbr)
            self._maybe_event(self.ctx, nbr)
        else:
            self.found_O.add(nbr)

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
        if phase != self.phase or nbr in self.same_frag \
                or nbr in self._counted:
            return
        self._counted.add(nbr)
        # the intra flag records whether the counted edge was a fragment
        # tree link at count time; the inspector asserts it never is
        intra = nbr == self.parent or nbr in self.children
        self.counted_log.append((nbr, phase, intra))
        if self.rng.random() < treeops.trigger_probability(
                self.g.n, self.g.c, r):
            self.ops.emit_trigger(ctx, phase)


def run_msf(g: Graph, seed: int = 0, policy="uniform-random",
            policy_params: dict | None = None,
            config: FindSTConfig | None = None,
            event_cap: int | None = None, fault=None,
            inspector=None) -> MsfResult:
    """Compute the minimum spanning forest of any graph, leaderless.

    Raises MsfStallError for components that cannot finish (high-degree
    nodes present but no star was selected - rerun with another seed).
    """
    if g.n < 3:
        raise ValueError("protocols need n >= 3 (sketch messages do not "
                         "fit the bit budget at n = 2)")

    def stage_policy(label):
        if isinstance(policy, str):
            return make_policy(policy, seed=derive_seed(seed, "policy", label),
                               **(policy_params or {}))
        return policy

    handlers = {v: MsfNode(g, v, seed, config) for v in g.nodes}
    sim = Simulator(g, handlers, stage_policy("msf"), event_cap=event_cap,
                    fault=fault)
    try:
        stage_a = sim.run()
    except Exception:
        if inspector is not None:
            inspector.msf_final(g, handlers)
        raise
    if inspector is not None:
        inspector.msf_final(g, handlers)
    metrics = Metrics()
    metrics.merge(stage_a)
    edges: set[int] = set()
    comps = []
    for comp in g.components():
        stars = [v for v in comp if handlers[v].is_star]
        if stars:
            lead = max(stars)
            off = [v for v in comp if handlers[v].vid != lead]
            roots = [v for v in comp if handlers[v].parent is None]
            if off or roots != [lead]:
                raise MsfStallError(
                    f"fragment {lead} does not own its whole component "
                    f"(seed={seed}, stragglers={sorted(off)[:8]})")
            comps.append({"size": len(comp), "mode": "fragment",
                          "leader": lead})
            if len(comp) > 1:
                sub = g.induced_subgraph(comp)
                parent = {v: handlers[v].parent for v in comp}
                r = run_findmst(sub, parent,
                                seed=derive_seed(seed, "msf-mst", lead),
                                policy=stage_policy(("mst", lead)),
                                event_cap=event_cap, inspector=inspector)
                edges |= r.edges
                metrics.merge(r.metrics)
        elif any(not handlers[v].is_low for v in comp):
            log.error("msf stall: component with high-degree nodes has no "
                      "star (seed=%d, size=%d)", seed, len(comp))
            raise MsfStallError(
                f"component of size {len(comp)} has high-degree nodes but "
                f"no star node (seed={seed})")
        else:
            # star-free all-low-degree component: solved in place by the
            # merging protocol
            for v in comp:
                edges |= handlers[v].ghs.branch_edges()
            comps.append({"size": len(comp), "mode": "ghs", "leader": None})
    return MsfResult(edges=edges, components=comps, metrics=metrics,
                     stage_a_metrics=stage_a)
