"""Global-view invariant inspector.

The inspector reads a snapshot of every node handler -- state the
protocols themselves can never access -- at moments where that snapshot
is provably consistent: findst phase boundaries (the leader's expansion
convergecast has completed), findmst barrier cycle starts (all of the
previous cycle's activity has drained), and quiescence.  It only
records violations; it never influences protocol behavior.

Checks:

* tree invariant: the growing tree contains every neighbor of any of
  its star or low-degree members, and every high-degree member has a
  star neighbor inside the tree;
* tree well-formedness: parent pointers are graph edges, acyclic,
  reach the root, and agree with the parents' children lists;
* phase dichotomy: a phase that adds no high-degree node must not
  increase the outgoing low-degree edge count (type-B phases reduce
  it); per-phase counts and type-B reduction ratios are recorded;
* rank/size bound: a rank-R fragment has at least 2^R nodes and
  R never exceeds ceil(log2 n);
* identity ownership: at msf quiescence the maximum-ID star of each
  component owns every node, and per-node identities only ever rise;
* event attribution: no wait-phase event was counted over a fragment
  tree edge, and no leader received more Trigger messages than were
  emitted network-wide (catches duplicated deliveries).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .graph import Graph

__all__ = ["Violation", "Inspector"]


@dataclass(frozen=True)
class Violation:
    check: str
    detail: str

    def as_dict(self):
        return {"check": self.check, "detail": self.detail}


@dataclass
class Inspector:
    """Collects invariant violations across one protocol run.

    level "phase" runs only the per-checkpoint checks; "full" adds the
    end-of-run checks.  Use one instance per run.
    """

    level: str = "full"
    violations: list = field(default_factory=list)
    # findst per-phase records: {"phase", "tree_size", "high", "olow",
    # "after_wait", "kind"}
    phase_records: list = field(default_factory=list)
    b_ratios: list = field(default_factory=list)  # type-B olow reductions

    def _flag(self, check: str, detail: str):
        self.violations.append(Violation(check, detail))

    @property
    def ok(self) -> bool:
        return not self.violations

    # -- findst --------------------------------------------------------------

    def findst_checkpoint(self, phase: int, handlers: dict, leader: int):
        g = handlers[leader].g
        in_T = {v for v, h in handlers.items() if h.in_T}
        self._check_tree_invariant(g, handlers, in_T, f"phase {phase}",
                                   exempt=leader)
        self._check_tree_shape(g, handlers, in_T, leader, f"phase {phase}")
        high = sum(1 for v in in_T if not handlers[v].is_low)
        olow = self._outgoing_low(g, handlers, in_T)
        lead = handlers[leader]
        entry = lead.phase_log[-1] if lead.phase_log else {}
        if entry.get("tree_size") not in (None, len(in_T)):
            self._flag("tree-size", f"phase {phase}: leader reports "
                       f"{entry.get('tree_size')}, global tree has {len(in_T)}")
        rec = {"phase": phase, "tree_size": len(in_T), "high": high,
               "olow": olow, "after_wait": bool(entry.get("after_wait"))}
        self._classify_phase(g, handlers, leader, rec)
        self.phase_records.append(rec)

    def _classify_phase(self, g, handlers, leader, rec):
        if self.phase_records:
            prev_high = self.phase_records[-1]["high"]
            prev_olow = self.phase_records[-1]["olow"]
        else:
            # baseline: the initial tree is the leader alone
            prev_high = 0 if handlers[leader].is_low else 1
            prev_olow = sum(1 for u in g.neighbors(leader)
                            if handlers[u].is_low)
        if rec["tree_size"] >= g.n:
            rec["kind"] = "terminal"
        elif rec["high"] > prev_high:
            rec["kind"] = "A"
        else:
            rec["kind"] = "B"
            if rec["olow"] > prev_olow:
                self._flag("phase-dichotomy",
                           f"phase {rec['phase']}: no high-degree node "
                           f"added yet outgoing-low rose "
                           f"{prev_olow} -> {rec['olow']}")
        if rec["after_wait"] and prev_olow > 0:
            self.b_ratios.append(rec["olow"] / prev_olow)

    def findst_final(self, handlers: dict, leader: int):
        if self.level != "full":
            return
        g = handlers[leader].g
        in_T = {v for v, h in handlers.items() if h.in_T}
        self._check_tree_invariant(g, handlers, in_T, "final", exempt=leader)
        self._check_tree_shape(g, handlers, in_T, leader, "final")
        for v, h in handlers.items():
            if h._pending:
                self._flag("tree-wellformed",
                           f"final: node {v} still waits on {h._pending} "
                           f"expansion replies")
        self._check_triggers(handlers)

    def _outgoing_low(self, g, handlers, in_T) -> int:
        count = 0
        for v in in_T:
            for u in g.neighbors(v):
                if u not in in_T and handlers[u].is_low:
                    count += 1
        return count

    def _check_tree_invariant(self, g, handlers, in_T, where: str,
                              exempt=None):
        for v in in_T:
            h = handlers[v]
            if h.is_star or h.is_low:
                missing = [u for u in g.neighbors(v) if u not in in_T]
                if missing:
                    self._flag("tree-invariant",
                               f"{where}: neighbors {missing[:4]} of "
                               f"{'star' if h.is_star else 'low'} member "
                               f"{v} are outside the tree")
            elif v == exempt:
                # the initial root joins by fiat, not over a star edge
                continue
            elif not any(u in in_T and handlers[u].is_star
                         for u in g.neighbors(v)):
                self._flag("tree-invariant",
                           f"{where}: high-degree member {v} has no star "
                           f"neighbor in the tree")

    def _check_tree_shape(self, g, handlers, in_T, root, where: str,
                          parent_of=None, child_set=None):
        if parent_of is None:
            parent_of = lambda h: h.parent
        if child_set is None:
            child_set = lambda h: h.children
        if root not in in_T or parent_of(handlers[root]) is not None:
            self._flag("tree-wellformed", f"{where}: root {root} not a "
                       f"parentless tree member")
        for v in in_T:
            p = parent_of(handlers[v])
            if v == root:
                continue
            if p is None:
                self._flag("tree-wellformed",
                           f"{where}: member {v} has no parent")
            elif p not in in_T or not g.adjacent(v, p):
                self._flag("tree-wellformed",
                           f"{where}: parent link {v}->{p} invalid")
            elif v not in child_set(handlers[p]):
                self._flag("tree-wellformed",
                           f"{where}: {p} does not list child {v}")
        # every member must reach the root without cycles
        for v in in_T:
            x, steps = v, 0
            while x != root and x is not None and steps <= len(in_T):
                x = parent_of(handlers[x]) if x in in_T else None
                steps += 1
            if x != root:
                self._flag("tree-wellformed",
                           f"{where}: {v} does not reach root {root}")
                break

    def _check_triggers(self, handlers):
        emitted = sum(h.ops.trig_emitted for h in handlers.values())
        received = sum(h.ops.trig_received for h in handlers.values())
        if received > emitted:
            self._flag("trigger-accounting",
                       f"leaders received {received} Trigger events but "
                       f"only {emitted} were emitted")

    # -- findmst ---------------------------------------------------------------

    def findmst_cycle(self, g: Graph, handlers: dict):
        self._check_fragments(g, handlers, "cycle")

    def findmst_final(self, g: Graph, handlers: dict):
        if self.level != "full":
            return
        self._check_fragments(g, handlers, "final")
        fids = {h.fid for h in handlers.values()}
        if len(fids) != 1:
            self._flag("identity", f"final: {len(fids)} fragment "
                       f"identities remain")
        if not all(h.complete for h in handlers.values()):
            self._flag("identity", "final: nodes without the fragment-wide "
                       "completion flag")

    def _check_fragments(self, g: Graph, handlers: dict, where: str):
        L = math.ceil(math.log2(g.n))
        frags: dict[int, list[int]] = {}
        for v, h in handlers.items():
            frags.setdefault(h.fid, []).append(v)
        for fid, members in frags.items():
            ranks = {handlers[v].rank for v in members}
            if len(ranks) != 1:
                self._flag("rank-bound", f"{where}: fragment {fid} members "
                           f"disagree on rank {sorted(ranks)}")
            rank = max(ranks)
            if rank > L:
                self._flag("rank-bound", f"{where}: fragment {fid} rank "
                           f"{rank} exceeds log2 n = {L}")
            if len(members) < (1 << rank):
                self._flag("rank-bound", f"{where}: fragment {fid} has "
                           f"{len(members)} nodes at rank {rank} "
                           f"(needs {1 << rank})")
            roots = [v for v in members if handlers[v].ops.parent is None]
            if len(roots) != 1:
                self._flag("tree-wellformed", f"{where}: fragment {fid} has "
                           f"{len(roots)} roots")
                continue
            self._check_tree_shape(
                g, handlers, set(members), roots[0], f"{where} frag {fid}",
                parent_of=lambda h: h.ops.parent,
                child_set=lambda h: h.ops.children)

    # -- msf -------------------------------------------------------------------

    def msf_final(self, g: Graph, handlers: dict):
        if self.level != "full":
            return
        for comp in g.components():
            stars = [v for v in comp if handlers[v].is_star]
            if not stars:
                continue
            lead = max(stars)
            off = [v for v in comp if handlers[v].vid != lead]
            if off:
                self._flag("star-ownership",
                           f"component of {lead}: nodes {sorted(off)[:4]} "
                           f"not owned by the maximum-ID star")
                continue
            self._check_tree_shape(g, handlers, set(comp), lead,
                                   f"component of {lead}")
        for v, h in handlers.items():
            trace = h.vid_trace
            if any(b <= a for a, b in zip(trace, trace[1:])):
                self._flag("vid-monotonic",
                           f"node {v} identity trace not increasing: "
                           f"{trace}")
            for nbr, phase, intra in h.counted_log:
                if intra:
                    self._flag("event-attribution",
                               f"node {v} counted fragment edge to {nbr} "
                               f"as a wait-phase event (phase {phase})")
        self._check_triggers(handlers)
