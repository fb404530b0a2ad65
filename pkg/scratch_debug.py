import sys
sys.path.insert(0, "src")
from sparsemst.graph import generate
from sparsemst.findst import run_findst
from sparsemst import findmst as fm
from sparsemst.simnet import Simulator, make_policy, derive_seed, LivelockError

fam, n, seed, policy = sys.argv[1], int(sys.argv[2]), int(sys.argv[3]), sys.argv[4]
kw = {"p": float(sys.argv[5])} if len(sys.argv) > 5 else {}
g = generate(fam, n, seed=seed, **kw)
st = run_findst(g, seed=seed)
kids = {v: [] for v in g.nodes}
for v, p in st.parent.items():
    if p is not None:
        kids[p].append(v)
handlers = {v: fm.FindMSTNode(g, v, st.parent[v], sorted(kids[v]), seed)
            for v in g.nodes}
pol = make_policy(policy, seed=derive_seed(seed, "policy"))
sim = Simulator(g, handlers, pol)
try:
    sim.run()
    print("OK")
except LivelockError as e:
    print("STUCK:", e)
    for v, h in sorted(handlers.items()):
        r = h.ops._round
        print(f"v={v} fid={h.fid} rank={h.rank} hold={h._hold} "
              f"settled={h._settled} "
              f"round={(r.rtype, r.rid, r.have, r.need, r.awaiting_deg) if r else None} "
              f"wave={h._wave} parent={h.ops.parent} kids={h.ops.children} "
              f"pend={h._pending_connect} def={h._deferred} comp={h.complete}")
