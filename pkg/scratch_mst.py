import sys, time
sys.path.insert(0, "src")
from sparsemst.graph import generate, oracle_msf
from sparsemst.findst import run_findst
from sparsemst.findmst import run_findmst

cases = [
    ("path", 8, {}),
    ("path", 17, {}),
    ("complete", 12, {}),
    ("complete", 40, {}),
    ("gnp", 32, {"p": 0.25}),
    ("gnp", 64, {"p": 0.12}),
    ("lollipop", 24, {}),
    ("low_id_chain", 32, {}),
]
for fam, n, kw in cases:
    for seed in range(4):
        g = generate(fam, n, seed=seed, **kw)
        if len(g.components()) != 1:
            continue
        st = run_findst(g, seed=seed)
        for policy in ("uniform-random", "reorder-adversary", "fifo-per-edge"):
            r = run_findmst(g, st.parent, seed=seed, policy=policy)
            want = oracle_msf(g)
            assert r.edges == want, (fam, n, seed, policy,
                                     len(r.edges), len(want))
    print(f"{fam} n={n}: mst ok  cycles={r.cycles} msgs={r.metrics.total} m={g.m}")
print("all good")
