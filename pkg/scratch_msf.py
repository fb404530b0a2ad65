import sys, traceback
sys.path.insert(0, "src")
from sparsemst.graph import generate, oracle_msf
from sparsemst.msf import run_msf, MsfStallError

cases = [
    ("path", 8, {}),
    ("complete", 12, {}),
    ("complete", 40, {}),
    ("gnp", 32, {"p": 0.25}),
    ("gnp", 64, {"p": 0.12}),
    ("lollipop", 24, {}),
    ("low_id_chain", 32, {}),
    ("disconnected", 24, {"sizes": [3, 5, 16], "p": 0.4}),
    ("disconnected", 48, {"sizes": [1, 2, 9, 36], "p": 0.3}),
    ("disconnected", 60, {"sizes": [30, 30], "p": 0.15}),
]
fails = 0
for fam, n, kw in cases:
    for seed in range(4):
        g = generate(fam, n, seed=seed, **kw)
        want = oracle_msf(g)
        for policy in ("uniform-random", "reorder-adversary", "fifo-per-edge"):
            tag = (fam, n, seed, policy)
            try:
                r = run_msf(g, seed=seed, policy=policy)
            except MsfStallError as e:
                print("STALL", tag, e)
                continue
            except Exception:
                print("FAIL", tag)
                traceback.print_exc()
                fails += 1
                continue
            if r.edges != want:
                print("MISMATCH", tag, len(r.edges), len(want))
                fails += 1
    print(f"{fam} n={n} ok")
print("fails:", fails)
