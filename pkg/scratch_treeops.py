import sys, random, collections
sys.path.insert(0, "src")
from sparsemst.graph import generate, pack_weight_key
from sparsemst import treeops
from sparsemst.treeops import TreeOps, LeaderDriver, PENDING
from sparsemst.simnet import Simulator, make_policy, derive_seed


class FragNode:
    def __init__(self, g, v, parent, children, leader, seed):
        self.g, self.v = g, v
        self.ops = TreeOps(g, v, random.Random(derive_seed(seed, "node", v)))
        self.ops.parent = parent
        self.ops.children = children
        self.ops.fid = leader
        self.result = PENDING
        self.done = False
        self.driver = None

    def attach(self, gen):
        self.driver = LeaderDriver(self.ops, gen, on_done=self._fin)

    def _fin(self, ctx, value):
        self.result = value
        self.done = True

    @property
    def terminal(self):
        return self.done or self.driver is None

    def start(self, ctx):
        if self.driver:
            self.driver.start(ctx)

    def receive(self, ctx, src, kind, payload):
        self.ops.handle(ctx, src, kind, payload)


def make_handlers(g, members, leader, seed):
    tree = {leader: None}
    q = collections.deque([leader])
    kids = {v: [] for v in members}
    while q:
        x = q.popleft()
        for y in g.neighbors(x):
            if y in members and y not in tree:
                tree[y] = x
                kids[x].append(y)
                q.append(y)
    assert set(tree) == set(members)
    handlers = {}
    for v in g.nodes:
        if v in members:
            handlers[v] = FragNode(g, v, tree[v], kids[v], leader, seed)
        else:
            handlers[v] = FragNode(g, v, None, [], v, seed)
            handlers[v].done = True
    return handlers


def main():
    g = generate("gnp", 24, seed=5, p=0.4)
    leader = max(g.nodes)
    grown = {leader}
    q = collections.deque([leader])
    while q and len(grown) < 10:
        x = q.popleft()
        for y in g.neighbors(x):
            if y not in grown and len(grown) < 10:
                grown.add(y)
                q.append(y)
    members = grown
    outgoing = set()
    for v in members:
        for e in g.incident_names(v):
            u1, u2 = g.edges()[e][:2]
            if (u1 in members) != (u2 in members):
                outgoing.add(e)
    true_min = min(outgoing, key=lambda e: g.edge_weight_key(e))
    print("members", len(members), "outgoing", len(outgoing))

    for policy_name in ("uniform-random", "reorder-adversary", "fifo-per-edge"):
        for seed in range(5):
            h = make_handlers(g, members, leader, seed)
            ld = h[leader]
            ld.attach(treeops.find_min(ld.ops))
            m = Simulator(g, h, make_policy(policy_name, seed=seed)).run()
            edge, wkey = ld.result
            assert edge == true_min, (policy_name, seed, hex(edge), hex(true_min))
            assert wkey == pack_weight_key(g.edge_weight_key(true_min), g.b)
        print(f"find_min ok under {policy_name}  (msgs={m.total})")

    for seed in range(10):
        h = make_handlers(g, members, leader, seed)
        ld = h[leader]
        ld.attach(treeops.find_any(ld.ops, retries=8))
        Simulator(g, h, make_policy("reorder-adversary", seed=seed)).run()
        assert ld.result.edge in outgoing, ld.result
    print("find_any ok")

    for seed in range(5):
        h = make_handlers(g, members, leader, seed)
        ld = h[leader]
        ld.attach(treeops.approx_cut(ld.ops))
        Simulator(g, h, make_policy("uniform-random", seed=seed)).run()
        print("approx_cut estimate:", ld.result, "true k:", len(outgoing))

    # singleton fragment: find_min completes synchronously at start
    h = make_handlers(g, {leader}, leader, 0)
    ld = h[leader]
    ld.attach(treeops.find_min(ld.ops))
    Simulator(g, h, make_policy("uniform-random", seed=0)).run()
    e, _ = ld.result
    inc = set(g.incident_names(leader))
    assert e == min(inc, key=lambda x: g.edge_weight_key(x)), hex(e)
    print("singleton find_min ok")


main()
