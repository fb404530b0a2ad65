"""Experiment orchestration: configs, run reports, CSV, scaling fits.

A config is a flat key = value text file; values holding several items
are whitespace-separated lists.  Keys:

    protocol = findst | findmst | msf | pipeline
    family   = complete | gnp | path | disconnected | lollipop | low_id_chain
    n        = 128 256 512 1024          (sweep list)
    c        = 2
    seeds    = 0 1 2
    p        = 0.5                       (family parameter, if any)
    sizes    = 8 8 16                    (disconnected components)
    policy   = uniform-random | fifo-per-edge | reorder-adversary | region-stall
    check    = off | phase | full        (invariant inspector level)
    out      = results                   (output directory; omit = no files)
    json     = on | off                  (per-run JSON reports)
    slope_bound = 1.7                    (scaling subcommand)
    csv      = results/runs.csv          (scaling subcommand input)

Execution covers the cross-product of n x seeds.  Each run yields a
RunReport (JSON) and one CSV row; the CSV is byte-identical across
repeats of the same config except for the trailing wallclock column.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

from . import codec
from .findmst import run_findmst
from .findst import run_findst
from .graph import Graph, GraphConfigError, generate, oracle_msf
from .inspector import Inspector
from .msf import MsfStallError, run_msf
from .simnet import LivelockError

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "run_experiment",
    "run_one",
    "write_outputs",
    "scaling_check",
    "CSV_COLUMNS",
]

PROTOCOLS = ("findst", "findmst", "msf", "pipeline")
CHECK_LEVELS = ("off", "phase", "full")

# per-kind columns are fixed by the codec table so every config yields
# the same header (reproducibility is judged on CSV bytes)
_KIND_COLUMNS = [f"messages_{k}" for k in sorted(codec.KINDS)]
CSV_COLUMNS = (["n", "m", "protocol", "policy", "seed", "total_messages"]
               + _KIND_COLUMNS
               + ["phases", "oracle_match", "wallclock"])


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    protocol: str = "findst"
    family: str = "complete"
    ns: list = field(default_factory=lambda: [16])
    c: int = 2
    seeds: list = field(default_factory=lambda: [0])
    family_params: dict = field(default_factory=dict)
    policy: str = "uniform-random"
    check: str = "off"
    out: str | None = None
    json_reports: bool = True
    slope_bound: float | None = None
    csv_in: str | None = None

    def validate(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        if self.check not in CHECK_LEVELS:
            raise ConfigError(f"unknown check level {self.check!r}")
        if not self.ns or not all(isinstance(n, int) and n >= 1
                                  for n in self.ns):
            raise ConfigError(f"bad n list {self.ns!r}")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.c < 1:
            raise ConfigError("c must be >= 1")
        return self

    def echo(self) -> dict:
        return {"protocol": self.protocol, "family": self.family,
                "n": self.ns, "c": self.c, "seeds": self.seeds,
                "family_params": self.family_params, "policy": self.policy,
                "check": self.check}


def _parse_value(key: str, raw: str):
    items = raw.split()
    if key in ("n", "seeds", "sizes"):
        return [int(x) for x in items]
    if key == "c":
        return int(raw)
    if key in ("p", "slope_bound"):
        return float(raw)
    if key == "json":
        return raw.strip().lower() not in ("off", "0", "false", "no")
    return raw.strip()


def parse_config(path: str, overrides: dict | None = None) -> ExperimentConfig:
    """Read a flat key = value config file into an ExperimentConfig."""
    cfg = ExperimentConfig()
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    for ln, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{ln}: expected key = value")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        try:
            val = _parse_value(key, raw)
        except ValueError:
            raise ConfigError(f"{path}:{ln}: bad value for {key}: {raw!r}") \
                from None
        if key == "protocol":
            cfg.protocol = val
        elif key == "family":
            cfg.family = val
        elif key == "n":
            cfg.ns = val
        elif key == "c":
            cfg.c = val
        elif key == "seeds":
            cfg.seeds = val
        elif key in ("p", "sizes"):
            cfg.family_params[key] = val
        elif key == "policy":
            cfg.policy = val
        elif key == "check":
            cfg.check = val
        elif key == "out":
            cfg.out = val
        elif key == "json":
            cfg.json_reports = val
        elif key == "slope_bound":
            cfg.slope_bound = val
        elif key == "csv":
            cfg.csv_in = val
        else:
            raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
    for k, v in (overrides or {}).items():
        setattr(cfg, k, v)
    return cfg.validate()


# -- single runs -------------------------------------------------------------


def _spanning_tree_verdict(g: Graph, edges: set) -> dict:
    """Oracle for findst: any spanning tree of each component is correct."""
    from .graph import split_edge_name
    adj = {v: [] for v in g.nodes}
    for e in edges:
        if e not in g.edges():
            return {"match": False, "diff": {"extra": [e]}}
        u, v = split_edge_name(e, g.b)
        adj[u].append(v)
        adj[v].append(u)
    comps = g.components()
    if len(edges) != g.n - len(comps):
        return {"match": False,
                "diff": {"edge_count": len(edges),
                         "expected": g.n - len(comps)}}
    seen = set()
    for comp in comps:
        start = next(iter(comp))
        stack = [start]
        seen.add(start)
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
    if len(seen) != g.n:
        return {"match": False,
                "diff": {"unreached": sorted(set(g.nodes) - seen)[:8]}}
    return {"match": True}


def _forest_verdict(g: Graph, edges: set) -> dict:
    want = oracle_msf(g)
    if edges == want:
        return {"match": True}
    return {"match": False,
            "diff": {"missing": sorted(want - edges)[:8],
                     "extra": sorted(edges - want)[:8]}}


def _metrics_dict(metrics) -> dict:
    return {"total": metrics.total, "sends": metrics.sends,
            "dropped": metrics.dropped, "duplicated": metrics.duplicated,
            "max_payload_bits": metrics.max_payload_bits,
            "per_kind": dict(sorted(metrics.per_kind.items())),
            "per_edge": {str(k): v
                         for k, v in sorted(metrics.per_edge.items())}}


def run_one(cfg: ExperimentConfig, n: int, seed: int) -> dict:
    """Execute one (n, seed) cell and build its RunReport dict."""
    try:
        g = generate(cfg.family, n, c=cfg.c, seed=seed, **cfg.family_params)
    except GraphConfigError as e:
        raise ConfigError(str(e)) from None
    connected = len(g.components()) == 1
    if cfg.protocol in ("findst", "findmst", "pipeline") and not connected:
        raise ConfigError(f"protocol {cfg.protocol} requires a connected "
                          f"graph ({cfg.family} n={n} seed={seed} is not)")
    ins = Inspector(level=cfg.check) if cfg.check != "off" else None
    t0 = time.perf_counter()
    phase_log: list = []
    phases = 0
    if cfg.protocol == "findst":
        r = run_findst(g, seed=seed, policy=cfg.policy, inspector=ins)
        edges, phases, phase_log = r.tree_edges, r.phases, r.phase_log
        metrics = r.metrics
        verdict = _spanning_tree_verdict(g, edges)
    elif cfg.protocol == "findmst":
        st = run_findst(g, seed=seed, policy=cfg.policy)
        r = run_findmst(g, st.parent, seed=seed, policy=cfg.policy,
                        inspector=ins)
        edges, phases, metrics = r.edges, r.cycles, r.metrics
        verdict = _forest_verdict(g, edges)
    elif cfg.protocol == "pipeline":
        st = run_findst(g, seed=seed, policy=cfg.policy, inspector=ins)
        r = run_findmst(g, st.parent, seed=seed, policy=cfg.policy,
                        inspector=ins)
        edges, phases, phase_log = r.edges, st.phases, st.phase_log
        metrics = st.metrics
        metrics.merge(r.metrics)
        verdict = _forest_verdict(g, edges)
    else:  # msf
        r = run_msf(g, seed=seed, policy=cfg.policy, inspector=ins)
        edges, metrics = r.edges, r.metrics
        phase_log = r.components
        verdict = _forest_verdict(g, edges)
    wallclock = time.perf_counter() - t0
    return {
        "config": cfg.echo(),
        "n": n,
        "m": g.m,
        "seed": seed,
        "metrics": _metrics_dict(metrics),
        "phases": phases,
        "phase_log": phase_log,
        "edges": sorted(edges),
        "oracle": verdict,
        "violations": [v.as_dict() for v in ins.violations] if ins else [],
        "wallclock": wallclock,
    }


def _csv_row(cfg: ExperimentConfig, report: dict) -> list:
    per_kind = report["metrics"]["per_kind"]
    row = [report["n"], report["m"], cfg.protocol, cfg.policy,
           report["seed"], report["metrics"]["total"]]
    row += [per_kind.get(k, 0) for k in sorted(codec.KINDS)]
    row += [report["phases"], report["oracle"]["match"],
            f"{report['wallclock']:.3f}"]
    return row


def run_experiment(cfg: ExperimentConfig):
    """Execute the full n x seeds cross-product.

    Returns (reports, rows, status) where status is the process exit
    code the CLI should use: 0 ok, 3 oracle mismatch, 4 invariant
    violation, 5 livelock/stall.
    """
    reports, rows = [], []
    status = 0
    for n in cfg.ns:
        for seed in cfg.seeds:
            try:
                report = run_one(cfg, n, seed)
            except (LivelockError, MsfStallError) as e:
                reports.append({"config": cfg.echo(), "n": n, "seed": seed,
                                "error": f"{type(e).__name__}: {e}"})
                status = 5
                continue
            reports.append(report)
            rows.append(_csv_row(cfg, report))
            if not report["oracle"]["match"] and status == 0:
                status = 3
            if report["violations"] and status in (0, 3):
                status = 4
    return reports, rows, status


def write_outputs(cfg: ExperimentConfig, reports: list, rows: list):
    """Write one JSON report per run plus the aggregate CSV."""
    if cfg.out is None:
        return
    os.makedirs(cfg.out, exist_ok=True)
    if cfg.json_reports:
        for rep in reports:
            name = (f"{cfg.protocol}_{cfg.family}_n{rep['n']}"
                    f"_s{rep['seed']}.json")
            with open(os.path.join(cfg.out, name), "w") as fh:
                json.dump(rep, fh, indent=1, sort_keys=True)
                fh.write("\n")
    with open(os.path.join(cfg.out, "runs.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        w.writerows(rows)


# -- scaling fits -------------------------------------------------------------


def scaling_check(rows, bound: float):
    """Least-squares log-log slope of per-n median total messages.

    rows: CSV data rows (lists or an iterable of dicts keyed by column).
    Returns (passed, slope).  Raises ConfigError on insufficient data
    (< 4 distinct n or < 10 seeds for some n).
    """
    by_n: dict[int, list[int]] = {}
    for row in rows:
        if isinstance(row, dict):
            n, total = int(row["n"]), int(row["total_messages"])
        else:
            n, total = int(row[0]), int(row[5])
        by_n.setdefault(n, []).append(total)
    if len(by_n) < 4:
        raise ConfigError(f"scaling fit needs >= 4 distinct n values, "
                          f"got {len(by_n)}")
    for n, totals in by_n.items():
        if len(totals) < 10:
            raise ConfigError(f"scaling fit needs >= 10 seeds per n, "
                              f"n={n} has {len(totals)}")
    xs, ys = [], []
    for n, totals in sorted(by_n.items()):
        totals.sort()
        k = len(totals)
        med = (totals[k // 2] if k % 2
               else (totals[k // 2 - 1] + totals[k // 2]) / 2)
        xs.append(math.log(n))
        ys.append(math.log(med))
    mx = sum(xs) / len(xs)
    my = sum(ys) / len(ys)
    slope = (sum((x - mx) * (y - my) for x, y in zip(xs, ys))
             / sum((x - mx) ** 2 for x in xs))
    return slope <= bound, slope


def read_csv_rows(path: str) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except OSError as e:
        raise ConfigError(f"cannot read csv: {e}") from None
