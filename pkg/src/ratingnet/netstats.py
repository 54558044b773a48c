"""Descriptive statistics of review graphs, emitted as plain CSV tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .errors import StatError
from .graph import BUSINESS, USER, BipartiteGraph
from .ingest import EdgeList


@dataclass
class Histogram:
    keys: list
    counts: list
    scale: str = "linear"

    @property
    def total(self) -> int:
        return int(sum(self.counts))

    def as_dict(self):
        return dict(zip(self.keys, self.counts))

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["key", "count"])
        for k, c in zip(self.keys, self.counts):
            w.writerow([k, c])


def _nonempty(g):
    if g.n_edges == 0:
        raise StatError("statistics of an empty graph")


def degree_histogram(g: BipartiteGraph, side: str = USER) -> Histogram:
    _nonempty(g)
    deg = g.user_degree if side == USER else g.business_degree
    deg = deg[deg > 0]
    keys, counts = np.unique(deg, return_counts=True)
    return Histogram(keys.tolist(), counts.tolist(), "log")


def powerlaw_slope(hist: Histogram, min_count: int = 1, k_min: int = 1, k_max: int | None = None) -> float:
    """Least-squares slope of log(count) on log(degree)."""
    k = np.asarray(hist.keys, dtype=np.float64)
    c = np.asarray(hist.counts, dtype=np.float64)
    mask = (c >= min_count) & (k >= k_min)
    if k_max is not None:
        mask &= k <= k_max
    if mask.sum() < 2:
        raise StatError("not enough histogram points for a slope")
    slope, _ = np.polyfit(np.log(k[mask]), np.log(c[mask]), 1)
    return float(slope)


def rating_histogram(g: BipartiteGraph, mode: str = "per-edge") -> Histogram:
    """Star counts per edge, or 0.25-wide bins of per-node average stars.

    Average-mode keys are bin left edges 1.0, 1.25, ..., 4.75; the last bin
    is closed so an average of exactly 5 lands in it.
    """
    _nonempty(g)
    if mode == "per-edge":
        counts = np.bincount(g.user_stars, minlength=6)[1:]
        return Histogram([1, 2, 3, 4, 5], counts.tolist())
    if mode == "per-user-average":
        vals = g.user_avg[g.user_degree > 0]
    elif mode == "per-business-average":
        vals = g.business_avg[g.business_degree > 0]
    else:
        raise StatError(f"unknown rating histogram mode {mode!r}")
    edges = np.arange(1.0, 5.0 + 1e-9, 0.25)
    counts, _ = np.histogram(vals, bins=edges)
    return Histogram([float(e) for e in edges[:-1]], counts.tolist())


def component_sizes(g: BipartiteGraph) -> list[int]:
    """Connected-component sizes of the undirected graph, largest first."""
    _nonempty(g)
    user_pos, business_pos, n = g.node_index()
    e = g.edges()
    parent = np.arange(n)
    src = user_pos[e.user]
    dst = business_pos[e.business]

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    for a, b in zip(src.tolist(), dst.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(i) for i in range(n)])
    sizes = np.bincount(roots)
    return sorted(sizes[sizes > 0].tolist(), reverse=True)


def write_components_csv(sizes, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["component_rank", "size"])
    for rank, s in enumerate(sizes, start=1):
        w.writerow([rank, s])


def reviews_over_time(edges: EdgeList, bin: str = "month") -> Histogram:
    if len(edges) == 0:
        raise StatError("no edges to bin")
    fmt = {"day": "%Y-%m-%d", "month": "%Y-%m"}.get(bin)
    if fmt is None:
        raise StatError(f"unknown time bin {bin!r}")
    day = edges.timestamp // 86400
    days, per_day = np.unique(day, return_counts=True)
    counts: dict[str, int] = {}
    for d, c in zip(days.tolist(), per_day.tolist()):
        key = datetime.fromtimestamp(d * 86400, tz=timezone.utc).strftime(fmt)
        counts[key] = counts.get(key, 0) + c
    keys = sorted(counts)
    return Histogram(keys, [counts[k] for k in keys])


def coefficient_of_variation(hist: Histogram) -> float:
    c = np.asarray(hist.counts, dtype=np.float64)
    return float(c.std() / c.mean()) if c.mean() > 0 else 0.0


def summary(g: BipartiteGraph) -> dict:
    return {
        "users": g.n_users,
        "businesses": g.n_businesses,
        "nodes": g.n_nodes,
        "edges": g.n_edges,
        "density": g.density(),
    }
