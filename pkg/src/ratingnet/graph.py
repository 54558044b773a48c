"""Immutable bipartite review graph with compressed adjacency on both sides.

Users and businesses live in separate dense index spaces sized by the id-map
(``n_users_cap`` / ``n_businesses_cap``), so train/validation/test graphs built
from one id-map share node handles. A node *exists* in a graph only if it has
at least one incident edge.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GraphError, NodeLookupError, SchemaError, SplitError
from .ingest import EdgeList

SNAPSHOT_MAGIC = "#ratingnet-graph"
SNAPSHOT_VERSION = 1

USER = "user"
BUSINESS = "business"


def _csr(rows, cols, n_rows):
    """Offsets plus a permutation sorting (row, col) ascending."""
    order = np.lexsort((cols, rows))
    counts = np.bincount(rows, minlength=n_rows)
    indptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, order


class BipartiteGraph:
    """Read-only user/business review graph.

    Adjacency is stored twice (user-major and business-major CSR) so both
    sides can be scanned in O(degree). Rating aggregates are computed once at
    construction.
    """

    def __init__(self, edges: EdgeList, n_users_cap: int | None = None,
                 n_businesses_cap: int | None = None):
        u, b = edges.user, edges.business
        if len(edges):
            if u.min() < 0 or b.min() < 0:
                raise GraphError("negative node handle")
            if edges.stars.min() < 1 or edges.stars.max() > 5:
                raise GraphError("stars outside 1..5")
        need_u = int(u.max()) + 1 if len(u) else 0
        need_b = int(b.max()) + 1 if len(b) else 0
        self.n_users_cap = max(need_u, n_users_cap or 0)
        self.n_businesses_cap = max(need_b, n_businesses_cap or 0)

        self.user_indptr, uorder = _csr(u, b, self.n_users_cap)
        self.user_nbrs = b[uorder]
        self.user_stars = edges.stars[uorder]
        self.user_ts = edges.timestamp[uorder]
        if len(edges) > 1:
            same_row = np.repeat(np.arange(self.n_users_cap), np.diff(self.user_indptr))
            dup = (same_row[1:] == same_row[:-1]) & (self.user_nbrs[1:] == self.user_nbrs[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise GraphError(f"duplicate edge (user={same_row[k]}, business={self.user_nbrs[k]})")

        self.business_indptr, border = _csr(b, u, self.n_businesses_cap)
        self.business_nbrs = u[border]
        self.business_stars = edges.stars[border]
        self.business_ts = edges.timestamp[border]

        self.user_degree = np.diff(self.user_indptr)
        self.business_degree = np.diff(self.business_indptr)
        self.user_wdegree = np.bincount(u, weights=edges.stars, minlength=self.n_users_cap)
        self.business_wdegree = np.bincount(b, weights=edges.stars, minlength=self.n_businesses_cap)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.user_avg = np.where(self.user_degree > 0,
                                     self.user_wdegree / np.maximum(self.user_degree, 1), 0.0)
            self.business_avg = np.where(self.business_degree > 0,
                                         self.business_wdegree / np.maximum(self.business_degree, 1), 0.0)
        for arr in (self.user_indptr, self.user_nbrs, self.user_stars, self.user_ts,
                    self.business_indptr, self.business_nbrs, self.business_stars,
                    self.business_ts, self.user_degree, self.business_degree,
                    self.user_wdegree, self.business_wdegree, self.user_avg, self.business_avg):
            arr.setflags(write=False)

    # ---- sizes -------------------------------------------------------------

    @property
    def n_edges(self) -> int:
        return len(self.user_nbrs)

    @cached_property
    def n_users(self) -> int:
        return int(np.count_nonzero(self.user_degree))

    @cached_property
    def n_businesses(self) -> int:
        return int(np.count_nonzero(self.business_degree))

    @property
    def n_nodes(self) -> int:
        return self.n_users + self.n_businesses

    def density(self) -> float:
        """|E| / (|U| * |B|) over present nodes."""
        denom = self.n_users * self.n_businesses
        return self.n_edges / denom if denom else 0.0

    def __repr__(self):
        return (f"BipartiteGraph(users={self.n_users}, businesses={self.n_businesses}, "
                f"edges={self.n_edges})")

    # ---- lookups -----------------------------------------------------------

    def _check(self, side, node):
        deg = self.user_degree if side == USER else self.business_degree
        if not 0 <= node < len(deg) or deg[node] == 0:
            raise NodeLookupError(f"unknown {side} {node}")

    def has_user(self, u) -> bool:
        return 0 <= u < self.n_users_cap and self.user_degree[u] > 0

    def has_business(self, b) -> bool:
        return 0 <= b < self.n_businesses_cap and self.business_degree[b] > 0

    def degree(self, side: str, node: int) -> int:
        self._check(side, node)
        return int((self.user_degree if side == USER else self.business_degree)[node])

    def weighted_degree(self, side: str, node: int) -> float:
        self._check(side, node)
        return float((self.user_wdegree if side == USER else self.business_wdegree)[node])

    def avg_rating_given(self, user: int) -> float:
        self._check(USER, user)
        return float(self.user_avg[user])

    def avg_rating_received(self, business: int) -> float:
        self._check(BUSINESS, business)
        return float(self.business_avg[business])

    def neighbors(self, side: str, node: int) -> list[tuple[int, int]]:
        """Sorted ``(neighbor, stars)`` pairs."""
        self._check(side, node)
        if side == USER:
            lo, hi = self.user_indptr[node], self.user_indptr[node + 1]
            return list(zip(self.user_nbrs[lo:hi].tolist(), self.user_stars[lo:hi].tolist()))
        lo, hi = self.business_indptr[node], self.business_indptr[node + 1]
        return list(zip(self.business_nbrs[lo:hi].tolist(), self.business_stars[lo:hi].tolist()))

    def user_neighbors(self, u) -> np.ndarray:
        return self.user_nbrs[self.user_indptr[u]:self.user_indptr[u + 1]]

    def business_neighbors(self, b) -> np.ndarray:
        return self.business_nbrs[self.business_indptr[b]:self.business_indptr[b + 1]]

    def has_edges(self, users, businesses) -> np.ndarray:
        """Vectorised membership test for (user, business) pairs."""
        users = np.asarray(users, dtype=np.int64)
        businesses = np.asarray(businesses, dtype=np.int64)
        out = np.zeros(len(users), dtype=bool)
        ok = (users >= 0) & (users < self.n_users_cap)
        if not ok.any() or self.n_edges == 0:
            return out
        keys = self._edge_keys
        q = users[ok] * self.n_businesses_cap + businesses[ok]
        pos = np.searchsorted(keys, q)
        pos_c = np.minimum(pos, len(keys) - 1)
        out[ok] = keys[pos_c] == q
        return out

    @cached_property
    def _edge_keys(self) -> np.ndarray:
        rows = np.repeat(np.arange(self.n_users_cap, dtype=np.int64), self.user_degree)
        return rows * self.n_businesses_cap + self.user_nbrs

    # ---- export ------------------------------------------------------------

    def edges(self) -> EdgeList:
        """Edges in user-major order."""
        rows = np.repeat(np.arange(self.n_users_cap, dtype=np.int64), self.user_degree)
        return EdgeList(rows, self.user_nbrs, self.user_stars, self.user_ts)

    def node_index(self):
        """Joint indexing of present nodes: users first, then businesses.

        Returns ``(user_pos, business_pos, n)`` where absent nodes map to -1.
        """
        user_pos = np.full(self.n_users_cap, -1, dtype=np.int64)
        present_u = np.flatnonzero(self.user_degree)
        user_pos[present_u] = np.arange(len(present_u))
        business_pos = np.full(self.n_businesses_cap, -1, dtype=np.int64)
        present_b = np.flatnonzero(self.business_degree)
        business_pos[present_b] = len(present_u) + np.arange(len(present_b))
        return user_pos, business_pos, len(present_u) + len(present_b)


def build_graph(edges: EdgeList, n_users_cap=None, n_businesses_cap=None) -> BipartiteGraph:
    return BipartiteGraph(edges, n_users_cap, n_businesses_cap)


@dataclass
class TemporalSplit:
    train: BipartiteGraph
    validation: BipartiteGraph
    test: BipartiteGraph
    cuts: tuple[int, int]
    dropped: EdgeList


def temporal_split(g: BipartiteGraph, train_frac: float = 0.8,
                   val_frac: float = 0.1) -> TemporalSplit:
    """Cut edges by time at the train/validation quantile boundaries.

    Edges are ordered by (timestamp, user, business). The cut timestamps are
    the timestamps of the edges at the quantile positions; edges equal to a
    cut fall into the later set, so every train timestamp is strictly below
    ``t1`` and every validation timestamp strictly below ``t2``. Validation and
    test edges touching a node absent from train are dropped.
    """
    if not (0 < train_frac and 0 < val_frac and train_frac + val_frac < 1):
        raise SplitError(f"invalid fractions ({train_frac}, {val_frac})")
    if g.n_edges == 0:
        raise SplitError("cannot split an empty graph")
    edges = g.edges().sorted()
    n = len(edges)
    ts = edges.timestamp
    i1 = int(np.floor(train_frac * n + 1e-9))
    i2 = int(np.floor((train_frac + val_frac) * n + 1e-9))
    t_end = int(ts[-1]) + 1
    t1 = int(ts[i1]) if i1 < n else t_end
    t2 = int(ts[i2]) if i2 < n else t_end
    t2 = max(t1, t2)

    train_e = edges[ts < t1]
    val_e = edges[(ts >= t1) & (ts < t2)]
    test_e = edges[ts >= t2]
    caps = (g.n_users_cap, g.n_businesses_cap)
    train = BipartiteGraph(train_e, *caps)

    def closed(part):
        keep = (train.user_degree[part.user] > 0) & (train.business_degree[part.business] > 0)
        return part[keep], part[~keep]

    val_kept, val_drop = closed(val_e)
    test_kept, test_drop = closed(test_e)
    return TemporalSplit(
        train=train,
        validation=BipartiteGraph(val_kept, *caps),
        test=BipartiteGraph(test_kept, *caps),
        cuts=(t1, t2),
        dropped=EdgeList.concat([val_drop, test_drop]),
    )


# ---- snapshot I/O -------------------------------------------------------------

def write_snapshot(g: BipartiteGraph, fh, cuts=None) -> None:
    """Text snapshot: one header line, a column header, then sorted edge rows."""
    t1, t2 = cuts if cuts is not None else ("", "")
    fh.write(f"{SNAPSHOT_MAGIC} v{SNAPSHOT_VERSION} user_cap={g.n_users_cap} "
             f"business_cap={g.n_businesses_cap} edges={g.n_edges} t1={t1} t2={t2}\n")
    fh.write("user,business,stars,unix_ts\n")
    e = g.edges().sorted()
    lines = [f"{u},{b},{s},{t}\n" for u, b, s, t in zip(
        e.user.tolist(), e.business.tolist(), e.stars.tolist(), e.timestamp.tolist())]
    fh.write("".join(lines))


def snapshot_text(g: BipartiteGraph, cuts=None) -> str:
    buf = io.StringIO()
    write_snapshot(g, buf, cuts)
    return buf.getvalue()


def read_snapshot(path_or_fh):
    """Return ``(graph, cuts)``; ``cuts`` is None when absent."""
    if isinstance(path_or_fh, (str, Path)):
        with open(path_or_fh) as fh:
            return read_snapshot(fh)
    fh = path_or_fh
    header = fh.readline().split()
    if not header or header[0] != SNAPSHOT_MAGIC:
        raise SchemaError("not a graph snapshot", 1)
    if header[1] != f"v{SNAPSHOT_VERSION}":
        raise SchemaError(f"unsupported snapshot version {header[1]}", 1)
    meta = dict(tok.split("=", 1) for tok in header[2:])
    if fh.readline().strip() != "user,business,stars,unix_ts":
        raise SchemaError("bad column header", 2)
    n = int(meta["edges"])
    data = np.loadtxt(fh, delimiter=",", dtype=np.int64, ndmin=2) if n else np.zeros((0, 4), np.int64)
    if data.shape != (n, 4):
        raise SchemaError(f"expected {n} edge rows, found {data.shape[0]}")
    g = BipartiteGraph(EdgeList(data[:, 0], data[:, 1], data[:, 2], data[:, 3]),
                       int(meta["user_cap"]), int(meta["business_cap"]))
    cuts = None
    if meta.get("t1"):
        cuts = (int(meta["t1"]), int(meta["t2"]))
    return g, cuts
