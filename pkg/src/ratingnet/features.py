"""Structural features for (user, business) pairs.

Feature order (fixed):

====  ============================  ==============================================
 0    n_common_raters               other users who rated the business
 1    n_common_businesses           other businesses the user rated
 2    avg_rating_common_raters      mean over those users of their mean given stars
 3    avg_rating_common_businesses  mean over those businesses of their mean received stars
 4    pref_attachment_rating        (mean received over N(u)) * (mean given over N(b))
 5    pagerank_sum                  PR(u) + PR(b)
 6    eigencentrality_sum           EC(u) + EC(b)
 7    adamic_adar                   sum over the union of both common sets of 1/weighted degree
 8    pref_attachment_degree        deg(u) * deg(b)
====  ============================  ==============================================

Empty common sets give exactly 0 for the averages and for Adamic-Adar.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .centrality import eigenvector_centrality, pagerank
from .errors import NodeLookupError, SchemaError
from .graph import BUSINESS, USER, BipartiteGraph

FEATURE_NAMES = (
    "n_common_raters",
    "n_common_businesses",
    "avg_rating_common_raters",
    "avg_rating_common_businesses",
    "pref_attachment_rating",
    "pagerank_sum",
    "eigencentrality_sum",
    "adamic_adar",
    "pref_attachment_degree",
)
N_FEATURES = len(FEATURE_NAMES)


# ---- single-pair definitions -----------------------------------------------------

def _check_pair(g, u, b):
    g._check(USER, u)
    g._check(BUSINESS, b)


def common_raters(g: BipartiteGraph, u: int, b: int) -> set[int]:
    _check_pair(g, u, b)
    return set(g.business_neighbors(b).tolist()) - {u}


def common_businesses(g: BipartiteGraph, u: int, b: int) -> set[int]:
    _check_pair(g, u, b)
    return set(g.user_neighbors(u).tolist()) - {b}


def avg_rating_common_raters(g: BipartiteGraph, u: int, b: int) -> float:
    raters = common_raters(g, u, b)
    if not raters:
        return 0.0
    return float(np.mean([g.user_avg[v] for v in sorted(raters)]))


def avg_rating_common_businesses(g: BipartiteGraph, u: int, b: int) -> float:
    others = common_businesses(g, u, b)
    if not others:
        return 0.0
    return float(np.mean([g.business_avg[c] for c in sorted(others)]))


def pref_attachment_rating(g: BipartiteGraph, u: int, b: int) -> float:
    _check_pair(g, u, b)
    left = np.mean(g.business_avg[g.user_neighbors(u)])
    right = np.mean(g.user_avg[g.business_neighbors(b)])
    return float(left * right)


def adamic_adar(g: BipartiteGraph, u: int, b: int) -> float:
    raters = common_raters(g, u, b)
    others = common_businesses(g, u, b)
    total = sum(1.0 / g.user_wdegree[v] for v in sorted(raters))
    total += sum(1.0 / g.business_wdegree[c] for c in sorted(others))
    return float(total)


def pref_attachment_degree(g: BipartiteGraph, u: int, b: int) -> float:
    return float(g.degree(USER, u) * g.degree(BUSINESS, b))


# ---- batched featurisation -------------------------------------------------------

class FeatureContext:
    """Per-node quantities of a training graph, computed once and shared.

    Centralities dominate setup cost, so one context should be reused for the
    train, validation and test pairs.
    """

    def __init__(self, g: BipartiteGraph, pagerank_kw=None, centrality_kw=None):
        self.graph = g
        e = g.edges()
        nu, nb = g.n_users_cap, g.n_businesses_cap
        # sums of neighbour aggregates, per node
        self.raters_avg_sum = np.bincount(e.business, weights=g.user_avg[e.user], minlength=nb)
        self.businesses_avg_sum = np.bincount(e.user, weights=g.business_avg[e.business], minlength=nu)
        with np.errstate(divide="ignore"):
            inv_wu = np.where(g.user_wdegree > 0, 1.0 / g.user_wdegree, 0.0)
            inv_wb = np.where(g.business_wdegree > 0, 1.0 / g.business_wdegree, 0.0)
        self.inv_wdeg_user = inv_wu
        self.inv_wdeg_business = inv_wb
        self.raters_inv_wdeg_sum = np.bincount(e.business, weights=inv_wu[e.user], minlength=nb)
        self.businesses_inv_wdeg_sum = np.bincount(e.user, weights=inv_wb[e.business], minlength=nu)
        self.pr_user, self.pr_business = pagerank(g, **(pagerank_kw or {}))
        self.ec_user, self.ec_business = eigenvector_centrality(g, **(centrality_kw or {}))

    def compute(self, users: np.ndarray, businesses: np.ndarray) -> np.ndarray:
        g = self.graph
        u, b = users, businesses
        has = g.has_edges(u, b)
        hasf = has.astype(np.float64)
        deg_u = g.user_degree[u]
        deg_b = g.business_degree[b]

        n_cr = deg_b - has
        n_cb = deg_u - has
        out = np.empty((len(u), N_FEATURES))
        out[:, 0] = n_cr
        out[:, 1] = n_cb

        s_cr = self.raters_avg_sum[b] - hasf * g.user_avg[u]
        s_cb = self.businesses_avg_sum[u] - hasf * g.business_avg[b]
        with np.errstate(invalid="ignore", divide="ignore"):
            out[:, 2] = np.where(n_cr > 0, s_cr / np.maximum(n_cr, 1), 0.0)
            out[:, 3] = np.where(n_cb > 0, s_cb / np.maximum(n_cb, 1), 0.0)
        out[:, 4] = (self.businesses_avg_sum[u] / deg_u) * (self.raters_avg_sum[b] / deg_b)
        out[:, 5] = self.pr_user[u] + self.pr_business[b]
        out[:, 6] = self.ec_user[u] + self.ec_business[b]
        aa_r = np.where(n_cr > 0, self.raters_inv_wdeg_sum[b] - hasf * self.inv_wdeg_user[u], 0.0)
        aa_b = np.where(n_cb > 0, self.businesses_inv_wdeg_sum[u] - hasf * self.inv_wdeg_business[b], 0.0)
        out[:, 7] = aa_r + aa_b
        out[:, 8] = deg_u.astype(np.float64) * deg_b
        return out


@dataclass
class FeatureMatrix:
    user: np.ndarray
    business: np.ndarray
    X: np.ndarray
    y: np.ndarray
    names: tuple = field(default=FEATURE_NAMES)

    def __post_init__(self):
        self.user = np.asarray(self.user, dtype=np.int64)
        self.business = np.asarray(self.business, dtype=np.int64)
        X = np.asarray(self.X, dtype=np.float64)
        self.X = X if X.ndim == 2 else X.reshape(len(self.user), -1)
        self.y = np.asarray(self.y, dtype=np.float64)

    def __len__(self):
        return len(self.y)

    @property
    def width(self) -> int:
        return self.X.shape[1]


def featurize(g_train: BipartiteGraph, users, businesses, targets=None,
              context: FeatureContext | None = None, workers: int = 1,
              chunk_size: int = 65536) -> FeatureMatrix:
    """Feature rows for each pair, in input order, computed on ``g_train`` only."""
    users = np.asarray(users, dtype=np.int64)
    businesses = np.asarray(businesses, dtype=np.int64)
    targets = np.zeros(len(users)) if targets is None else np.asarray(targets, dtype=np.float64)
    if len(users) == 0:
        return FeatureMatrix(users, businesses, np.zeros((0, N_FEATURES)), targets)
    bad = ~(
        (users >= 0) & (users < g_train.n_users_cap)
        & (businesses >= 0) & (businesses < g_train.n_businesses_cap)
    )
    ok = ~bad
    bad[ok] = (g_train.user_degree[users[ok]] == 0) | (g_train.business_degree[businesses[ok]] == 0)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise NodeLookupError(
            f"pair #{k} (user={users[k]}, business={businesses[k]}) has an endpoint "
            "missing from the training graph")
    ctx = context if context is not None else FeatureContext(g_train)
    bounds = list(range(0, len(users), chunk_size)) + [len(users)]
    spans = list(zip(bounds[:-1], bounds[1:]))
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: ctx.compute(users[s[0]:s[1]], businesses[s[0]:s[1]]), spans))
    else:
        parts = [ctx.compute(users[lo:hi], businesses[lo:hi]) for lo, hi in spans]
    return FeatureMatrix(users, businesses, np.vstack(parts), targets)


def featurize_graph(g_train: BipartiteGraph, g: BipartiteGraph,
                    context: FeatureContext | None = None, workers: int = 1) -> FeatureMatrix:
    """Feature rows for every edge of ``g`` (in canonical time order), target = stars."""
    e = g.edges().sorted()
    return featurize(g_train, e.user, e.business, e.stars, context=context, workers=workers)


# ---- standardisation -------------------------------------------------------------

@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    def transform(self, m: FeatureMatrix) -> FeatureMatrix:
        if m.width != len(self.mean):
            raise SchemaError(f"standardizer has {len(self.mean)} columns, matrix has {m.width}")
        return FeatureMatrix(m.user, m.business, (m.X - self.mean) / self.scale, m.y, m.names)

    def to_json(self) -> str:
        return json.dumps({"mean": self.mean.tolist(), "scale": self.scale.tolist()}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Standardizer":
        d = json.loads(text)
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64))


def fit_standardizer(train: FeatureMatrix) -> Standardizer:
    """Zero-mean, unit sample-variance scaling fitted on training rows.

    Constant columns keep divisor 1 and are centred on their exact value, so
    they map to exact zeros.
    """
    X = train.X
    if len(X) == 0:
        raise ValueError("cannot fit a standardizer on an empty matrix")
    mean = X.mean(axis=0)
    const = np.ptp(X, axis=0) == 0
    mean[const] = X[0, const]
    std = X.std(axis=0, ddof=1) if len(X) > 1 else np.zeros(X.shape[1])
    scale = np.where(const | (std == 0), 1.0, std)
    return Standardizer(mean, scale)


def apply_standardizer(s: Standardizer, m: FeatureMatrix) -> FeatureMatrix:
    return s.transform(m)


# ---- CSV interchange -------------------------------------------------------------

def write_feature_csv(m: FeatureMatrix, fh, user_names=None, business_names=None) -> None:
    """``user_id,business_id,f1..fd,stars``; floats use shortest round-trip repr."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["user_id", "business_id"] + [f"f{i + 1}" for i in range(m.width)] + ["stars"])
    users = user_names if user_names is not None else m.user.tolist()
    businesses = business_names if business_names is not None else m.business.tolist()
    ys = m.y.tolist()
    for i, row in enumerate(m.X.tolist()):
        y = ys[i]
        w.writerow([users[i], businesses[i], *map(repr, row), int(y) if y == int(y) else repr(y)])


def read_feature_csv(fh, idmap=None) -> FeatureMatrix:
    reader = csv.reader(fh)
    header = next(reader, None)
    if not header or header[:2] != ["user_id", "business_id"] or header[-1] != "stars":
        raise SchemaError("bad feature-matrix header", 1)
    d = len(header) - 3
    users, businesses, rows, ys = [], [], [], []
    for line_no, row in enumerate(reader, start=2):
        if len(row) != d + 3:
            raise SchemaError(f"expected {d + 3} fields", line_no)
        if idmap is not None:
            users.append(idmap.users[row[0]])
            businesses.append(idmap.businesses[row[1]])
        else:
            users.append(int(row[0]))
            businesses.append(int(row[1]))
        rows.append(row[2:-1])
        ys.append(row[-1])
    X = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    names = FEATURE_NAMES if d == N_FEATURES else tuple(f"f{i + 1}" for i in range(d))
    return FeatureMatrix(users, businesses, X, np.array(ys, dtype=np.float64), names)
