"""Synthetic review graphs and feature matrices for testing without Yelp data.

Graphs come from a bipartite configuration model: user and business degree
sequences are drawn from a discrete power law truncated to ``[1, n_other]``,
adjusted to the requested edge count, and stubs are paired by a seeded
shuffle. Repeated (user, business) pairs are repaired by stub swaps; any
left over are re-placed on businesses the user has not rated, so the edge
count is always met.

All draws go through integer sampling on fixed-point cumulative weights, so a
seed reproduces the same edges wherever numpy's PCG64 stream is the same.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .features import FEATURE_NAMES, FeatureMatrix
from .ingest import EdgeList, IdMap

log = logging.getLogger(__name__)

DEFAULT_RATING_PROBS = (0.05, 0.10, 0.20, 0.30, 0.35)
_FIXED_POINT = 1 << 40
_SWAP_ROUNDS = 30
_SWAP_PATIENCE = 5  # rounds without fewer duplicates before giving up


@dataclass
class SynthConfig:
    n_users: int = 1000
    n_businesses: int = 300
    n_edges: int | None = 2000
    gamma: float = 2.5
    rating_probs: tuple = DEFAULT_RATING_PROBS
    t_start: int = 1_472_000_000  # 2016-08-24
    t_end: int = 1_500_000_000
    seed: int = 0
    rating_signal: float = 0.0  # std of latent user/business offsets; 0 = i.i.d. stars
    id_prefix: tuple = field(default=("u", "b"))

    def validate(self):
        if self.n_users < 1 or self.n_businesses < 1:
            raise ConfigError("need at least one user and one business")
        if self.n_edges is not None:
            if self.n_edges < 1:
                raise ConfigError("n_edges must be positive")
            if self.n_edges > self.n_users * self.n_businesses:
                raise ConfigError(
                    f"n_edges={self.n_edges} exceeds n_users*n_businesses="
                    f"{self.n_users * self.n_businesses}")
        if not self.gamma > 1:
            raise ConfigError("power-law exponent must exceed 1")
        p = np.asarray(self.rating_probs, dtype=np.float64)
        if p.shape != (5,) or (p < 0).any() or abs(p.sum() - 1) > 1e-9:
            raise ConfigError("rating_probs must be 5 non-negative values summing to 1")
        if self.t_end <= self.t_start or self.t_start < 0:
            raise ConfigError("bad timestamp range")
        if self.rating_signal < 0:
            raise ConfigError("rating_signal must be >= 0")
        return self


def _fixed_point_cdf(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    q = np.floor(w / w.sum() * _FIXED_POINT).astype(np.int64)
    q = np.maximum(q, (w > 0).astype(np.int64))
    return np.cumsum(q)


def _draw(rng, cdf, size) -> np.ndarray:
    return np.searchsorted(cdf, rng.integers(0, cdf[-1], size), side="right")


def powerlaw_degrees(rng, n, gamma, k_max) -> np.ndarray:
    """``n`` draws from P(k) proportional to k**-gamma on 1..k_max."""
    k = np.arange(1, k_max + 1, dtype=np.float64)
    return _draw(rng, _fixed_point_cdf(k ** -gamma), n) + 1


def _fit_total(rng, deg, total, cap):
    """Adjust a degree sequence to sum to ``total`` with every entry in [0, cap].

    Increments go preferentially to high-degree nodes, which keeps the tail
    shape; decrements come from nodes above degree 1 before any node is
    removed outright.
    """
    deg = deg.copy()
    for _ in range(10_000):
        diff = total - int(deg.sum())
        if diff == 0:
            return deg
        if diff > 0:
            room = cap - deg
            w = deg * (room > 0)
            if w.sum() == 0:
                w = (room > 0).astype(np.int64)
            if w.sum() == 0:
                raise ConfigError("degree caps make the edge count infeasible")
            add = np.bincount(_draw(rng, _fixed_point_cdf(w), diff), minlength=len(deg))
            deg += np.minimum(add, room)
        else:
            excess = -diff
            spare = np.maximum(deg - 1, 0)
            if spare.sum() > 0:
                take = np.bincount(_draw(rng, _fixed_point_cdf(spare), excess), minlength=len(deg))
                deg -= np.minimum(take, spare)
            else:
                alive = np.flatnonzero(deg)
                drop = rng.permutation(alive)[:excess]
                deg[drop] = 0
    raise ConfigError("could not match the requested edge count")


def _repair_duplicates(rng, users, businesses):
    n = len(users)
    best, stale = n + 1, 0
    for _ in range(_SWAP_ROUNDS):
        order = np.lexsort((businesses, users))
        su, sb = users[order], businesses[order]
        dup_sorted = np.zeros(n, dtype=bool)
        dup_sorted[1:] = (su[1:] == su[:-1]) & (sb[1:] == sb[:-1])
        dups = order[dup_sorted]
        if len(dups) == 0:
            return users, businesses, 0
        if len(dups) < best:
            best, stale = len(dups), 0
        else:
            stale += 1
            if stale >= _SWAP_PATIENCE:
                break
        partners = rng.integers(0, n, len(dups))
        for i, j in zip(dups.tolist(), partners.tolist()):
            businesses[i], businesses[j] = businesses[j], businesses[i]
    order = np.lexsort((businesses, users))
    su, sb = users[order], businesses[order]
    dup_sorted = np.zeros(n, dtype=bool)
    dup_sorted[1:] = (su[1:] == su[:-1]) & (sb[1:] == sb[:-1])
    keep = np.ones(n, dtype=bool)
    keep[order[dup_sorted]] = False
    return users[keep], businesses[keep], int((~keep).sum())


def _replace_stubs(rng, users, businesses, lost_users, business_weights):
    """Give each lost user stub a business that user has not rated yet.

    Businesses are drawn by target degree; a user whose draws keep hitting
    existing pairs falls back to a uniform pick among its unrated businesses.
    """
    n_b = len(business_weights)
    taken = set((users * n_b + businesses).tolist())
    cdf = _fixed_point_cdf(business_weights)
    new_b = np.empty(len(lost_users), dtype=np.int64)
    for k, u in enumerate(lost_users.tolist()):
        for b in _draw(rng, cdf, 32).tolist():
            if u * n_b + b not in taken:
                break
        else:
            rated = np.fromiter((b for b in range(n_b) if u * n_b + b in taken), dtype=np.int64)
            free = np.setdiff1d(np.arange(n_b), rated)
            b = int(free[rng.integers(0, len(free))])
        taken.add(u * n_b + b)
        new_b[k] = b
    return np.concatenate([users, lost_users]), np.concatenate([businesses, new_b])


def generate(cfg: SynthConfig) -> tuple[EdgeList, IdMap]:
    """Seeded synthetic review edges (sorted by time) and their id-map."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    user_deg = powerlaw_degrees(rng, cfg.n_users, cfg.gamma, cfg.n_businesses)
    total = int(user_deg.sum()) if cfg.n_edges is None else cfg.n_edges
    total = min(total, cfg.n_users * cfg.n_businesses)
    user_deg = _fit_total(rng, user_deg, total, cfg.n_businesses)
    business_deg = powerlaw_degrees(rng, cfg.n_businesses, cfg.gamma, cfg.n_users)
    business_deg = _fit_total(rng, business_deg, total, cfg.n_users)

    users = np.repeat(np.arange(cfg.n_users), user_deg)
    businesses = rng.permutation(np.repeat(np.arange(cfg.n_businesses), business_deg))
    users, businesses, dropped = _repair_duplicates(rng, users, businesses)
    if dropped:
        # the lost stubs are exactly the per-user shortfall against user_deg
        lost = np.repeat(np.arange(cfg.n_users), user_deg - np.bincount(users, minlength=cfg.n_users))
        users, businesses = _replace_stubs(rng, users, businesses, lost, np.maximum(business_deg, 1))
        log.info("synth: re-placed %d stub(s) that swaps could not de-duplicate", dropped)
    m = len(users)

    stars = _draw(rng, _fixed_point_cdf(cfg.rating_probs), m) + 1
    if cfg.rating_signal > 0:
        offset_u = rng.normal(0.0, cfg.rating_signal, cfg.n_users)
        offset_b = rng.normal(0.0, cfg.rating_signal, cfg.n_businesses)
        shift = np.rint(offset_u[users] + offset_b[businesses]).astype(np.int64)
        stars = np.clip(stars + shift, 1, 5)
    stamps = rng.integers(cfg.t_start, cfg.t_end, m)

    # dense handles over nodes that actually received edges
    u_keep = np.flatnonzero(np.bincount(users, minlength=cfg.n_users))
    b_keep = np.flatnonzero(np.bincount(businesses, minlength=cfg.n_businesses))
    u_map = np.full(cfg.n_users, -1, dtype=np.int64)
    u_map[u_keep] = np.arange(len(u_keep))
    b_map = np.full(cfg.n_businesses, -1, dtype=np.int64)
    b_map[b_keep] = np.arange(len(b_keep))
    idmap = IdMap()
    pu, pb = cfg.id_prefix
    for i in u_keep.tolist():
        idmap.user(f"{pu}{i}")
    for j in b_keep.tolist():
        idmap.business(f"{pb}{j}")
    edges = EdgeList(u_map[users], b_map[businesses], stars, stamps).sorted()
    return edges, idmap


def generate_planted_linear(n_rows: int, weights, noise: float = 0.0, bias: float = 0.0,
                            clip: bool = False, seed: int = 0) -> FeatureMatrix:
    """Standard-normal features with ``y = X @ weights + bias + N(0, noise^2)``."""
    weights = np.asarray(weights, dtype=np.float64)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_rows, len(weights)))
    y = X @ weights + bias
    if noise > 0:
        y = y + rng.normal(0.0, noise, n_rows)
    if clip:
        y = np.clip(y, 1.0, 5.0)
    names = FEATURE_NAMES if len(weights) == len(FEATURE_NAMES) else tuple(
        f"x{i}" for i in range(len(weights)))
    idx = np.arange(n_rows)
    return FeatureMatrix(idx, idx, X, y, names)


def generate_nonlinear(n_rows: int, seed: int = 0, noise: float = 0.5,
                       n_features: int = 9) -> FeatureMatrix:
    """Integer star targets driven by interactions and saturating terms.

    A linear model can only capture part of this signal, which makes the
    capacity ordering of the model families visible.
    """
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_rows, n_features))
    latent = (3.2
              + 1.0 * np.sin(2.0 * X[:, 0])
              + 0.8 * X[:, 1] * X[:, 2]
              + 0.6 * (np.abs(X[:, 3]) - 0.8)
              + 0.5 * np.tanh(2.0 * X[:, 4])
              - 0.4 * (X[:, 5] > 0.5))
    y = np.clip(np.rint(latent + rng.normal(0.0, noise, n_rows)), 1, 5)
    idx = np.arange(n_rows)
    names = FEATURE_NAMES if n_features == len(FEATURE_NAMES) else tuple(
        f"x{i}" for i in range(n_features))
    return FeatureMatrix(idx, idx, X, y, names)
