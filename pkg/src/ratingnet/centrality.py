"""Global node scores on the unweighted, undirected view of a review graph."""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, GraphError
from .graph import BipartiteGraph


def _joint_edges(g: BipartiteGraph):
    user_pos, business_pos, n = g.node_index()
    e = g.edges()
    return user_pos, business_pos, n, user_pos[e.user], business_pos[e.business]


def _split_scores(g, user_pos, business_pos, x):
    users = np.zeros(g.n_users_cap)
    businesses = np.zeros(g.n_businesses_cap)
    mu = user_pos >= 0
    mb = business_pos >= 0
    users[mu] = x[user_pos[mu]]
    businesses[mb] = x[business_pos[mb]]
    return users, businesses


def pagerank(g: BipartiteGraph, damping: float = 0.85, tol: float = 1e-9,
             max_iter: int = 200):
    """PageRank with uniform teleport; each review acts as two directed links.

    Every present node has degree >= 1, so there are no dangling nodes.
    Iterates until the L1 change drops below ``tol``.

    Returns ``(user_scores, business_scores)`` indexed by node handle; absent
    nodes score 0.
    """
    if g.n_edges == 0:
        raise GraphError("pagerank of an empty graph")
    user_pos, business_pos, n, src, dst = _joint_edges(g)
    deg = np.bincount(src, minlength=n) + np.bincount(dst, minlength=n)
    inv_deg = 1.0 / deg
    x = np.full(n, 1.0 / n)
    teleport = (1.0 - damping) / n
    residual = np.inf
    for it in range(1, max_iter + 1):
        share = x * inv_deg
        flow = np.bincount(dst, weights=share[src], minlength=n)
        flow += np.bincount(src, weights=share[dst], minlength=n)
        x_new = teleport + damping * flow
        residual = float(np.abs(x_new - x).sum())
        x = x_new
        if residual < tol:
            break
    else:
        raise ConvergenceError(
            f"pagerank did not converge in {max_iter} iterations (residual {residual:.3g})",
            residual=residual, iterations=max_iter)
    x /= x.sum()
    return _split_scores(g, user_pos, business_pos, x)


def eigenvector_centrality(g: BipartiteGraph, tol: float = 1e-9, max_iter: int = 1000):
    """Leading eigenvector of the adjacency matrix, L2-normalised, non-negative.

    Power iteration runs on ``A + I``: a bipartite adjacency has eigenvalues in
    +/- pairs, which makes plain iteration on ``A`` oscillate. Converged when
    the L1 change is below ``n * tol``.
    """
    if g.n_edges == 0:
        raise GraphError("eigenvector centrality of an empty graph")
    user_pos, business_pos, n, src, dst = _joint_edges(g)
    x = np.full(n, 1.0 / np.sqrt(n))
    residual = np.inf
    for it in range(1, max_iter + 1):
        x_new = x + np.bincount(dst, weights=x[src], minlength=n)
        x_new += np.bincount(src, weights=x[dst], minlength=n)
        x_new /= np.linalg.norm(x_new)
        residual = float(np.abs(x_new - x).sum())
        x = x_new
        if residual < n * tol:
            break
    else:
        raise ConvergenceError(
            f"eigenvector centrality did not converge in {max_iter} iterations "
            f"(residual {residual:.3g})", residual=residual, iterations=max_iter)
    return _split_scores(g, user_pos, business_pos, x)
