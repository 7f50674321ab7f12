"""Exact graph answers on a truss network, used to check the relaxation solver.

On split networks the midpoint nodes are degree-2 pass-throughs, so distances
between original vertices are computed on the parent-edge graph with the
undeformed edge lengths. That keeps split and unsplit answers bitwise equal.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotOnSphere
from .truss import TrussNetwork

COUNT_SATURATION = 2**63 - 1


@dataclass(frozen=True)
class GraphDistanceResult:
    distance: float          # math.inf when unreachable
    path: tuple              # node indices a..b (empty when unreachable)
    settled: int

    @property
    def reachable(self) -> bool:
        return math.isfinite(self.distance)


@dataclass(frozen=True)
class _Graph:
    n: int
    indptr: np.ndarray
    nbr: np.ndarray
    weight: np.ndarray
    edge: np.ndarray    # edge id of each adjacency slot
    pairs: np.ndarray   # (E, 2)
    lengths: np.ndarray


def _build(n, pairs, lengths) -> _Graph:
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    w = np.concatenate([lengths, lengths])
    eid = np.concatenate([np.arange(len(pairs)), np.arange(len(pairs))])
    order = np.lexsort((dst, src))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    return _Graph(n, np.cumsum(indptr), dst[order], w[order], eid[order], pairs, lengths)


def _graph_for(network: TrussNetwork, nodes) -> _Graph:
    """Parent-edge graph when every queried node is an original vertex."""
    if network.split and all(int(v) < network.n_vertices for v in nodes):
        return _build(network.n_vertices, network.edges, network.edge_lengths)
    return _build(network.n_nodes, network.elements, network.rest)


def _expand(network: TrussNetwork, g: _Graph, path, edges):
    if not network.split or g.n != network.n_vertices:
        return tuple(path)
    out = [path[0]]
    for v, k in zip(path[1:], edges):
        out += [network.n_vertices + int(k), v]
    return tuple(out)


def _search(g: _Graph, source: int, target: int | None = None):
    """Binary-heap Dijkstra with lazy deletion; ties go to the lowest index."""
    dist = np.full(g.n, math.inf)
    pred = np.full(g.n, -1, dtype=np.int64)
    pred_edge = np.full(g.n, -1, dtype=np.int64)
    done = np.zeros(g.n, dtype=bool)
    dist[source] = 0.0
    heap = [(0.0, source)]
    settled = 0
    indptr, nbr, weight, edge = g.indptr, g.nbr, g.weight, g.edge
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        settled += 1
        if u == target:
            break
        for s in range(indptr[u], indptr[u + 1]):
            v = nbr[s]
            if done[v]:
                continue
            nd = d + weight[s]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                pred_edge[v] = edge[s]
                heapq.heappush(heap, (nd, int(v)))
            elif nd == dist[v] and u < pred[v]:
                pred[v] = u
                pred_edge[v] = edge[s]
    return dist, pred, pred_edge, settled


def _trace(pred, pred_edge, a, b):
    path, edges = [b], []
    while path[-1] != a:
        edges.append(int(pred_edge[path[-1]]))
        path.append(int(pred[path[-1]]))
    return path[::-1], edges[::-1]


def dijkstra(network: TrussNetwork, a: int, b: int) -> GraphDistanceResult:
    a, b = int(a), int(b)
    g = _graph_for(network, (a, b))
    dist, pred, pred_edge, settled = _search(g, a, b)
    if not math.isfinite(dist[b]):
        return GraphDistanceResult(math.inf, (), settled)
    path, edges = _trace(pred, pred_edge, a, b)
    return GraphDistanceResult(float(dist[b]), _expand(network, g, path, edges), settled)


def distances_from(network: TrussNetwork, source: int) -> np.ndarray:
    """Distances from ``source`` to every node of the search graph.

    For split networks and an original-vertex source the array covers the
    original vertices only.
    """
    g = _graph_for(network, (source,))
    return _search(g, int(source))[0]


def bellman_ford(network: TrussNetwork, source: int) -> np.ndarray:
    """Independent cross-check of :func:`distances_from` (same graph choice)."""
    g = _graph_for(network, (source,))
    dist = np.full(g.n, math.inf)
    dist[int(source)] = 0.0
    u, v, w = g.pairs[:, 0], g.pairs[:, 1], g.lengths
    for _ in range(g.n):
        new = dist.copy()
        np.minimum.at(new, v, dist[u] + w)
        np.minimum.at(new, u, dist[v] + w)
        if np.array_equal(new, dist):
            break
        dist = new
    return dist


def count_shortest_paths(network: TrussNetwork, a: int, b: int, rel_tol: float = 1e-9) -> int:
    """Number of a-b paths made of edges tight within ``rel_tol``.

    Returns 0 when b is unreachable; saturates at 2**63 - 1.
    """
    a, b = int(a), int(b)
    g = _graph_for(network, (a, b))
    da = _search(g, a)[0]
    db = _search(g, b)[0]
    d = da[b]
    if not math.isfinite(d):
        return 0
    bound = (1.0 + rel_tol) * d
    counts = {a: 1}
    order = np.argsort(da, kind="stable")
    for u in order:
        u = int(u)
        if not math.isfinite(da[u]) or da[u] > bound:
            break
        c = counts.get(u)
        if not c:
            continue
        for s in range(g.indptr[u], g.indptr[u + 1]):
            v = int(g.nbr[s])
            if da[v] > da[u] and da[u] + g.weight[s] + db[v] <= bound:
                counts[v] = min(counts.get(v, 0) + c, COUNT_SATURATION)
    return counts.get(b, 0)


def euclidean_bound(network: TrussNetwork, a: int, b: int) -> float:
    return float(np.linalg.norm(network.nodes[int(b)] - network.nodes[int(a)]))


def sphere_geodesic(p, q, radius: float | None = None) -> float:
    """Great-circle distance between two points on a sphere centred at the origin."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    R = float(np.linalg.norm(p)) if radius is None else float(radius)
    tol = 1e-9 * max(R, 1.0)
    if abs(np.linalg.norm(p) - R) > tol or abs(np.linalg.norm(q) - R) > tol:
        raise NotOnSphere(f"points are not on the sphere of radius {R}")
    c = float(np.dot(p, q)) / (R * R)
    return R * math.acos(min(1.0, max(-1.0, c)))
