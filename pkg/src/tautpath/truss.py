"""Surface mesh to truss network conversion."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import AnchorsCoincide, AnchorTooFar, InvalidMesh
from .mesh import TerrainMesh, require_valid

ANCHOR_REACH = 10.0  # anchors must lie within this many median edge lengths of a vertex


def segment_lengths(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Euclidean lengths of rows ``p - q``.

    Written out component-wise so every caller (and the relaxation kernel)
    rounds identically; rest lengths then match initial lengths bit for bit.
    """
    d = p - q
    return np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2])


@dataclass(frozen=True, eq=False)
class EdgeSet:
    edges: np.ndarray     # (E, 2), v_min < v_max, sorted
    parents: tuple        # per edge: tuple of 1 or 2 face indices
    lengths: np.ndarray   # (E,)

    def __len__(self):
        return len(self.edges)


def extract_edges(mesh: TerrainMesh) -> EdgeSet:
    fe = np.sort(mesh.face_edges(), axis=2)           # (F, k, 2)
    flat = fe.reshape(-1, 2)
    owner = np.repeat(np.arange(mesh.n_faces), mesh.arity)
    edges, inverse = np.unique(flat, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    order = np.lexsort((owner, inverse))
    parents = [[] for _ in range(len(edges))]
    for k in order:
        p = parents[inverse[k]]
        if not p or p[-1] != owner[k]:
            p.append(int(owner[k]))
    if any(len(p) > 2 for p in parents):
        raise InvalidMesh("edge shared by more than two faces")
    lengths = segment_lengths(mesh.vertices[edges[:, 0]], mesh.vertices[edges[:, 1]])
    if np.any(lengths <= 0):
        raise InvalidMesh("zero-length edge")
    return EdgeSet(edges.astype(np.int64), tuple(tuple(p) for p in parents), lengths)


def nearest_vertex(mesh: TerrainMesh, point) -> int:
    """Index of the closest vertex; the lowest index wins ties."""
    d = mesh.vertices - np.asarray(point, dtype=np.float64)
    return int(np.argmin(np.einsum("ij,ij->i", d, d)))


@dataclass(frozen=True, eq=False)
class TrussNetwork:
    """Axial-element network built from a surface mesh.

    Nodes ``0..n_vertices-1`` are the mesh vertices. When ``split`` is set,
    node ``n_vertices + k`` is the midpoint of parent edge ``k`` and elements
    ``2k`` / ``2k+1`` run ``v_min -> mid`` and ``mid -> v_max``.
    """

    nodes: np.ndarray      # (N, 3) undeformed positions
    elements: np.ndarray   # (M, 2) node indices
    rest: np.ndarray       # (M,) rest lengths
    parent: np.ndarray     # (M,) parent edge index
    split: bool
    anchors: tuple         # (a, b) original vertex indices

    def __post_init__(self):
        for name in ("nodes", "elements", "rest", "parent"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def n_edges(self) -> int:
        return self.n_elements // 2 if self.split else self.n_elements

    @property
    def n_vertices(self) -> int:
        return self.n_nodes - self.n_edges if self.split else self.n_nodes

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) parent edges as original-vertex pairs."""
        if self.split:
            return np.column_stack([self.elements[0::2, 0], self.elements[1::2, 1]])
        return self.elements

    @property
    def edge_lengths(self) -> np.ndarray:
        """Undeformed parent edge lengths (same rounding as the unsplit build)."""
        e = self.edges
        return segment_lengths(self.nodes[e[:, 0]], self.nodes[e[:, 1]])

    @property
    def initial_separation(self) -> float:
        a, b = self.anchors
        return float(np.linalg.norm(self.nodes[b] - self.nodes[a]))

    def to_json(self) -> str:
        doc = {
            "nodes": self.nodes.tolist(),
            "elements": [[int(i), int(j), float(r), int(p)] for (i, j), r, p
                         in zip(self.elements, self.rest, self.parent)],
            "split": bool(self.split),
            "anchors": [int(a) for a in self.anchors],
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "TrussNetwork":
        doc = json.loads(text)
        try:
            nodes = np.array(doc["nodes"], dtype=np.float64).reshape(-1, 3)
            el = doc["elements"]
            elements = np.array([[e[0], e[1]] for e in el], dtype=np.int64).reshape(-1, 2)
            rest = np.array([e[2] for e in el], dtype=np.float64)
            parent = np.array([e[3] for e in el], dtype=np.int64)
            split = bool(doc["split"])
            anchors = tuple(int(a) for a in doc["anchors"])
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            raise InvalidMesh(f"malformed network document: {exc}") from None
        if len(elements) and (elements.min() < 0 or elements.max() >= len(nodes)):
            raise InvalidMesh("element references a missing node")
        if len(anchors) != 2:
            raise InvalidMesh("network needs exactly two anchors")
        return cls(nodes, elements, rest, parent, split, anchors)


def snap_anchor(mesh: TerrainMesh, point, reach: float, name: str) -> int:
    idx = nearest_vertex(mesh, point)
    dist = float(np.linalg.norm(mesh.vertices[idx] - np.asarray(point, dtype=np.float64)))
    if dist > reach:
        raise AnchorTooFar(
            f"{name} at {tuple(round(float(c), 6) for c in point)} is {dist:.6g} m from the nearest "
            f"vertex (limit {reach:.6g} m)")
    return idx


def build_truss(mesh: TerrainMesh, split: bool, anchor_a_point, anchor_b_point) -> TrussNetwork:
    require_valid(mesh)
    es = extract_edges(mesh)
    reach = ANCHOR_REACH * float(np.median(es.lengths))
    a = snap_anchor(mesh, anchor_a_point, reach, "anchor_a")
    b = snap_anchor(mesh, anchor_b_point, reach, "anchor_b")
    if a == b:
        raise AnchorsCoincide(f"anchor_a and anchor_b both snap to vertex {a}")
    return network_from_edges(mesh, es, split, (a, b))


def network_from_edges(mesh: TerrainMesh, es: EdgeSet, split: bool, anchors) -> TrussNetwork:
    V, E = mesh.n_vertices, len(es)
    verts = mesh.vertices
    if not split:
        return TrussNetwork(verts.copy(), es.edges.copy(), es.lengths.copy(),
                            np.arange(E, dtype=np.int64), False, tuple(anchors))
    p = verts[es.edges[:, 0]]
    q = verts[es.edges[:, 1]]
    mid = 0.5 * (p + q)
    mids = V + np.arange(E, dtype=np.int64)
    elements = np.empty((2 * E, 2), dtype=np.int64)
    elements[0::2, 0] = es.edges[:, 0]
    elements[0::2, 1] = mids
    elements[1::2, 0] = mids
    elements[1::2, 1] = es.edges[:, 1]
    rest = np.empty(2 * E)
    # measured rather than halved so every element starts at exactly zero strain
    rest[0::2] = segment_lengths(p, mid)
    rest[1::2] = segment_lengths(mid, q)
    parent = np.repeat(np.arange(E, dtype=np.int64), 2)
    return TrussNetwork(np.vstack([verts, mid]), elements, rest, parent, True, tuple(anchors))
