"""Read answers off a relaxed network: taut chains, stressed regions, exports."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as sp_dijkstra

from .errors import InputError, NoChain, NotTaut
from .mesh import TerrainMesh
from .relax import SolveResult
from .truss import TrussNetwork, extract_edges, segment_lengths

EXPORT_FORMATS = ("geojson", "csv", "obj_polyline")


@dataclass(frozen=True)
class PathSolution:
    chain: tuple              # original vertex indices, anchor_a .. anchor_b
    polyline: np.ndarray      # (n, 3) undeformed positions
    length: float
    strain_profile: np.ndarray  # per segment: peak strain of the parent edge
    ambiguous: bool = False
    alternatives: tuple = ()  # alternative chains (tuples of vertex indices)
    alternative_lengths: tuple = ()
    rel_threshold: float = 0.5


@dataclass(frozen=True)
class RegionSolution:
    faces: np.ndarray         # source face indices in the region
    face_scalar: np.ndarray   # per source face: mean positive edge strain
    quantile: float
    cut: float


def polyline_length(points: np.ndarray) -> float:
    """Sum of segment lengths, accumulated in path order."""
    points = np.asarray(points, dtype=np.float64)
    if len(points) < 2:
        return 0.0
    total = 0.0
    for seg in segment_lengths(points[1:], points[:-1]):
        total += float(seg)
    return total


def path_length(solution: PathSolution) -> float:
    return polyline_length(solution.polyline)


def edge_peak_strains(result: SolveResult, network: TrussNetwork, final: bool = False):
    """Per parent edge: the larger strain of its (one or two) elements."""
    s = result.state.strains if final else result.peak_strains
    if len(s) != network.n_elements:
        raise InputError(
            f"result has {len(s)} element strains but the network has {network.n_elements}")
    if network.split:
        return np.maximum(s[0::2], s[1::2])
    return np.asarray(s)


def _chain_search(n, edges, weights, a, b):
    if len(edges) == 0:
        return math.inf, None
    g = csr_matrix((np.concatenate([weights, weights]),
                    (np.concatenate([edges[:, 0], edges[:, 1]]),
                     np.concatenate([edges[:, 1], edges[:, 0]]))), shape=(n, n))
    dist, pred = sp_dijkstra(g, directed=True, indices=a, return_predecessors=True)
    if not np.isfinite(dist[b]):
        return math.inf, None
    chain = [b]
    while chain[-1] != a:
        chain.append(int(pred[chain[-1]]))
    return float(dist[b]), chain[::-1]


def taut_edges(result: SolveResult, network: TrussNetwork, rel_threshold: float) -> np.ndarray:
    """Boolean mask over parent edges: either half reaches rel_threshold * max peak."""
    peak = edge_peak_strains(result, network)
    top = float(peak.max()) if len(peak) else 0.0
    if not top > 0:
        return np.zeros(len(peak), dtype=bool)
    return peak >= rel_threshold * top


def extract_chain(result: SolveResult, network: TrussNetwork, rel_threshold: float = 0.5,
                  alt_window: float = 0.02) -> PathSolution:
    """Shortest anchor-to-anchor chain through the taut edge set.

    Further edge-disjoint chains within ``alt_window`` of the primary length
    are reported as alternatives; the solution is ambiguous when any exist.
    """
    if result.cause != "taut":
        raise NotTaut(f"solver stopped by {result.cause}, not a taut chain")
    if not 0 < rel_threshold <= 1:
        raise InputError("rel_threshold must be in (0, 1]")
    a, b = (int(v) for v in network.anchors)
    n = network.n_vertices
    mask = taut_edges(result, network, rel_threshold)
    edges = network.edges
    lengths = network.edge_lengths
    peak = edge_peak_strains(result, network)

    sel = np.nonzero(mask)[0]
    dist, chain = _chain_search(n, edges[sel], lengths[sel], a, b)
    if chain is None:
        raise NoChain(
            f"taut set at rel_threshold {rel_threshold:g} does not connect the anchors; "
            f"retry with rel_threshold {rel_threshold / 2:g}",
            suggested_threshold=rel_threshold / 2)

    edge_index = {(int(u), int(v)): k for k, (u, v) in enumerate(edges)}

    def chain_edges(c):
        return [edge_index[(min(u, v), max(u, v))] for u, v in zip(c[:-1], c[1:])]

    primary = chain
    used = set(chain_edges(primary))
    primary_len = polyline_length(network.nodes[primary])
    alts, alt_lens = [], []
    while True:
        keep = np.array([k for k in sel if k not in used], dtype=np.int64)
        if len(keep) == 0:
            break
        _, c = _chain_search(n, edges[keep], lengths[keep], a, b)
        if c is None:
            break
        clen = polyline_length(network.nodes[c])
        if clen > (1.0 + alt_window) * primary_len:
            break
        alts.append(tuple(c))
        alt_lens.append(clen)
        used.update(chain_edges(c))

    profile = peak[chain_edges(primary)]
    return PathSolution(tuple(primary), network.nodes[primary].copy(), primary_len,
                        np.asarray(profile), bool(alts), tuple(alts), tuple(alt_lens),
                        rel_threshold)


def extract_chain_retry(result: SolveResult, network: TrussNetwork, rel_threshold: float = 0.5,
                        alt_window: float = 0.02, floor: float = 1.0 / 64) -> PathSolution:
    """:func:`extract_chain`, following each NoChain suggestion down to ``floor``."""
    while True:
        try:
            return extract_chain(result, network, rel_threshold, alt_window)
        except NoChain as exc:
            if exc.suggested_threshold is None or exc.suggested_threshold < floor:
                raise
            rel_threshold = exc.suggested_threshold


def face_edge_indices(mesh: TerrainMesh, network: TrussNetwork) -> np.ndarray:
    """(F, arity) parent-edge index of every face side."""
    es = extract_edges(mesh)
    if mesh.n_vertices != network.n_vertices or not np.array_equal(es.edges, network.edges):
        raise InputError("mesh and network do not share the same vertices and edges")
    fe = np.sort(mesh.face_edges(), axis=2)
    key = fe[..., 0] * mesh.n_vertices + fe[..., 1]
    ekey = es.edges[:, 0] * mesh.n_vertices + es.edges[:, 1]
    return np.searchsorted(ekey, key)


def extract_region(result: SolveResult, network: TrussNetwork, mesh: TerrainMesh,
                   quantile: float = 0.9) -> RegionSolution:
    """Faces whose mean positive edge strain reaches the given quantile."""
    if network.split:
        raise InputError("region extraction needs an unsplit (surface mode) network")
    if not 0 <= quantile <= 1:
        raise InputError("quantile must be in [0, 1]")
    fidx = face_edge_indices(mesh, network)
    strain = np.maximum(edge_peak_strains(result, network), 0.0)
    scalar = strain[fidx].mean(axis=1)
    cut = float(np.quantile(scalar, quantile))
    faces = np.nonzero(scalar >= cut)[0]
    return RegionSolution(faces, scalar, float(quantile), cut)


def region_to_json(region: RegionSolution) -> str:
    return json.dumps({"faces": region.faces.tolist(), "quantile": region.quantile,
                       "cut": region.cut, "face_scalar": region.face_scalar.tolist()})


def region_from_json(text: str) -> RegionSolution:
    d = json.loads(text)
    return RegionSolution(np.array(d["faces"], dtype=np.int64),
                          np.array(d["face_scalar"], dtype=np.float64), d["quantile"], d["cut"])


def _r9(v) -> float:
    return round(float(v), 9)


def export_path(solution: PathSolution, fmt: str = "geojson") -> str:
    pts = solution.polyline
    if fmt == "geojson":
        doc = {
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": [[_r9(c) for c in p] for p in pts]},
            "properties": {
                "length_m": solution.length,
                "ambiguity": solution.ambiguous,
                "chain": [int(v) for v in solution.chain],
                "strain": [float(s) for s in solution.strain_profile],
                "rel_threshold": solution.rel_threshold,
                "alternatives": [{"chain": [int(v) for v in c], "length_m": l}
                                 for c, l in zip(solution.alternatives,
                                                 solution.alternative_lengths)],
            },
        }
        return json.dumps(doc, indent=1)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "x", "y", "z", "cumulative_length", "strain"])
        seg = segment_lengths(pts[1:], pts[:-1])
        cum = 0.0
        for k, (v, p) in enumerate(zip(solution.chain, pts)):
            if k:
                cum += float(seg[k - 1])
            s = float(solution.strain_profile[k - 1]) if k else 0.0
            w.writerow([int(v)] + ["%.9f" % c for c in p] + [repr(cum), repr(s)])
        return buf.getvalue()
    if fmt == "obj_polyline":
        out = [f"# tautpath path length={solution.length!r}"]
        out += ["v %.9f %.9f %.9f" % tuple(p) for p in pts]
        out.append("l " + " ".join(str(k + 1) for k in range(len(pts))))
        return "\n".join(out) + "\n"
    raise InputError(f"unknown export format {fmt!r}; choose from {EXPORT_FORMATS}")


@dataclass(frozen=True)
class LoadedPath:
    coordinates: np.ndarray
    chain: tuple
    length: float
    ambiguous: bool


def load_path_geojson(text: str) -> LoadedPath:
    doc = json.loads(text)
    try:
        coords = np.array(doc["geometry"]["coordinates"], dtype=np.float64).reshape(-1, 3)
        props = doc.get("properties", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"not a LineString feature: {exc}") from None
    return LoadedPath(coords, tuple(props.get("chain", ())), float(props.get("length_m", math.nan)),
                      bool(props.get("ambiguity", False)))
