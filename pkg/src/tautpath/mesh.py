"""Surface meshes: structured and unstructured generators, OBJ I/O, flood masks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Delaunay, cKDTree

from .errors import (DegenerateTriangulation, EmptyResult, IndexOutOfRange,
                     InvalidMesh, NodataInInterior, SpacingTooCoarse,
                     UnsupportedFaceArity)
from .terrain import HeightField

KINDS = ("structured_quad", "structured_tri", "unstructured", "imported")
DUPLICATE_TOL = 1e-9
DEGENERATE_AREA = 1e-12


@dataclass(frozen=True, eq=False)
class TerrainMesh:
    """Indexed surface mesh with homogeneous triangle or quad faces.

    Construction only checks shapes and index ranges; the geometric
    invariants are reported by :func:`validate_mesh`.
    """

    vertices: np.ndarray
    faces: np.ndarray
    kind: str = "imported"

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64)
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] not in (3, 4):
            raise UnsupportedFaceArity(f"faces must be an (F, 3) or (F, 4) array, got {f.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise IndexOutOfRange(f"face index out of range for {len(v)} vertices")
        if self.kind not in KINDS:
            raise InvalidMesh(f"unknown mesh kind {self.kind!r}")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def arity(self) -> int:
        return self.faces.shape[1]

    def face_edges(self) -> np.ndarray:
        """(F, arity, 2) array of the directed boundary edges of every face."""
        f = self.faces
        return np.stack([f, np.roll(f, -1, axis=1)], axis=2)

    def unique_edges(self) -> np.ndarray:
        e = np.sort(self.face_edges().reshape(-1, 2), axis=1)
        return np.unique(e, axis=0)

    def __eq__(self, other):
        if not isinstance(other, TerrainMesh):
            return NotImplemented
        return (self.kind == other.kind and np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.faces, other.faces))


def _grid_vertices(hf: HeightField) -> np.ndarray:
    if not np.all(hf.valid):
        raise NodataInInterior("height field has nodata samples inside the meshed area")
    X, Y = np.meshgrid(hf.xs, hf.ys)
    return np.column_stack([X.ravel(), Y.ravel(), hf.samples.ravel()])


def _grid_corners(hf: HeightField):
    idx = np.arange(hf.nrows * hf.ncols).reshape(hf.nrows, hf.ncols)
    nw = idx[:-1, :-1].ravel()
    ne = idx[:-1, 1:].ravel()
    sw = idx[1:, :-1].ravel()
    se = idx[1:, 1:].ravel()
    return sw, se, ne, nw


def mesh_structured_quad(hf: HeightField) -> TerrainMesh:
    verts = _grid_vertices(hf)
    sw, se, ne, nw = _grid_corners(hf)
    return TerrainMesh(verts, np.column_stack([sw, se, ne, nw]), "structured_quad")


def mesh_structured_tri(hf: HeightField, diagonal: str = "toward_ne") -> TerrainMesh:
    """Split every grid cell in two; ``toward_ne`` cuts along SW-NE."""
    verts = _grid_vertices(hf)
    sw, se, ne, nw = _grid_corners(hf)
    if diagonal == "toward_ne":
        a = np.column_stack([sw, se, ne])
        b = np.column_stack([sw, ne, nw])
    elif diagonal == "toward_nw":
        a = np.column_stack([sw, se, nw])
        b = np.column_stack([se, ne, nw])
    else:
        raise InvalidMesh(f"diagonal must be toward_ne or toward_nw, got {diagonal!r}")
    faces = np.stack([a, b], axis=1).reshape(-1, 3)
    return TerrainMesh(verts, faces, "structured_tri")


def _signed_area2(points2d, tris):
    p = points2d[tris]
    return ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
            - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))


def _twice_area(points2d, tris):
    return np.abs(_signed_area2(points2d, tris))


def _canonical_triangles(points2d: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Orient counter-clockwise, rotate the lowest index first, sort rows."""
    cw = _signed_area2(points2d, tris) < 0
    tris = np.where(cw[:, None], tris[:, ::-1], tris)
    shift = np.argmin(tris, axis=1)
    rows = np.arange(len(tris))[:, None]
    tris = tris[rows, (shift[:, None] + np.arange(3)) % 3]
    return tris[np.lexsort(tris.T[::-1])]


def _delaunay(points2d: np.ndarray, scale: float) -> np.ndarray:
    try:
        tri = Delaunay(points2d)
    except Exception as exc:  # qhull raises QhullError for flat inputs
        raise DegenerateTriangulation(f"triangulation failed: {exc}") from None
    tris = _canonical_triangles(points2d, tri.simplices.astype(np.int64))
    # qhull may emit zero-area slivers along collinear hull points
    tris = tris[_twice_area(points2d, tris) > 1e-9 * scale * scale]
    if len(tris) == 0:
        raise DegenerateTriangulation("all sites are collinear")
    return tris


def _jittered_sites(x0, y0, width, height, spacing, rng, pins=()):
    nx = max(1, int(round(width / spacing)))
    ny = max(1, int(round(height / spacing)))
    hx, hy = width / nx, height / ny
    jit = 0.4 * min(spacing, hx, hy)
    pts = []
    for j in range(ny + 1):
        for i in range(nx + 1):
            x, y = x0 + i * hx, y0 + j * hy
            if 0 < i < nx and 0 < j < ny:
                dx, dy = rng.uniform(-jit, jit, size=2)
                x, y = x + dx, y + dy
            pts.append((x, y))
    return np.array(pts, dtype=np.float64), min(hx, hy)


def mesh_unstructured(hf: HeightField, target_spacing: float, seed: int = 0) -> TerrainMesh:
    """Delaunay mesh of jittered-grid sites, lifted by bilinear interpolation.

    Boundary sites lie on the domain rectangle without jitter; interior sites
    move by at most 0.4 * target_spacing per axis.
    """
    if not np.all(hf.valid):
        raise NodataInInterior("height field has nodata samples inside the meshed area")
    if not target_spacing > 0:
        raise SpacingTooCoarse(f"target_spacing must be positive, got {target_spacing}")
    if target_spacing >= min(hf.width, hf.height):
        raise SpacingTooCoarse(
            f"target_spacing {target_spacing} is not below the field extent "
            f"{min(hf.width, hf.height)}")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    sites, h = _jittered_sites(hf.origin_x, hf.origin_y, hf.width, hf.height,
                               target_spacing, rng)
    tris = _delaunay(sites, h)
    z = hf.sample_bilinear(sites[:, 0], sites[:, 1])
    return TerrainMesh(np.column_stack([sites, z]), tris, "unstructured")


def mesh_hemisphere(radius: float, target_spacing: float, seed: int = 0,
                    pins=(), rim: float = 0.95) -> TerrainMesh:
    """Unstructured mesh of the upper hemisphere ``|p| = radius, z >= 0``.

    Sites are a jittered grid in plan over the disc of radius ``rim*radius``
    (plus an unjittered rim ring), projected up onto the sphere. ``pins`` are
    points on the sphere that must appear as vertices, first in order.
    """
    if not 0 < target_spacing < radius:
        raise SpacingTooCoarse("target_spacing must be in (0, radius)")
    R = float(radius)
    r_max = rim * R
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    sites, h = _jittered_sites(-r_max, -r_max, 2 * r_max, 2 * r_max, target_spacing, rng)
    sites = sites[np.hypot(sites[:, 0], sites[:, 1]) < r_max - 0.5 * h]
    m = int(np.ceil(2 * np.pi * r_max / h))
    t = np.arange(m) * (2 * np.pi / m)
    ring = r_max * np.column_stack([np.cos(t), np.sin(t)])
    pins = np.asarray(pins, dtype=np.float64).reshape(-1, 3)
    if len(pins):
        if np.any(np.abs(np.linalg.norm(pins, axis=1) - R) > 1e-9 * R) or np.any(pins[:, 2] < 0):
            raise InvalidMesh("pins must lie on the upper hemisphere")
        d = np.linalg.norm(sites[:, None, :] - pins[None, :, :2], axis=2)
        sites = sites[d.min(axis=1) > 0.3 * h]
    plan = np.vstack([pins[:, :2], sites, ring])
    tris = _delaunay(plan, h)
    z = np.sqrt(np.maximum(R * R - (plan ** 2).sum(axis=1), 0.0))
    verts = np.column_stack([plan, z])
    if len(pins):
        verts[:len(pins)] = pins
    return TerrainMesh(verts, tris, "unstructured")


def load_obj(text: str) -> TerrainMesh:
    """Read ``v``/``f`` records; other records are ignored.

    A ``# tautpath kind=<kind>`` comment written by :func:`save_obj` restores
    the provenance tag, otherwise the mesh is tagged ``imported``.
    """
    verts, faces = [], []
    kind = "imported"
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "#" and len(parts) >= 3 and parts[1] == "tautpath" \
                and parts[2].startswith("kind="):
            kind = parts[2][5:]
        elif tag == "v":
            if len(parts) < 4:
                raise InvalidMesh(f"line {lineno}: vertex needs 3 coordinates")
            verts.append([float(c) for c in parts[1:4]])
        elif tag == "f":
            idx = []
            for tok in parts[1:]:
                k = int(tok.split("/")[0])
                k = k - 1 if k > 0 else len(verts) + k
                if not 0 <= k < len(verts):
                    raise IndexOutOfRange(f"line {lineno}: vertex index {tok} out of range")
                idx.append(k)
            if not 3 <= len(idx) <= 4:
                raise UnsupportedFaceArity(
                    f"line {lineno}: faces must have 3 or 4 vertices, got {len(idx)}")
            if faces and len(idx) != len(faces[0]):
                raise UnsupportedFaceArity(f"line {lineno}: mixed triangle and quad faces")
            faces.append(idx)
    if kind not in KINDS:
        kind = "imported"
    return TerrainMesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                       np.array(faces, dtype=np.int64).reshape(-1, 3 if not faces else len(faces[0])),
                       kind)


def save_obj(mesh: TerrainMesh) -> str:
    out = [f"# tautpath kind={mesh.kind}"]
    out += ["v %.9f %.9f %.9f" % tuple(p) for p in mesh.vertices]
    out += ["f " + " ".join(str(int(i) + 1) for i in f) for f in mesh.faces]
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class RegionMask:
    """Vertices removed from a mesh, plus the bookkeeping to map back.

    ``vertex_map[old] -> new`` (-1 for dropped vertices) and ``new_to_old``
    relate the masked mesh to its source; ``kept_faces`` lists surviving
    source faces in order.
    """

    excluded_vertices: frozenset
    cause: str
    level: float | None
    vertex_map: np.ndarray = field(repr=False)
    new_to_old: np.ndarray = field(repr=False)
    kept_faces: np.ndarray = field(repr=False)
    disconnected: bool | None = None


def _mask_faces(mesh: TerrainMesh, keep_faces: np.ndarray, excluded, cause, level, anchors):
    kept = np.nonzero(keep_faces)[0]
    if len(kept) == 0:
        raise EmptyResult("no face survives the mask")
    faces = mesh.faces[kept]
    used = np.zeros(mesh.n_vertices, dtype=bool)
    used[faces.ravel()] = True
    new_to_old = np.nonzero(used)[0]
    vmap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    vmap[new_to_old] = np.arange(len(new_to_old))
    out = TerrainMesh(mesh.vertices[new_to_old], vmap[faces], mesh.kind)
    disconnected = None
    if anchors is not None:
        a, b = (int(x) for x in anchors)
        if vmap[a] < 0 or vmap[b] < 0:
            disconnected = True
        else:
            _, labels = _components(out)
            disconnected = bool(labels[vmap[a]] != labels[vmap[b]])
    mask = RegionMask(frozenset(int(i) for i in excluded), cause, level, vmap,
                      new_to_old, kept, disconnected)
    return out, mask


def apply_flood_mask(mesh: TerrainMesh, level: float, anchors=None):
    """Delete every face with a vertex strictly below ``level``.

    ``anchors`` (two source vertex indices) is optional; when given the
    returned mask reports whether flooding separated them.
    """
    wet = mesh.vertices[:, 2] < level
    keep = ~np.any(wet[mesh.faces], axis=1)
    return _mask_faces(mesh, keep, np.nonzero(wet)[0], "flood_level", float(level), anchors)


def apply_vertex_mask(mesh: TerrainMesh, excluded, anchors=None):
    """Delete every face touching an explicitly excluded vertex."""
    excluded = np.asarray(sorted(set(int(i) for i in excluded)), dtype=np.int64)
    if excluded.size and (excluded.min() < 0 or excluded.max() >= mesh.n_vertices):
        raise IndexOutOfRange("excluded vertex index out of range")
    bad = np.zeros(mesh.n_vertices, dtype=bool)
    bad[excluded] = True
    keep = ~np.any(bad[mesh.faces], axis=1)
    return _mask_faces(mesh, keep, excluded, "explicit", None, anchors)


@dataclass(frozen=True)
class ValidationReport:
    duplicate_vertices: int
    nonmanifold_edges: int
    degenerate_faces: int
    components: int

    @property
    def ok(self) -> bool:
        return not (self.duplicate_vertices or self.nonmanifold_edges or self.degenerate_faces)


def _components(mesh: TerrainMesh):
    """Connected components over the face-edge graph of referenced vertices."""
    e = mesh.face_edges().reshape(-1, 2)
    n = mesh.n_vertices
    g = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    used = np.zeros(n, dtype=bool)
    used[mesh.faces.ravel()] = True
    return len(np.unique(labels[used])), labels


def face_areas(mesh: TerrainMesh) -> np.ndarray:
    v = mesh.vertices[mesh.faces]
    area = 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
    if mesh.arity == 4:
        area += 0.5 * np.linalg.norm(np.cross(v[:, 2] - v[:, 0], v[:, 3] - v[:, 0]), axis=1)
    return area


def validate_mesh(mesh: TerrainMesh) -> ValidationReport:
    dup = len(cKDTree(mesh.vertices).query_pairs(DUPLICATE_TOL)) if mesh.n_vertices else 0
    if mesh.n_faces == 0:
        return ValidationReport(dup, 0, 0, 0)
    f = np.sort(mesh.faces, axis=1)
    repeated = np.any(f[:, 1:] == f[:, :-1], axis=1)
    degenerate = int(np.sum(repeated | (face_areas(mesh) < DEGENERATE_AREA)))
    e = np.sort(mesh.face_edges().reshape(-1, 2), axis=1)
    e = e[e[:, 0] != e[:, 1]]
    _, counts = np.unique(e, axis=0, return_counts=True)
    ncomp, _ = _components(mesh)
    return ValidationReport(dup, int(np.sum(counts > 2)), degenerate, ncomp)


def require_valid(mesh: TerrainMesh) -> ValidationReport:
    report = validate_mesh(mesh)
    if not report.ok:
        raise InvalidMesh(
            f"mesh failed validation: {report.duplicate_vertices} duplicate vertices, "
            f"{report.nonmanifold_edges} non-manifold edges, "
            f"{report.degenerate_faces} degenerate faces")
    return report
