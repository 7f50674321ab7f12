"""Shared fixtures: tiny hand-built networks and seeded terrain cases."""
from types import SimpleNamespace

import numpy as np
import pytest

from tautpath.mesh import mesh_structured_quad, mesh_structured_tri, mesh_unstructured
from tautpath.terrain import Extent, TerrainSpec, synth_heightfield
from tautpath.truss import EdgeSet, TrussNetwork, network_from_edges, segment_lengths


def chain_network(n: int, split: bool = True, step=(1.0, 0.0, 0.0)) -> TrussNetwork:
    """Straight 1D chain of ``n`` edges; anchors at the two ends."""
    verts = np.arange(n + 1)[:, None] * np.asarray(step, dtype=np.float64)
    edges = np.column_stack([np.arange(n), np.arange(1, n + 1)]).astype(np.int64)
    es = EdgeSet(edges, tuple((k,) for k in range(n)),
                 segment_lengths(verts[edges[:, 0]], verts[edges[:, 1]]))
    fake = SimpleNamespace(vertices=verts, n_vertices=n + 1)
    return network_from_edges(fake, es, split, (0, n))


def flat_field(n: int, cellsize: float = 1.0):
    return synth_heightfield(TerrainSpec("flat", Extent(n, n, cellsize)))


def fbm_field(n: int, seed: int, amplitude: float = 3.0):
    return synth_heightfield(TerrainSpec("fbm", Extent(n, n, 1.0), amplitude=amplitude,
                                         octaves=4, roughness=0.5, seed=seed))


def fbm_mesh(n: int, seed: int):
    return mesh_unstructured(fbm_field(n, seed), 1.0, seed)


@pytest.fixture
def quad3():
    return mesh_structured_quad(flat_field(3))


@pytest.fixture
def tri3():
    return mesh_structured_tri(flat_field(3), "toward_ne")


@pytest.fixture
def one_triangle():
    from tautpath.mesh import TerrainMesh
    return TerrainMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


# acceptance criteria report: one line per criterion at the end of the run
ACCEPTANCE = {}


def record(number: int, title: str, ok: bool, detail: str):
    ACCEPTANCE[number] = (title, bool(ok), detail)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
