"""Acceptance criteria, each at its stated tolerance.

Every test records a PASS/FAIL line (see ``conftest.record``) that is printed
in the terminal summary, then asserts. Renders for region-containment misses
go to ``acceptance_artifacts/``.
"""
import functools
import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from conftest import flat_field, record
from tautpath.cli import main as cli_main, sha256
from tautpath.extract import (extract_chain, extract_chain_retry, extract_region,
                              face_edge_indices, polyline_length, taut_edges)
from tautpath.errors import NoChain, TautPathError
from tautpath.mesh import (TerrainMesh, apply_flood_mask, mesh_hemisphere, mesh_structured_quad,
                           mesh_structured_tri, mesh_unstructured)
from tautpath.oracle import count_shortest_paths, dijkstra, sphere_geodesic
from tautpath.relax import SolverParams, solve_taut
from tautpath.render import render_svg
from tautpath.terrain import Extent, TerrainSpec, synth_heightfield
from tautpath.truss import build_truss, extract_edges

pytestmark = pytest.mark.slow

ARTIFACTS = Path(__file__).resolve().parents[1] / "acceptance_artifacts"
N_RUNS = 50
SCALE = 1000.0


@dataclass
class Case:
    seed: int
    size: int
    mesh: TerrainMesh
    points: tuple
    net: object
    result: object
    solution: object
    retried: bool
    seconds: float


def fbm_case_mesh(seed: int):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(15, 26))
    spec = TerrainSpec("fbm", Extent(size, size, 1.0), amplitude=0.2 * size, octaves=4,
                       roughness=0.5, seed=seed)
    mesh = mesh_unstructured(synth_heightfield(spec), 1.0, seed)
    # anchors: two random plan points at least a third of the field apart
    while True:
        pa, pb = rng.uniform(0, size - 1, size=(2, 2))
        if np.hypot(*(pa - pb)) > (size - 1) / 3:
            break
    hf_z = lambda p: mesh.vertices[np.argmin(np.hypot(*(mesh.vertices[:, :2] - p).T)), 2]
    points = (np.array([*pa, hf_z(pa)]), np.array([*pb, hf_z(pb)]))
    return size, mesh, points


def solve_chain(mesh, points, split=True):
    net = build_truss(mesh, split, *points)
    result = solve_taut(net)
    try:
        return net, result, extract_chain(result, net), False
    except NoChain:
        return net, result, extract_chain_retry(result, net), True


@functools.lru_cache(maxsize=None)
def criterion1_cases():
    cases = []
    for seed in range(N_RUNS):
        size, mesh, points = fbm_case_mesh(seed)
        t0 = time.perf_counter()
        net, result, sol, retried = solve_chain(mesh, points)
        cases.append(Case(seed, size, mesh, points, net, result, sol, retried,
                          time.perf_counter() - t0))
    return tuple(cases)


EXTRA_RUNS = []   # (label, net, result) from other criteria, checked by criterion 6


def test_criterion_01_oracle_equivalence():
    solve_taut(build_truss(mesh_structured_tri(flat_field(3)), True, (0, 0, 0), (2, 2, 0)))
    t0 = time.perf_counter()
    cases = criterion1_cases()
    total = time.perf_counter() - t0
    bad, invalid = [], []
    for c in cases:
        d = dijkstra(c.net, *c.net.anchors).distance
        if not abs(c.solution.length - d) <= 1e-6 * d:
            bad.append((c.seed, c.solution.length / d - 1))
        # the node chain is itself a walk of network edges with that length
        edges = {tuple(e) for e in c.net.edges.tolist()}
        ch = c.solution.chain
        walk = all((min(u, v), max(u, v)) in edges for u, v in zip(ch, ch[1:]))
        relen = polyline_length(c.mesh.vertices[list(ch)])
        if not (walk and ch[0] == c.net.anchors[0] and ch[-1] == c.net.anchors[1]
                and abs(relen - d) <= 1e-6 * d):
            invalid.append(c.seed)
    slowest = max(c.seconds for c in cases)
    retried = sum(c.retried for c in cases)
    ok = not bad and not invalid and slowest < 5.0 and total < 180.0
    record(1, "oracle equivalence", ok,
           f"{len(cases) - len(bad)}/{len(cases)} within 1e-6, {len(invalid)} invalid chains, "
           f"slowest case {slowest:.2f} s, total {total:.1f} s, {retried} needed a lower "
           f"rel_threshold" + (f", misses {bad[:5]}" if bad else ""))
    assert not bad and not invalid
    assert slowest < 5.0 and total < 180.0


def test_criterion_02_structured_grid_degeneracy():
    mesh = mesh_structured_quad(flat_field(11))
    net = build_truss(mesh, True, (0, 0, 0), (10, 10, 0))
    result = solve_taut(net)
    EXTRA_RUNS.append(("flat quad 11x11", net, result))
    count = count_shortest_paths(net, *net.anchors)
    try:
        sol = extract_chain(result, net)
        nochain = False
    except NoChain:
        sol = extract_chain_retry(result, net)
        nochain = True
    chain_elements = 2 * (len(sol.chain) - 1)
    peak = result.peak_strains
    taut_elements = int(np.sum(peak >= 0.5 * peak.max()))
    clauses = {
        "ambiguity": sol.ambiguous,
        "count": count == math.comb(20, 10),
        "taut>3x chain": taut_elements > 3 * chain_elements,
    }
    record(2, "structured-grid degeneracy", all(clauses.values()),
           f"ambiguity={sol.ambiguous} (at rel_threshold {sol.rel_threshold:g}"
           f"{', default 0.5 raised NoChain' if nochain else ''}), count={count}, "
           f"taut elements at 0.5 = {taut_elements} vs 3x{chain_elements}")
    assert clauses["count"]
    assert clauses["ambiguity"]
    assert clauses["taut>3x chain"]


def test_criterion_03_aligned_diagonal():
    mesh = mesh_structured_tri(flat_field(11), "toward_ne")
    net = build_truss(mesh, True, (0, 0, 0), (10, 10, 0))
    result = solve_taut(net)
    EXTRA_RUNS.append(("flat tri 11x11", net, result))
    sol = extract_chain(result, net)
    want = 10 * math.sqrt(2)
    ok = (not sol.ambiguous and abs(sol.length - want) <= 1e-9 * want
          and count_shortest_paths(net, *net.anchors) == 1)
    record(3, "aligned-diagonal uniqueness", ok,
           f"length {sol.length!r} vs 10*sqrt(2), ambiguity={sol.ambiguous}, "
           f"{len(sol.chain)} vertices")
    assert ok


def test_criterion_04_hemisphere_geodesic():
    s = math.sin(math.pi / 4)
    pins = [(-s, 0.0, s), (s, 0.0, s)]
    exact = sphere_geodesic(*pins)
    t0 = time.perf_counter()
    over = {}
    for spacing in (0.05, 0.025):
        mesh = mesh_hemisphere(1.0, spacing, seed=0, pins=pins)
        net, result, sol, _ = solve_chain(mesh, pins)
        EXTRA_RUNS.append((f"hemisphere {spacing}", net, result))
        over[spacing] = sol.length / exact - 1.0
    seconds = time.perf_counter() - t0
    in_band = 0.0 <= over[0.05] <= 0.03
    tightens = over[0.025] <= over[0.05]
    record(4, "hemisphere geodesic", in_band and tightens and seconds < 60,
           f"overshoot {over[0.05]:.4%} at 0.05 (limit 3%), {over[0.025]:.4%} at 0.025, "
           f"{seconds:.1f} s")
    assert in_band, f"overshoot {over[0.05]:.4%} at spacing 0.05"
    assert tightens, "overshoot grew under refinement"
    assert seconds < 60


def test_criterion_05_flood_constraint():
    spec = TerrainSpec("valley", Extent(21, 21, 1.0), axis=((10.0, 0.0), (10.0, 14.0)),
                       depth=4.0, width=2.5)
    hf = synth_heightfield(spec)
    full = mesh_unstructured(hf, 1.0, seed=0)
    level = -0.5 * spec.depth
    flooded, mask = apply_flood_mask(full, level)
    z = lambda x, y: float(hf.sample_bilinear(np.array([x]), np.array([y]))[0])
    points = (np.array([2.0, 4.0, z(2, 4)]), np.array([18.0, 4.0, z(18, 4)]))
    net, result, sol, _ = solve_chain(flooded, points)
    EXTRA_RUNS.append(("flooded valley", net, result))
    source_chain = mask.new_to_old[list(sol.chain)]
    touches = len(set(source_chain.tolist()) & mask.excluded_vertices)
    d_masked = dijkstra(net, *net.anchors).distance
    full_net = build_truss(full, True, *points)
    d_full = dijkstra(full_net, *full_net.anchors).distance
    ok = (touches == 0 and abs(sol.length - d_masked) <= 1e-6 * d_masked
          and d_full < d_masked)
    record(5, "flood constraint", ok,
           f"{touches} masked vertices touched, length {sol.length:.6f} vs masked "
           f"Dijkstra {d_masked:.6f}, unmasked {d_full:.6f}")
    assert ok


def test_criterion_06_series_spring_mechanics():
    runs = [(f"fbm seed {c.seed}", c.net, c.result) for c in criterion1_cases()] + EXTRA_RUNS
    worst_series, worst_ke, failures = 0.0, 0.0, []
    for label, net, result in runs:
        s = result.state.strains
        if net.split:
            a, b = s[0::2], s[1::2]
            series = float(np.max(np.abs(a - b) / (1.0 + np.abs(a))))
            worst_series = max(worst_series, series)
        else:
            series = 0.0
        ke_limit = 1e-12 * result.params.stiffness * net.initial_separation
        ke = max(h.kinetic_energy for h in result.history)
        worst_ke = max(worst_ke, ke / ke_limit)
        if not (series < 1e-6 and ke < ke_limit):
            failures.append(label)
    ok = not failures
    record(6, "series-spring mechanics", ok,
           f"{len(runs)} runs, worst half-edge strain mismatch {worst_series:.2e}, "
           f"worst KE {worst_ke:.2f} of limit" + (f", failing {failures}" if failures else ""))
    assert ok


def test_criterion_07_scale_equivariance():
    bad = []
    worst = 0.0
    for c in criterion1_cases():
        big = TerrainMesh(c.mesh.vertices * SCALE, c.mesh.faces, c.mesh.kind)
        _, _, sol, _ = solve_chain(big, tuple(p * SCALE for p in c.points))
        rel = abs(sol.length - SCALE * c.solution.length) / (SCALE * c.solution.length)
        worst = max(worst, rel)
        if sol.chain != c.solution.chain or rel > 1e-9:
            bad.append(c.seed)
    ok = not bad
    record(7, "scale equivariance", ok,
           f"{N_RUNS - len(bad)}/{N_RUNS} identical chains, worst length error {worst:.1e}"
           + (f", differing seeds {bad}" if bad else ""))
    assert ok


def corridor_faces(mesh, net, chain):
    fidx = face_edge_indices(mesh, net)
    index = {tuple(e): k for k, e in enumerate(net.edges.tolist())}
    chain_edges = [index[(min(u, v), max(u, v))] for u, v in zip(chain, chain[1:])]
    return np.nonzero(np.isin(fidx, chain_edges).any(axis=1))[0]


# Unsplit membranes are soft out of plane; a few terrains need more than the
# default 200k iterations per phase to reach the residual tolerance.
SURFACE_PARAMS = SolverParams(max_iters=2_000_000)


def test_criterion_08_region_contains_corridor():
    hits, misses = 0, []
    for c in criterion1_cases():
        surface = build_truss(c.mesh, False, *c.points)
        try:
            result = solve_taut(surface, SURFACE_PARAMS)
        except TautPathError as exc:
            misses.append((c.seed, type(exc).__name__))
            continue
        region = extract_region(result, surface, c.mesh, 0.9)
        corridor = corridor_faces(c.mesh, surface, c.solution.chain)
        missing = np.setdiff1d(corridor, region.faces)
        if len(missing) == 0:
            hits += 1
            continue
        misses.append((c.seed, len(missing), len(corridor)))
        ARTIFACTS.mkdir(exist_ok=True)
        (ARTIFACTS / f"criterion8_seed{c.seed:02d}.svg").write_text(
            render_svg(c.mesh, surface, result.peak_strains, [c.solution.polyline],
                       region.faces))
    rate = hits / N_RUNS
    ok = rate >= 0.95
    record(8, "region contains corridor", ok,
           f"{hits}/{N_RUNS} runs ({rate:.0%}, need 95%); misses (seed, faces missing, "
           f"corridor size): {misses[:6]}{' ...' if len(misses) > 6 else ''}")
    assert ok


def test_criterion_09_manifest_replay(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    steps = [
        ["genmesh", "--kind", "fbm", "--ncols", "17", "--nrows", "17", "--amplitude", "3",
         "--seed", "21", "--mesh", "unstructured", "-o", "m.obj"],
        ["convert", "m.obj", "--anchor-a", "1,2,0", "--anchor-b", "15,14,0", "-o", "n.json"],
        ["solve", "n.json", "-o", "r.json"],
        ["extract", "r.json", "n.json", "-o", "p.geojson"],
        ["extract", "r.json", "n.json", "--format", "csv", "-o", "p.csv"],
        ["oracle", "n.json", "-o", "o.json"],
        ["compare", "p.geojson", "o.json", "-o", "cmp.json"],
        ["render", "m.obj", "--network", "n.json", "--result", "r.json", "--path", "p.geojson",
         "-o", "f.svg"],
    ]
    for argv in steps:
        assert cli_main(argv) == 0, argv
    manifests = sorted(tmp_path.glob("*.manifest.json"))
    same = []
    for man in manifests:
        outdir = tmp_path / "replay" / man.stem
        code = cli_main(["replay", str(man), "--outdir", str(outdir)])
        outputs = json.loads(man.read_text())["outputs"]
        same.append(code == 0 and all(sha256(outdir / Path(p).name) == d
                                      for p, d in outputs.items()))
    ok = len(manifests) == len(steps) and all(same)
    record(9, "determinism", ok, f"{sum(same)}/{len(manifests)} manifests replayed "
                                 f"byte-identically")
    assert ok


def test_criterion_10_conversion_counts():
    rng = np.random.default_rng(2024)
    failures = []
    for k in range(100):
        n = int(rng.integers(3, 14))
        seed = int(rng.integers(0, 2**32))
        hf = synth_heightfield(TerrainSpec("fbm", Extent(n, n, 1.0), amplitude=2.0, seed=seed))
        kind = k % 3
        if kind == 0:
            mesh = mesh_structured_quad(hf)
        elif kind == 1:
            mesh = mesh_structured_tri(hf, ("toward_ne", "toward_nw")[k % 2])
        else:
            mesh = mesh_unstructured(hf, float(rng.uniform(0.6, 1.5)), seed)
        V, E = mesh.n_vertices, len(extract_edges(mesh))
        a, b = (mesh.vertices[i] for i in rng.choice(V, 2, replace=False))
        split = build_truss(mesh, True, a, b)
        plain = build_truss(mesh, False, a, b)
        counts = (split.n_nodes, split.n_elements) == (V + E, 2 * E)
        same = dijkstra(split, *split.anchors).distance == dijkstra(plain, *plain.anchors).distance
        if not (counts and same):
            failures.append(k)
    ok = not failures
    record(10, "conversion counts", ok, f"{100 - len(failures)}/100 meshes exact"
           + (f", failing {failures}" if failures else ""))
    assert ok
