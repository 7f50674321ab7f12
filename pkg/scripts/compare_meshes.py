"""Five mesh regimes on one hill: quad grid, aligned triangles and three unstructured densities.

Writes one strain SVG per regime and prints chain length against the graph oracle.
"""
import argparse
import math
from pathlib import Path

from tautpath.errors import NoChain
from tautpath.extract import extract_chain, extract_chain_retry, taut_edges
from tautpath.mesh import mesh_structured_quad, mesh_structured_tri, mesh_unstructured
from tautpath.oracle import count_shortest_paths, dijkstra
from tautpath.relax import solve_taut
from tautpath.render import render_svg
from tautpath.terrain import Extent, TerrainSpec, synth_heightfield
from tautpath.truss import build_truss


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--size", type=int, default=21)
    ap.add_argument("--amplitude", type=float, default=4.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/compare_meshes")
    args = ap.parse_args()

    n = args.size
    hf = synth_heightfield(TerrainSpec("gaussian_hill", Extent(n, n, 1.0),
                                       amplitude=args.amplitude, sigma=n / 6))
    regimes = {
        "quad": mesh_structured_quad(hf),
        "tri_toward_ne": mesh_structured_tri(hf, "toward_ne"),
        "unstructured_coarse": mesh_unstructured(hf, 2.0, args.seed),
        "unstructured_medium": mesh_unstructured(hf, 1.0, args.seed),
        "unstructured_fine": mesh_unstructured(hf, 0.5, args.seed),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    a, b = (0.0, 0.0, 0.0), (n - 1.0, n - 1.0, 0.0)
    print(f"{'regime':22s} {'faces':>6s} {'length':>10s} {'oracle':>10s} {'paths':>8s} "
          f"{'rel':>6s} {'ambig':>6s} {'taut':>5s}")
    for name, mesh in regimes.items():
        net = build_truss(mesh, True, a, b)
        result = solve_taut(net)
        try:
            sol = extract_chain(result, net)
        except NoChain:
            sol = extract_chain_retry(result, net)
        d = dijkstra(net, *net.anchors).distance
        count = count_shortest_paths(net, *net.anchors)
        taut = int(taut_edges(result, net, sol.rel_threshold).sum())
        print(f"{name:22s} {mesh.n_faces:6d} {sol.length:10.4f} {d:10.4f} {count:8d} "
              f"{sol.rel_threshold:6.3f} {str(sol.ambiguous):>6s} {taut:5d}")
        (out / f"{name}.svg").write_text(render_svg(mesh, net, result.peak_strains,
                                                    [sol.polyline]))
    straight = math.dist(a[:2], b[:2])
    print(f"plan-view straight line: {straight:.4f}")


if __name__ == "__main__":
    main()
