"""Graph-distance overshoot of the great-circle quarter arc as the hemisphere mesh is refined.

Only the oracle is used here (no relaxation), so many seeds and spacings are cheap.
"""
import argparse
import math

import numpy as np

from tautpath.mesh import mesh_hemisphere
from tautpath.oracle import dijkstra, sphere_geodesic
from tautpath.truss import build_truss


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spacings", type=float, nargs="+", default=[0.1, 0.05, 0.025, 0.0125])
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    s = math.sin(math.pi / 4)
    pins = [(-s, 0.0, s), (s, 0.0, s)]
    exact = sphere_geodesic(*pins)
    print("spacing  " + "  ".join(f"seed{k:<3d}" for k in range(args.seeds)) + "   mean")
    for h in args.spacings:
        over = []
        for seed in range(args.seeds):
            net = build_truss(mesh_hemisphere(1.0, h, seed, pins), False, *pins)
            over.append(dijkstra(net, *net.anchors).distance / exact - 1)
        print(f"{h:<8g} " + "  ".join(f"{o:7.3%}" for o in over) + f"  {np.mean(over):7.3%}")


if __name__ == "__main__":
    main()
