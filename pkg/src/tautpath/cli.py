"""Command-line pipeline: genmesh -> convert -> solve -> extract -> oracle/compare -> render.

Every successful command that writes a file also writes ``<output>.manifest.json``
recording the resolved arguments, input and output checksums. ``replay``
re-runs a manifest and checks the outputs byte for byte.

Exit codes: 0 ok, 2 input, 3 infeasible, 4 solver, 5 extraction, 6 verification.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
from pathlib import Path


from . import __version__
from .errors import AnchorsDisconnected, InputError, TautPathError
from .extract import (EXPORT_FORMATS, extract_chain, extract_region, export_path,
                      load_path_geojson, polyline_length, region_from_json, region_to_json)
from .mesh import (apply_flood_mask, load_obj, mesh_structured_quad, mesh_structured_tri,
                   mesh_unstructured, require_valid, save_obj)
from .oracle import count_shortest_paths, dijkstra, euclidean_bound
from .relax import INTEGRATORS, SolveResult, SolverParams, solve_taut
from .render import render_svg
from .terrain import Extent, TerrainSpec, load_heightfield, synth_heightfield
from .truss import TrussNetwork, build_truss

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_SOLVER, EXIT_EXTRACT, EXIT_VERIFY = 0, 2, 3, 4, 5, 6
COMPARE_TOL = 1e-6


def sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write(path, text: str):
    Path(path).write_bytes(text.encode("utf-8"))


def _read(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _floats(text: str, n: int, what: str) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"{what} must be {n} comma-separated numbers, got {text!r}") from None
    if len(vals) != n or not all(math.isfinite(v) for v in vals):
        raise InputError(f"{what} must be {n} comma-separated finite numbers, got {text!r}")
    return vals


class Run:
    """What a command read, wrote and resolved; becomes the RunManifest."""

    def __init__(self, command: str, args: dict):
        self.command = command
        self.args = args
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.resolved: dict = {}
        self.seed = None

    def read(self, path) -> str:
        text = _read(path)
        self.inputs.append(str(path))
        return text

    def write(self, path, text: str):
        _write(path, text)
        self.outputs.append(str(path))

    def manifest(self) -> dict:
        return {
            "artifact": "tautpath",
            "version": __version__,
            "command": self.command,
            "args": self.args,
            "resolved": self.resolved,
            "seed": self.seed,
            "inputs": {p: sha256(p) for p in self.inputs},
            "outputs": {p: sha256(p) for p in self.outputs},
        }


# ---------------------------------------------------------------- commands

def cmd_genmesh(a, run: Run):
    sources = [a.spec is not None, a.heightfield is not None, a.kind is not None]
    if sum(sources) != 1:
        raise InputError("give exactly one of --spec, --heightfield or --kind")
    if a.heightfield is not None:
        hf = load_heightfield(run.read(a.heightfield))
    else:
        if a.spec is not None:
            spec = TerrainSpec.from_json(run.read(a.spec))
        else:
            kw = dict(kind=a.kind, extent=Extent(a.ncols, a.nrows, a.cellsize),
                      origin=_floats(a.origin, 2, "--origin"), amplitude=a.amplitude,
                      sigma=a.sigma, depth=a.depth, width=a.width, octaves=a.octaves,
                      roughness=a.roughness, seed=a.seed)
            if a.center is not None:
                kw["center"] = _floats(a.center, 2, "--center")
            if a.axis is not None:
                x0, y0, x1, y1 = _floats(a.axis, 4, "--axis")
                kw["axis"] = ((x0, y0), (x1, y1))
            spec = TerrainSpec(**kw)
            spec.validate()
        run.resolved["terrain"] = spec.to_dict()
        hf = synth_heightfield(spec)

    spacing = hf.cellsize if a.spacing is None else a.spacing
    if a.mesh == "quad":
        mesh = mesh_structured_quad(hf)
    elif a.mesh == "tri":
        mesh = mesh_structured_tri(hf, a.diagonal)
    else:
        mesh = mesh_unstructured(hf, spacing, a.seed)
        run.resolved["spacing"] = spacing
    run.seed = a.seed
    if a.flood_level is not None:
        mesh, mask = apply_flood_mask(mesh, a.flood_level)
        run.resolved["flooded_vertices"] = len(mask.excluded_vertices)
    report = require_valid(mesh)
    run.write(a.output, save_obj(mesh))
    print(f"{a.output}: {mesh.n_vertices} vertices, {mesh.n_faces} faces "
          f"(arity {mesh.arity}, {report.components} component(s))")
    return EXIT_OK


def cmd_convert(a, run: Run):
    mesh = load_obj(run.read(a.mesh))
    pa = _floats(a.anchor_a, 3, "--anchor-a")
    pb = _floats(a.anchor_b, 3, "--anchor-b")
    net = build_truss(mesh, a.split, pa, pb)
    run.resolved["anchors"] = list(net.anchors)
    run.write(a.output, net.to_json())
    for name, idx in zip(("anchor_a", "anchor_b"), net.anchors):
        x, y, z = mesh.vertices[idx]
        print(f"{name} -> vertex {idx} ({x:.6f}, {y:.6f}, {z:.6f})")
    print(f"{a.output}: {net.n_nodes} nodes, {net.n_elements} elements, split={net.split}")
    return EXIT_OK


SOLVER_FLAGS = ("stiffness", "mass", "damping", "dt", "dt_max", "residual_tol", "kinetic_tol",
                "max_iters", "pull_increment", "taut_strain", "max_total_stretch", "max_phases",
                "integrator")


def cmd_solve(a, run: Run):
    net = TrussNetwork.from_json(run.read(a.network))
    base = {}
    if a.params is not None:
        try:
            base = json.loads(run.read(a.params))
        except json.JSONDecodeError as exc:
            raise InputError(f"{a.params}: {exc}") from None
    for name in SOLVER_FLAGS:
        val = getattr(a, name)
        if val is not None:
            base[name] = val
    params = SolverParams.from_dict(base).resolve(net)
    run.resolved["params"] = params.to_dict()
    result = solve_taut(net, params)
    run.write(a.output, result.to_json())
    print(f"cause={result.cause} max_strain={result.max_strain:.6g} "
          f"peak_strain={result.max_peak:.6g} phases={len(result.history)}")
    return EXIT_OK


def cmd_extract(a, run: Run):
    result = SolveResult.from_json(run.read(a.result))
    net = TrussNetwork.from_json(run.read(a.network))
    if a.mode == "chain":
        sol = extract_chain(result, net, a.rel_threshold, a.alt_window)
        run.write(a.output, export_path(sol, a.format))
        print(f"length={sol.length!r} ambiguity={str(sol.ambiguous).lower()} "
              f"alternatives={len(sol.alternatives)}")
    else:
        if a.mesh is None:
            raise InputError("--mode region needs the mesh")
        mesh = load_obj(run.read(a.mesh))
        region = extract_region(result, net, mesh, a.quantile)
        run.write(a.output, region_to_json(region))
        print(f"faces={len(region.faces)} cut={region.cut!r} quantile={region.quantile:g}")
    return EXIT_OK


def cmd_oracle(a, run: Run):
    net = TrussNetwork.from_json(run.read(a.network))
    s, t = net.anchors
    res = dijkstra(net, s, t)
    if not res.reachable:
        raise AnchorsDisconnected(f"no path joins anchors {s} and {t}")
    doc = {
        "anchors": [int(s), int(t)],
        "distance": res.distance,
        "path": [int(v) for v in res.path],
        "vertex_path": [int(v) for v in res.path if v < net.n_vertices],
        "euclidean_bound": euclidean_bound(net, s, t),
        "shortest_path_count": count_shortest_paths(net, s, t),
        "settled": res.settled,
    }
    run.write(a.output, json.dumps(doc, indent=1))
    print(f"distance={res.distance!r} euclidean_bound={doc['euclidean_bound']!r} "
          f"count={doc['shortest_path_count']}")
    return EXIT_OK


def cmd_compare(a, run: Run):
    path = load_path_geojson(run.read(a.path))
    try:
        oracle = json.loads(run.read(a.oracle))
        d = float(oracle["distance"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{a.oracle}: not an oracle document ({exc})") from None
    length = polyline_length(path.coordinates)
    rel = abs(length - d) / d if d > 0 else abs(length - d)
    ok = rel <= a.tol
    print(f"length={length!r} oracle={d!r} relative_difference={rel:.3e} "
          f"{'PASS' if ok else 'FAIL'}")
    if a.output is not None:
        run.write(a.output, json.dumps({"length": length, "oracle_distance": d,
                                        "relative_difference": rel, "tolerance": a.tol,
                                        "pass": ok}, indent=1))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_render(a, run: Run):
    mesh = load_obj(run.read(a.mesh))
    net = TrussNetwork.from_json(run.read(a.network)) if a.network else None
    strains = None
    if a.result is not None:
        if net is None:
            raise InputError("--result needs --network")
        result = SolveResult.from_json(run.read(a.result))
        if len(result.state.positions) != net.n_nodes:
            raise InputError(f"result has {len(result.state.positions)} nodes but the "
                             f"network has {net.n_nodes}")
        strains = result.peak_strains
    paths = [load_path_geojson(run.read(p)).coordinates for p in a.path]
    faces = None
    if a.region is not None:
        faces = region_from_json(run.read(a.region)).faces
        if len(faces) and (faces.min() < 0 or faces.max() >= mesh.n_faces):
            raise InputError("region references faces the mesh does not have")
    run.write(a.output, render_svg(mesh, net, strains, paths, faces))
    print(f"{a.output}: rendered {mesh.n_faces} faces, {len(paths)} path(s)")
    return EXIT_OK


def cmd_replay(a, run: Run):
    try:
        man = json.loads(_read(a.manifest))
        command, args = man["command"], dict(man["args"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{a.manifest}: not a run manifest ({exc})") from None
    for p, digest in man.get("inputs", {}).items():
        if not Path(p).exists() or sha256(p) != digest:
            raise InputError(f"input {p} is missing or has changed since the run")
    outdir = Path(a.outdir) if a.outdir else Path(tempfile.mkdtemp(prefix="tautpath-replay-"))
    outdir.mkdir(parents=True, exist_ok=True)
    recorded = man.get("outputs", {})
    redirect = {p: str(outdir / Path(p).name) for p in recorded}
    if args.get("output") in redirect:
        args["output"] = redirect[args["output"]]
    sub = Run(command, args)
    with open(os.devnull, "w") as sink:
        saved, sys.stdout = sys.stdout, sink
        try:
            COMMANDS[command](argparse.Namespace(**args), sub)
        finally:
            sys.stdout = saved
    same = True
    for p, digest in recorded.items():
        got = sha256(redirect[p])
        match = got == digest
        same &= match
        print(f"{'MATCH' if match else 'DIFFER'} {p} -> {redirect[p]}")
    print("replay " + ("identical" if same else "differs"))
    return EXIT_OK if same else EXIT_VERIFY


COMMANDS = {
    "genmesh": cmd_genmesh, "convert": cmd_convert, "solve": cmd_solve,
    "extract": cmd_extract, "oracle": cmd_oracle, "compare": cmd_compare,
    "render": cmd_render, "replay": cmd_replay,
}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tautpath", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"tautpath {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("genmesh", help="synthesize or load terrain and mesh it")
    g.add_argument("--spec", help="TerrainSpec JSON")
    g.add_argument("--heightfield", help="ESRI ASCII grid")
    g.add_argument("--kind", choices=TerrainSpec.KINDS, help="inline terrain kind")
    g.add_argument("--ncols", type=int, default=21)
    g.add_argument("--nrows", type=int, default=21)
    g.add_argument("--cellsize", type=float, default=1.0)
    g.add_argument("--origin", default="0,0", help="x,y of the south-west sample")
    g.add_argument("--center", help="x,y of the hill centre (default: middle)")
    g.add_argument("--amplitude", type=float, default=1.0)
    g.add_argument("--sigma", type=float, default=1.0)
    g.add_argument("--axis", help="valley axis x0,y0,x1,y1")
    g.add_argument("--depth", type=float, default=1.0)
    g.add_argument("--width", type=float, default=1.0)
    g.add_argument("--octaves", type=int, default=4)
    g.add_argument("--roughness", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--mesh", choices=("quad", "tri", "unstructured"), default="tri")
    g.add_argument("--diagonal", choices=("toward_ne", "toward_nw"), default="toward_ne")
    g.add_argument("--spacing", type=float, help="unstructured site spacing (default cellsize)")
    g.add_argument("--flood-level", type=float, help="drop faces with a vertex below this z")
    g.add_argument("-o", "--output", required=True)

    c = sub.add_parser("convert", help="mesh to truss network")
    c.add_argument("mesh")
    c.add_argument("--split", action=argparse.BooleanOptionalAction, default=True)
    c.add_argument("--anchor-a", required=True, help="x,y,z")
    c.add_argument("--anchor-b", required=True, help="x,y,z")
    c.add_argument("-o", "--output", required=True)

    s = sub.add_parser("solve", help="pull the anchors apart until a chain is taut")
    s.add_argument("network")
    s.add_argument("--params", help="SolverParams JSON; flags override it")
    for name in SOLVER_FLAGS:
        flag = "--" + name.replace("_", "-")
        if name == "integrator":
            s.add_argument(flag, choices=INTEGRATORS)
        elif name in ("max_iters", "max_phases"):
            s.add_argument(flag, type=int)
        else:
            s.add_argument(flag, type=float)
    s.add_argument("-o", "--output", required=True)

    e = sub.add_parser("extract", help="read a chain or region off a solve result")
    e.add_argument("result")
    e.add_argument("network")
    e.add_argument("mesh", nargs="?")
    e.add_argument("--mode", choices=("chain", "region"), default="chain")
    e.add_argument("--rel-threshold", type=float, default=0.5)
    e.add_argument("--alt-window", type=float, default=0.02)
    e.add_argument("--quantile", type=float, default=0.9)
    e.add_argument("--format", choices=EXPORT_FORMATS, default="geojson")
    e.add_argument("-o", "--output", required=True)

    o = sub.add_parser("oracle", help="exact graph distance between the anchors")
    o.add_argument("network")
    o.add_argument("-o", "--output", required=True)

    m = sub.add_parser("compare", help="check a path file against an oracle file")
    m.add_argument("path")
    m.add_argument("oracle")
    m.add_argument("--tol", type=float, default=COMPARE_TOL)
    m.add_argument("-o", "--output", help="optional JSON report")

    r = sub.add_parser("render", help="top-down SVG")
    r.add_argument("mesh")
    r.add_argument("--network")
    r.add_argument("--result")
    r.add_argument("--path", action="append", default=[])
    r.add_argument("--region")
    r.add_argument("-o", "--output", required=True)

    y = sub.add_parser("replay", help="re-run a manifest and byte-compare its outputs")
    y.add_argument("manifest")
    y.add_argument("--outdir", help="where to write replayed outputs (default: a temp dir)")
    return p


_PATH_ARGS = ("spec", "heightfield", "mesh", "network", "result", "params", "path", "oracle",
              "region", "output")


def _absolute(args: dict) -> dict:
    """Absolute input/output paths so a manifest replays from any directory."""
    out = dict(args)
    for k in _PATH_ARGS:
        v = out.get(k)
        if isinstance(v, list):
            out[k] = [str(Path(p).resolve()) for p in v]
        elif isinstance(v, str) and not (k == "mesh" and out.get("command") == "genmesh"):
            out[k] = str(Path(v).resolve())
    return out


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    command = ns.command
    args = _absolute(vars(ns))
    args.pop("command")
    run = Run(command, args)
    try:
        code = COMMANDS[command](argparse.Namespace(**args), run)
    except TautPathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if command != "replay" and run.outputs:
        _write(run.outputs[0] + ".manifest.json", json.dumps(run.manifest(), indent=1) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
