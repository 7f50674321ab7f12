"""Top-down SVG plots of meshes, strain fields, paths and regions."""
from __future__ import annotations

import numpy as np

from .errors import InputError
from .mesh import TerrainMesh

LOW = (0x20, 0x60, 0xC0)
HIGH = (0xD0, 0x20, 0x20)
WIRE = "#909090"


def ramp(t: float) -> str:
    t = min(1.0, max(0.0, float(t)))
    rgb = [int(round(lo + (hi - lo) * t)) for lo, hi in zip(LOW, HIGH)]
    return "#%02x%02x%02x" % tuple(rgb)


def _fmt(v: float) -> str:
    return "%.9f" % v


def render_svg(mesh: TerrainMesh, network=None, strains=None, paths=(), region_faces=None,
               width_px: int = 800) -> str:
    """World coordinates are kept as-is under a y-flip, so SVG numbers are metres.

    ``strains`` colours the network elements (typically peak strain);
    ``paths`` is a sequence of (n, 3) polylines; ``region_faces`` indexes
    mesh faces to fill.
    """
    if strains is not None:
        if network is None:
            raise InputError("strain colouring needs the network")
        if len(strains) != network.n_elements:
            raise InputError(f"{len(strains)} strains for {network.n_elements} elements")
    if network is not None and network.n_vertices != mesh.n_vertices:
        raise InputError(
            f"network has {network.n_vertices} vertices but the mesh has {mesh.n_vertices}")

    xy = mesh.vertices[:, :2]
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    span = max(float((hi - lo).max()), 1e-12)
    pad = 0.04 * span
    legend_h = 0.08 * span if strains is not None else 0.0
    x0, y0 = lo[0] - pad, lo[1] - pad
    w = float(hi[0] - lo[0]) + 2 * pad
    h = float(hi[1] - lo[1]) + 2 * pad + legend_h
    height_px = int(round(width_px * h / w))
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{height_px}" '
        f'viewBox="{_fmt(x0)} {_fmt(-(y0 + h))} {_fmt(w)} {_fmt(h)}">',
        f'<rect x="{_fmt(x0)}" y="{_fmt(-(y0 + h))}" width="{_fmt(w)}" height="{_fmt(h)}" '
        'fill="white"/>',
        '<g id="world" transform="scale(1,-1)">',
    ]

    if region_faces is not None and len(region_faces):
        out.append('<g id="region" fill="#d02020" fill-opacity="0.5" stroke="none">')
        for fi in region_faces:
            pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in xy[mesh.faces[int(fi)]])
            out.append(f'<polygon points="{pts}"/>')
        out.append("</g>")

    if strains is not None:
        nodes = network.nodes
        s = np.asarray(strains, dtype=np.float64)
        smin, smax = float(s.min()), float(s.max())
        scale = smax - smin
        out.append('<g id="elements" stroke-width="1.5" vector-effect="non-scaling-stroke">')
        for (i, j), v in zip(network.elements, s):
            t = (v - smin) / scale if scale > 0 else 0.0
            out.append(
                f'<line x1="{_fmt(nodes[i, 0])}" y1="{_fmt(nodes[i, 1])}" '
                f'x2="{_fmt(nodes[j, 0])}" y2="{_fmt(nodes[j, 1])}" stroke="{ramp(t)}" '
                'vector-effect="non-scaling-stroke"/>')
        out.append("</g>")
    else:
        out.append(f'<g id="wireframe" stroke="{WIRE}" stroke-width="1" fill="none">')
        for i, j in mesh.unique_edges():
            out.append(
                f'<line x1="{_fmt(xy[i, 0])}" y1="{_fmt(xy[i, 1])}" x2="{_fmt(xy[j, 0])}" '
                f'y2="{_fmt(xy[j, 1])}" vector-effect="non-scaling-stroke"/>')
        out.append("</g>")

    for k, poly in enumerate(paths):
        pts = " ".join(f"{_fmt(p[0])},{_fmt(p[1])}" for p in np.asarray(poly))
        out.append(f'<polyline class="path" id="path{k}" points="{pts}" fill="none" '
                   'stroke="black" stroke-width="2" vector-effect="non-scaling-stroke"/>')
    out.append("</g>")

    if strains is not None:
        bx, by = x0 + pad, -(y0 + h) + 0.25 * legend_h
        bw, bh = 0.4 * w, 0.3 * legend_h
        out += [
            '<defs><linearGradient id="ramp">'
            f'<stop offset="0" stop-color="{ramp(0)}"/><stop offset="1" stop-color="{ramp(1)}"/>'
            "</linearGradient></defs>",
            f'<g id="legend" font-size="{_fmt(0.35 * legend_h)}" font-family="sans-serif">',
            f'<rect x="{_fmt(bx)}" y="{_fmt(by)}" width="{_fmt(bw)}" height="{_fmt(bh)}" '
            'fill="url(#ramp)"/>',
            f'<text x="{_fmt(bx + bw + pad)}" y="{_fmt(by + bh)}">'
            f"peak strain {smin:.6g} .. {smax:.6g}</text>",
            "</g>",
        ]
    out.append("</svg>")
    return "\n".join(out) + "\n"
