import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from conftest import fbm_mesh, flat_field
from tautpath.errors import InputError
from tautpath.extract import export_path, extract_chain, load_path_geojson
from tautpath.mesh import mesh_structured_quad
from tautpath.relax import solve_taut
from tautpath.render import HIGH, LOW, ramp, render_svg
from tautpath.truss import build_truss

SVG = "{http://www.w3.org/2000/svg}"


def test_ramp_endpoints():
    assert ramp(0) == "#2060c0" and ramp(1) == "#d02020"
    assert ramp(-1) == ramp(0) and ramp(2) == ramp(1)


def test_wireframe_parses():
    m = mesh_structured_quad(flat_field(4))
    root = ET.fromstring(render_svg(m))
    lines = root.findall(f".//{SVG}g[@id='wireframe']/{SVG}line")
    assert len(lines) == len(m.unique_edges())
    assert root.find(f".//{SVG}g[@id='world']").get("transform") == "scale(1,-1)"


def test_zero_strain_is_low_colour():
    m = mesh_structured_quad(flat_field(4))
    net = build_truss(m, True, (0, 0, 0), (3, 3, 0))
    svg = render_svg(m, net, np.zeros(net.n_elements))
    strokes = re.findall(r'<line [^>]*stroke="(#[0-9a-f]{6})"', svg)
    assert len(strokes) == net.n_elements and set(strokes) == {"#2060c0"}


def test_legend_and_peak_colour():
    m = fbm_mesh(8, 1)
    net = build_truss(m, True, m.vertices[0], m.vertices[-1])
    r = solve_taut(net)
    svg = render_svg(m, net, r.peak_strains)
    assert f"{r.peak_strains.min():.6g} .. {r.peak_strains.max():.6g}" in svg
    assert "#d02020" in re.findall(r'<line [^>]*stroke="(#[0-9a-f]{6})"', svg)


def test_path_matches_geojson():
    m = fbm_mesh(9, 6)
    net = build_truss(m, True, m.vertices[0], m.vertices[-1])
    r = solve_taut(net)
    loaded = load_path_geojson(export_path(extract_chain(r, net), "geojson"))
    root = ET.fromstring(render_svg(m, net, r.peak_strains, [loaded.coordinates]))
    poly = root.find(f".//{SVG}polyline")
    assert poly.get("stroke") == "black" and poly.get("stroke-width") == "2"
    xy = np.array([[float(c) for c in p.split(",")] for p in poly.get("points").split()])
    assert np.allclose(xy, loaded.coordinates[:, :2], rtol=0, atol=5e-10)


def test_region_faces_half_opacity():
    m = mesh_structured_quad(flat_field(4))
    root = ET.fromstring(render_svg(m, region_faces=np.array([0, 4])))
    g = root.find(f".//{SVG}g[@id='region']")
    assert g.get("fill-opacity") == "0.5" and len(g) == 2


def test_deterministic_and_inconsistent():
    m = mesh_structured_quad(flat_field(4))
    assert render_svg(m) == render_svg(m)
    other = build_truss(mesh_structured_quad(flat_field(5)), True, (0, 0, 0), (4, 4, 0))
    with pytest.raises(InputError):
        render_svg(m, other)
    net = build_truss(m, True, (0, 0, 0), (3, 3, 0))
    with pytest.raises(InputError):
        render_svg(m, net, np.zeros(3))
