"""Regular elevation grids: ESRI ASCII I/O and procedural terrain synthesis."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionMismatch, InvalidSpec, MalformedGrid,
                     MalformedHeader, NonFiniteSample)

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")
UINT64_MAX = 2**64 - 1


@dataclass(frozen=True, eq=False)
class HeightField:
    """Elevation samples on a regular grid, row 0 northernmost.

    ``origin_x``/``origin_y`` locate the south-west sample, so sample (r, c)
    sits at ``(origin_x + c*cellsize, origin_y + (nrows-1-r)*cellsize)``.
    """

    ncols: int
    nrows: int
    origin_x: float
    origin_y: float
    cellsize: float
    nodata: float
    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64)
        if self.ncols < 2 or self.nrows < 2:
            raise DimensionMismatch(f"grid must be at least 2x2, got {self.nrows}x{self.ncols}")
        if s.size != self.nrows * self.ncols:
            raise DimensionMismatch(
                f"expected {self.nrows * self.ncols} samples, got {s.size}")
        if not (self.cellsize > 0 and math.isfinite(self.cellsize)):
            raise InvalidSpec(f"cellsize must be positive, got {self.cellsize}")
        s = s.reshape(self.nrows, self.ncols)
        if not np.all(np.isfinite(s[s != self.nodata])):
            raise NonFiniteSample("grid contains non-finite samples")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def valid(self) -> np.ndarray:
        return self.samples != self.nodata

    @property
    def xs(self) -> np.ndarray:
        return self.origin_x + np.arange(self.ncols) * self.cellsize

    @property
    def ys(self) -> np.ndarray:
        """y coordinate of each row (decreasing: row 0 is north)."""
        return self.origin_y + (self.nrows - 1 - np.arange(self.nrows)) * self.cellsize

    @property
    def width(self) -> float:
        return (self.ncols - 1) * self.cellsize

    @property
    def height(self) -> float:
        return (self.nrows - 1) * self.cellsize

    def __eq__(self, other):
        if not isinstance(other, HeightField):
            return NotImplemented
        return (self.ncols, self.nrows, self.origin_x, self.origin_y, self.cellsize,
                self.nodata) == (other.ncols, other.nrows, other.origin_x, other.origin_y,
                                 other.cellsize, other.nodata) \
            and np.array_equal(self.samples, other.samples)

    def sample_bilinear(self, x, y) -> np.ndarray:
        """Bilinear interpolation at plan points; points are clamped to the grid."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        fc = np.clip((x - self.origin_x) / self.cellsize, 0.0, self.ncols - 1)
        # fractional row measured from the south edge
        fs = np.clip((y - self.origin_y) / self.cellsize, 0.0, self.nrows - 1)
        c0 = np.minimum(np.floor(fc).astype(np.int64), self.ncols - 2)
        s0 = np.minimum(np.floor(fs).astype(np.int64), self.nrows - 2)
        tx = fc - c0
        ty = fs - s0
        r0 = self.nrows - 1 - s0  # south row of the cell
        r1 = r0 - 1
        z = self.samples
        south = z[r0, c0] * (1.0 - tx) + z[r0, c0 + 1] * tx
        north = z[r1, c0] * (1.0 - tx) + z[r1, c0 + 1] * tx
        return south * (1.0 - ty) + north * ty


def load_heightfield(text: str) -> HeightField:
    """Parse an ESRI ASCII grid.

    Header keys are case-insensitive; ``xllcorner``/``yllcorner`` are taken as
    the position of the south-west sample.
    """
    lines = text.splitlines()
    header = {}
    i = 0
    while len(header) < len(HEADER_KEYS):
        if i >= len(lines):
            missing = sorted(set(HEADER_KEYS) - set(header))
            raise MalformedHeader(f"missing header keys: {', '.join(missing)}")
        parts = lines[i].split()
        i += 1
        if not parts:
            continue
        key = parts[0].lower()
        if key not in HEADER_KEYS:
            missing = sorted(set(HEADER_KEYS) - set(header))
            raise MalformedHeader(
                f"unexpected {parts[0]!r}; missing header keys: {', '.join(missing)}")
        if key in header:
            raise MalformedHeader(f"duplicate header key {parts[0]!r}")
        if len(parts) != 2:
            raise MalformedHeader(f"header line {i} must have exactly one value")
        header[key] = parts[1]
    if i < len(lines) and lines[i].split() and lines[i].split()[0].lower() in HEADER_KEYS:
        raise MalformedHeader(f"duplicate header key {lines[i].split()[0]!r}")

    try:
        ncols = int(header["ncols"])
        nrows = int(header["nrows"])
        x0 = float(header["xllcorner"])
        y0 = float(header["yllcorner"])
        cellsize = float(header["cellsize"])
        nodata = float(header["nodata_value"])
    except ValueError as exc:
        raise MalformedHeader(f"bad header value: {exc}") from None
    if not (cellsize > 0 and math.isfinite(cellsize)):
        raise MalformedHeader(f"cellsize must be positive, got {header['cellsize']}")

    tokens = " ".join(lines[i:]).split()
    if len(tokens) != nrows * ncols:
        raise DimensionMismatch(
            f"header declares {nrows}x{ncols} = {nrows * ncols} samples, found {len(tokens)}")
    try:
        values = np.array([float(t) for t in tokens], dtype=np.float64)
    except ValueError as exc:
        raise MalformedGrid(f"unparsable sample: {exc}") from None
    return HeightField(ncols, nrows, x0, y0, cellsize, nodata, values)


def save_heightfield(hf: HeightField) -> str:
    """Serialize to ESRI ASCII; samples use shortest round-trip reprs."""
    out = [
        f"ncols {hf.ncols}",
        f"nrows {hf.nrows}",
        f"xllcorner {hf.origin_x!r}",
        f"yllcorner {hf.origin_y!r}",
        f"cellsize {hf.cellsize!r}",
        f"NODATA_value {hf.nodata!r}",
    ]
    for row in hf.samples:
        out.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(out) + "\n"


@dataclass(frozen=True)
class Extent:
    ncols: int
    nrows: int
    cellsize: float


@dataclass(frozen=True)
class TerrainSpec:
    """Recipe for a synthetic terrain.

    ``kind`` selects which of the shape fields are read:

    * ``flat``
    * ``gaussian_hill``: ``center``, ``amplitude``, ``sigma``
    * ``valley``: ``axis`` (a segment, two plan points), ``depth``, ``width``
    * ``fbm``: ``octaves``, ``roughness``, ``amplitude``, ``seed``
    """

    kind: str
    extent: Extent
    origin: tuple = (0.0, 0.0)
    center: tuple | None = None
    amplitude: float = 1.0
    sigma: float = 1.0
    axis: tuple | None = None
    depth: float = 1.0
    width: float = 1.0
    octaves: int = 4
    roughness: float = 0.5
    seed: int = 0
    nodata: float = -9999.0

    KINDS = ("flat", "gaussian_hill", "valley", "fbm")

    def validate(self):
        e = self.extent
        if self.kind not in self.KINDS:
            raise InvalidSpec(f"unknown terrain kind {self.kind!r}")
        if int(e.ncols) < 2 or int(e.nrows) < 2:
            raise InvalidSpec("extent needs at least 2x2 samples")
        if not (e.cellsize > 0 and math.isfinite(e.cellsize)):
            raise InvalidSpec(f"cellsize must be positive, got {e.cellsize}")
        if not (0 <= int(self.seed) <= UINT64_MAX):
            raise InvalidSpec("seed must be a 64-bit unsigned integer")
        for name in ("amplitude", "sigma", "depth", "width", "roughness"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidSpec(f"{name} must be finite")
        if self.kind == "gaussian_hill" and not self.sigma > 0:
            raise InvalidSpec(f"sigma must be positive, got {self.sigma}")
        if self.kind == "valley":
            if not self.width > 0:
                raise InvalidSpec(f"width must be positive, got {self.width}")
            if self.axis is None or np.shape(self.axis) != (2, 2):
                raise InvalidSpec("valley axis must be two plan points [[x0,y0],[x1,y1]]")
        if self.kind == "fbm" and (self.octaves < 1 or not 0 < self.roughness <= 1):
            raise InvalidSpec("fbm needs octaves >= 1 and roughness in (0, 1]")

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "extent": {"ncols": self.extent.ncols, "nrows": self.extent.nrows,
                       "cellsize": self.extent.cellsize},
            "origin": list(self.origin),
            "seed": int(self.seed),
        }
        if self.kind == "gaussian_hill":
            d.update(center=None if self.center is None else list(self.center),
                     amplitude=self.amplitude, sigma=self.sigma)
        elif self.kind == "valley":
            d.update(axis=[list(p) for p in self.axis], depth=self.depth, width=self.width)
        elif self.kind == "fbm":
            d.update(octaves=self.octaves, roughness=self.roughness, amplitude=self.amplitude)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "TerrainSpec":
        try:
            ext = Extent(int(d["extent"]["ncols"]), int(d["extent"]["nrows"]),
                         float(d["extent"]["cellsize"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"bad or missing extent: {exc}") from None
        kw = {k: d[k] for k in ("amplitude", "sigma", "depth", "width", "roughness") if k in d}
        kw = {k: float(v) for k, v in kw.items()}
        if "octaves" in d:
            kw["octaves"] = int(d["octaves"])
        if d.get("center") is not None:
            kw["center"] = tuple(float(v) for v in d["center"])
        if d.get("axis") is not None:
            kw["axis"] = tuple(tuple(float(v) for v in p) for p in d["axis"])
        if "origin" in d:
            kw["origin"] = tuple(float(v) for v in d["origin"])
        spec = cls(kind=d.get("kind", ""), extent=ext, seed=int(d.get("seed", 0)), **kw)
        spec.validate()
        return spec

    @classmethod
    def from_json(cls, text: str) -> "TerrainSpec":
        return cls.from_dict(json.loads(text))


def _segment_distance(px, py, a, b):
    ax, ay = a
    bx, by = b
    dx, dy = bx - ax, by - ay
    ll = dx * dx + dy * dy
    if ll == 0.0:
        return np.hypot(px - ax, py - ay)
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / ll, 0.0, 1.0)
    return np.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _value_noise(u, v, cells, rng):
    """Smoothstep-interpolated lattice noise in [-1, 1] over the unit square."""
    lattice = rng.uniform(-1.0, 1.0, size=(cells + 1, cells + 1))
    fu = u * cells
    fv = v * cells
    i0 = np.minimum(np.floor(fu).astype(np.int64), cells - 1)
    j0 = np.minimum(np.floor(fv).astype(np.int64), cells - 1)
    tu = fu - i0
    tv = fv - j0
    su = tu * tu * (3.0 - 2.0 * tu)
    sv = tv * tv * (3.0 - 2.0 * tv)
    a = lattice[j0, i0] * (1 - su) + lattice[j0, i0 + 1] * su
    b = lattice[j0 + 1, i0] * (1 - su) + lattice[j0 + 1, i0 + 1] * su
    return a * (1 - sv) + b * sv


def synth_heightfield(spec: TerrainSpec) -> HeightField:
    spec.validate()
    e = spec.extent
    ncols, nrows = int(e.ncols), int(e.nrows)
    ox, oy = spec.origin
    xs = ox + np.arange(ncols) * e.cellsize
    ys = oy + (nrows - 1 - np.arange(nrows)) * e.cellsize
    X, Y = np.meshgrid(xs, ys)

    if spec.kind == "flat":
        z = np.zeros_like(X)
    elif spec.kind == "gaussian_hill":
        if spec.center is None:
            cx = ox + 0.5 * (ncols - 1) * e.cellsize
            cy = oy + 0.5 * (nrows - 1) * e.cellsize
        else:
            cx, cy = spec.center
        r2 = (X - cx) ** 2 + (Y - cy) ** 2
        z = spec.amplitude * np.exp(-r2 / (2.0 * spec.sigma ** 2))
    elif spec.kind == "valley":
        d = _segment_distance(X, Y, spec.axis[0], spec.axis[1])
        z = -spec.depth * np.exp(-d ** 2 / (2.0 * spec.width ** 2))
    else:
        rng = np.random.Generator(np.random.PCG64(int(spec.seed)))
        u = (X - ox) / max((ncols - 1) * e.cellsize, e.cellsize)
        v = (Y - oy) / max((nrows - 1) * e.cellsize, e.cellsize)
        z = np.zeros_like(X)
        weight = 1.0
        total = 0.0
        for octave in range(spec.octaves):
            z += weight * _value_noise(u, v, 2 ** (octave + 1), rng)
            total += weight
            weight *= spec.roughness
        z *= spec.amplitude / total
    return HeightField(ncols, nrows, float(ox), float(oy), float(e.cellsize),
                       spec.nodata, z)
