"""Interface-conforming triangulations of a scene.

The outer curve and every inclusion boundary are polygonized, fed to a
constrained Delaunay mesher (Shewchuk's Triangle) with a minimum-angle and
maximum-area constraint, and each triangle is tagged with its phase by a
centroid membership test against the same polygons, so no triangle straddles
an interface.

Polygons are rescaled about their centroid so that their area equals the
exact area of the curve they approximate; the meshed area fraction then
matches the analytic one.

A band of structured, near-equilateral layers is laid along the outer curve
before refinement; the regular band keeps the recovered boundary flux
accurate to second order node by node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import triangle

from .scene import (DEFAULT_BOUNDARY_SAMPLES, Scene, points_in_polygon,
                    polygon_centroid, shoelace_area)

MIN_ANGLE_DEG = 30.0
MIN_INTERFACE_VERTICES = 12
# depth of the structured boundary band, in equivalent radii sqrt(|Omega| / pi)
STRIP_DEPTH = 0.1


class MeshingError(RuntimeError):
    pass


class MeshFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray          # (n, 2) float
    triangles: np.ndarray      # (m, 3) int, counterclockwise
    phase_tag: np.ndarray      # (m,) int in {1, 2}
    boundary_loop: np.ndarray  # (b,) int, counterclockwise
    h: float

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (self.h == other.h
                and np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.phase_tag, other.phase_tag)
                and np.array_equal(self.boundary_loop, other.boundary_loop))

    __hash__ = None

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def area(self) -> float:
        return float(self.signed_areas().sum())

    def phase1_fraction(self) -> float:
        a = self.signed_areas()
        return float(a[self.phase_tag == 1].sum() / a.sum())

    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def min_angle_deg(self) -> float:
        p = self.nodes[self.triangles]
        angles = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            c = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(c, -1, 1))))
        return float(np.min(angles))

    def interface_length(self) -> float:
        """Total length of edges shared by triangles of different phases."""
        tri = self.triangles
        edges = np.vstack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        tags = np.tile(self.phase_tag, 3)
        key = np.sort(edges, axis=1)
        order = np.lexsort((key[:, 1], key[:, 0]))
        key, tags = key[order], tags[order]
        same = np.all(key[1:] == key[:-1], axis=1)
        idx = np.nonzero(same & (tags[1:] != tags[:-1]))[0]
        e = key[idx]
        return float(np.linalg.norm(self.nodes[e[:, 0]] - self.nodes[e[:, 1]], axis=1).sum())


def _area_corrected(loop: np.ndarray, exact_area: float) -> np.ndarray:
    a = shoelace_area(loop)
    if a < 0:
        loop, a = loop[::-1], -a
    c = polygon_centroid(loop)
    return c + (loop - c) * math.sqrt(exact_area / a)


def _interface_loops(scene: Scene, h: float) -> list[np.ndarray]:
    loops = []
    for inc in scene.inclusions:
        n = int(math.ceil(inc.perimeter() / h))
        if n < MIN_INTERFACE_VERTICES:
            raise MeshingError(
                f"h={h} too large to resolve {inc.kind} inclusion (perimeter {inc.perimeter():.3g})")
        if inc.kind == "annulus_phase1":
            for r, raw in zip(inc.radii, inc.loops(n)):
                if math.isclose(r, scene.outer.radius):
                    continue
                loops.append(_area_corrected(raw, math.pi * r * r))
        else:
            loops.append(_area_corrected(inc.loops(n)[0], inc.area()))
    return loops


def _boundary_strip(outer: np.ndarray, interfaces: list[np.ndarray]) -> list[np.ndarray]:
    """Layers of equilateral triangles laid inward from the outer polygon.

    Each layer erects one apex on every edge of the previous layer, which gives
    a structured band about STRIP_DEPTH equivalent radii deep.  Layers stop
    early two edge lengths before an interface or if a layer degenerates.
    """
    area = shoelace_area(outer)
    edge = np.roll(outer, -1, axis=0) - outer
    mean_len = float(np.linalg.norm(edge, axis=1).mean())
    depth = STRIP_DEPTH * math.sqrt(area / math.pi)
    n_layers = max(1, int(round(depth / (0.5 * math.sqrt(3.0) * mean_len))))
    layers, cur = [], outer
    for _ in range(n_layers):
        edge = np.roll(cur, -1, axis=0) - cur
        length = np.linalg.norm(edge, axis=1)
        inward = np.column_stack([-edge[:, 1], edge[:, 0]]) / length[:, None]
        nxt = cur + 0.5 * edge + (0.5 * math.sqrt(3.0)) * length[:, None] * inward
        nlen = np.linalg.norm(np.roll(nxt, -1, axis=0) - nxt, axis=1)
        if nlen.min() < 0.5 * length.mean() or not 0 < shoelace_area(nxt) < shoelace_area(cur):
            break
        reach = 2.0 * float(length.max())
        if any(np.min(np.linalg.norm(nxt[:, None, :] - lp[None, :, :], axis=2)) < reach
               or points_in_polygon(nxt, lp).any() for lp in interfaces):
            break
        layers.append(nxt)
        cur = nxt
    return layers


def triangulate(scene: Scene, h: float, n_boundary: int = DEFAULT_BOUNDARY_SAMPLES) -> Mesh:
    """Mesh the scene with target edge length ``h``."""
    if not h > 0:
        raise MeshingError("h must be positive")
    n_out = max(n_boundary, int(math.ceil(scene.outer.perimeter() / h)))
    outer = _area_corrected(scene.outer.loops(n_out)[0], scene.outer.area())
    loops = [outer] + _interface_loops(scene, h)
    strip = _boundary_strip(outer, loops[1:])

    verts, segs, offset = [], [], 0
    for lp in loops + strip:
        k = len(lp)
        verts.append(lp)
        idx = offset + np.arange(k)
        segs.append(np.column_stack([idx, np.roll(idx, -1)]))
        offset += k
    max_area = math.sqrt(3.0) / 4.0 * h * h
    try:
        out = triangle.triangulate({"vertices": np.vstack(verts), "segments": np.vstack(segs)},
                                   f"pq{MIN_ANGLE_DEG:g}a{max_area:.15f}YQ")
    except Exception as e:  # Triangle raises bare RuntimeError on bad input
        raise MeshingError(f"triangulation failed: {e}") from e

    nodes = np.asarray(out["vertices"], dtype=float)
    tri = np.asarray(out["triangles"], dtype=np.int64)
    if len(tri) == 0:
        raise MeshingError("triangulation produced no triangles")
    p = nodes[tri]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    cw = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] < 0
    tri[cw] = tri[cw][:, [0, 2, 1]]

    cent = nodes[tri].mean(axis=1)
    tag = np.full(len(tri), 2, dtype=np.int64)
    tag[_phase1_mask(scene, loops[1:], cent, outer)] = 1

    if not np.array_equal(nodes[:n_out], outer):
        raise MeshingError("mesher moved boundary vertices")
    return Mesh(nodes, tri, tag, np.arange(n_out, dtype=np.int64), float(h))


def _phase1_mask(scene, loops, pts, outer):
    mask = np.zeros(len(pts), dtype=bool)
    it = iter(loops)
    for inc in scene.inclusions:
        if inc.kind == "annulus_phase1":
            inside = []
            for r in inc.radii:
                if math.isclose(r, scene.outer.radius):
                    inside.append(points_in_polygon(pts, outer))
                else:
                    inside.append(points_in_polygon(pts, next(it)))
            mask |= inside[0] | (inside[2] & ~inside[1])
        else:
            mask |= points_in_polygon(pts, next(it))
    return mask


# ---------------------------------------------------------------------------
# text format


def export_mesh(m: Mesh) -> str:
    lines = ["MESH2D v1", f"H {m.h!r}", f"NODES {len(m.nodes)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in m.nodes]
    lines.append(f"TRIANGLES {len(m.triangles)}")
    lines += [f"{i} {j} {k} {t}" for (i, j, k), t in zip(m.triangles.tolist(), m.phase_tag.tolist())]
    lines.append(f"BOUNDARY {len(m.boundary_loop)}")
    lines += [str(i) for i in m.boundary_loop.tolist()]
    return "\n".join(lines) + "\n"


def import_mesh(text: str, repair_orientation: bool = False) -> Mesh:
    """Parse the MESH2D text format.

    Clockwise triangles are rejected unless ``repair_orientation`` is set, in
    which case their last two vertices are swapped.  The ``H`` line is
    optional; without it ``h`` is the longest edge length.
    """
    lines = text.splitlines()
    pos = 0

    def fail(msg):
        raise MeshFormatError(f"line {pos + 1}: {msg}")

    def section(name):
        nonlocal pos
        parts = lines[pos].split() if pos < len(lines) else []
        if len(parts) != 2 or parts[0] != name:
            fail(f"expected '{name} <count>'")
        try:
            count = int(parts[1])
        except ValueError:
            fail(f"bad {name} count")
        pos += 1
        if pos + count > len(lines):
            fail(f"{name} section truncated")
        return count

    if not lines or lines[0].strip() != "MESH2D v1":
        fail("missing 'MESH2D v1' header")
    pos = 1
    h = None
    if pos < len(lines) and lines[pos].startswith("H "):
        try:
            h = float(lines[pos].split()[1])
        except (IndexError, ValueError):
            fail("bad H line")
        pos += 1

    n = section("NODES")
    nodes = np.empty((n, 2))
    for i in range(n):
        parts = lines[pos].split()
        if len(parts) != 2:
            fail("node line must be 'x y'")
        try:
            nodes[i] = float(parts[0]), float(parts[1])
        except ValueError:
            fail("non-numeric node coordinate")
        pos += 1

    m = section("TRIANGLES")
    tri = np.empty((m, 3), dtype=np.int64)
    tag = np.empty(m, dtype=np.int64)
    for i in range(m):
        parts = lines[pos].split()
        if len(parts) != 4:
            fail("triangle line must be 'i j k tag'")
        try:
            a, b, c, t = (int(v) for v in parts)
        except ValueError:
            fail("non-integer triangle entry")
        if min(a, b, c) < 0 or max(a, b, c) >= n or len({a, b, c}) < 3:
            fail("triangle references invalid nodes")
        if t not in (1, 2):
            fail("phase tag must be 1 or 2")
        d1, d2 = nodes[b] - nodes[a], nodes[c] - nodes[a]
        if d1[0] * d2[1] - d1[1] * d2[0] <= 0:
            if not repair_orientation:
                fail("clockwise or degenerate triangle")
            b, c = c, b
        tri[i] = a, b, c
        tag[i] = t
        pos += 1

    b = section("BOUNDARY")
    try:
        loop = np.array([int(lines[pos + i]) for i in range(b)], dtype=np.int64)
    except ValueError:
        fail("non-integer boundary index")
    if b and (loop.min() < 0 or loop.max() >= n):
        fail("boundary index out of range")
    if h is None:
        p = nodes[tri]
        h = float(max(np.linalg.norm(p[:, k] - p[:, (k + 1) % 3], axis=1).max() for k in range(3)))
    return Mesh(nodes, tri, tag, loop, h)
