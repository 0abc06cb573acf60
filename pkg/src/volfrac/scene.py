"""Bodies, inclusions and two-phase complex conductivities.

A :class:`Scene` is an outer closed curve (the body) containing phase-1
inclusions embedded in a phase-2 background.  Everything here is immutable;
shapes know their exact area, can be sampled as counterclockwise polygons and
can test point membership.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq

DEFAULT_BOUNDARY_SAMPLES = 512


class SceneError(ValueError):
    """Invalid scene geometry or configuration."""


class AdmissibilityError(SceneError):
    """The conductivity pair violates the admissibility conditions."""


# ---------------------------------------------------------------------------
# conductivities


@dataclass(frozen=True)
class PhasePair:
    sigma1: complex
    sigma2: complex

    def __post_init__(self):
        object.__setattr__(self, "sigma1", complex(self.sigma1))
        object.__setattr__(self, "sigma2", complex(self.sigma2))

    def swapped(self) -> "PhasePair":
        return PhasePair(self.sigma2, self.sigma1)


def validate_phases(p: PhasePair) -> list[str]:
    """Return the list of violated admissibility conditions (empty if ok)."""
    s1, s2 = p.sigma1, p.sigma2
    violations = []
    if not s1.real > 0:
        violations.append("Re(sigma1) <= 0")
    if not s2.real > 0:
        violations.append("Re(sigma2) <= 0")
    if math.isclose(abs(s1), abs(s2), rel_tol=1e-12, abs_tol=0.0):
        violations.append("|sigma1| == |sigma2|")
    # Im(s1/s2) has the sign of Im(s1*conj(s2))
    cross = s1.imag * s2.real - s1.real * s2.imag
    if abs(cross) <= 1e-14 * abs(s1) * abs(s2):
        violations.append("sigma1/sigma2 is real")
    return violations


def require_admissible(p: PhasePair) -> None:
    violations = validate_phases(p)
    if violations:
        raise AdmissibilityError("inadmissible conductivities: " + "; ".join(violations))


# ---------------------------------------------------------------------------
# geometry helpers


def shoelace_area(points: np.ndarray) -> float:
    """Signed area of a closed polygon (positive when counterclockwise)."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd ray casting membership test, vectorized over ``points``."""
    px = np.asarray(points, dtype=float)[:, 0][:, None]
    py = np.asarray(points, dtype=float)[:, 1][:, None]
    x0, y0 = poly[:, 0][None, :], poly[:, 1][None, :]
    x1, y1 = np.roll(poly[:, 0], -1)[None, :], np.roll(poly[:, 1], -1)[None, :]
    straddle = (y0 > py) != (y1 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
    hits = straddle & (px < xcross)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def polygon_perimeter(points: np.ndarray) -> float:
    return float(np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1).sum())


def _circle_points(center, radius, n, start=0.0):
    w = start + 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(w), center[1] + radius * np.sin(w)])


def _lens_area(r1: float, r2: float, d: float) -> float:
    """Area of the intersection of two disks with radii r1, r2 and center distance d."""
    if d >= r1 + r2:
        return 0.0
    if d <= abs(r1 - r2):
        return math.pi * min(r1, r2) ** 2
    a1 = r1 * r1 * math.acos((d * d + r1 * r1 - r2 * r2) / (2 * d * r1))
    a2 = r2 * r2 * math.acos((d * d + r2 * r2 - r1 * r1) / (2 * d * r2))
    k = math.sqrt((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2))
    return a1 + a2 - 0.5 * k


# ---------------------------------------------------------------------------
# shapes


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float
    kind: str = field(default="disk", init=False, repr=False)

    def area(self) -> float:
        return math.pi * self.radius**2

    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius

    def loops(self, n: int) -> list[np.ndarray]:
        return [_circle_points(self.center, self.radius, n)]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.asarray(pts) - np.asarray(self.center)
        return np.einsum("ij,ij->i", d, d) < self.radius**2

    def to_dict(self) -> dict:
        return {"kind": "disk", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    a: float
    b: float
    angle: float = 0.0
    kind: str = field(default="ellipse", init=False, repr=False)

    def area(self) -> float:
        return math.pi * self.a * self.b

    def perimeter(self) -> float:
        # Ramanujan's second approximation
        a, b = self.a, self.b
        hh = ((a - b) / (a + b)) ** 2
        return math.pi * (a + b) * (1 + 3 * hh / (10 + math.sqrt(4 - 3 * hh)))

    def loops(self, n: int) -> list[np.ndarray]:
        w = 2.0 * np.pi * np.arange(n) / n
        c, s = math.cos(self.angle), math.sin(self.angle)
        x, y = self.a * np.cos(w), self.b * np.sin(w)
        return [np.column_stack([self.center[0] + c * x - s * y, self.center[1] + s * x + c * y])]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.asarray(pts) - np.asarray(self.center)
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = c * d[:, 0] + s * d[:, 1]
        v = -s * d[:, 0] + c * d[:, 1]
        return (u / self.a) ** 2 + (v / self.b) ** 2 < 1.0

    def to_dict(self) -> dict:
        return {"kind": "ellipse", "center": list(self.center), "a": self.a, "b": self.b,
                "angle": self.angle}


@dataclass(frozen=True)
class Polygon:
    points: tuple[tuple[float, float], ...]
    kind: str = field(default="polygon", init=False, repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise SceneError("polygon needs at least 3 points [x, y]")
        if shoelace_area(pts) < 0:
            pts = pts[::-1]
        object.__setattr__(self, "points", tuple(map(tuple, pts.tolist())))

    def area(self) -> float:
        return shoelace_area(np.asarray(self.points))

    def perimeter(self) -> float:
        return polygon_perimeter(np.asarray(self.points))

    def loops(self, n: int) -> list[np.ndarray]:
        # resample each edge so that the loop has roughly n vertices
        pts = np.asarray(self.points)
        edges = np.roll(pts, -1, axis=0) - pts
        lengths = np.linalg.norm(edges, axis=1)
        per = lengths.sum()
        out = []
        for p0, e, ln in zip(pts, edges, lengths):
            k = max(1, int(math.ceil(n * ln / per)))
            t = np.arange(k)[:, None] / k
            out.append(p0 + t * e)
        return [np.vstack(out)]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return points_in_polygon(pts, np.asarray(self.points))

    def to_dict(self) -> dict:
        return {"kind": "polygon", "points": [list(p) for p in self.points]}


@dataclass(frozen=True)
class Star:
    """Star-shaped curve rho(w) = radius * (1 + amplitude * cos(lobes * w))."""

    center: tuple[float, float]
    radius: float
    amplitude: float
    lobes: int
    kind: str = field(default="star", init=False, repr=False)

    def __post_init__(self):
        if not 0 <= self.amplitude < 1:
            raise SceneError("star amplitude must lie in [0, 1)")

    def rho(self, w):
        return self.radius * (1.0 + self.amplitude * np.cos(self.lobes * w))

    def area(self) -> float:
        return math.pi * self.radius**2 * (1.0 + 0.5 * self.amplitude**2)

    def perimeter(self) -> float:
        return polygon_perimeter(self.loops(4096)[0])

    def loops(self, n: int) -> list[np.ndarray]:
        w = 2.0 * np.pi * np.arange(n) / n
        r = self.rho(w)
        return [np.column_stack([self.center[0] + r * np.cos(w), self.center[1] + r * np.sin(w)])]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.asarray(pts) - np.asarray(self.center)
        return np.hypot(d[:, 0], d[:, 1]) < self.rho(np.arctan2(d[:, 1], d[:, 0]))

    def to_dict(self) -> dict:
        return {"kind": "star", "center": list(self.center), "radius": self.radius,
                "amplitude": self.amplitude, "lobes": self.lobes}


@dataclass(frozen=True)
class Crescent:
    """Set difference ``outer \\ inner`` of two overlapping disks."""

    outer: Disk
    inner: Disk
    kind: str = field(default="crescent", init=False, repr=False)

    def __post_init__(self):
        d = math.dist(self.outer.center, self.inner.center)
        ro, ri = self.outer.radius, self.inner.radius
        if not abs(ro - ri) < d < ro + ri:
            raise SceneError("crescent disks must overlap without nesting")

    def _tips(self):
        co, ci = np.asarray(self.outer.center), np.asarray(self.inner.center)
        ro, ri = self.outer.radius, self.inner.radius
        d = float(np.linalg.norm(ci - co))
        u = (ci - co) / d
        along = (ro * ro - ri * ri + d * d) / (2 * d)
        off = math.sqrt(ro * ro - along * along)
        perp = np.array([-u[1], u[0]])
        return co + along * u + off * perp, co + along * u - off * perp

    def area(self) -> float:
        d = math.dist(self.outer.center, self.inner.center)
        return self.outer.area() - _lens_area(self.outer.radius, self.inner.radius, d)

    def perimeter(self) -> float:
        return polygon_perimeter(self.loops(4096)[0])

    def loops(self, n: int) -> list[np.ndarray]:
        co, ci = np.asarray(self.outer.center), np.asarray(self.inner.center)
        ro, ri = self.outer.radius, self.inner.radius
        t_left, t_right = self._tips()
        # outer arc: ccw from the left tip to the right tip, around the side
        # facing away from the inner disk
        a0 = math.atan2(*(t_left - co)[::-1])
        a1 = math.atan2(*(t_right - co)[::-1])
        if a1 <= a0:
            a1 += 2 * math.pi
        # inner arc: cw from the right tip back to the left tip, inside the outer disk
        b0 = math.atan2(*(t_right - ci)[::-1])
        b1 = math.atan2(*(t_left - ci)[::-1])
        if b1 >= b0:
            b1 -= 2 * math.pi
        len_o, len_i = ro * (a1 - a0), ri * (b0 - b1)
        no = max(3, int(round(n * len_o / (len_o + len_i))))
        ni = max(3, n - no)
        wo = a0 + (a1 - a0) * np.arange(no) / no
        wi = b0 + (b1 - b0) * np.arange(ni) / ni
        outer = co + ro * np.column_stack([np.cos(wo), np.sin(wo)])
        inner = ci + ri * np.column_stack([np.cos(wi), np.sin(wi)])
        return [np.vstack([outer, inner])]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.outer.contains(pts) & ~self.inner.contains(pts)

    def to_dict(self) -> dict:
        return {"kind": "crescent", "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class AnnulusPhase1:
    """Concentric layers about the origin: phase 1 in rho < R1 and R2 < rho < R3."""

    radii: tuple[float, float, float]
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="annulus_phase1", init=False, repr=False)

    def __post_init__(self):
        r = tuple(float(v) for v in self.radii)
        if len(r) != 3 or not 0 < r[0] < r[1] < r[2]:
            raise SceneError("annulus_phase1 radii must satisfy 0 < R1 < R2 < R3")
        object.__setattr__(self, "radii", r)

    def area(self) -> float:
        r1, r2, r3 = self.radii
        return math.pi * (r1 * r1 + r3 * r3 - r2 * r2)

    def perimeter(self) -> float:
        return 2 * math.pi * sum(self.radii)

    def loops(self, n: int) -> list[np.ndarray]:
        total = sum(self.radii)
        return [_circle_points(self.center, r, max(8, int(round(n * r / total))))
                for r in self.radii]

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.asarray(pts) - np.asarray(self.center)
        rr = np.einsum("ij,ij->i", d, d)
        r1, r2, r3 = self.radii
        return (rr < r1 * r1) | ((rr > r2 * r2) & (rr < r3 * r3))

    def to_dict(self) -> dict:
        return {"kind": "annulus_phase1", "radii": list(self.radii)}


Shape = Union[Disk, Ellipse, Polygon, Star, Crescent, AnnulusPhase1]
OUTER_KINDS = ("disk", "ellipse", "polygon", "star")


# ---------------------------------------------------------------------------
# scenes


@dataclass(frozen=True)
class Scene:
    name: str
    outer: Shape
    inclusions: tuple[Shape, ...]
    phases: PhasePair

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple(self.inclusions))
        if self.outer.kind not in OUTER_KINDS:
            raise SceneError(f"outer boundary cannot be a {self.outer.kind!r}")

    def phase1(self, pts: np.ndarray) -> np.ndarray:
        """Membership of points in phase 1 (the union of the inclusions)."""
        pts = np.asarray(pts, dtype=float)
        mask = np.zeros(len(pts), dtype=bool)
        for inc in self.inclusions:
            mask |= inc.contains(pts)
        return mask

    def is_layered_disk(self) -> bool:
        """True when the scene is a concentric layered disk about the origin."""
        if self.outer.kind != "disk" or tuple(self.outer.center) != (0.0, 0.0):
            return False
        if len(self.inclusions) != 1:
            return False
        inc = self.inclusions[0]
        if inc.kind == "disk":
            return tuple(inc.center) == (0.0, 0.0)
        return inc.kind == "annulus_phase1" and tuple(inc.center) == (0.0, 0.0)


def _check_geometry(s: Scene, n: int = 256) -> None:
    outer_poly = s.outer.loops(4 * n)[0]
    samples = []
    for inc in s.inclusions:
        if inc.kind == "annulus_phase1":
            if not (s.outer.kind == "disk" and inc.radii[2] <= s.outer.radius * (1 + 1e-12)):
                raise SceneError("annulus layers must fit inside a disk-shaped body")
            samples.append(None)
            continue
        pts = np.vstack(inc.loops(n))
        if not s.outer.contains(pts).all() or not points_in_polygon(pts, outer_poly).all():
            raise SceneError(f"inclusion {inc.kind!r} is not inside the outer boundary")
        samples.append(pts)
    for i, a in enumerate(s.inclusions):
        for j in range(i + 1, len(s.inclusions)):
            b = s.inclusions[j]
            if samples[i] is None or samples[j] is None:
                raise SceneError("annulus layers cannot be combined with other inclusions")
            if b.contains(samples[i]).any() or a.contains(samples[j]).any():
                raise SceneError(f"inclusions {i} and {j} overlap")


def area_fraction(s: Scene, check: bool = True) -> float:
    """Exact area of phase 1 divided by the area of the body.

    With ``check=False`` the geometry is not validated, so degenerate
    configurations (an inclusion filling the body gives 1) still evaluate.
    """
    if check:
        _check_geometry(s)
    return sum(inc.area() for inc in s.inclusions) / s.outer.area()


# ---------------------------------------------------------------------------
# JSON config


def _num(d: dict, key: str, where: str) -> float:
    if key not in d:
        raise SceneError(f"{where}: missing field {key!r}")
    try:
        return float(d[key])
    except (TypeError, ValueError):
        raise SceneError(f"{where}: field {key!r} must be a number") from None


def _point(d: dict, key: str, where: str) -> tuple[float, float]:
    v = d.get(key)
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise SceneError(f"{where}: field {key!r} must be [x, y]")
    return (float(v[0]), float(v[1]))


def shape_from_dict(d: dict, where: str = "shape") -> Shape:
    if not isinstance(d, dict) or "kind" not in d:
        raise SceneError(f"{where}: shape needs a 'kind'")
    kind = d["kind"]
    if kind == "disk":
        return Disk(_point(d, "center", where), _num(d, "radius", where))
    if kind == "ellipse":
        return Ellipse(_point(d, "center", where), _num(d, "a", where), _num(d, "b", where),
                       float(d.get("angle", 0.0)))
    if kind == "polygon":
        pts = d.get("points")
        if not isinstance(pts, list):
            raise SceneError(f"{where}: polygon needs 'points'")
        return Polygon(tuple((float(p[0]), float(p[1])) for p in pts))
    if kind == "star":
        return Star(_point(d, "center", where), _num(d, "radius", where),
                    _num(d, "amplitude", where), int(_num(d, "lobes", where)))
    if kind == "crescent":
        return Crescent(shape_from_dict(d.get("outer"), where + ".outer"),
                        shape_from_dict(d.get("inner"), where + ".inner"))
    if kind == "annulus_phase1":
        radii = d.get("radii")
        if not isinstance(radii, list) or len(radii) != 3:
            raise SceneError(f"{where}: annulus_phase1 needs radii [R1, R2, R3]")
        return AnnulusPhase1(tuple(float(r) for r in radii))
    raise SceneError(f"{where}: unknown shape kind {kind!r}")


def _sigma(d: dict, key: str) -> complex:
    if key not in d:
        raise SceneError(f"scene: missing field {key!r}")
    v = d[key]
    if isinstance(v, (int, float)):
        return complex(v)
    if not isinstance(v, list) or len(v) != 2:
        raise SceneError(f"scene: field {key!r} must be [re, im]")
    return complex(float(v[0]), float(v[1]))


def scene_from_dict(d: dict) -> Scene:
    if not isinstance(d, dict):
        raise SceneError("scene: top level must be an object")
    if "outer" not in d:
        raise SceneError("scene: missing field 'outer'")
    incs = d.get("inclusions", [])
    if not isinstance(incs, list):
        raise SceneError("scene: 'inclusions' must be a list")
    return Scene(
        name=str(d.get("name", "scene")),
        outer=shape_from_dict(d["outer"], "outer"),
        inclusions=tuple(shape_from_dict(s, f"inclusions[{i}]") for i, s in enumerate(incs)),
        phases=PhasePair(_sigma(d, "sigma1"), _sigma(d, "sigma2")),
    )


def parse_scene(text: str) -> Scene:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"scene config parse error at line {e.lineno} column {e.colno}: {e.msg}") from None
    return scene_from_dict(d)


def scene_to_dict(s: Scene) -> dict:
    return {
        "name": s.name,
        "outer": s.outer.to_dict(),
        "inclusions": [inc.to_dict() for inc in s.inclusions],
        "sigma1": [s.phases.sigma1.real, s.phases.sigma1.imag],
        "sigma2": [s.phases.sigma2.real, s.phases.sigma2.imag],
    }


def serialize_scene(s: Scene) -> str:
    return json.dumps(scene_to_dict(s), indent=2)


def load_scene(path) -> Scene:
    with open(path) as fh:
        return parse_scene(fh.read())


# ---------------------------------------------------------------------------
# built-in scenes


def _smile_crescent() -> Crescent:
    # outer disk r=0.3 at (0, -0.3) minus a disk r=0.5 shifted up by d; d chosen
    # so that the crescent covers 0.0225 of the unit disk.  Tip angles are ~43 deg.
    ro, ri, yc = 0.3, 0.5, -0.3
    target = 0.0225 * math.pi
    d = brentq(lambda d: math.pi * ro * ro - _lens_area(ro, ri, d) - target,
               ri - ro + 1e-9, ri + ro - 1e-9, xtol=1e-15)
    return Crescent(Disk((0.0, yc), ro), Disk((0.0, yc + d), ri))


def _star_scene() -> Scene:
    outer = Star((0.0, 0.0), 1.0, 0.15, 3)
    f1 = 0.029281
    r = math.sqrt(f1 * outer.area() / math.pi)
    return Scene("table4", outer, (Disk((0.25, 0.1), r),), PhasePair(1 + 2j, 1))


def builtin_scene(name: str) -> Scene:
    unit = Disk((0.0, 0.0), 1.0)
    table1 = {"table1_row1": 1 + 1j, "table1_row2": 2 + 0.5j,
              "table1_row3": 2 + 5j, "table1_row4": 4 + 100j}
    if name in table1:
        return Scene(name, unit, (Disk((0.0, 0.0), 0.4),), PhasePair(table1[name], 1))
    if name == "table2":
        return Scene(name, unit, (Ellipse((-0.1, -0.3), 0.4, 0.3, 0.0),), PhasePair(2 + 1j, 1))
    if name == "table3":
        incs = (Disk((-0.4, 0.3), 0.25), Disk((0.4, 0.3), 0.25), _smile_crescent())
        return Scene(name, unit, incs, PhasePair(2 + 1j, 1))
    if name == "table4":
        return _star_scene()
    if name == "table5":
        return Scene(name, Disk((0.0, 0.0), 5.0), (AnnulusPhase1((2.0, 3.0, 5.0)),),
                     PhasePair(3 + 8j, 8 + 6j))
    if name == "homogeneous":
        return Scene(name, unit, (), PhasePair(1 + 1j, 1))
    raise SceneError(f"unknown built-in scene {name!r}")


BUILTIN_SCENES = ("table1_row1", "table1_row2", "table1_row3", "table1_row4",
                  "table2", "table3", "table4", "table5")
