"""Boundary grids and Cauchy data (Dirichlet trace phi, Neumann flux q).

Grids are closed counterclockwise point loops carrying outward normals,
tangents and arc-length trapezoid weights.  A :class:`CauchyPair` may also
carry closed-form tangential derivative / stream potential samples when the
data come from an analytic solution; the accessors below prefer those.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .scene import shoelace_area


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BoundaryGrid:
    points: np.ndarray    # (n, 2), counterclockwise
    normals: np.ndarray   # (n, 2), outward unit
    tangents: np.ndarray  # (n, 2), counterclockwise unit
    weights: np.ndarray   # (n,), arc-length quadrature weights
    domain_area: float
    normal_weights: np.ndarray | None = None  # (n, 2) rule for vector integrals of n ds

    @property
    def area_vectors(self) -> np.ndarray:
        """Quadrature vectors for integrals f n ds; n * w unless given explicitly."""
        if self.normal_weights is not None:
            return self.normal_weights
        return self.normals * self.weights[:, None]

    def __len__(self):
        return len(self.points)

    @property
    def perimeter(self) -> float:
        return float(self.weights.sum())

    def segment_lengths(self) -> np.ndarray:
        """Chord length from point i to point i+1 (cyclic)."""
        return np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1)

    @classmethod
    def circle(cls, n: int, radius: float = 1.0, center=(0.0, 0.0)) -> "BoundaryGrid":
        """Uniform samples of a circle with exact normals and weights."""
        w = 2.0 * np.pi * np.arange(n) / n
        n_ = np.column_stack([np.cos(w), np.sin(w)])
        pts = np.asarray(center, dtype=float) + radius * n_
        t = np.column_stack([-n_[:, 1], n_[:, 0]])
        return cls(pts, n_, t, np.full(n, 2.0 * np.pi * radius / n), float(np.pi * radius**2))

    @classmethod
    def from_polygon(cls, points: np.ndarray) -> "BoundaryGrid":
        """Grid on a closed polygon; weights are half the adjacent edge lengths.

        Normals are the normalized length-weighted average of the adjacent
        edge normals, and the area is the shoelace area of the polygon.  The
        unnormalized average is kept for integrals of f n ds, which makes them
        exact for piecewise-linear f.
        """
        pts = np.asarray(points, dtype=float)
        if shoelace_area(pts) < 0:
            raise ValueError("boundary polygon must be counterclockwise")
        edge = np.roll(pts, -1, axis=0) - pts          # edge i: p_i -> p_{i+1}
        length = np.linalg.norm(edge, axis=1)
        en = np.column_stack([edge[:, 1], -edge[:, 0]])  # outward, scaled by length
        nsum = 0.5 * (en + np.roll(en, 1, axis=0))
        normals = nsum / np.linalg.norm(nsum, axis=1)[:, None]
        tangents = np.column_stack([-normals[:, 1], normals[:, 0]])
        weights = 0.5 * (length + np.roll(length, 1))
        return cls(pts, normals, tangents, weights, shoelace_area(pts), nsum)

    def same_as(self, other: "BoundaryGrid") -> bool:
        return self is other or (
            len(self) == len(other)
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.weights, other.weights)
            and self.domain_area == other.domain_area)


@dataclass(frozen=True, eq=False)
class CauchyPair:
    grid: BoundaryGrid
    phi: np.ndarray   # complex Dirichlet trace
    q: np.ndarray     # complex Neumann flux density sigma du/dn
    label: str = ""
    dphi_dt: np.ndarray | None = field(default=None, repr=False)
    psi: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        n = len(self.grid)
        for name in ("phi", "q", "dphi_dt", "psi"):
            v = getattr(self, name)
            if v is None:
                continue
            v = np.asarray(v, dtype=complex)
            if v.shape != (n,):
                raise ValueError(f"{name} must have one value per boundary point ({n})")
            object.__setattr__(self, name, v)

    def conservation_defect(self) -> float:
        """|sum q w| / sum |q| w, zero for exactly conserved current."""
        w = self.grid.weights
        scale = float(np.sum(np.abs(self.q) * w))
        return abs(np.sum(self.q * w)) / scale if scale > 0 else 0.0


def excitation_label(c) -> str:
    """Label of the linear Dirichlet datum phi = c . x."""
    if tuple(c) == (1, 0):
        return "phi=x"
    if tuple(c) == (0, 1):
        return "phi=y"
    return f"phi=({c[0]:g})x+({c[1]:g})y"


def stream_potential(c: CauchyPair) -> np.ndarray:
    """Boundary stream potential: the running integral of q ds, zero at the first point.

    A closed-form potential carried by the pair is used when present;
    otherwise the integral is the cumulative trapezoid rule along the chords.
    """
    if c.psi is not None:
        return c.psi - c.psi[0]
    seg = c.grid.segment_lengths()[:-1]
    inc = 0.5 * (c.q[:-1] + c.q[1:]) * seg
    return np.concatenate([[0.0], np.cumsum(inc)]).astype(complex)


def tangential_derivative(c: CauchyPair) -> np.ndarray:
    """d(phi)/dt along the counterclockwise tangent.

    Uses the closed-form derivative when the pair carries one, else central
    differences on the closed loop.
    """
    if c.dphi_dt is not None:
        return c.dphi_dt
    n = len(c.grid)
    if n < 3:
        raise ValueError("tangential derivative needs at least 3 samples")
    seg = c.grid.segment_lengths()
    return (np.roll(c.phi, -1) - np.roll(c.phi, 1)) / (seg + np.roll(seg, 1))


def add_noise(c: CauchyPair, p: float, seed: int) -> CauchyPair:
    """Multiplicative Gaussian noise on the real and imaginary flux parts.

    Each sample becomes (1 + p g') q' + i (1 + p g'') q'' with independent
    standard normal g', g'' drawn from a generator seeded by ``seed``.
    """
    if p < 0:
        raise ValueError("noise level must be non-negative")
    if p == 0:
        return replace(c)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((2, len(c.q)))
    q = (1 + p * g[0]) * c.q.real + 1j * (1 + p * g[1]) * c.q.imag
    return replace(c, q=q, psi=None, label=f"{c.label} noise={p:g} seed={seed}")


# ---------------------------------------------------------------------------
# CSV interchange

CSV_COLUMNS = ("x", "y", "nx", "ny", "w", "phi_re", "phi_im", "q_re", "q_im")


def cauchy_to_csv(c: CauchyPair) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_COLUMNS)
    g = c.grid
    for i in range(len(g)):
        wr.writerow([repr(float(v)) for v in (
            g.points[i, 0], g.points[i, 1], g.normals[i, 0], g.normals[i, 1], g.weights[i],
            c.phi[i].real, c.phi[i].imag, c.q[i].real, c.q[i].imag)])
    return buf.getvalue()


def cauchy_from_csv(text: str, label: str = "", grid: BoundaryGrid | None = None) -> CauchyPair:
    """Read one excitation.  Pass ``grid`` to share a grid already read."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(h.strip() for h in rows[0]) != CSV_COLUMNS:
        raise ValueError("Cauchy CSV header must be " + ",".join(CSV_COLUMNS))
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as e:
        raise ValueError(f"Cauchy CSV: {e}") from None
    if data.ndim != 2 or data.shape[1] != len(CSV_COLUMNS) or len(data) < 3:
        raise ValueError("Cauchy CSV needs at least 3 rows of 9 columns")
    pts, nrm, w = data[:, 0:2], data[:, 2:4], data[:, 4]
    if grid is None:
        tan = np.column_stack([-nrm[:, 1], nrm[:, 0]])
        grid = BoundaryGrid(pts, nrm, tan, w, shoelace_area(pts))
    elif not (np.allclose(grid.points, pts, rtol=0, atol=1e-14) and np.allclose(grid.weights, w)):
        raise GridMismatchError("Cauchy CSV files do not share one boundary grid")
    return CauchyPair(grid, data[:, 5] + 1j * data[:, 6], data[:, 7] + 1j * data[:, 8], label)
