"""Cached scenes, meshes and Cauchy data shared by the test modules."""
from __future__ import annotations

import dataclasses
from functools import lru_cache

import numpy as np

from volfrac.analytic import analytic_pairs
from volfrac.cauchy import BoundaryGrid, CauchyPair
from volfrac.fem import DirichletSolver, fem_pairs
from volfrac.functionals import build_moments
from volfrac.mesher import triangulate
from volfrac.scene import PhasePair, builtin_scene
from volfrac.translation import lower_params, upper_params


@lru_cache(maxsize=None)
def mesh(name: str, h: float, n_boundary: int = 512):
    return triangulate(builtin_scene(name), h, n_boundary)


@lru_cache(maxsize=None)
def fem_data(name: str, h: float, n_boundary: int = 512):
    s = builtin_scene(name)
    return fem_pairs(mesh(name, h, n_boundary), s.phases)


@lru_cache(maxsize=None)
def fem_solutions(name: str, h: float, sigma=None):
    """Nodal solutions for phi = x and phi = y (optionally overriding both phases)."""
    s = builtin_scene(name)
    phases = s.phases if sigma is None else PhasePair(sigma, sigma)
    m = mesh(name, h)
    solver = DirichletSolver(m, phases)
    xb = m.nodes[m.boundary_loop]
    return solver.solve(xb[:, 0], "phi=x"), solver.solve(xb[:, 1], "phi=y")


@lru_cache(maxsize=None)
def analytic_data(name: str, n: int = 512):
    return analytic_pairs(builtin_scene(name), n)


@lru_cache(maxsize=None)
def moments(name: str, source: str = "analytic", h: float = 0.02):
    pairs = analytic_data(name) if source == "analytic" else fem_data(name, h)
    return build_moments(*pairs)


@lru_cache(maxsize=None)
def params(name: str):
    p = builtin_scene(name).phases
    return lower_params(p), upper_params(p)


def homogeneous_pairs(n: int = 512, sigma: complex = 1.0):
    """Exact data of a homogeneous unit disk for phi = x and phi = y."""
    g = BoundaryGrid.circle(n)
    c, s = g.normals[:, 0], g.normals[:, 1]
    p1 = CauchyPair(g, c.astype(complex), sigma * c, "x", dphi_dt=-s + 0j, psi=-sigma * s)
    p2 = CauchyPair(g, s.astype(complex), sigma * s, "y", dphi_dt=c + 0j, psi=sigma * (1 - c))
    return p1, p2


def rotate(c: CauchyPair, tau: float) -> CauchyPair:
    """Multiply all traces of a pair by exp(i tau)."""
    r = np.exp(1j * tau)
    return dataclasses.replace(
        c, phi=c.phi * r, q=c.q * r,
        dphi_dt=None if c.dphi_dt is None else c.dphi_dt * r,
        psi=None if c.psi is None else c.psi * r)


def random_admissible(rng: np.random.Generator) -> PhasePair:
    while True:
        s1 = complex(rng.uniform(0.05, 10), rng.uniform(-10, 10))
        s2 = complex(rng.uniform(0.05, 10), rng.uniform(-10, 10))
        if abs(abs(s1) - abs(s2)) > 1e-3 * abs(s1) and abs((s1 / s2).imag) > 1e-3:
            return PhasePair(s1, s2)
