"""Closed-form Cauchy data for concentric layered disks under linear Dirichlet data.

In layer k the potential is (A_k rho + B_k / rho) (c . x / rho) with B_1 = 0;
the coefficients follow from continuity of u and sigma du/drho at every
interface and u = c . x on the outer circle.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cauchy import BoundaryGrid, CauchyPair, excitation_label
from .scene import Scene, SceneError


@dataclass(frozen=True)
class LayeredDiskSpec:
    radii: tuple[float, ...]           # ascending; the last one is the body radius
    layer_sigma: tuple[complex, ...]   # innermost first
    dirichlet_coeff: tuple[complex, complex] = (1.0, 0.0)

    def __post_init__(self):
        r = tuple(float(v) for v in self.radii)
        s = tuple(complex(v) for v in self.layer_sigma)
        if not r or len(r) != len(s):
            raise ValueError("need one conductivity per layer")
        if r[0] <= 0 or any(b <= a for a, b in zip(r, r[1:])):
            raise ValueError("radii must be positive and strictly increasing")
        if any(v.real <= 0 for v in s):
            raise ValueError("layer conductivities need a positive real part")
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "layer_sigma", s)

    def with_coeff(self, c) -> "LayeredDiskSpec":
        return LayeredDiskSpec(self.radii, self.layer_sigma, tuple(complex(v) for v in c))


def radial_coefficients(spec: LayeredDiskSpec) -> np.ndarray:
    """Return the (n, 2) array of (A_k, B_k) for the unit-amplitude mode."""
    R, s = spec.radii, spec.layer_sigma
    n = len(R)
    size = 2 * n - 1

    def col(k, which):
        # unknown order: A_1, A_2, B_2, ..., A_n, B_n
        return 0 if k == 0 else 2 * k - 1 + which

    M = np.zeros((size, size), dtype=complex)
    rhs = np.zeros(size, dtype=complex)
    row = 0
    for k in range(n - 1):
        r = R[k]
        M[row, col(k, 0)] += r
        M[row, col(k + 1, 0)] -= r
        M[row, col(k + 1, 1)] -= 1 / r
        if k > 0:
            M[row, col(k, 1)] += 1 / r
        M[row + 1, col(k, 0)] += s[k]
        M[row + 1, col(k + 1, 0)] -= s[k + 1]
        M[row + 1, col(k + 1, 1)] += s[k + 1] / r**2
        if k > 0:
            M[row + 1, col(k, 1)] -= s[k] / r**2
        row += 2
    M[row, col(n - 1, 0)] = R[-1]
    if n > 1:
        M[row, col(n - 1, 1)] = 1 / R[-1]
    rhs[row] = R[-1]
    sol = np.linalg.solve(M, rhs)
    out = np.zeros((n, 2), dtype=complex)
    out[0, 0] = sol[0]
    for k in range(1, n):
        out[k] = sol[col(k, 0)], sol[col(k, 1)]
    return out


def outer_flux_factor(spec: LayeredDiskSpec) -> complex:
    """sigma_N g'(R_N), so that q = factor * (c . n) on the outer circle."""
    (a, b) = radial_coefficients(spec)[-1]
    R = spec.radii[-1]
    return complex(spec.layer_sigma[-1] * (a - b / R**2))


def layered_cauchy(spec: LayeredDiskSpec, n_samples: int, grid: BoundaryGrid | None = None,
                   label: str = "") -> CauchyPair:
    """Sample phi, q, d(phi)/dt and the stream potential on the outer circle."""
    if n_samples < 16:
        raise ValueError("need at least 16 boundary samples")
    R = spec.radii[-1]
    if grid is None:
        grid = BoundaryGrid.circle(n_samples, R)
    n = grid.normals
    c1, c2 = spec.dirichlet_coeff
    k = outer_flux_factor(spec)
    cn = c1 * n[:, 0] + c2 * n[:, 1]
    # c . t with t = (-sin, cos); the stream potential integrates q ds = k (c . n) R dw
    ct = -c1 * n[:, 1] + c2 * n[:, 0]
    return CauchyPair(grid, R * cn, k * cn, label, dphi_dt=ct, psi=-k * R * ct)


def layered_spec_for(scene: Scene) -> LayeredDiskSpec:
    """The layered-disk description of a concentric scene."""
    if not scene.is_layered_disk():
        raise SceneError(f"scene {scene.name!r} is not a concentric layered disk")
    R = scene.outer.radius
    s1, s2 = scene.phases.sigma1, scene.phases.sigma2
    inc = scene.inclusions[0]
    if inc.kind == "disk":
        return LayeredDiskSpec((inc.radius, R), (s1, s2))
    r1, r2, r3 = inc.radii
    radii, sig = [r1, r2, r3], [s1, s2, s1]
    if r3 < R:
        radii.append(R)
        sig.append(s2)
    return LayeredDiskSpec(tuple(radii), tuple(sig))


def analytic_pairs(scene: Scene, n_samples: int,
                   coeffs=((1.0, 0.0), (0.0, 1.0))) -> tuple[CauchyPair, CauchyPair]:
    """Cauchy data for phi_k = c_k . x (default x and y) on one shared grid."""
    spec = layered_spec_for(scene)
    grid = BoundaryGrid.circle(n_samples, spec.radii[-1])
    c1, c2 = coeffs
    return (layered_cauchy(spec.with_coeff(c1), n_samples, grid, excitation_label(c1)),
            layered_cauchy(spec.with_coeff(c2), n_samples, grid, excitation_label(c2)))
