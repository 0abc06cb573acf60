"""Null-Lagrangian boundary functionals and their dependence on the phase angles.

Every measured quantity is a bilinear (or linear) functional of the rotated
boundary traces Re(q e^{i theta}), Im(phi e^{i theta}), ..., and each rotated
trace is ``cos(theta) * f_c + sin(theta) * f_s`` for two fixed real arrays.
A :class:`MomentTable` stores the 2x2 table of base integrals of every
functional, so that evaluating at any (theta1, theta2) costs O(1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cauchy import CauchyPair, GridMismatchError, stream_potential, tangential_derivative

R_PERP = np.array([[0.0, 1.0], [-1.0, 0.0]])
SQRT_HALF = np.sqrt(0.5)


class BlockStructureError(ArithmeticError):
    """The projected Gram matrix lost its [[M, mR], [-mR, M]] structure."""


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """Measured quantities at one or many (theta1, theta2); leading axes are the grid."""

    A0: np.ndarray      # (..., 2, 2) a_jk
    S: np.ndarray       # (..., 2, 2) translation correction s_jk
    alpha1: np.ndarray  # (...)
    alpha2: np.ndarray  # (...)
    avg_j: np.ndarray   # (..., 2, 2) [field k, component] of <j'_k>
    avg_e: np.ndarray   # (..., 2, 2) [field k, component] of <e''_k>

    def close_to(self, other: "MeasurementSet", rtol: float, atol: float = 0.0) -> bool:
        return all(np.allclose(getattr(self, f), getattr(other, f), rtol=rtol, atol=atol)
                   for f in ("A0", "S", "alpha1", "alpha2", "avg_j", "avg_e"))


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Base integrals; the trailing (2,) or (2, 2) axes index (cos, sin) of each angle."""

    a: np.ndarray       # (2, 2, 2, 2) [j, k, trig_j, trig_k]
    s: np.ndarray       # (2, 2, 2, 2)
    alpha1: np.ndarray  # (2, 2) [trig_1, trig_2]
    alpha2: np.ndarray  # (2, 2)
    avg_j: np.ndarray   # (2, 2, 2) [k, component, trig_k]
    avg_e: np.ndarray   # (2, 2, 2)
    domain_area: float


def _re_rot(z):
    # Re(z e^{it}) = cos t Re z - sin t Im z
    return np.stack([z.real, -z.imag])


def _im_rot(z):
    # Im(z e^{it}) = cos t Im z + sin t Re z
    return np.stack([z.imag, z.real])


def build_moments(c1: CauchyPair, c2: CauchyPair) -> MomentTable:
    if not c1.grid.same_as(c2.grid):
        raise GridMismatchError("Cauchy pairs must share one boundary grid")
    g = c1.grid
    area = g.domain_area
    w = g.weights

    def K(f, h):
        return (f * w) @ h.T / area

    re_q = [_re_rot(c1.q), _re_rot(c2.q)]
    im_q = [_im_rot(c1.q), _im_rot(c2.q)]
    re_phi = [_re_rot(c1.phi), _re_rot(c2.phi)]
    im_phi = [_im_rot(c1.phi), _im_rot(c2.phi)]

    a = np.empty((2, 2, 2, 2))
    s = np.empty((2, 2, 2, 2))
    for j in range(2):
        for k in range(2):
            a[j, k] = K(re_q[j], re_phi[k]) + K(im_phi[j], im_q[k])
            s[j, k] = K(re_q[j], im_phi[k]) + K(im_phi[j], re_q[k])
    alpha1 = -K(re_q[0], _re_rot(stream_potential(c2)))
    alpha2 = K(im_phi[0], _im_rot(tangential_derivative(c2)))
    avg_j = np.stack([-K(g.points.T, re_q[k]) for k in range(2)])
    avg_e = np.stack([-(im_phi[k] @ g.area_vectors).T / area for k in range(2)])
    return MomentTable(a, s, alpha1, alpha2, avg_j, avg_e, float(area))


def _trig(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def evaluate_measurements(t: MomentTable, theta1, theta2) -> MeasurementSet:
    """Recombine the moments at (theta1, theta2); arrays broadcast to a grid."""
    theta1, theta2 = np.broadcast_arrays(np.asarray(theta1, float), np.asarray(theta2, float))
    c = (_trig(theta1), _trig(theta2))

    def bil(table, j, k):
        return np.einsum("...a,ab,...b->...", c[j], table, c[k])

    A0 = np.stack([np.stack([bil(t.a[j, k], j, k) for k in range(2)], -1) for j in range(2)], -2)
    S = np.stack([np.stack([bil(t.s[j, k], j, k) for k in range(2)], -1) for j in range(2)], -2)
    alpha1 = np.einsum("...a,ab,...b->...", c[0], t.alpha1, c[1])
    alpha2 = np.einsum("...a,ab,...b->...", c[0], t.alpha2, c[1])
    avg_j = np.stack([np.einsum("ca,...a->...c", t.avg_j[k], c[k]) for k in range(2)], -2)
    avg_e = np.stack([np.einsum("ca,...a->...c", t.avg_e[k], c[k]) for k in range(2)], -2)
    return MeasurementSet(A0, S, alpha1, alpha2, avg_j, avg_e)


def direct_measurements(c1: CauchyPair, c2: CauchyPair, theta1: float, theta2: float) -> MeasurementSet:
    """Straight quadrature of the boundary formulas at one angle pair (debug path)."""
    if not c1.grid.same_as(c2.grid):
        raise GridMismatchError("Cauchy pairs must share one boundary grid")
    g = c1.grid
    w = g.weights / g.domain_area
    r1, r2 = np.exp(1j * theta1), np.exp(1j * theta2)
    q = (c1.q * r1, c2.q * r2)
    phi = (c1.phi * r1, c2.phi * r2)
    A0 = np.empty((2, 2))
    S = np.empty((2, 2))
    for j in range(2):
        for k in range(2):
            A0[j, k] = np.sum((q[j].real * phi[k].real + q[k].imag * phi[j].imag) * w)
            S[j, k] = np.sum((q[j].real * phi[k].imag + q[k].real * phi[j].imag) * w)
    psi = stream_potential(c2) * r2
    dphi = tangential_derivative(c2) * r2
    alpha1 = -np.sum(q[0].real * psi.real * w)
    alpha2 = np.sum(phi[0].imag * dphi.imag * w)
    avg_j = np.array([-(g.points * (qk.real * w)[:, None]).sum(0) for qk in q])
    avg_e = np.array([-(g.area_vectors * pk.imag[:, None]).sum(0) / g.domain_area for pk in phi])
    return MeasurementSet(A0, S, np.float64(alpha1), np.float64(alpha2), avg_j, avg_e)


# ---------------------------------------------------------------------------
# inputs of the bound formulas


@dataclass(frozen=True, eq=False)
class BoundInputs:
    Atilde: np.ndarray  # (..., 2, 2)
    b: np.ndarray       # (...)
    M: np.ndarray       # (..., 2, 2)
    m: np.ndarray       # (...)
    C: np.ndarray       # (..., 4, 4)
    G: np.ndarray       # (..., 4, 4) = C^T diag(P, P) C


def c_matrix(avg_j: np.ndarray, avg_e: np.ndarray) -> np.ndarray:
    """The 4x4 matrix of field averages, with columns ordered (k1, k2, k3, k4)."""
    J = lambda k, l: avg_j[..., k - 1, l - 1]  # noqa: E731  <j'_{k,l}>
    E = lambda k, l: avg_e[..., k - 1, l - 1]  # noqa: E731  <e''_{k,l}>
    rows = [
        [J(1, 1), J(2, 1), J(1, 2), J(2, 2)],
        [E(1, 1), E(2, 1), E(1, 2), E(2, 2)],
        [-J(1, 2), -J(2, 2), J(1, 1), J(2, 1)],
        [-E(1, 2), -E(2, 2), E(1, 1), E(2, 1)],
    ]
    return SQRT_HALF * np.stack([np.stack(r, -1) for r in rows], -2)


def assemble_bound_inputs(ms: MeasurementSet, tp, check: bool = True) -> BoundInputs:
    """Translated response matrix, b, and the projected Gram blocks M, m.

    ``tp`` is a :class:`volfrac.translation.TranslationParams`; its unit
    vector ``p`` spans the range of the rank-one matrix on its side.
    """
    Atilde = ms.A0 + tp.t3 * ms.S
    b = ms.alpha1 * tp.t1 + ms.alpha2 * tp.t2
    C = c_matrix(ms.avg_j, ms.avg_e)
    P = np.outer(tp.p, tp.p)
    BP = np.zeros((4, 4))
    BP[:2, :2] = P
    BP[2:, 2:] = P
    G = np.einsum("...ki,kl,...lj->...ij", C, BP, C)
    M = G[..., :2, :2]
    m = G[..., 0, 3]
    if check:
        _check_block_structure(G, M, m, C)
    return BoundInputs(Atilde, b, M, m, C, G)


def _check_block_structure(G, M, m, C):
    # G can cancel to far below |C|^2, so the round-off floor is set by C
    scale = np.max(np.abs(C), axis=(-2, -1)) ** 2 + np.finfo(float).tiny
    mR = m[..., None, None] * R_PERP
    defects = [
        np.max(np.abs(G[..., 2:, 2:] - M), axis=(-2, -1)),
        np.max(np.abs(G[..., :2, 2:] - mR), axis=(-2, -1)),
        np.max(np.abs(G[..., 2:, :2] + mR), axis=(-2, -1)),
    ]
    for d in defects:
        if np.any(d > 1e-10 * scale):
            raise BlockStructureError(f"Gram block defect {np.max(d / scale):.2e} (relative)")
    detM = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    gap = np.abs(m * m - detM)
    if np.any(gap > 1e-8 * (scale * scale + np.abs(detM))):
        raise BlockStructureError(f"m^2 - det M = {np.max(gap):.2e}")
