"""P1 finite elements for div(sigma grad u) = 0 with complex piecewise-constant sigma.

Dirichlet data are imposed by elimination; the boundary flux is recovered
from the residual of the assembled stiffness form against the boundary hat
functions (consistent flux), which keeps discrete Green identities exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .cauchy import BoundaryGrid, CauchyPair, excitation_label
from .functionals import MeasurementSet
from .mesher import Mesh
from .scene import PhasePair

RESIDUAL_TOL = 1e-12
R_PERP = np.array([[0.0, 1.0], [-1.0, 0.0]])


class SolverError(RuntimeError):
    pass


def p1_gradients(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric gradients (m, 3, 2) and triangle areas (m,)."""
    p = mesh.nodes[mesh.triangles]
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    # rows of inv([d1 d2]^T) are the gradients of lambda_1 and lambda_2
    g1 = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g2 = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    grads = np.stack([-g1 - g2, g1, g2], axis=1)
    return grads, 0.5 * det


def element_sigma(mesh: Mesh, phases: PhasePair) -> np.ndarray:
    return np.where(mesh.phase_tag == 1, phases.sigma1, phases.sigma2).astype(complex)


def assemble_stiffness(mesh: Mesh, sigma_t: np.ndarray) -> sp.csr_matrix:
    grads, area = p1_gradients(mesh)
    local = np.einsum("tik,tjk->tij", grads, grads) * (area * sigma_t)[:, None, None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class FieldSolution:
    mesh: Mesh
    sigma_t: np.ndarray      # per-triangle complex conductivity
    u: np.ndarray            # nodal potentials
    stiffness: sp.csr_matrix
    label: str = ""

    def gradients(self) -> np.ndarray:
        """Per-triangle complex gradient of u, shape (m, 2)."""
        grads, _ = p1_gradients(self.mesh)
        return np.einsum("tik,ti->tk", grads, self.u[self.mesh.triangles])


class DirichletSolver:
    """Factorizes the interior block once and solves for many boundary data."""

    def __init__(self, mesh: Mesh, phases: PhasePair):
        self.mesh = mesh
        self.sigma_t = element_sigma(mesh, phases)
        self.K = assemble_stiffness(mesh, self.sigma_t)
        self.bnd = mesh.boundary_loop
        mask = np.ones(mesh.n_nodes, dtype=bool)
        mask[self.bnd] = False
        self.inner = np.nonzero(mask)[0]
        K_ii = self.K[self.inner][:, self.inner].tocsc()
        self.K_ib = self.K[self.inner][:, self.bnd]
        try:
            self.lu = splu(K_ii)
        except RuntimeError as e:
            raise SolverError(f"singular stiffness matrix: {e}") from e

    def solve(self, phi: np.ndarray, label: str = "") -> FieldSolution:
        phi = np.asarray(phi, dtype=complex)
        if phi.shape != (len(self.bnd),):
            raise ValueError(f"phi needs {len(self.bnd)} boundary values, got {phi.shape}")
        u = np.zeros(self.mesh.n_nodes, dtype=complex)
        u[self.bnd] = phi
        rhs = -(self.K_ib @ phi)
        u_i = self.lu.solve(rhs)
        u[self.inner] = u_i
        r = self.K[self.inner] @ u
        scale = np.linalg.norm(self.K_ib @ phi) + np.linalg.norm(rhs)
        if scale > 0 and np.linalg.norm(r) > RESIDUAL_TOL * scale:
            # one step of iterative refinement before giving up
            u[self.inner] -= self.lu.solve(r)
            r = self.K[self.inner] @ u
            if np.linalg.norm(r) > RESIDUAL_TOL * scale:
                raise SolverError(f"relative residual {np.linalg.norm(r) / scale:.2e} too large")
        return FieldSolution(self.mesh, self.sigma_t, u, self.K, label)


def solve_dirichlet(mesh: Mesh, phases: PhasePair, phi: np.ndarray, label: str = "") -> FieldSolution:
    return DirichletSolver(mesh, phases).solve(phi, label)


def boundary_grid(mesh: Mesh) -> BoundaryGrid:
    return BoundaryGrid.from_polygon(mesh.nodes[mesh.boundary_loop])


def boundary_residual(sol: FieldSolution) -> np.ndarray:
    """Stiffness form applied to u, tested against the boundary hat functions."""
    return sol.stiffness[sol.mesh.boundary_loop] @ sol.u


def recover_neumann(sol: FieldSolution, grid: BoundaryGrid | None = None) -> np.ndarray:
    """Consistent boundary flux density sigma du/dn at the boundary nodes."""
    grid = grid or boundary_grid(sol.mesh)
    return boundary_residual(sol) / grid.weights


def cauchy_pair(sol: FieldSolution, grid: BoundaryGrid | None = None) -> CauchyPair:
    grid = grid or boundary_grid(sol.mesh)
    return CauchyPair(grid, sol.u[sol.mesh.boundary_loop], recover_neumann(sol, grid), sol.label)


def fem_pairs(mesh: Mesh, phases: PhasePair,
              coeffs=((1.0, 0.0), (0.0, 1.0))) -> tuple[CauchyPair, CauchyPair]:
    """Solve for phi_k = c_k . x (default x and y) and return both Cauchy pairs on one grid."""
    solver = DirichletSolver(mesh, phases)
    xb = mesh.nodes[mesh.boundary_loop]
    grid = boundary_grid(mesh)
    sols = [solver.solve(xb @ np.asarray(c, dtype=complex), excitation_label(c)) for c in coeffs]
    return cauchy_pair(sols[0], grid), cauchy_pair(sols[1], grid)



def volume_functionals(sol1: FieldSolution, sol2: FieldSolution, theta1: float,
                       theta2: float) -> MeasurementSet:
    """Volume quadrature of the measured bilinear quantities at one (theta1, theta2).

    Independent of any boundary formula; used to cross-check the
    null-Lagrangian identities.
    """
    if sol1.mesh is not sol2.mesh:
        raise ValueError("solutions live on different meshes")
    _, area = p1_gradients(sol1.mesh)
    omega = area.sum()
    sig = sol1.sigma_t
    fields = []
    for sol, th in ((sol1, theta1), (sol2, theta2)):
        e = -sol.gradients() * np.exp(1j * th)   # rotated e
        j = sig[:, None] * e                      # rotated j
        fields.append((j.real, e.imag, e.real, j.imag))

    def avg(f):
        return float(np.sum(area * f) / omega)

    def dot(a, b):
        return np.einsum("tk,tk->t", a, b)

    A0 = np.empty((2, 2))
    S = np.empty((2, 2))
    for a in range(2):
        for b in range(2):
            ja, eia, _, _ = fields[a]
            jb, eib, erb, jib = fields[b]
            # v_a . D v_b = j'_a . e'_b + e''_a . j''_b
            A0[a, b] = avg(dot(ja, erb) + dot(eia, jib))
            S[a, b] = avg(dot(ja, eib) + dot(eia, jb))
    j1, e1 = fields[0][0], fields[0][1]
    j2, e2 = fields[1][0], fields[1][1]
    alpha1 = avg(dot(j1, j2 @ R_PERP.T))
    alpha2 = avg(dot(e1, e2 @ R_PERP.T))
    avg_j = np.array([[avg(f[0][:, k]) for k in range(2)] for f in fields])
    avg_e = np.array([[avg(f[1][:, k]) for k in range(2)] for f in fields])
    return MeasurementSet(A0, S, alpha1, alpha2, avg_j, avg_e)
