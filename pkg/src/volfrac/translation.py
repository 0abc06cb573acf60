"""Rank-minimizing translation parameters for the lower and upper bounds.

For the lower bound the translated phase matrices P1-, P2+ and P2- are made
singular while P1+ stays positive definite; the upper bound swaps the roles
of the two phases.  The parameters come from the circle through three of the
points (+-sigma1', +-sigma1''), (+-sigma2', +-sigma2'').
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import PhasePair, require_admissible

R_PERP = np.array([[0.0, 1.0], [-1.0, 0.0]])


class TranslationError(ArithmeticError):
    pass


def compute_r(p: PhasePair) -> float:
    require_admissible(p)
    s1, s2 = p.sigma1, p.sigma2
    return (abs(s1) ** 2 - abs(s2) ** 2) / (2.0 * (s1.real * s2.imag - s2.real * s1.imag))


def d_matrix(sigma: complex, t3: float) -> np.ndarray:
    sigma = complex(sigma)
    a, b = sigma.real, sigma.imag
    if not a > 0:
        raise ValueError("conductivity needs a positive real part")
    off = b / a + t3
    return np.array([[1.0 / a, off], [off, (a * a + b * b) / a]])


def det2(m: np.ndarray) -> float:
    return float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


@dataclass(frozen=True, eq=False)
class TranslationParams:
    side: str            # "lower" or "upper"
    r: float
    t1: float
    t2: float
    t3: float
    D1: np.ndarray
    D2: np.ndarray
    P1p: np.ndarray
    P1m: np.ndarray
    P2p: np.ndarray
    P2m: np.ndarray
    p: np.ndarray        # unit vector spanning the range of the rank-one "+" matrix
    coef_trP: float      # tr P2+ (lower) / tr P1+ (upper)
    coef_detP: float     # det P1+ (lower) / det P2+ (upper)
    coef_detDiff: float  # det(P1+ - P2+)

    @property
    def T(self) -> np.ndarray:
        return np.diag([self.t1, self.t2])

    @property
    def slope(self) -> float:
        """-coef_trP * coef_detP / coef_detDiff, positive for admissible data."""
        return -self.coef_trP * self.coef_detP / self.coef_detDiff

    def F(self, f: float) -> float:
        """Weight of the projected Gram matrix for volume fraction ``f``.

        ``f`` is the phase-1 fraction on the lower side and the phase-2
        fraction on the upper side.
        """
        return 1.0 / (f / self.slope + 1.0 / self.coef_trP)


def _unit_range_vector(P: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(P)
    p = v[:, np.argmax(w)]
    nz = np.nonzero(np.abs(p) > 1e-14)[0]
    if p[nz[0]] < 0:
        p = -p
    return p / np.linalg.norm(p)


def _params(p: PhasePair, side: str) -> TranslationParams:
    require_admissible(p)
    r = compute_r(p)
    # "a" is the phase whose "+" matrix stays nonsingular, "b" supplies the circle
    sa, sb = (p.sigma1, p.sigma2) if side == "lower" else (p.sigma2, p.sigma1)
    mod_b = abs(sb) ** 2
    root = math.sqrt((r * r + 1.0) * mod_b)
    # 1/t1 = a +- root; the smaller one comes from the product of the two
    # roots, which avoids cancellation when |a| ~ root
    a = r * sb.imag
    big = a + math.copysign(root, a)
    small = (-(r * sb.real) ** 2 - mod_b) / big
    candidates = []
    for inv in (big, small):
        if inv == 0:
            continue
        t1 = 1.0 / inv
        crit = (1.0 / sa.real - t1) * t1 * (abs(sa) ** 2 - mod_b)
        if crit >= -1e-14 * abs(t1) * (1.0 / sa.real + abs(t1)) * abs(abs(sa) ** 2 - mod_b):
            t2 = -mod_b * t1
            t3 = r * sb.real * t1
            candidates.append((t1, t2, t3))
    if not candidates:
        raise TranslationError(f"no admissible t1 root for {p} ({side} side)")

    def build(t1, t2, t3):
        T = np.diag([t1, t2])
        D1, D2 = d_matrix(p.sigma1, t3), d_matrix(p.sigma2, t3)
        return D1, D2, D1 + T, D1 - T, D2 + T, D2 - T

    def keep_score(c):
        D1, D2, P1p, P1m, P2p, P2m = build(*c)
        return det2(P1p) if side == "lower" else det2(P2p)

    t1, t2, t3 = max(candidates, key=keep_score)
    D1, D2, P1p, P1m, P2p, P2m = build(t1, t2, t3)
    if side == "lower":
        vec, tr, det = _unit_range_vector(P2p), float(np.trace(P2p)), det2(P1p)
    else:
        vec, tr, det = _unit_range_vector(P1p), float(np.trace(P1p)), det2(P2p)
    return TranslationParams(side, r, t1, t2, t3, D1, D2, P1p, P1m, P2p, P2m, vec,
                             tr, det, expected_det_diff(p))


def lower_params(p: PhasePair) -> TranslationParams:
    return _params(p, "lower")


def upper_params(p: PhasePair) -> TranslationParams:
    return _params(p, "upper")


def expected_det_diff(p: PhasePair) -> float:
    """det(P1+ - P2+) = det(D1 - D2) in closed form, free of cancellation."""
    s1, s2 = p.sigma1, p.sigma2
    return -((s1.real - s2.real) ** 2 + (s1.imag - s2.imag) ** 2) / (s1.real * s2.real)


def invariant_violations(tp: TranslationParams, p: PhasePair, tol: float = 1e-10) -> list[str]:
    """Check the rank, positivity and sign conditions a parameter set must meet."""
    out = []
    mats = {"P1+": tp.P1p, "P1-": tp.P1m, "P2+": tp.P2p, "P2-": tp.P2m}
    singular = ("P1-", "P2+", "P2-") if tp.side == "lower" else ("P1+", "P1-", "P2-")
    regular = "P1+" if tp.side == "lower" else "P2+"
    for name in singular:
        m = mats[name]
        if abs(det2(m)) > tol * max(1.0, np.sum(m * m)):
            out.append(f"det {name} = {det2(m):.3e} is not zero")
    if not det2(mats[regular]) > 0:
        out.append(f"det {regular} = {det2(mats[regular]):.3e} is not positive")
    for name, m in mats.items():
        ev = np.linalg.eigvalsh(m)
        if ev[0] < -1e-12 * max(1.0, abs(ev[-1])):
            out.append(f"{name} has negative eigenvalue {ev[0]:.3e}")
    s1, s2 = p.sigma1, p.sigma2
    slack = 1e-12 * max(1.0, abs(tp.t1))
    if abs(tp.t1) > 1 / s1.real + slack or abs(tp.t1) > 1 / s2.real + slack:
        out.append("|t1| exceeds 1/sigma'")
    want = expected_det_diff(p)
    diff = tp.P1p - tp.P2p
    got = det2(diff)
    if not tp.coef_detDiff < 0 or abs(got - want) > tol * max(1.0, np.sum(diff * diff)):
        out.append(f"det(P1+ - P2+) = {got:.6e}, expected {want:.6e}")
    sa, sb = (s1, s2) if tp.side == "lower" else (s2, s1)
    crit = (1 / sa.real - tp.t1) * tp.t1 * (abs(sa) ** 2 - abs(sb) ** 2)
    if crit < -1e-10 * max(1.0, abs(crit)):
        out.append(f"sign criterion violated ({crit:.3e})")
    return out


# ---------------------------------------------------------------------------
# constrained quadratic minimization with pseudo-inverses


def _psd_check(L: np.ndarray, name: str) -> np.ndarray:
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValueError(f"{name} must be square")
    scale = max(1.0, float(np.max(np.abs(L))))
    if np.max(np.abs(L - L.T)) > 1e-12 * scale:
        raise ValueError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(0.5 * (L + L.T))[0] < -1e-12 * scale:
        raise ValueError(f"{name} has a negative eigenvalue")
    return 0.5 * (L + L.T)


def _kernel_basis(L: np.ndarray, rtol: float) -> np.ndarray:
    w, v = np.linalg.eigh(L)
    cut = rtol * max(1.0, float(np.max(np.abs(w))))
    return v[:, w <= cut]


def range_intersection_projector(L1: np.ndarray, L2: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthogonal projector onto range(L1) & range(L2) for symmetric L1, L2.

    That subspace is the orthogonal complement of ker(L1) + ker(L2).
    """
    n = L1.shape[0]
    K = np.hstack([_kernel_basis(L1, rtol), _kernel_basis(L2, rtol)])
    if K.shape[1] == 0:
        return np.eye(n)
    u, s, _ = np.linalg.svd(K, full_matrices=False)
    Q = u[:, s > 1e-10 * max(1.0, s[0])]
    return np.eye(n) - Q @ Q.T


def constrained_quadratic_min(L1, L2, f1: float, f2: float, E0) -> float:
    """min of f1 E1.L1 E1 + f2 E2.L2 E2 subject to f1 E1 + f2 E2 = E0.

    Evaluated in closed form as (pi E0).[pi (f1 L1^+ + f2 L2^+) pi]^+ (pi E0),
    pi the projector onto range(L1) & range(L2) and ^+ the pseudo-inverse.
    """
    L1 = _psd_check(L1, "L1")
    L2 = _psd_check(L2, "L2")
    if not (f1 > 0 and f2 > 0):
        raise ValueError("f1 and f2 must be positive")
    E0 = np.asarray(E0, dtype=float)
    pi = range_intersection_projector(L1, L2)
    pe = pi @ E0
    if np.linalg.norm(pe) <= 1e-14 * max(1.0, np.linalg.norm(E0)):
        return 0.0
    H = pi @ (f1 * np.linalg.pinv(L1, rcond=1e-10, hermitian=True)
              + f2 * np.linalg.pinv(L2, rcond=1e-10, hermitian=True)) @ pi
    return float(pe @ np.linalg.pinv(H, rcond=1e-10, hermitian=True) @ pe)


# ---------------------------------------------------------------------------
# 8x8 translated tensor (used to cross-check the reduced bound formulas)

J8 = np.sqrt(0.5) * np.array([
    [1, 0, 0, 0, 0, 0, 1, 0],
    [0, 0, 1, 0, -1, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, 0, 1],
    [0, 0, 0, 1, 0, -1, 0, 0],
    [0, 0, 1, 0, 1, 0, 0, 0],
    [1, 0, 0, 0, 0, 0, -1, 0],
    [0, 0, 0, 1, 0, 1, 0, 0],
    [0, 1, 0, 0, 0, 0, 0, -1],
], dtype=float)


def d_je(sigma: complex) -> np.ndarray:
    """4x4 matrix mapping (j', e'') to (e', j'')."""
    sigma = complex(sigma)
    a, b = sigma.real, sigma.imag
    I2 = np.eye(2)
    return np.block([[I2, b * I2], [b * I2, (a * a + b * b) * I2]]) / a


def translated_tensor(sigma: complex, t1: float, t2: float, t3: float) -> np.ndarray:
    """The 8x8 translated quadratic form restricted to one phase."""
    I2, Z2 = np.eye(2), np.zeros((2, 2))
    Dt = d_je(sigma) + np.block([[Z2, t3 * I2], [t3 * I2, Z2]])
    R = np.block([[t1 * R_PERP, Z2], [Z2, t2 * R_PERP]])
    return np.block([[Dt, R], [-R, Dt]])
