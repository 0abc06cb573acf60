"""Lower/upper bound evaluation, the (theta1, theta2) sweep and the final interval."""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cauchy import CauchyPair
from .functionals import (R_PERP, BoundInputs, MeasurementSet, MomentTable,
                          assemble_bound_inputs, direct_measurements, evaluate_measurements)
from .translation import TranslationParams

GUARD_RTOL = 1e-12


class DegenerateDataError(ArithmeticError):
    """Every grid point was skipped by the denominator guards."""


def _ratios(bi: BoundInputs):
    """tr M / tr A~ and (tr(A~ M*) - 2 b m) / (det A~ - b^2), NaN where guarded."""
    A, M, b, m = bi.Atilde, bi.M, bi.b, bi.m
    scale = np.max(np.abs(A), axis=(-2, -1)) + np.abs(b)
    trA = A[..., 0, 0] + A[..., 1, 1]
    detA = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    den2 = detA - b * b
    trM = M[..., 0, 0] + M[..., 1, 1]
    # tr(A M*) with M* the adjugate of M
    tr_adj = A[..., 0, 0] * M[..., 1, 1] + A[..., 1, 1] * M[..., 0, 0] \
        - A[..., 0, 1] * M[..., 1, 0] - A[..., 1, 0] * M[..., 0, 1]
    ok1 = np.abs(trA) > GUARD_RTOL * scale
    ok2 = np.abs(den2) > GUARD_RTOL * scale * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        x1 = np.where(ok1, trM / np.where(ok1, trA, 1.0), np.nan)
        x2 = np.where(ok2, (tr_adj - 2 * b * m) / np.where(ok2, den2, 1.0), np.nan)
    return x1, x2


def _skip(x, sentinel):
    return np.where(np.isnan(x), sentinel, x)


def lower_from_inputs(bi: BoundInputs, tp: TranslationParams):
    if tp.side != "lower":
        raise ValueError("lower bounds need lower-side parameters")
    x1, x2 = _ratios(bi)
    L1 = tp.slope * (x1 - 1.0 / tp.coef_trP)
    L2 = tp.slope * (x2 - 1.0 / tp.coef_trP)
    return _skip(L1, -np.inf), _skip(L2, -np.inf)


def upper_from_inputs(bi: BoundInputs, tp: TranslationParams):
    if tp.side != "upper":
        raise ValueError("upper bounds need upper-side parameters")
    x1, x2 = _ratios(bi)
    U1 = 1.0 - tp.slope * (x1 - 1.0 / tp.coef_trP)
    U2 = 1.0 - tp.slope * (x2 - 1.0 / tp.coef_trP)
    return _skip(U1, np.inf), _skip(U2, np.inf)


def lower_bounds_at(ms: MeasurementSet, tp: TranslationParams):
    """(L1, L2) at the angle pair(s) of ``ms``; -inf marks a skipped point."""
    return lower_from_inputs(assemble_bound_inputs(ms, tp), tp)


def upper_bounds_at(ms: MeasurementSet, tp: TranslationParams):
    """(U1, U2) at the angle pair(s) of ``ms``; +inf marks a skipped point."""
    return upper_from_inputs(assemble_bound_inputs(ms, tp), tp)


# ---------------------------------------------------------------------------
# grid sweep


@dataclass
class BoundsReport:
    grid_n: int
    theta: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    U1: np.ndarray
    U2: np.ndarray
    lower: float
    upper: float
    raw_lower: float
    raw_upper: float
    arg_lower: tuple[int, int]
    arg_upper: tuple[int, int]
    metadata: dict = field(default_factory=dict)

    @property
    def clamped(self) -> bool:
        return self.lower != self.raw_lower or self.upper != self.raw_upper

    def to_dict(self, full_grids: bool = False) -> dict:
        d = {
            "grid_n": self.grid_n,
            "lower": self.lower,
            "upper": self.upper,
            "raw_lower": self.raw_lower,
            "raw_upper": self.raw_upper,
            "clamped": self.clamped,
            "arg_lower": {"index": list(self.arg_lower),
                          "theta": [float(self.theta[i]) for i in self.arg_lower]},
            "arg_upper": {"index": list(self.arg_upper),
                          "theta": [float(self.theta[i]) for i in self.arg_upper]},
            "skipped_points": int(np.sum(~np.isfinite(self.L1)) + np.sum(~np.isfinite(self.L2))
                                  + np.sum(~np.isfinite(self.U1)) + np.sum(~np.isfinite(self.U2))),
            "metadata": self.metadata,
        }
        if full_grids:
            def clean(a):
                return [[None if not np.isfinite(v) else float(v) for v in row] for row in a]
            d["theta"] = self.theta.tolist()
            d.update(L1=clean(self.L1), L2=clean(self.L2), U1=clean(self.U1), U2=clean(self.U2))
        return d

    def to_json(self, full_grids: bool = False) -> str:
        return json.dumps(self.to_dict(full_grids), indent=2)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("VOLFRAC_THREADS", "0")) or min(8, os.cpu_count() or 1))
    except ValueError:
        return 1


def sweep(mt: MomentTable, lower_tp: TranslationParams, upper_tp: TranslationParams,
          theta1: np.ndarray, theta2: np.ndarray):
    """Evaluate L1, L2, U1, U2 on the grid theta1 x theta2 (rows follow theta1)."""
    def rows(sl):
        T1, T2 = np.meshgrid(theta1[sl], theta2, indexing="ij")
        ms = evaluate_measurements(mt, T1, T2)
        return lower_bounds_at(ms, lower_tp) + upper_bounds_at(ms, upper_tp)

    n1 = len(theta1)
    workers = min(_threads(), max(1, n1 // 16))
    if workers == 1:
        return rows(slice(None))
    bounds = np.linspace(0, n1, workers + 1).astype(int)
    with ThreadPoolExecutor(workers) as ex:
        parts = list(ex.map(rows, [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]))
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(4))


def direct_sweep(c1: CauchyPair, c2: CauchyPair, lower_tp: TranslationParams,
                 upper_tp: TranslationParams, theta1: np.ndarray, theta2: np.ndarray):
    """Same grids as :func:`sweep` by boundary quadrature at every point (debug path)."""
    out = np.empty((4, len(theta1), len(theta2)))
    for i, a in enumerate(theta1):
        for j, b in enumerate(theta2):
            ms = direct_measurements(c1, c2, a, b)
            out[:, i, j] = lower_bounds_at(ms, lower_tp) + upper_bounds_at(ms, upper_tp)
    return tuple(out)


def _extreme(a: np.ndarray, b: np.ndarray, largest: bool):
    """Best of two grids at each point, then over the grid; skipped points are ignored."""
    a = np.where(np.isfinite(a), a, np.nan)
    b = np.where(np.isfinite(b), b, np.nan)
    per_point = np.fmax(a, b) if largest else np.fmin(a, b)
    if np.all(np.isnan(per_point)):
        raise DegenerateDataError("all grid points were skipped")
    idx = np.nanargmax(per_point) if largest else np.nanargmin(per_point)
    i, j = np.unravel_index(idx, per_point.shape)
    return float(per_point[i, j]), (int(i), int(j))


def optimize_grid(mt: MomentTable, lower_tp: TranslationParams, upper_tp: TranslationParams,
                  grid_n: int = 200) -> BoundsReport:
    if grid_n < 1:
        raise ValueError("grid_n must be positive")
    theta = 2.0 * np.pi * np.arange(grid_n) / grid_n
    t0 = time.perf_counter()
    L1, L2, U1, U2 = sweep(mt, lower_tp, upper_tp, theta, theta)
    elapsed = time.perf_counter() - t0
    raw_lower, arg_lower = _extreme(L1, L2, True)
    raw_upper, arg_upper = _extreme(U1, U2, False)
    return BoundsReport(grid_n, theta, L1, L2, U1, U2,
                        float(np.clip(raw_lower, 0.0, 1.0)), float(np.clip(raw_upper, 0.0, 1.0)),
                        raw_lower, raw_upper, arg_lower, arg_upper,
                        {"sweep_seconds": elapsed})


# ---------------------------------------------------------------------------
# positivity of the final 4x4 inequality


@dataclass
class PositivityVerdict:
    ok: bool
    min_eigenvalue: float
    failures: list = field(default_factory=list)  # (point index, min eigenvalue)


def positivity_check(ms: MeasurementSet, lower_tp: TranslationParams, f1_true: float,
                     rtol: float = 1e-8) -> PositivityVerdict:
    """Check [[A~, bR], [-bR, A~]] - F(f1) [[M, mR], [-mR, M]] >= 0 at each point of ``ms``."""
    bi = assemble_bound_inputs(ms, lower_tp)
    A, b = bi.Atilde, bi.b
    bR = b[..., None, None] * R_PERP
    Dcal = np.concatenate([np.concatenate([A, bR], -1), np.concatenate([-bR, A], -1)], -2)
    X = Dcal - lower_tp.F(f1_true) * bi.G
    X = X.reshape(-1, 4, 4)
    ev = np.linalg.eigvalsh(0.5 * (X + np.swapaxes(X, -1, -2)))[:, 0]
    scale = np.max(np.abs(Dcal.reshape(-1, 16)), axis=1)
    bad = np.nonzero(ev < -rtol * scale)[0]
    return PositivityVerdict(len(bad) == 0, float(ev.min()),
                             [(int(i), float(ev[i])) for i in bad])


# ---------------------------------------------------------------------------
# CSV summary

SUMMARY_COLUMNS = ("scene", "f1_true", "lower", "upper", "lower_over_f1", "upper_over_f1",
                   "grid_n", "noise", "seed")


def summary_row(scene: str, f1_true: float, report: BoundsReport, noise: float, seed) -> dict:
    return {
        "scene": scene,
        "f1_true": f"{f1_true:.6f}",
        "lower": f"{report.lower:.6f}",
        "upper": f"{report.upper:.6f}",
        "lower_over_f1": f"{report.lower / f1_true:.6f}",
        "upper_over_f1": f"{report.upper / f1_true:.6f}",
        "grid_n": str(report.grid_n),
        "noise": f"{noise:g}",
        "seed": "" if noise == 0 or seed is None else str(seed),
    }


def summary_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    wr.writeheader()
    wr.writerows(rows)
    return buf.getvalue()
