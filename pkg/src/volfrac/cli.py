"""Command-line driver: scene -> Cauchy data -> moments -> bound sweep -> reports."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .analytic import analytic_pairs
from .bounds import BoundsReport, optimize_grid, summary_csv, summary_row
from .cauchy import add_noise, cauchy_from_csv
from .fem import fem_pairs
from .functionals import build_moments
from .mesher import triangulate
from .scene import (BUILTIN_SCENES, AdmissibilityError, Scene, area_fraction, builtin_scene,
                    load_scene, require_admissible)
from .translation import lower_params, upper_params

EXIT_OK, EXIT_ERROR, EXIT_INADMISSIBLE = 0, 1, 2
SOURCES = ("auto", "fem", "analytic", "file")
# mesh size relative to the equivalent radius sqrt(|Omega| / pi) of the body
DEFAULT_RELATIVE_H = 0.02

# published reference intervals, keyed by built-in scene (and noise level for table3)
REFERENCE = {
    "table1_row1": (0.159919, 0.160044),
    "table1_row2": (0.159944, 0.160015),
    "table1_row3": (0.159937, 0.160008),
    "table1_row4": (0.159839, 0.160026),
    "table2": (0.119559, 0.120800),
    ("table3", 0.0): (0.146614, 0.148187),
    ("table3", 0.05): (0.143527, 0.151170),
    ("table3", 0.10): (0.134217, 0.159726),
    ("table3", 0.15): (0.119537, 0.174828),
    ("table3", 0.20): (0.098495, 0.194967),
    "table4": (0.029172, 0.029631),
    "table5": (0.799485, 0.800064),
}
TABLE_ROWS = {
    "table1": ("table1_row1", "table1_row2", "table1_row3", "table1_row4"),
    "table2": ("table2",),
    "table3": ("table3",),
    "table4": ("table4",),
    "table5": ("table5",),
}
NOISE_LEVELS = (0.05, 0.10, 0.15, 0.20)


@dataclass
class RunConfig:
    scene: str = "table1_row1"
    source: str = "auto"
    mesh_h: float | None = None       # None: DEFAULT_RELATIVE_H times the equivalent radius
    boundary_n: int = 512
    grid_n: int = 200
    noise: float = 0.0
    seed: int | None = None
    out: Path = Path("volfrac_out")
    full_grids: bool = False
    cauchy_files: tuple[str, str] | None = None
    excitations: tuple = ((1.0, 0.0), (0.0, 1.0))   # phi_k = c_k . x
    write: bool = True

    def __post_init__(self):
        self.out = Path(self.out)
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.grid_n < 2:
            raise ValueError("grid_n must be at least 2")
        if self.mesh_h is not None and not self.mesh_h > 0:
            raise ValueError("mesh_h must be positive")
        if not self.noise >= 0:
            raise ValueError("noise level must be non-negative")
        if self.boundary_n < 16:
            raise ValueError("boundary_n must be at least 16")
        c = np.asarray(self.excitations, dtype=float)
        if c.shape != (2, 2) or not np.all(np.isfinite(c)):
            raise ValueError("excitations must be two real 2-vectors")
        if abs(np.linalg.det(c)) < 1e-12 * max(1.0, float(np.max(np.abs(c))) ** 2):
            raise ValueError("the two excitations must be linearly independent")
        self.excitations = tuple(tuple(float(v) for v in row) for row in c)
        if self.source == "file" and not self.cauchy_files:
            raise ValueError("the file source needs two Cauchy data files")


@dataclass
class RunResult:
    status: int
    scene: Scene | None = None
    f1_true: float = math.nan
    report: BoundsReport | None = None
    row: dict = field(default_factory=dict)
    message: str = ""


def resolve_scene(name_or_path: str) -> Scene:
    if name_or_path in BUILTIN_SCENES or name_or_path == "homogeneous":
        return builtin_scene(name_or_path)
    return load_scene(name_or_path)


def excitation_seed(seed: int, k: int) -> int:
    """Independent generator seed for excitation k derived from the run seed."""
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


def effective_h(cfg: RunConfig, scene: Scene) -> float:
    if cfg.mesh_h is not None:
        return cfg.mesh_h
    return DEFAULT_RELATIVE_H * math.sqrt(scene.outer.area() / math.pi)


def cauchy_data(cfg: RunConfig, scene: Scene, timings: dict):
    source = cfg.source
    if source == "auto":
        source = "analytic" if scene.is_layered_disk() else "fem"
    t0 = time.perf_counter()
    if source == "analytic":
        pairs = analytic_pairs(scene, cfg.boundary_n, cfg.excitations)
    elif source == "fem":
        h = effective_h(cfg, scene)
        mesh = triangulate(scene, h, cfg.boundary_n)
        timings["mesh_seconds"] = time.perf_counter() - t0
        t0 = time.perf_counter()
        pairs = fem_pairs(mesh, scene.phases, cfg.excitations)
        timings["fem_solve_seconds"] = time.perf_counter() - t0
    else:
        texts = [Path(f).read_text() for f in cfg.cauchy_files]
        c1 = cauchy_from_csv(texts[0], "phi=x")
        pairs = (c1, cauchy_from_csv(texts[1], "phi=y", grid=c1.grid))
    timings.setdefault("data_seconds", time.perf_counter() - t0)
    return source, pairs


def compute(cfg: RunConfig, scene: Scene | None = None) -> RunResult:
    """Run the pipeline without catching errors or writing files."""
    scene = scene or resolve_scene(cfg.scene)
    require_admissible(scene.phases)
    f1 = area_fraction(scene)
    timings: dict = {}
    source, (c1, c2) = cauchy_data(cfg, scene, timings)
    seed = None
    if cfg.noise > 0:
        seed = 0 if cfg.seed is None else cfg.seed
        c1 = add_noise(c1, cfg.noise, excitation_seed(seed, 1))
        c2 = add_noise(c2, cfg.noise, excitation_seed(seed, 2))
    t0 = time.perf_counter()
    mt = build_moments(c1, c2)
    timings["moments_seconds"] = time.perf_counter() - t0
    lp, up = lower_params(scene.phases), upper_params(scene.phases)
    report = optimize_grid(mt, lp, up, cfg.grid_n)
    timings["sweep_seconds"] = report.metadata.pop("sweep_seconds")
    report.metadata.update({
        "scene": scene.name,
        "source": source,
        "h": effective_h(cfg, scene) if source == "fem" else None,
        "boundary_samples": len(c1.grid),
        "noise": cfg.noise,
        "seed": seed,
        "f1_true": f1,
        "timings": timings,
    })
    row = summary_row(scene.name, f1, report, cfg.noise, seed)
    return RunResult(EXIT_OK, scene, f1, report, row)


def run(cfg: RunConfig) -> RunResult:
    """Run one scene and write ``<scene>_summary.csv`` and ``<scene>_report.json``."""
    try:
        res = compute(cfg)
        if cfg.write:
            cfg.out.mkdir(parents=True, exist_ok=True)
            stem = res.scene.name
            (cfg.out / f"{stem}_summary.csv").write_text(summary_csv([res.row]))
            doc = {"config": _config_dict(cfg), **res.report.to_dict(cfg.full_grids)}
            (cfg.out / f"{stem}_report.json").write_text(json.dumps(doc, indent=2))
        return res
    except AdmissibilityError as e:
        return RunResult(EXIT_INADMISSIBLE, message=str(e))
    except Exception as e:  # noqa: BLE001  every module error maps to exit 1
        return RunResult(EXIT_ERROR, message=f"{type(e).__name__}: {e}")


def _config_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["out"] = str(cfg.out)
    d.pop("write")
    return d


# ---------------------------------------------------------------------------
# table reproduction

TABLE_COLUMNS = ("scene", "sigma1", "sigma2", "f1", "source", "noise", "seeds",
                 "ref_lower", "lower", "ref_lower_over_f1", "lower_over_f1",
                 "ref_upper", "upper", "ref_upper_over_f1", "upper_over_f1")


def _fmt(v):
    return "" if v is None else f"{v:.6f}"


def _table_row(scene: Scene, f1, source, noise, seeds, lower, upper, ref):
    rl, ru = ref if ref else (None, None)
    return {
        "scene": scene.name,
        "sigma1": f"{scene.phases.sigma1:g}",
        "sigma2": f"{scene.phases.sigma2:g}",
        "f1": f"{f1:.6f}",
        "source": source,
        "noise": f"{noise:g}",
        "seeds": str(seeds),
        "ref_lower": _fmt(rl), "lower": _fmt(lower),
        "ref_lower_over_f1": _fmt(rl / f1 if rl else None), "lower_over_f1": _fmt(lower / f1),
        "ref_upper": _fmt(ru), "upper": _fmt(upper),
        "ref_upper_over_f1": _fmt(ru / f1 if ru else None), "upper_over_f1": _fmt(upper / f1),
    }


def _csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    wr = csv.DictWriter(buf, fieldnames=TABLE_COLUMNS, lineterminator="\n")
    wr.writeheader()
    wr.writerows(rows)
    return buf.getvalue()


def reproduce_tables(base: RunConfig, n_seeds: int = 20,
                     noise_levels=NOISE_LEVELS) -> dict[str, list[dict]]:
    """Run every built-in scene; noisy table3 rows average lower/upper over ``n_seeds`` seeds."""
    tables: dict[str, list[dict]] = {}
    for table, names in TABLE_ROWS.items():
        rows = []
        for name in names:
            cfg = RunConfig(**{**_config_dict(base), "scene": name, "source": "auto",
                               "noise": 0.0, "seed": None, "cauchy_files": None, "write": False})
            res = compute(cfg)
            src = res.report.metadata["source"]
            ref = REFERENCE.get(name) or REFERENCE.get((name, 0.0))
            rows.append(_table_row(res.scene, res.f1_true, src, 0.0, 0,
                                   res.report.lower, res.report.upper, ref))
            if table == "table3":
                for p in noise_levels:
                    lo, hi = [], []
                    for seed in range(n_seeds):
                        r = compute(RunConfig(**{**_config_dict(cfg), "noise": p, "seed": seed,
                                                 "write": False}), res.scene)
                        lo.append(r.report.lower)
                        hi.append(r.report.upper)
                    rows.append(_table_row(res.scene, res.f1_true, src, p, n_seeds,
                                           float(np.mean(lo)), float(np.mean(hi)),
                                           REFERENCE.get((name, p))))
        tables[table] = rows
    if base.write:
        base.out.mkdir(parents=True, exist_ok=True)
        for table, rows in tables.items():
            (base.out / f"{table}.csv").write_text(_csv(rows))
        (base.out / "summary.csv").write_text(_csv([r for rows in tables.values() for r in rows]))
    return tables


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="volfrac", description=__doc__)
    ap.add_argument("--scene", default="table1_row1", help="built-in scene name or JSON scene file")
    ap.add_argument("--source", choices=SOURCES, default="auto",
                    help="Cauchy data source; auto uses analytic data for layered disks, else fem")
    ap.add_argument("--mesh-h", type=float, default=None,
                    help=f"target edge length (default {DEFAULT_RELATIVE_H} x equivalent radius)")
    ap.add_argument("--boundary-n", type=int, default=512, help="boundary samples")
    ap.add_argument("--grid-n", type=int, default=200, help="angle samples per axis")
    ap.add_argument("--noise", type=float, default=0.0, help="relative noise level p")
    ap.add_argument("--seed", type=int, default=None, help="noise seed (default 0 when p > 0)")
    ap.add_argument("--out", default="volfrac_out", help="output directory")
    ap.add_argument("--full-grids", action="store_true", help="include the four bound grids in JSON")
    ap.add_argument("--cauchy-files", nargs=2, metavar=("PHI_X_CSV", "PHI_Y_CSV"),
                    help="Cauchy data for phi=x and phi=y (source=file)")
    ap.add_argument("--excitations", nargs=4, type=float, metavar=("C1X", "C1Y", "C2X", "C2Y"),
                    help="linear Dirichlet data phi_k = c_k . x (default x and y)")
    ap.add_argument("--reproduce-tables", action="store_true",
                    help="run all built-in scenes and write table1..5.csv and summary.csv")
    ap.add_argument("--seeds", type=int, default=20, help="noise seeds per level for table3")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(scene=args.scene, source=args.source, mesh_h=args.mesh_h,
                        boundary_n=args.boundary_n, grid_n=args.grid_n, noise=args.noise,
                        seed=args.seed, out=Path(args.out), full_grids=args.full_grids,
                        cauchy_files=tuple(args.cauchy_files) if args.cauchy_files else None,
                        **({"excitations": (tuple(args.excitations[:2]), tuple(args.excitations[2:]))}
                           if args.excitations else {}))
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    if args.reproduce_tables:
        try:
            tables = reproduce_tables(cfg, args.seeds)
        except AdmissibilityError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_INADMISSIBLE
        except Exception as e:  # noqa: BLE001
            print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
            return EXIT_ERROR
        sys.stdout.write(_csv([r for rows in tables.values() for r in rows]))
        return EXIT_OK
    res = run(cfg)
    if res.status != EXIT_OK:
        print(f"error: {res.message}", file=sys.stderr)
        return res.status
    sys.stdout.write(summary_csv([res.row]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
