"""Run orchestration and serialization.

Subcommands: shear (1-D family tables), solve (single 2-D minimization with
diagnostics), sweep (zeta(N) study), validate-config.  Configs are YAML
documents with a schema field; unknown keys are rejected.  CSV and summary
outputs are deterministic and round-trip at full precision.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import yaml

from . import diagnostics as diag
from . import freeboundary as fb
from . import geometry as geo
from . import minimizer as mini
from . import profile1d as p1
from .geometry import ValidationError

log = logging.getLogger("nozzleflow")

SCHEMA_VERSION = 1

_KNOWN_BLOCKS = {"schema", "flow", "geometry", "grid", "solver", "shear",
                 "diagnostics", "output"}
_KNOWN_KEYS = {
    "flow": {"Q"},
    "geometry": {"preset", "params"},
    "grid": {"N", "nx", "ns"},
    "solver": {"tol", "max_iter", "sweep", "omega", "init"},
    "shear": {"d", "n_nodes"},
    "diagnostics": {"eps_fb", "probe_radii", "sweep_N"},
    "output": {"directory", "formats"},
}


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass
class RunConfig:
    consts: p1.FlowConstants
    geometry_preset: str = "straight"
    geometry_params: dict = dc_field(default_factory=dict)
    N: float = 5.0
    nx: int = 161
    ns: int = 41
    solver: mini.SolverConfig = dc_field(default_factory=mini.SolverConfig)
    init: str = "column1d"
    shear_d: list = dc_field(default_factory=list)
    shear_n_nodes: int = 201
    eps_fb: float | None = None
    probe_radii: tuple = (0.04, 0.12)
    sweep_N: list = dc_field(default_factory=list)
    out_dir: str = "out"
    formats: tuple = ("csv", "json", "svg")
    raw: dict = dc_field(default_factory=dict)

    def geometry(self):
        return geo.preset_geometry(self.geometry_preset, self.geometry_params)

    def resolved_eps_fb(self):
        if self.eps_fb is not None:
            return float(self.eps_fb)
        return fb.default_eps_fb(self.consts, self.solver.tol)


def _check_keys(block_name, block, known):
    if block is None:
        return {}
    if not isinstance(block, dict):
        raise ConfigError(f"block {block_name!r} must be a mapping")
    unknown = set(block) - known
    if unknown:
        raise ConfigError(
            f"unknown key(s) in block {block_name!r}: {sorted(unknown)}")
    return block


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(doc) - _KNOWN_BLOCKS
    if unknown:
        raise ConfigError(f"unknown top-level block(s): {sorted(unknown)}")
    if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {doc.get('schema')!r}")

    flow = _check_keys("flow", doc.get("flow"), _KNOWN_KEYS["flow"])
    try:
        consts = p1.FlowConstants(float(flow.get("Q", 1.0)))
    except (TypeError, ValueError, p1.DomainError) as e:
        raise ConfigError(f"flow.Q: {e}")

    geom = _check_keys("geometry", doc.get("geometry"), _KNOWN_KEYS["geometry"])
    grid = _check_keys("grid", doc.get("grid"), _KNOWN_KEYS["grid"])
    solver = _check_keys("solver", doc.get("solver"), _KNOWN_KEYS["solver"])
    shear = _check_keys("shear", doc.get("shear"), _KNOWN_KEYS["shear"])
    dblock = _check_keys("diagnostics", doc.get("diagnostics"),
                         _KNOWN_KEYS["diagnostics"])
    output = _check_keys("output", doc.get("output"), _KNOWN_KEYS["output"])

    try:
        solver_cfg = mini.SolverConfig(
            tol=float(solver.get("tol", 1e-6)),
            max_iter=int(solver.get("max_iter", 50000)),
            sweep=str(solver.get("sweep", "red-black")),
            omega=float(solver.get("omega", 1.6)),
        )
    except (TypeError, ValueError, ValidationError) as e:
        raise ConfigError(f"solver block: {e}")

    init = str(solver.get("init", "column1d"))
    if init not in ("column1d", "linear", "harmonic"):
        raise ConfigError(f"solver.init: unknown initialization {init!r}")

    shear_d = shear.get("d", [])
    if shear_d is not None and not isinstance(shear_d, (list, tuple)):
        raise ConfigError("shear.d must be a list of heights")

    sweep_N = dblock.get("sweep_N", [])
    radii = dblock.get("probe_radii", [0.04, 0.12])
    if len(radii) != 2 or not radii[0] < radii[1]:
        raise ConfigError("diagnostics.probe_radii must be [lo, hi] with lo < hi")

    cfg = RunConfig(
        consts=consts,
        geometry_preset=str(geom.get("preset", "straight")),
        geometry_params=dict(geom.get("params") or {}),
        N=float(grid.get("N", 5.0)),
        nx=int(grid.get("nx", 161)),
        ns=int(grid.get("ns", 41)),
        solver=solver_cfg,
        init=init,
        shear_d=[float(d) for d in (shear_d or [])],
        shear_n_nodes=int(shear.get("n_nodes", 201)),
        eps_fb=dblock.get("eps_fb"),
        probe_radii=(float(radii[0]), float(radii[1])),
        sweep_N=[float(N) for N in (sweep_N or [])],
        out_dir=str(output.get("directory", "out")),
        formats=tuple(output.get("formats", ["csv", "json", "svg"])),
        raw=doc,
    )
    # constructing the geometry validates the preset/params combination
    try:
        cfg.geometry()
    except ValidationError as e:
        raise ConfigError(f"geometry block: {e}")
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}")
    return parse_config(doc)


# ---------------------------------------------------------------- writers

def _fmt(x):
    return f"{float(x):.17g}"


def write_csv(path, header, columns):
    """Deterministic CSV: comma-separated, header row, LF endings, 17 digits."""
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*cols):
            fh.write(",".join(_fmt(x) if not isinstance(x, (bool, np.bool_))
                              else str(int(x)) for x in row) + "\n")


def write_summary(path, payload):
    """UTF-8 JSON with stable key ordering."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def dump_field_csv(path, fieldobj, vel=None):
    grid = fieldobj.grid
    ns, nx = grid.ns, grid.nx
    x1 = np.tile(grid.x1, ns)
    x2 = grid.x2.ravel()
    psi = fieldobj.values.ravel()
    if vel is None:
        vel = diag.velocity_field(fieldobj)
    write_csv(path, ["x1", "x2", "psi", "u1", "u2"],
              [x1, x2, psi, vel.u1.ravel(), vel.u2.ravel()])


def load_field_csv(path, grid, bc_mask, bc_values, consts) -> mini.DiscreteField:
    """Re-ingest a field dump written by dump_field_csv for the same grid."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    psi = data["psi"].reshape(grid.ns, grid.nx)
    return mini.DiscreteField(grid=grid, values=psi, fixed_mask=bc_mask,
                              fixed_values=bc_values, consts=consts)


def plot_solution(path, fieldobj, curves=None):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    grid = fieldobj.grid
    fig, ax = plt.subplots(figsize=(9, 3.2))
    X = np.tile(grid.x1, (grid.ns, 1))
    cs = ax.contour(X, grid.x2, fieldobj.values, levels=15, linewidths=0.7)
    ax.plot(grid.x1, grid.h0v, "k-", lw=1.5)
    ax.plot(grid.x1, grid.h1v, "k-", lw=1.5)
    if curves is not None:
        ax.plot(curves.x1, curves.h0_tilde, "r--", lw=1.2)
        ax.plot(curves.x1, curves.h1_tilde, "r--", lw=1.2)
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    fig.colorbar(cs, ax=ax, label="psi")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# ------------------------------------------------------------ subcommands

def run_shear(cfg: RunConfig, out_dir: Path) -> int:
    """1-D family artifacts: per-profile CSVs, the (d, c, J) table, checks."""
    if not cfg.shear_d:
        raise ConfigError("shear.d: need a nonempty list of heights")
    for d in cfg.shear_d:
        if not (0.0 < d <= 1.0):
            raise ConfigError(f"shear.d: height {d} outside (0, 1]")
    out_dir.mkdir(parents=True, exist_ok=True)
    consts = cfg.consts
    rows_d, rows_c, rows_J = [], [], []
    checks = {}
    ok = True
    for d in cfg.shear_d:
        prof = p1.build_shear_profile(d, consts, cfg.shear_n_nodes)
        write_csv(out_dir / f"shear_d{d:g}.csv", ["x2", "phi", "dphi"],
                  [prof.nodes, prof.values, prof.slopes])
        rows_d.append(d)
        rows_c.append(prof.c)
        rows_J.append(prof.energy)
        resid = float(np.max(np.abs(
            prof.slopes**2 - 2.0 * p1.bigF(prof.values, consts) - prof.c**2)))
        checks[f"energy_identity_residual_d{d:g}"] = resid
        ok &= resid <= 1e-8
    write_csv(out_dir / "shear_table.csv", ["d", "c", "J"],
              [rows_d, rows_c, rows_J])
    if len(rows_d) > 1 and sorted(rows_d) == rows_d:
        checks["c_strictly_decreasing"] = bool(np.all(np.diff(rows_c) < 0))
        checks["J_strictly_decreasing"] = bool(np.all(np.diff(rows_J) < 0))
        ok &= checks["c_strictly_decreasing"] and checks["J_strictly_decreasing"]
    checks["pass"] = bool(ok)
    write_summary(out_dir / "shear_checks.json", checks)
    return 0 if ok else 1


def _solve_once(cfg: RunConfig, geom, N=None, nx=None, ns=None):
    consts = cfg.consts
    grid = geo.build_grid(geom, N or cfg.N, nx or cfg.nx, ns or cfg.ns)
    mask, vals = geo.boundary_data(geom, grid, consts)
    fieldobj, report = mini.solve_minimizer(grid, mask, vals, consts,
                                            cfg.solver, init=cfg.init)
    return grid, fieldobj, report


def _solve_summary(cfg: RunConfig, geom, grid, fieldobj, report):
    consts = cfg.consts
    Q = consts.Q
    eps = cfg.resolved_eps_fb()
    vel = diag.velocity_field(fieldobj, eps_fb=eps)
    flux = diag.flux_per_column(fieldobj, vel)
    curves = fb.extract_free_boundaries(fieldobj, eps_fb=eps)
    res = mini.el_residual(fieldobj, eps_fb=eps)
    stag_area = float(np.sum(grid.weights[fieldobj.values <= eps]))
    phi1 = np.clip(Q * (3 * np.clip(grid.x2, 0, 1)**2
                        - 2 * np.clip(grid.x2, 0, 1)**3), 0.0, Q)
    summary = {
        "N": grid.N, "nx": grid.nx, "ns": grid.ns,
        "geometry": geom.name,
        "Q": Q,
        "converged": bool(report.converged),
        "iterations": report.iterations,
        "energy": report.energy,
        "pg_norm": report.pg_norm,
        "eps_fb": eps,
        "stagnation_area": stag_area,
        "flux_mean": float(np.mean(flux)),
        "flux_max_dev": float(np.max(np.abs(flux - Q))),
        "vorticity_residual_max": vel.vorticity_residual_max,
        "stagnation_speed_max": vel.stagnation_speed_max,
        "el_residual_max": res.max_wet,
        "el_residual_l2": res.l2_wet,
        "collar_grad_max": res.collar_grad_max,
        "psi_min": float(fieldobj.values.min()),
        "psi_max": float(fieldobj.values.max()),
        "barrier_excess": float(np.max(fieldobj.values - phi1)),
        "min_sigma_increment": float(np.min(np.diff(fieldobj.values, axis=0))),
        "h0_tilde_min": float(curves.h0_tilde.min()),
        "h1_tilde_max": float(curves.h1_tilde.max()),
    }
    if geom.name == "straight":
        summary["strip_liouville"] = diag.strip_liouville_check(fieldobj)
    return summary, vel, curves


def run_solve(cfg: RunConfig, out_dir: Path) -> int:
    """Single 2-D solve with field dump, curves, summary, and plot."""
    out_dir.mkdir(parents=True, exist_ok=True)
    geom = cfg.geometry()
    grid, fieldobj, report = _solve_once(cfg, geom)
    summary, vel, curves = _solve_summary(cfg, geom, grid, fieldobj, report)
    if "csv" in cfg.formats:
        dump_field_csv(out_dir / "field.csv", fieldobj, vel)
        write_csv(out_dir / "free_boundaries.csv",
                  ["x1", "h0", "h1", "h0_tilde", "h1_tilde",
                   "contact0", "contact1"],
                  [curves.x1, grid.h0v, grid.h1v, curves.h0_tilde,
                   curves.h1_tilde, curves.contact0, curves.contact1])
    if not report.converged:
        summary["failure"] = "solver did not converge within max_iter"
    write_summary(out_dir / "summary.json", summary)
    if "svg" in cfg.formats:
        plot_solution(out_dir / "plot.svg", fieldobj, curves)
    return 0 if report.converged else 1


def run_sweep(cfg: RunConfig, out_dir: Path) -> int:
    """zeta(N) study over diagnostics.sweep_N; writes the consolidated table."""
    Ns = cfg.sweep_N
    if len(Ns) < 2:
        raise ConfigError("diagnostics.sweep_N: need at least two truncations")
    geom = cfg.geometry()
    L0 = max(geom.bar_L, -geom.underline_L)
    for N in Ns:
        if N < L0:
            raise ConfigError(f"diagnostics.sweep_N: N={N} below L0={L0}")
    out_dir.mkdir(parents=True, exist_ok=True)
    fields = []
    ok = True
    base_density = (cfg.nx - 1) / (2.0 * cfg.N)  # columns per unit length
    for N in sorted(Ns):
        nx = int(round(2 * N * base_density)) + 1
        grid, fieldobj, report = _solve_once(cfg, geom, N=N, nx=nx)
        summary, _, _ = _solve_summary(cfg, geom, grid, fieldobj, report)
        write_summary(out_dir / f"summary_N{N:g}.json", summary)
        ok &= report.converged
        fields.append(fieldobj)
    rep = diag.far_field_report(fields, cfg.consts, geom)
    write_csv(out_dir / "zeta.csv", ["N", "zeta"], [rep.N_values, rep.zeta])
    verdict = {
        "zeta_nonincreasing": rep.zeta_nonincreasing,
        "zeta_tolerance": rep.zeta_tolerance,
        "zeta": rep.zeta,
        "N": rep.N_values,
        "left_deviation": rep.left_deviation,
        "right_deviation": rep.right_deviation,
        "pass": bool(rep.zeta_nonincreasing and ok),
    }
    write_summary(out_dir / "sweep_summary.json", verdict)
    return 0 if verdict["pass"] else 1


def run_validate(cfg: RunConfig, out_dir: Path) -> int:
    print("config ok")
    return 0


# ------------------------------------------------------------------ main

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nozzleflow",
        description="Steady Euler nozzle flows via stream-function energy "
                    "minimization")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [("shear", "1-D shear-flow family tables"),
                        ("solve", "single 2-D minimization with diagnostics"),
                        ("sweep", "zeta(N) truncation study"),
                        ("validate-config", "parse and validate a config")]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="YAML run config")
        sp.add_argument("--out", default=None, help="output directory override")
        sp.add_argument("--serial", action="store_true",
                        help="force the bit-reproducible lexicographic sweep")
        sp.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.serial:
        cfg.solver.sweep = "lexicographic"
    out_dir = Path(args.out or cfg.out_dir)

    handler = {"shear": run_shear, "solve": run_solve, "sweep": run_sweep,
               "validate-config": run_validate}[args.command]
    try:
        rc = handler(cfg, out_dir)
    except (ConfigError, ValidationError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    return rc


if __name__ == "__main__":
    sys.exit(main())
