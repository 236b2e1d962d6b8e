"""Command line entry point: selftest, sweep, report and operators-dump.

Configuration files are INI-style with the sections [run], [grid], [fluid],
[time] and [output]; every key is optional but unknown keys are errors.
``landau-hilbert config-reference`` prints the full key table.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
import time as _time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .collision import LandauOperator, LinearizedOperator, get_operator
from .diagnostics import X_weight, Y_weight, convergence_metric, d_norm_sq, energy_functionals
from .fluid import FluidTrajectory, acoustic_state, advance_fluid, divergence, gauss_residual, smooth_horizon
from .grid import SpatialGrid, VelocityGrid, integrate_v
from .hilbert import ExpansionSet, build_coefficients, first_order_micro, gauss_field
from .maxwellian import FluidMoments, GlobalMaxwellianParams, global_maxwellian, local_maxwellian, log_local_maxwellian
from .projection import build_local_basis, project_PM
from .remainder import EventLog, FullState, global_params, initial_state, positivity_ratio, reconstruct, step_full, step_imex


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class SchemaError(ValueError):
    """A sweep CSV is missing or malformed."""


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class RunConfig:
    branch: str = "landau"
    eps: tuple[float, ...] = (0.2, 0.1, 0.05)
    k: int = 2
    ell: float = 3.0
    tc_margin: float = 0.05
    seed: int = 0
    threads: int = 1
    theorem_mode: bool = False
    remainder: bool = True
    n_x: int = 8
    length: float = 2.0 * math.pi
    n_v: int = 12
    v_max: float = 6.0
    amplitude: float = 0.05
    profile: str = "acoustic"
    rho0: float = 1.0
    T0: float = 1.0
    mode: int = 1
    horizon: str = "t_e"
    t_end: float = 0.5
    cfl: float = 0.5
    stride: int = 2
    directory: str = "sweep_out"

    def __post_init__(self) -> None:
        if self.branch not in ("landau", "vml"):
            raise ConfigError(f"branch must be 'landau' or 'vml', got {self.branch!r}")
        if len(self.eps) == 0:
            raise ConfigError("eps list is empty")
        if any(e <= 0 for e in self.eps):
            raise ConfigError("eps values must be strictly positive")
        if any(a <= b for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps values must be sorted strictly descending")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.theorem_mode and self.k < 3:
            raise ConfigError("theorem mode requires k >= 3")
        if self.horizon not in ("t_e", "cap"):
            raise ConfigError("horizon must be 't_e' or 'cap'")
        if self.profile != "acoustic":
            raise ConfigError(f"unknown fluid profile {self.profile!r}")
        if not 0 < self.tc_margin < 1:
            raise ConfigError("tc_margin must lie in (0, 1)")
        if self.stride < 2 or self.stride % 2:
            raise ConfigError("stride must be an even integer >= 2")
        if not (0 < self.cfl <= 1):
            raise ConfigError("cfl must lie in (0, 1]")
        if self.t_end <= 0:
            raise ConfigError("t_end must be positive")

    @property
    def sgrid(self) -> SpatialGrid:
        return SpatialGrid(n_x=self.n_x, length=self.length)

    @property
    def vgrid(self) -> VelocityGrid:
        return VelocityGrid(n_v=self.n_v, v_max=self.v_max)


SECTIONS = {
    "run": ("branch", "eps", "k", "ell", "tc_margin", "seed", "threads", "theorem_mode", "remainder"),
    "grid": ("n_x", "length", "n_v", "v_max"),
    "fluid": ("amplitude", "profile", "rho0", "T0", "mode"),
    "time": ("horizon", "t_end", "cfl", "stride"),
    "output": ("directory",),
}

_DOC = {
    "branch": "landau | vml",
    "eps": "comma-separated Knudsen numbers, strictly descending",
    "k": "expansion parameter; orders 0..2k-1 are built",
    "ell": "polynomial exponent of the velocity weights w_i",
    "tc_margin": "T_c = (1 - margin) min T",
    "seed": "random seed (recorded; runs are deterministic)",
    "threads": "recorded thread count",
    "theorem_mode": "require k >= 3",
    "remainder": "also integrate the remainder equations and energies",
    "n_x": "spatial cells",
    "length": "periodic box length",
    "n_v": "velocity nodes per axis",
    "v_max": "velocity box half-width",
    "amplitude": "acoustic wave amplitude",
    "profile": "background profile id (acoustic)",
    "rho0": "background density",
    "T0": "background temperature",
    "mode": "acoustic wavenumber index",
    "horizon": "t_e | cap (VML: min(t_e, eps^-1/3))",
    "t_end": "upper bound on the run time",
    "cfl": "time step = cfl * dx / v_max",
    "stride": "fluid steps per kinetic step (even)",
    "directory": "output directory",
}


def _parse_value(name: str, raw: str):
    default = RunConfig.__dataclass_fields__[name].default
    raw = raw.strip()
    if name == "eps":
        try:
            return tuple(float(x) for x in raw.split(",") if x.strip())
        except ValueError as exc:
            raise ConfigError(f"eps: {exc}") from None
    if isinstance(default, bool):
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
        return low in ("true", "yes", "1")
    try:
        return type(default)(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {type(default).__name__}") from None


def config_from_text(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            values[key] = _parse_value(key, raw)
    return RunConfig(**values)


def load_config(path: str | os.PathLike) -> RunConfig:
    return config_from_text(Path(path).read_text())


def config_to_text(cfg: RunConfig) -> str:
    d = asdict(cfg)
    lines = []
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            val = d[key]
            if key == "eps":
                val = ", ".join(repr(e) for e in val)
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)


def config_reference() -> str:
    out = []
    for section, keys in SECTIONS.items():
        out.append(f"[{section}]")
        for key in keys:
            out.append(f"  {key:<13} default {RunConfig.__dataclass_fields__[key].default!r:<22} {_DOC[key]}")
    return "\n".join(out)


# ---------------------------------------------------------------- selftest


@dataclass(frozen=True)
class Check:
    name: str
    tag: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tol)


class _CorruptedOperator(LandauOperator):
    """Negative control: the drift convolution enters with the wrong sign."""

    def conv_vector(self, Y):
        return -super().conv_vector(Y)


def compact_sample(grid: VelocityGrid, rng: np.random.Generator, radius: float = 4.0) -> np.ndarray:
    """Smooth bump supported inside |v - c| < radius, so no flux reaches the cube faces.

    Each centered difference widens the support by one node, so the radius is
    capped three nodes inside the outermost node.
    """
    v = grid.mesh
    radius = min(radius, float(grid.nodes[-1]) - 0.5 - 3.0 * grid.spacing)
    c = rng.uniform(-0.5, 0.5, 3)
    r2 = sum((v[i] - c[i]) ** 2 for i in range(3)) / radius**2
    inside = r2 < 1.0
    bump = np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - r2, 1.0)), 0.0)
    a = rng.uniform(-0.3, 0.3, 3)
    return bump * (1.0 + a[0] * np.sin(v[0] + 2.0 * v[1]) + a[1] * np.cos(v[2]) + a[2] * v[0] / radius)


def selftest_checks(corrupt_kernel: bool = False, n_v: int = 12) -> list[Check]:
    grid = VelocityGrid(n_v=n_v, v_max=6.0)
    op = _CorruptedOperator(grid) if corrupt_kernel else get_operator(grid)
    rng = np.random.default_rng(0)
    v = grid.mesh
    checks = []

    worst = 0.0
    for _ in range(4):
        F = compact_sample(grid, rng)
        Q = op.collide(F, F)
        for psi in (np.ones(grid.shape), v[0], v[1], v[2], grid.speed2):
            worst = max(worst, abs(np.sum(Q * psi)) / np.sum(np.abs(Q * psi)))
    checks.append(Check("collision_conservation", "moments of C(F,F) vanish", worst, 1e-8))

    m = FluidMoments(np.array(1.0), np.array([0.3, -0.2, 0.1]), np.array(0.9))
    logM = log_local_maxwellian(m, grid)
    M = np.exp(logM)
    eq = op.collide_weighted(M, M, op.frame(logM))
    checks.append(Check("weighted_equilibrium", "C(M,M) = 0", float(np.max(np.abs(eq)) / np.max(M)), 1e-12))

    L = LinearizedOperator(grid, logM)
    L.op = op
    L.sigma = op.sigma_conv(L.W)
    f, g = rng.standard_normal((2,) + grid.shape) * np.sqrt(M)
    sym = abs(np.sum(L(f) * g) - np.sum(f * L(g))) / (np.sum(np.abs(L(f) * g)) + 1e-300)
    checks.append(Check("L_M_symmetry", "<L f, g> = <f, L g>", float(sym), 1e-10))

    basis = build_local_basis(m, grid)
    null = max(float(np.max(np.abs(L(basis.chi[j])))) for j in range(5)) / float(np.max(np.abs(L(f))))
    checks.append(Check("L_M_null_space", "L_M chi_j = 0 up to face terms of size M", null, 1e-5))

    pf = project_PM(f, basis)
    checks.append(Check("projection_idempotent", "P_M^2 = P_M", float(np.max(np.abs(project_PM(pf, basis) - pf))), 1e-12))

    p = GlobalMaxwellianParams(1.0)
    dn = float(np.min(d_norm_sq(rng.standard_normal((8,) + grid.shape), p, grid)))
    checks.append(Check("d_norm_nonnegative", "|g|_D^2 >= 0", max(-dn, 0.0), 0.0))

    checks.append(Check("Y_at_zero", "Y(0) = 3/(16 e)", abs(Y_weight(0.0, p) - 3.0 / (16.0 * math.e)), 1e-15))
    checks.append(Check("X_at_zero", "X(0) = exp(3/16)", abs(X_weight(0.0, p) - math.exp(3.0 / 16.0)), 1e-15))
    return checks


def cmd_selftest(args) -> int:
    checks = selftest_checks(corrupt_kernel=args.corrupt_kernel, n_v=args.n_v)
    rows = [
        {"name": c.name, "tag": c.tag, "value": c.value, "tol": c.tol, "passed": c.passed} for c in checks
    ]
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for r in rows:
            status = "PASS" if r["passed"] else "FAIL"
            print(f"{status}  {r['name']:<24} {r['value']:.3e} (tol {r['tol']:.0e})  [{r['tag']}]")
    return 0 if all(c.passed for c in checks) else 1


# ---------------------------------------------------------------- sweep

COLUMNS = (
    ("time", "t"),
    ("eps", "Knudsen number"),
    ("E_total", "energy functional"),
    ("D_total", "dissipation functional"),
    ("h2_metric", "H2 norm of M^-1/2 (F - M)"),
    ("gauss_drift", "max |div E + 4 pi (int F - mean int F)|"),
    ("divB_drift", "max |div B|"),
    ("min_F", "min F / max F"),
    ("route_gap", "max |F_full - F_expansion| / max F"),
)
REQUIRED = ("time", "eps", "E_total", "D_total", "h2_metric", "gauss_drift", "divB_drift", "min_F")


def header_cells() -> list[str]:
    return [f"{name} [{tag}]" for name, tag in COLUMNS]


def _column_name(cell: str) -> str:
    return cell.split(" [", 1)[0].strip()


@dataclass
class Background:
    trajectory: FluidTrajectory
    snapshots: list  # fluid states at kinetic step times
    dt: float
    t_e: float
    es: ExpansionSet | None


def build_background(cfg: RunConfig, n_steps: int | None = None) -> Background:
    sg, vg = cfg.sgrid, cfg.vgrid
    s0 = acoustic_state(sg, cfg.amplitude, cfg.rho0, cfg.T0, cfg.mode, maxwell=cfg.branch == "vml")
    dt = cfg.cfl * sg.spacing / cfg.v_max
    t_e = min(smooth_horizon(s0, sg), cfg.t_end)
    if n_steps is None:
        n_steps = max(int(math.floor(t_e / dt + 1e-9)), 4)
    traj = advance_fluid(s0, dt / cfg.stride, n_steps * cfg.stride, sg)
    snaps = traj.states[:: cfg.stride]
    es = build_coefficients(traj, sg, vg, k=cfg.k, branch=cfg.branch, stride=cfg.stride) if cfg.remainder else None
    return Background(traj, snaps, dt, t_e, es)


def _horizon(cfg: RunConfig, bg: Background, eps: float) -> float:
    t = bg.t_e
    if cfg.branch == "vml" and cfg.horizon == "cap":
        t = min(t, eps ** (-1.0 / 3.0))
    return t


def run_point(cfg: RunConfig, bg: Background, eps: float, log: EventLog | None = None) -> list[dict]:
    """Full-F run (and remainder run when enabled) for one eps; returns CSV rows."""
    sg, vg = cfg.sgrid, cfg.vgrid
    es = bg.es
    s0 = bg.snapshots[0]
    if es is not None:
        F0 = np.tensordot(eps ** np.arange(es.order + 1), es.F[:, 0], axes=(0, 0))
        p = global_params(es, cfg.tc_margin)
        rem = initial_state(es, eps, p=p)
    else:
        F0 = local_maxwellian(s0.moments, vg) + eps * first_order_micro(s0, sg, vg)
        p = rem = None
    E0 = s0.E
    if E0 is not None:
        # Quadrature mass of F0 differs slightly from the fluid density.
        E0 = E0 + gauss_field(integrate_v(F0, vg) - s0.rho, sg)
    full = FullState(F0, E0, s0.B, s0.time)
    n_steps = min(int(math.floor(_horizon(cfg, bg, eps) / bg.dt + 1e-9)), len(bg.snapshots) - 1)
    rows = []

    def record(i: int) -> None:
        st = bg.snapshots[i]
        row = {"time": st.time, "eps": eps}
        if rem is not None:
            er = energy_functionals(rem, es, p, cfg.ell)
            row["E_total"], row["D_total"] = er.energy, er.dissipation
            Fr = reconstruct(rem, es)
            row["route_gap"] = float(np.max(np.abs(full.F - Fr)) / np.max(np.abs(full.F)))
        else:
            row["E_total"] = row["D_total"] = row["route_gap"] = float("nan")
        row["h2_metric"] = convergence_metric(full.F, st.moments, sg, vg)
        if full.E is not None:
            rho = integrate_v(full.F, vg)
            row["gauss_drift"] = float(np.max(np.abs(gauss_residual(full.E, rho - np.mean(rho), sg))))
            row["divB_drift"] = float(np.max(np.abs(divergence(full.B, sg))))
        else:
            row["gauss_drift"] = row["divB_drift"] = 0.0
        row["min_F"] = positivity_ratio(full.F)
        rows.append(row)

    record(0)
    for i in range(n_steps):
        full = step_full(full, eps, bg.dt, sg, vg, log=log)
        if rem is not None:
            rem = step_imex(rem, es, p, log=log)
        record(i + 1)
    return rows


def write_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header_cells())
        for r in rows:
            w.writerow([repr(float(r[name])) for name, _ in COLUMNS])


def read_csv(path: Path) -> dict[str, np.ndarray]:
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = [row for row in reader]
    except (OSError, StopIteration) as exc:
        raise SchemaError(f"{path}: unreadable ({exc})") from None
    names = [_column_name(c) for c in header]
    for col in REQUIRED:
        if col not in names:
            raise SchemaError(f"{path}: missing column {col!r}")
    out = {}
    for j, name in enumerate(names):
        try:
            out[name] = np.array([float(r[j]) for r in data])
        except (ValueError, IndexError):
            raise SchemaError(f"{path}: column {name!r} has a malformed entry") from None
    return out


def fit_slope(eps: np.ndarray, values: np.ndarray) -> float:
    return float(np.polyfit(np.log(eps), np.log(values), 1)[0])


def cumulative_dissipation(t: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Trapezoidal running integral of D over t, starting at zero."""
    steps = 0.5 * np.diff(t) * (D[1:] + D[:-1])
    return np.concatenate([[0.0], np.cumsum(steps)])


def summarise(branch: str, k: int, per_eps: dict[float, dict[str, np.ndarray]]) -> dict:
    eps = np.array(sorted(per_eps, reverse=True))
    sup_h2 = np.array([np.max(per_eps[e]["h2_metric"]) for e in eps])
    out = {
        "branch": branch,
        "k": k,
        "eps": eps.tolist(),
        "sup_h2_metric": sup_h2.tolist(),
        "min_F_ratio": [float(np.min(per_eps[e]["min_F"])) for e in eps],
        "max_gauss_drift": [float(np.max(per_eps[e]["gauss_drift"])) for e in eps],
        "max_divB_drift": [float(np.max(per_eps[e]["divB_drift"])) for e in eps],
    }
    if len(eps) >= 2:
        out["h2_slope"] = fit_slope(eps, sup_h2)
        out["h2_monotone"] = bool(np.all(np.diff(sup_h2) < 0))
    else:
        out["notice"] = "insufficient points for slope fit"
    consts = []
    for e in eps:
        d = per_eps[e]
        if len(d["time"]) > 1 and np.all(np.isfinite(d["E_total"])):
            lhs = d["E_total"] + cumulative_dissipation(d["time"], d["D_total"])
            consts.append(float(np.max(lhs) / (d["E_total"][0] + e ** (2 * k + 3))))
    if consts:
        out["energy_constants"] = consts
        if len(consts) >= 2:
            out["energy_constant_spread"] = float(max(consts) / min(consts) - 1.0)
    return out


def _plot_script() -> str:
    return '''"""Render metric-versus-eps and E(t) curves from the sweep CSVs in this directory."""
import csv, glob, json, os
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
summary = json.load(open(os.path.join(here, "summary.json")))
fig, ax = plt.subplots(1, 2, figsize=(10, 4))
ax[0].loglog(summary["eps"], summary["sup_h2_metric"], "o-")
ax[0].set_xlabel("eps")
ax[0].set_ylabel("sup_t H2 metric")
for path in sorted(glob.glob(os.path.join(here, "*_eps*.csv"))):
    rows = list(csv.reader(open(path)))
    names = [c.split(" [")[0] for c in rows[0]]
    t = [float(r[names.index("time")]) for r in rows[1:]]
    e = [float(r[names.index("E_total")]) for r in rows[1:]]
    ax[1].semilogy(t, e, label=os.path.basename(path))
ax[1].set_xlabel("t")
ax[1].set_ylabel("E(t)")
ax[1].legend(fontsize=7)
fig.tight_layout()
fig.savefig(os.path.join(here, "sweep.png"), dpi=120)
'''


def csv_name(branch: str, eps: float) -> str:
    return f"{branch}_eps{eps!r}.csv"


def run_sweep(cfg: RunConfig, out_dir: str | os.PathLike | None = None) -> dict:
    out = Path(out_dir or cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(config_to_text(cfg))
    log = EventLog()
    started = _time.time()
    bg = build_background(cfg)
    per_eps = {}
    for eps in cfg.eps:
        try:
            rows = run_point(cfg, bg, eps, log)
        except Exception as exc:
            raise RuntimeError(f"sweep aborted at eps = {eps}: {exc}") from exc
        write_csv(out / csv_name(cfg.branch, eps), rows)
        per_eps[eps] = {name: np.array([r[name] for r in rows]) for name in list(rows[0])}
    summary = summarise(cfg.branch, cfg.k, per_eps)
    summary["events"] = log.events
    summary["threads"] = cfg.threads
    summary["version"] = __version__
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    (out / "plot_sweep.py").write_text(_plot_script())
    (out / "timing.txt").write_text(f"{_time.time() - started:.1f} s\n")
    return summary


def cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    summary = run_sweep(cfg, args.out)
    print(json.dumps({k: v for k, v in summary.items() if k != "events"}, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------- report


def build_report(directory: str | os.PathLike) -> str:
    d = Path(directory)
    files = sorted(d.glob("*_eps*.csv"))
    if not files:
        raise SchemaError(f"{d}: no sweep CSV files")
    branches = {f.name.split("_eps", 1)[0] for f in files}
    if len(branches) > 1:
        raise SchemaError(f"{d}: mixed branches {sorted(branches)}; refusing to merge")
    branch = branches.pop()
    k = 2
    cfg_path = d / "config.ini"
    if cfg_path.exists():
        k = load_config(cfg_path).k
    per_eps = {}
    for f in files:
        data = read_csv(f)
        per_eps[float(data["eps"][0])] = data
    s = summarise(branch, k, per_eps)
    lines = [f"# Sweep summary ({branch} branch, k = {k})", ""]
    lines.append("| eps | sup H2 metric [convergence metric] | min F / max F [positivity] | max Gauss drift | max div B |")
    lines.append("|---|---|---|---|---|")
    for i, e in enumerate(s["eps"]):
        lines.append(
            f"| {e:g} | {s['sup_h2_metric'][i]:.4e} | {s['min_F_ratio'][i]:.3e} | "
            f"{s['max_gauss_drift'][i]:.2e} | {s['max_divB_drift'][i]:.2e} |"
        )
    lines.append("")
    if "notice" in s:
        lines.append(f"Notice: {s['notice']}.")
    else:
        ok = s["h2_slope"] >= 0.8 and s["h2_monotone"]
        lines.append(
            f"H2 metric slope [hydrodynamic convergence]: {s['h2_slope']:.3f} "
            f"(monotone: {s['h2_monotone']}; threshold 0.8): {'PASS' if ok else 'FAIL'}"
        )
    pos = min(s["min_F_ratio"]) >= -1e-8
    lines.append(f"Positivity [min F >= -1e-8 max F]: {'PASS' if pos else 'FAIL'}")
    if branch == "vml":
        ok = max(s["max_gauss_drift"] + s["max_divB_drift"]) <= 1e-6
        lines.append(f"Constraint drift [Gauss law, div B <= 1e-6]: {'PASS' if ok else 'FAIL'}")
    if "energy_constant_spread" in s:
        ok = s["energy_constant_spread"] <= 0.2
        lines.append(
            f"Energy inequality constant [E + int D <= C (E(0) + eps^(2k+3))]: "
            f"C = {', '.join(f'{c:.3e}' for c in s['energy_constants'])}, spread {s['energy_constant_spread']:.2f}: "
            f"{'PASS' if ok else 'FAIL'}"
        )
    return "\n".join(lines) + "\n"


def cmd_report(args) -> int:
    text = build_report(args.directory)
    (Path(args.directory) / "summary.md").write_text(text)
    print(text, end="")
    return 0


# ---------------------------------------------------------------- operators-dump


def dump_sigma(n_v: int, v_max: float, T_c: float, path: str | os.PathLike) -> Path:
    grid = VelocityGrid(n_v=n_v, v_max=v_max)
    sigma = get_operator(grid).sigma_conv(global_maxwellian(GlobalMaxwellianParams(T_c), grid))
    v = grid.mesh
    cols = [v[0].ravel(), v[1].ravel(), v[2].ravel()]
    names = ["v1", "v2", "v3"]
    for i in range(3):
        for j in range(i, 3):
            cols.append(sigma[i, j].ravel())
            names.append(f"sigma{i + 1}{j + 1}")
    path = Path(path)
    header = f"sigma_mu table, n_v={n_v}, v_max={v_max}, T_c={T_c}, format 1\n" + ",".join(names)
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, fmt="%.17g")
    return path


def cmd_operators_dump(args) -> int:
    path = dump_sigma(args.n_v, args.v_max, args.T_c, args.out)
    print(path)
    return 0


# ---------------------------------------------------------------- entry


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="landau-hilbert", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("selftest", help="operator identities, conservation and norm checks")
    p.add_argument("--corrupt-kernel", action="store_true", help="negative control: flip the drift sign")
    p.add_argument("--json", action="store_true")
    p.add_argument("--n-v", type=int, default=12)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("sweep", help="eps sweep: background, coefficients, remainder and full-F runs")
    p.add_argument("config", nargs="?")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="merge a sweep directory into summary.md")
    p.add_argument("directory")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("operators-dump", help="write the sigma_mu table as CSV")
    p.add_argument("--n-v", type=int, default=16)
    p.add_argument("--v-max", type=float, default=6.0)
    p.add_argument("--T-c", type=float, default=1.0)
    p.add_argument("--out", default="sigma_mu.csv")
    p.set_defaults(func=cmd_operators_dump)

    p = sub.add_parser("config-reference", help="print every configuration key")
    p.set_defaults(func=lambda a: print(config_reference()) or 0)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args) or 0)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
