"""Command-line driver: one subcommand per computation.

Settings come from built-in defaults, then an optional flat ``key = value``
file (``--config``), then command-line flags; later sources win. Exit codes:
0 success, 1 configuration error, 2 numeric, convergence or I/O failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import THREADS_ENV, default_workers
from .exceptions import DomainError, KickHOError
from .params import build_params
from .serialization import format_value, read_config, write_grid, write_series

MAX_AUTO_N = 2048


class ConfigError(DomainError):
    pass


# -- schema ----------------------------------------------------------------


def _int(s):
    return int(s)


def _float(s):
    x = float(s)
    if not math.isfinite(x):
        raise ValueError(f"{s!r} is not finite")
    return x


def _basis_size(s):
    if str(s).strip().lower() == "auto":
        return "auto"
    n = int(s)
    if n < 2:
        raise ValueError("basis size must be >= 2")
    return n


def _floats(count):
    def conv(s):
        parts = s.replace(",", " ").split() if isinstance(s, str) else list(s)
        vals = [_float(p) for p in parts]
        if len(vals) != count:
            raise ValueError(f"expected {count} numbers, got {len(vals)}")
        return tuple(vals)

    return conv


def _int_list(s):
    parts = s.replace(",", " ").split() if isinstance(s, str) else list(s)
    return [int(p) for p in parts]


def _initial(s):
    parts = s.split() if isinstance(s, str) else list(s)
    if parts == ["vacuum"]:
        return ("vacuum",)
    if len(parts) == 3 and parts[0] == "displaced":
        return ("displaced", _float(parts[1]), _float(parts[2]))
    raise ValueError("expected 'vacuum' or 'displaced x1 x2'")


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


SCHEMA = {
    "K": _float,
    "q": _int,
    "eta": _float,
    "eta_from": _float,
    "eta_to": _float,
    "eta_step": _float,
    "N": _basis_size,
    "kicks": _int,
    "initial": _initial,
    "threshold": _float,
    "ensemble": _int,
    "seed": _int,
    "traj_kicks": _int,
    "start": _floats(2),
    "web_half_width": _float,
    "web_bins": _int,
    "half_width": _float,
    "nodes": _int,
    "phase": _float,
    "sizes": _int_list,
    "phase_window": _floats(2),
    "max_gap": _float,
    "merge_gap": _float,
    "refine_tol": _float,
    "threads": _int,
    "out": str,
    "emit_plot": _bool,
}

# seed is recorded everywhere; only the classical ensemble consumes it
COMMON = {"K": 2.0, "q": 6, "seed": 0, "threads": None, "emit_plot": False}

DEFAULTS = {
    "heat": {"eta": 0.464, "kicks": 100, "initial": "vacuum", "N": "auto", "out": "heat.csv"},
    "classical": {
        "eta": 0.464, "kicks": 100, "ensemble": 10000, "traj_kicks": 40000,
        "start": "0.005 0.005", "web_half_width": 60.0, "web_bins": 120, "out": "classical.csv",
    },
    "sweep": {
        "eta_from": 0.44, "eta_to": 0.49, "eta_step": 1e-3, "N": 400, "threshold": 1e-3,
        "initial": "vacuum", "out": "sweep.csv",
    },
    "crossings": {
        "eta_from": 0.44, "eta_to": 0.49, "eta_step": 1e-3, "N": 400, "threshold": 1e-2,
        "initial": "vacuum", "max_gap": 0.1, "merge_gap": 1e-2, "refine_tol": 1e-5, "out": "crossings.csv",
    },
    "husimi": {
        "eta": 0.459, "N": 400, "threshold": 1e-2, "initial": "vacuum", "kicks": 0,
        "half_width": 20.0, "nodes": 161, "phase": None, "merge_gap": 1e-2, "out": "husimi.csv",
    },
    "etascan": {
        "eta_from": 0.40, "eta_to": 0.70, "eta_step": 0.002, "kicks": 600, "N": 1024,
        "initial": "vacuum", "out": "etascan.csv",
    },
    "converge": {
        "eta": 0.464, "sizes": "200,300,400", "threshold": 1e-2, "initial": "vacuum",
        "phase_window": None, "out": "converge.csv",
    },
}

HELP = {
    "heat": "quantum heating curve: mean energy and leakage per kick",
    "classical": "classical ensemble heating curve and a long web trajectory",
    "sweep": "overlap-filtered quasienergies along an eta grid (level dynamics)",
    "crossings": "avoided crossings between quasienergy bands",
    "husimi": "Husimi Q function of an eigenband or an evolved state",
    "etascan": "energy after a fixed number of kicks versus eta",
    "converge": "band phase drift between increasing basis sizes",
}


@dataclass
class RunConfig:
    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def header(self) -> dict:
        out = {"command": self.command}
        for k, v in self.values.items():
            if v is None:
                continue
            if isinstance(v, tuple) and v and isinstance(v[0], str):
                v = " ".join(format_value(x) for x in v)
            elif isinstance(v, (tuple, list)):
                v = ",".join(format_value(x) for x in v)
            out[k] = v
        return out


def resolve_config(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    """Merge defaults, config-file and flag values, converting every entry."""
    for k in file_values:
        if k not in SCHEMA and k != "command":
            raise ConfigError(f"unknown configuration key {k!r}", k)
    merged = {**COMMON, **DEFAULTS[command]}
    for k, v in flag_values.items():
        if v is not None and k not in merged:
            raise ConfigError(f"option --{k.replace('_', '-')} does not apply to '{command}'", k)
    # a shared config file may carry keys for other subcommands; those are ignored
    merged.update({k: v for k, v in file_values.items() if k in merged})
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    values = {}
    for k, raw in merged.items():
        if raw is None or k not in SCHEMA:
            values[k] = raw
            continue
        try:
            values[k] = SCHEMA[k](raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid value {raw!r} for {k}: {exc}", k) from None
    if values.get("threads") is None:
        values["threads"] = default_workers()
    if values["threads"] < 1:
        raise ConfigError("threads must be >= 1", "threads")
    cfg = RunConfig(command, values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    v = cfg.values
    # parameter checks reuse the library's validation so messages match
    eta = v.get("eta") if v.get("eta") is not None else v.get("eta_from")
    build_params(v["K"], v["q"], eta)
    if "eta_from" in v:
        if not 0 < v["eta_from"] < v["eta_to"]:
            raise ConfigError("need 0 < eta_from < eta_to", "eta_from")
        if v["eta_step"] <= 0:
            raise ConfigError("eta_step must be positive", "eta_step")
    for key in ("kicks", "traj_kicks"):
        if key in v and v[key] < 0:
            raise ConfigError(f"{key} must be >= 0", key)
    for key in ("ensemble", "nodes", "web_bins"):
        if key in v and v[key] < 1:
            raise ConfigError(f"{key} must be >= 1", key)
    if "threshold" in v and not 0 < v["threshold"] < 1:
        raise ConfigError("threshold must lie in (0, 1)", "threshold")
    if v.get("N") == "auto":
        if cfg.command != "heat":
            raise ConfigError("N = auto is only supported by 'heat'", "N")
    elif v.get("N") is not None and v["N"] > MAX_AUTO_N * 4:
        raise ConfigError(f"N = {v['N']} exceeds the supported maximum {MAX_AUTO_N * 4}", "N")
    if cfg.command == "converge" and (len(v["sizes"]) < 2 or any(b <= a for a, b in zip(v["sizes"], v["sizes"][1:]))):
        raise ConfigError("sizes must list at least two increasing basis sizes", "sizes")


def eta_grid(cfg: RunConfig) -> np.ndarray:
    lo, hi, step = cfg["eta_from"], cfg["eta_to"], cfg["eta_step"]
    n = int(math.floor((hi - lo) / step + 1e-9))
    # rounding keeps grid values tidy in the CSV output
    return np.round(lo + step * np.arange(n + 1), 12)


# -- helpers shared by subcommands -----------------------------------------


def _initial_factory(cfg):
    from .propagation import displaced_vacuum, vacuum_state

    spec = cfg["initial"]
    if spec[0] == "vacuum":
        return vacuum_state
    center = (spec[1], spec[2])
    return lambda basis: displaced_vacuum(basis, center)


def _meta(cfg: RunConfig, **extra) -> dict:
    meta = cfg.header()
    meta.pop("out", None)
    meta.pop("emit_plot", None)
    meta.pop("threads", None)
    meta.update(extra)
    return meta


PLOT_TEMPLATES = {
    "heat": ("kick", "energy", "plot", "kick", "<n> + 1/2"),
    "classical": ("kick", "energy", "plot", "kick", "scaled energy"),
    "etascan": ("eta", None, "plot", "eta", "energy"),
    "sweep": ("eta", "phase", "scatter", "eta", "quasienergy phase"),
    "converge": ("N_to", "drift", "semilogy", "N", "band phase drift"),
    "crossings": ("eta_center", "phase_center", "scatter", "eta", "phase"),
}


def emit_plot_script(command: str, csv_path: Path) -> Path:
    """Write a small matplotlib script that plots ``csv_path``."""
    script = Path(str(csv_path) + ".plot.py")
    if command == "husimi":
        body = f'''import numpy as np
import matplotlib.pyplot as plt

with open({str(csv_path.name)!r}) as fh:
    lines = [line for line in fh if not line.startswith("#")]
d = np.genfromtxt(lines, delimiter=",", names=True)
x1, x2 = np.unique(d["x1"]), np.unique(d["x2"])
Q = d["value"].reshape(len(x1), len(x2))
plt.pcolormesh(x1, x2, Q.T, shading="auto")
plt.xlabel("v / 2 eta")
plt.ylabel("u / 2 eta")
plt.gca().set_aspect("equal")
plt.savefig({str(csv_path.stem) + ".png"!r}, dpi=150)
'''
    else:
        x, y, kind, xl, yl = PLOT_TEMPLATES[command]
        ycol = f'd.dtype.names[1]' if y is None else repr(y)
        body = f'''import numpy as np
import matplotlib.pyplot as plt

with open({str(csv_path.name)!r}) as fh:
    lines = [line for line in fh if not line.startswith("#")]
d = np.genfromtxt(lines, delimiter=",", names=True)
plt.{kind}(d[{x!r}], d[{ycol}]{", s=3" if kind == "scatter" else ""})
plt.xlabel({xl!r})
plt.ylabel({yl!r})
plt.savefig({str(csv_path.stem) + ".png"!r}, dpi=150)
'''
    script.write_text(body)
    return script


# -- subcommands -----------------------------------------------------------


def cmd_heat(cfg: RunConfig) -> int:
    from .fock import FockBasis
    from .propagation import converged_heating_curve, heating_curve

    p = build_params(cfg["K"], cfg["q"], cfg["eta"])
    make = _initial_factory(cfg)
    if cfg["N"] == "auto":
        curve = converged_heating_curve(p, cfg["kicks"], make, max_size=MAX_AUTO_N)
    else:
        basis = FockBasis(cfg["N"])
        curve = heating_curve(p, basis, cfg["kicks"], make(basis))
    meta = _meta(
        cfg,
        N_resolved=curve.basis.size,
        ktilde=p.ktilde,
        energy_definition="<n> + 1/2",
        converged=curve.converged,
        max_leakage=curve.max_leakage,
        doubling_deviation=curve.doubling_deviation if curve.doubling_deviation is not None else "n/a",
        notes="; ".join(curve.notes) or "none",
    )
    kick = np.arange(cfg["kicks"] + 1)
    _write(cfg, write_series, {"kick": kick, "energy": curve.energies, "leakage": curve.leakage_series}, meta)
    if cfg["N"] == "auto" and not curve.converged:
        print(f"kickho: heating curve not converged: {'; '.join(curve.notes)}", file=sys.stderr)
        return 2
    return 0


def cmd_classical(cfg: RunConfig) -> int:
    from .classical import (
        GridSpec,
        PhasePoint,
        ensemble_heating_curve,
        iterate_trajectory,
        occupancy_histogram,
        sample_vacuum_ensemble,
    )

    p = build_params(cfg["K"], cfg["q"], cfg["eta"])
    ens = sample_vacuum_ensemble(p.eta, cfg["ensemble"], cfg["seed"])
    curve = ensemble_heating_curve(ens, p, cfg["kicks"])
    meta = _meta(cfg, n_escaped=curve.n_escaped, energy_definition="(v^2 + u^2) / (4 eta^2)")
    out = Path(cfg["out"])
    _write(cfg, write_series, {"kick": np.arange(cfg["kicks"] + 1), "energy": curve.energies}, meta)

    traj = iterate_trajectory(PhasePoint(*cfg["start"]), p, cfg["traj_kicks"])
    tmeta = {**meta, "escaped": traj.escaped}
    tpath = out.with_name(out.stem + "_trajectory.csv")
    write_series(tpath, {"kick": np.arange(len(traj)), "v": traj.v, "u": traj.u}, tmeta)
    grid = GridSpec.square(cfg["web_half_width"], cfg["web_bins"])
    h = occupancy_histogram(traj, grid)
    vc = 0.5 * (h.v_edges[:-1] + h.v_edges[1:])
    uc = 0.5 * (h.u_edges[:-1] + h.u_edges[1:])
    hpath = out.with_name(out.stem + "_web.csv")
    write_grid(hpath, vc, uc, h.counts, {**tmeta, "overflow": h.overflow}, names=("v", "u", "count"))
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    from .fock import FockBasis
    from .spectral import eta_sweep

    basis = FockBasis(cfg["N"])
    grid = eta_grid(cfg)
    ld = eta_sweep(cfg["K"], cfg["q"], basis, grid, _initial_factory(cfg), cfg["threshold"], cfg["threads"])
    rows_eta, rows_phase, rows_ov = [], [], []
    for eta, levels in zip(grid, ld.levels):
        for lv in levels or []:
            rows_eta.append(eta)
            rows_phase.append(lv.phase)
            rows_ov.append(lv.overlap)
    ok = np.isfinite(ld.completeness)
    meta = _meta(
        cfg,
        phase_convention="U|e> = exp(+i phi)|e>, phi in (-pi, pi]",
        max_completeness_defect=float(np.max(np.abs(ld.completeness[ok] - 1))) if ok.any() else "n/a",
        failures=len(ld.failures),
    )
    _write(cfg, write_series, {"eta": rows_eta, "phase": rows_phase, "overlap": rows_ov}, meta)
    if ld.failures:
        for eta, msg in ld.failures.items():
            print(f"kickho: eta={eta}: {msg}", file=sys.stderr)
        return 2
    return 0


def cmd_crossings(cfg: RunConfig) -> int:
    from .fock import FockBasis
    from .spectral import crossings_pipeline

    res = crossings_pipeline(
        cfg["K"], cfg["q"], FockBasis(cfg["N"]), eta_grid(cfg), _initial_factory(cfg),
        cfg["threshold"], cfg["refine_tol"], cfg["merge_gap"], cfg["max_gap"], cfg["threads"],
    )
    cs = res.crossings
    cols = {
        "eta_center": [c.eta_center for c in cs],
        "phase_center": [c.phase_center for c in cs],
        "min_gap": [c.min_gap for c in cs],
        "branch_a": [c.branch_ids[0] for c in cs],
        "branch_b": [c.branch_ids[1] for c in cs],
        "refined": [c.refined for c in cs],
        "converged": [c.converged for c in cs],
        "degenerate": [c.degenerate for c in cs],
    }
    meta = _meta(
        cfg,
        phase_convention="U|e> = exp(+i phi)|e>, phi in (-pi, pi]",
        branches=len(res.branches),
        failures=len(res.level_dynamics.failures),
    )
    _write(cfg, write_series, cols, meta)
    return 2 if res.level_dynamics.failures else 0


def cmd_husimi(cfg: RunConfig) -> int:
    from .fock import FockBasis, floquet_operator
    from .husimi import HusimiGrid, husimi_grid, localization_fraction
    from .propagation import apply_floquet
    from .spectral import circular_distance, diagonalize, group_bands, overlap_filter

    basis = FockBasis(cfg["N"])
    p = build_params(cfg["K"], cfg["q"], cfg["eta"])
    U = floquet_operator(p, basis)
    psi = _initial_factory(cfg)(basis)
    extra = {}
    if cfg["phase"] is not None:
        spec = diagonalize(U)
        bands = group_bands(overlap_filter(spec, psi, cfg["threshold"]), cfg["merge_gap"])
        if not bands:
            raise ConfigError("no filtered eigenstates; lower the threshold", "threshold")
        band = min(bands, key=lambda b: circular_distance(b.phase, cfg["phase"]))
        state = band.vectors
        extra = {"band_phase": band.phase, "band_size": band.size, "band_weight": band.weight}
    else:
        for _ in range(cfg["kicks"]):
            psi = apply_floquet(psi, U)
        state = psi
    grid = HusimiGrid.square(cfg["half_width"], cfg["nodes"])
    field = husimi_grid(state, grid)
    meta = _meta(
        cfg,
        coordinates="x1 = v/(2 eta) = Re beta, x2 = u/(2 eta) = Im beta",
        total_mass=field.total_mass(),
        localization_1_5=localization_fraction(field, 1.5, check_coverage=False),
        mass_beyond_3=field.mass_beyond(3.0),
        **extra,
    )
    _write(cfg, write_grid, grid.x1, grid.x2, field.values, meta)
    return 0


def cmd_etascan(cfg: RunConfig) -> int:
    from .fock import FockBasis
    from .propagation import energy_scan

    grid = eta_grid(cfg)
    basis = FockBasis(cfg["N"])
    E, L = energy_scan(cfg["K"], cfg["q"], grid, cfg["kicks"], basis, _initial_factory(cfg), cfg["threads"])
    meta = _meta(cfg, energy_definition="<n> + 1/2", max_leakage=float(np.max(L)))
    _write(cfg, write_series, {"eta": grid, f"energy_after_{cfg['kicks']}": E}, meta)
    return 0


def cmd_converge(cfg: RunConfig) -> int:
    from .spectral import convergence_report

    rep = convergence_report(
        cfg["K"], cfg["q"], cfg["eta"], cfg["sizes"], _initial_factory(cfg), cfg["threshold"], cfg["phase_window"]
    )
    meta = _meta(cfg, monotone=rep.monotone, saturated_at=rep.saturated_at if rep.saturated_at else "none")
    cols = {"N_from": rep.sizes[:-1], "N_to": rep.sizes[1:], "drift": rep.drifts}
    _write(cfg, write_series, cols, meta)
    return 0


COMMANDS = {
    "heat": cmd_heat,
    "classical": cmd_classical,
    "sweep": cmd_sweep,
    "crossings": cmd_crossings,
    "husimi": cmd_husimi,
    "etascan": cmd_etascan,
    "converge": cmd_converge,
}


def _write(cfg, writer, *args):
    path = writer(Path(cfg["out"]), *args)
    if cfg["emit_plot"]:
        emit_plot_script(cfg.command, path)
    return path


# -- argument parsing ------------------------------------------------------


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


FLAGS = [
    ("--K", {}), ("--q", {}), ("--eta", {}),
    ("--eta-from", {}), ("--eta-to", {}), ("--eta-step", {}),
    ("--N", {"help": "basis size or 'auto' (heat only)"}),
    ("--kicks", {}), ("--initial", {"nargs": "+", "help": "vacuum | displaced X1 X2"}),
    ("--threshold", {}), ("--ensemble", {}), ("--seed", {}),
    ("--traj-kicks", {}), ("--start", {"nargs": 2}),
    ("--web-half-width", {}), ("--web-bins", {}),
    ("--half-width", {}), ("--nodes", {}), ("--phase", {}),
    ("--sizes", {}), ("--phase-window", {"nargs": 2}),
    ("--max-gap", {}), ("--merge-gap", {}), ("--refine-tol", {}),
    ("--threads", {"help": f"worker threads (default: ${THREADS_ENV} or CPU count)"}),
    ("--out", {"help": "output CSV path"}),
]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kickho", description="Kicked harmonic oscillator computations.")
    parser.add_argument("--version", action="version", version=f"kickho {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HELP[name], description=HELP[name])
        sp.add_argument("--config", help="flat key = value file; flags override it")
        for flag, kw in FLAGS:
            sp.add_argument(flag, dest=flag[2:].replace("-", "_"), default=None, **kw)
        sp.add_argument("--emit-plot", dest="emit_plot", action="store_const", const=True, default=None,
                        help="also write a matplotlib script next to each CSV")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise _UsageError("a subcommand is required")
        flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
        file_values = read_config(ns.config) if ns.config else {}
        cfg = resolve_config(ns.command, file_values, flags)
    except _UsageError as exc:
        print(f"kickho: usage error: {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"kickho: config error in '{exc.field or 'config'}': {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"kickho: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[cfg.command](cfg)
    except DomainError as exc:
        print(f"kickho: config error in '{exc.field or 'config'}': {exc}", file=sys.stderr)
        return 1
    except (KickHOError, OSError, FloatingPointError) as exc:
        print(f"kickho: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
