"""Command-line front end.

    sigmahomog <cell|tensor|macro|darcy|dns|study|audit> --config FILE [--out DIR] [--threads K]

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, SigmaHomogError, SolverFailure
from .grid import DomainGrid, PeriodicGrid, set_threads

COMMANDS = ("cell", "tensor", "macro", "darcy", "dns", "study", "audit")

_FLOAT, _INT, _STR, _LIST = float, int, str, "list"

SCHEMA = {
    "coefficients": {"kind": _STR, "a_min": _FLOAT, "a_max": _FLOAT, "a11": _FLOAT, "a12": _FLOAT,
                     "a22": _FLOAT, "mean1": _FLOAT, "mean2": _FLOAT, "base": _FLOAT, "shear": _FLOAT},
    "geometry": {"kind": _STR, "radius": _FLOAT},
    "forcing": {"kind": _STR, "amplitude": _FLOAT, "potential": _FLOAT, "vector": _LIST, "length": _FLOAT},
    "grid": {"n": _INT, "n_cell": _INT, "T": _FLOAT, "nt": _INT, "dt": _FLOAT, "cells_per_period": _INT},
    "solver": {"cg_tol": _FLOAT, "tol": _FLOAT, "eta": _FLOAT, "eta_power": _FLOAT, "max_iter": _INT,
               "method": _STR},
    "study": {"kind": _STR, "epsilon_list": _LIST, "epsilon": _FLOAT, "nu": _FLOAT, "seed": _INT,
              "out_dir": _STR, "trials": _INT},
}

POSITIVE = {("grid", "n"), ("grid", "n_cell"), ("grid", "T"), ("grid", "nt"), ("grid", "dt"),
            ("grid", "cells_per_period"), ("solver", "cg_tol"), ("solver", "tol"), ("solver", "eta"),
            ("solver", "eta_power"), ("solver", "max_iter"), ("study", "nu"), ("study", "trials"),
            ("study", "epsilon"), ("forcing", "length")}


class Config:
    """Validated configuration: ``cfg.get(section, key, default)``."""

    def __init__(self, path, values: dict):
        self.path = str(path)
        self.values = values

    def has(self, section):
        return section in self.values

    def get(self, section, key, default=None):
        return self.values.get(section, {}).get(key, default)

    def flat(self) -> dict:
        return {f"{s}.{k}": v for s, kv in self.values.items() for k, v in kv.items()}


def _convert(path, section, key, raw, kind):
    try:
        if kind == _LIST:
            out = [float(x) for x in raw.replace(",", " ").split()]
            if not out:
                raise ValueError
            return out
        return kind(raw)
    except ValueError:
        name = "list of numbers" if kind == _LIST else kind.__name__
        raise ConfigError(f"{path}: [{section}] {key} = {raw!r} is not a valid {name}") from None


def load_config(path) -> Config:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(p.read_text(), source=str(p))
    except configparser.Error as exc:
        raise ConfigError(f"{p}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{p}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{p}: unknown key '{key}' in [{section}]")
            val = _convert(p, section, key, raw, SCHEMA[section][key])
            if (section, key) in POSITIVE and not val > 0:
                raise ConfigError(f"{p}: [{section}] {key} must be positive")
            values[section][key] = val
    cfg = Config(p, values)
    eps = cfg.get("study", "epsilon_list")
    if eps is not None and not all(0 < e < 1 for e in eps):
        raise ConfigError(f"{p}: [study] epsilon_list entries must lie in (0, 1)")
    return cfg


# ------------------------------------------------------------------ builders

def _coefficients(cfg):
    from .coeff import make_coefficients
    kw = dict(cfg.values.get("coefficients", {}))
    kind = kw.pop("kind", "identity")
    return make_coefficients(kind, **kw)


def _geometry(cfg):
    from .coeff import DiskDescriptor
    kind = cfg.get("geometry", "kind", "disk")
    if kind != "disk":
        raise ConfigError(f"{cfg.path}: [geometry] kind must be 'disk'")
    return DiskDescriptor(float(cfg.get("geometry", "radius", 0.25)))


def _forcing(cfg):
    from .coeff import make_forcing
    kw = dict(cfg.values.get("forcing", {}))
    kind = kw.pop("kind", "rotational")
    if "vector" in kw and len(kw["vector"]) != 2:
        raise ConfigError(f"{cfg.path}: [forcing] vector needs two components")
    return make_forcing(kind, **kw)


def _time_grid(cfg):
    T = float(cfg.get("grid", "T", 0.25))
    nt, dt = cfg.get("grid", "nt"), cfg.get("grid", "dt")
    if nt is None:
        nt = int(round(T / dt)) if dt is not None else 32
    if dt is not None and abs(nt * dt - T) > 1e-12 * max(1.0, T):
        raise ConfigError(f"{cfg.path}: [grid] dt = {dt} does not divide T = {T} into nt = {nt} steps")
    return T, int(nt)


def _domain(cfg, default_n=64):
    T, nt = _time_grid(cfg)
    return DomainGrid.square(int(cfg.get("grid", "n", default_n)), T=T, nt=nt)


def _params(cfg):
    from .cell import SolverParams
    return SolverParams(cg_tol=float(cfg.get("solver", "cg_tol", 1e-10)),
                        max_iter=int(cfg.get("solver", "max_iter", 5000)),
                        eta=cfg.get("solver", "eta"))


def _tol(cfg):
    return float(cfg.get("solver", "tol", 1e-10))


# ------------------------------------------------------------------ workflows

def _cell_solve(cfg):
    from .tensor import assemble_K, homogenized_tensor
    from .cell import solve_all_correctors, solve_permeability_correctors
    from .coeff import make_disk_geometry
    n = int(cfg.get("grid", "n_cell", cfg.get("grid", "n", 64)))
    out = {}
    if cfg.has("coefficients") or not cfg.has("geometry"):
        A = _coefficients(cfg).sample(PeriodicGrid(n))
        C = solve_all_correctors(A, _params(cfg))
        out["elliptic"] = (A, C, homogenized_tensor(A, C))
    if cfg.has("geometry"):
        G = make_disk_geometry(n, _geometry(cfg).radius)
        P = solve_permeability_correctors(G, _params(cfg))
        out["permeability"] = (G, P, assemble_K(P))
    return out


def cmd_cell(cfg, out: Path) -> dict:
    from .io import write_keyvalue, write_sgf
    res = _cell_solve(cfg)
    info = {}
    if "elliptic" in res:
        _, C, _ = res["elliptic"]
        for i in (1, 2):
            for k in (1, 2):
                write_sgf(out / f"chi_{i}{k}.sgf", C.field(i, k), components=2)
        write_keyvalue(out / "corrector_residuals.txt",
                       {f"residual_{i}{k}": C.residuals[i, k] for (i, k) in sorted(C.residuals)})
        info["elliptic_iterations"] = [C.iterations[key] for key in sorted(C.iterations)]
    if "permeability" in res:
        _, P, _ = res["permeability"]
        for j in (1, 2):
            write_sgf(out / f"chi_perm_{j}.sgf", P.field(j), components=2)
        write_keyvalue(out / "perm_residuals.txt",
                       {f"residual_{j}": P.residuals[j] for j in sorted(P.residuals)})
        info["perm_iterations"] = [P.iterations[j] for j in sorted(P.iterations)]
    return info


def cmd_tensor(cfg, out: Path) -> dict:
    from .io import manifest_hash, write_keyvalue
    from .tensor import write_tensor_csv, write_tensor_keyvalue
    res = _cell_solve(cfg)
    tag = manifest_hash(cfg.flat())
    info = {}
    if "elliptic" in res:
        qt = res["elliptic"][2]
        write_tensor_keyvalue(out / "tensor.txt", qt, {"cross_gap": qt.meta["cross_gap"]})
        write_tensor_csv(out / "tensor.csv", qt, tag)
        info["alpha0"] = qt.alpha0
    if "permeability" in res:
        K = res["permeability"][2]
        write_keyvalue(out / "permeability.txt",
                       {**K.entries(), "min_eig": K.min_eig, "cross_gap": K.cross_gap})
        info["K_min_eig"] = K.min_eig
    return info


def _write_trajectory(out: Path, traj, prefix: str):
    from .io import write_csv, write_sgf
    g = traj.grid
    u, v = traj.velocity(traj.u.shape[0] - 1)
    write_sgf(out / f"{prefix}_u_final.sgf", u)
    write_sgf(out / f"{prefix}_v_final.sgf", v)
    write_sgf(out / f"{prefix}_p_final.sgf", traj.pressure(traj.p.shape[0] - 1))
    keys = ("step", "t", "energy", "div_norm", "pressure_mean", "energy_residual", "iterations")
    write_csv(out / f"{prefix}_diagnostics.csv", keys,
              [tuple(d.get(k, 0) for k in keys) for d in traj.diagnostics])
    return {"nx": g.nx, "nt": g.nt}


def cmd_macro(cfg, out: Path) -> dict:
    from .macro import solve_homogenized_ns
    from .tensor import write_tensor_keyvalue
    if cfg.has("geometry") and not cfg.has("coefficients"):
        raise ConfigError(f"{cfg.path}: macro needs a [coefficients] section")
    qt = _cell_solve(cfg)["elliptic"][2]
    g = _domain(cfg)
    ms = solve_homogenized_ns(qt, _forcing(cfg), g, tol=_tol(cfg),
                              method=cfg.get("solver", "method", "direct"))
    write_tensor_keyvalue(out / "tensor.txt", qt)
    return _write_trajectory(out, ms.traj, "macro")


def cmd_darcy(cfg, out: Path) -> dict:
    from .io import write_keyvalue, write_sgf
    from .macro import solve_darcy
    if not cfg.has("geometry"):
        raise ConfigError(f"{cfg.path}: darcy needs a [geometry] section")
    K = _cell_solve(cfg)["permeability"][2]
    g = _domain(cfg)
    nu = float(cfg.get("study", "nu", 1.0))
    ds = solve_darcy(K, nu, _forcing(cfg), g, tol=_tol(cfg))
    write_sgf(out / "darcy_p_final.sgf", ds.p0[-1].reshape(g.nx, g.ny))
    u, v = ds.velocity(len(ds.times) - 1)
    write_sgf(out / "darcy_u_final.sgf", u)
    write_sgf(out / "darcy_v_final.sgf", v)
    write_keyvalue(out / "permeability.txt", K.entries())
    return {"max_compatibility": max(ds.compatibility), "iterations": max(ds.iterations)}


def cmd_dns(cfg, out: Path) -> dict:
    from .dns import audit_estimates, solve_eps_oscillating, solve_eps_porous
    from .io import write_keyvalue
    eps = cfg.get("study", "epsilon")
    if eps is None:
        raise ConfigError(f"{cfg.path}: dns needs [study] epsilon")
    if not eps < 1:
        raise ConfigError(f"{cfg.path}: [study] epsilon must be below 1")
    g = _domain(cfg)
    f = _forcing(cfg)
    if cfg.has("geometry"):
        eta = cfg.get("solver", "eta")
        if eta is None and cfg.get("solver", "eta_power") is not None:
            eta = g.h ** float(cfg.get("solver", "eta_power"))
        es = solve_eps_porous(_geometry(cfg), eps, float(cfg.get("study", "nu", 1.0)), f, g,
                              tol=_tol(cfg), eta=eta)
    else:
        es = solve_eps_oscillating(_coefficients(cfg), eps, f, g, tol=_tol(cfg),
                                   method=cfg.get("solver", "method", "pcg"))
    info = _write_trajectory(out, es.traj, "dns")
    write_keyvalue(out / "audit.txt", audit_estimates(es, f).as_dict())
    return info


def cmd_study(cfg, out: Path) -> dict:
    from .harness import (darcy_checks, darcy_study, export_report, homogenization_checks,
                          homogenization_study, DEFAULT_EPS)
    from .io import write_keyvalue, manifest_text
    eps = tuple(cfg.get("study", "epsilon_list", DEFAULT_EPS))
    T, nt = _time_grid(cfg)
    kind = cfg.get("study", "kind", "darcy" if cfg.has("geometry") else "homogenization")
    if kind == "homogenization":
        r = homogenization_study(_coefficients(cfg), _forcing(cfg), eps, n=cfg.get("grid", "n"),
                                 T=T, nt=nt, tol=_tol(cfg), n_cell=int(cfg.get("grid", "n_cell", 128)))
        checks = homogenization_checks(r)
    elif kind == "darcy":
        r = darcy_study(_geometry(cfg), float(cfg.get("study", "nu", 1.0)), _forcing(cfg), eps,
                        cells_per_period=int(cfg.get("grid", "cells_per_period", 16)), T=T, nt=nt,
                        tol=_tol(cfg), n_cell=int(cfg.get("grid", "n_cell", 128)),
                        eta_power=float(cfg.get("solver", "eta_power", 2.0)))
        checks = darcy_checks(r)
    else:
        raise ConfigError(f"{cfg.path}: [study] kind must be 'homogenization' or 'darcy'")
    export_report(r, out / "report.csv")
    (out / "report.manifests").write_text(
        "".join(f"[{h}]\n{manifest_text(m)}\n" for h, m in sorted(r.manifests.items())))
    write_keyvalue(out / "checks.txt", {k: ("n/a" if v is None else ("pass" if v else "fail"))
                                        for k, v in checks.items()})
    return {"complete": r.complete, "rows": len(r.rows)}


def cmd_audit(cfg, out: Path) -> dict:
    from .dns import ladyzhenskaya_audit
    from .io import write_keyvalue
    g = _domain(cfg)
    rep = ladyzhenskaya_audit(g, trials=int(cfg.get("study", "trials", 100)),
                              seed=int(cfg.get("study", "seed", 0)))
    write_keyvalue(out / "audit.txt", {k: v for k, v in rep.items() if k != "ratios"})
    np.savetxt(out / "ratios.txt", np.asarray(rep["ratios"]), fmt="%.17g")
    return {"max_ratio": rep["max_ratio"]}


HANDLERS = {"cell": cmd_cell, "tensor": cmd_tensor, "macro": cmd_macro, "darcy": cmd_darcy,
            "dns": cmd_dns, "study": cmd_study, "audit": cmd_audit}


def _parser():
    p = argparse.ArgumentParser(prog="sigmahomog", description="Periodic homogenization toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="INI-style configuration file")
    p.add_argument("--out", help="output directory (overrides SIGMAHOMOG_OUT)")
    p.add_argument("--threads", type=int, help="cap on FFT worker threads")
    return p


def run(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return 2
    threads = args.threads or os.cpu_count() or 1
    set_threads(threads)
    try:
        cfg = load_config(args.config)
        out = Path(args.out or os.environ.get("SIGMAHOMOG_OUT") or cfg.get("study", "out_dir")
                   or "sigmahomog_out")
        out.mkdir(parents=True, exist_ok=True)
        start = time.time()
        info = HANDLERS[args.command](cfg, out)
    except SolverFailure as exc:
        print(f"solver failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    except (ConfigError, SigmaHomogError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    from .io import write_manifest
    params = {"command": args.command, "config": str(Path(args.config).resolve()),
              "version": __version__, "threads": threads, **cfg.flat(),
              **{f"result.{k}": v for k, v in info.items()},
              "wallclock": round(time.time() - start, 3)}
    h = write_manifest(out / "run.manifest", params)
    print(f"{args.command}: wrote {out} (manifest {h})")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
