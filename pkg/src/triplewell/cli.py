"""Command-line front end: each subcommand wraps one module operation.

Outputs go to ``<out>/<command>/<label>.<ext>`` with a ``<label>.meta.json``
beside every artifact (config, config hash, package versions).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .fock import ModelParams, solve, write_spectrum_csv
from .torusfield import TorusGrid, synthesize, write_csv_matrix, write_pgm


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    m1: int = 128
    m2: int = 128
    psi1_start: float = -np.pi / 2
    psi2_start: float = -np.pi / 2

    def build(self) -> TorusGrid:
        return TorusGrid(self.m1, self.m2, self.psi1_start, self.psi2_start)


@dataclass(frozen=True)
class IntegratorSpec:
    method: str = "splitting"
    dt: float = 0.1  # output spacing
    step: float = 0.02  # splitting step
    rtol: float = 1e-12


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams = field(default_factory=ModelParams)
    grid: GridSpec = field(default_factory=GridSpec)
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    classifier: dict = field(default_factory=dict)  # ClassifierConfig overrides
    lock: dict = field(default_factory=dict)  # LockConfig overrides
    out: str = "out"
    seed: int = 0

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "grid": asdict(self.grid),
                "integrator": asdict(self.integrator), "classifier": dict(self.classifier),
                "lock": dict(self.lock), "out": self.out, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(model=ModelParams.from_dict(d.get("model", {})),
                       grid=GridSpec(**d.get("grid", {})),
                       integrator=IntegratorSpec(**d.get("integrator", {})),
                       classifier=dict(d.get("classifier", {})), lock=dict(d.get("lock", {})),
                       out=str(d.get("out", "out")), seed=int(d.get("seed", 0)))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def hash(self) -> str:
        """Hash of everything except the output directory."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def classifier_config(self):
        from .classifier import ClassifierConfig
        return ClassifierConfig(**self.classifier)

    def lock_config(self):
        from .meanfield import LockConfig
        return LockConfig(**self.lock)


def load_config(path: str | None, paper_defaults: bool = False) -> RunConfig:
    if path is None or paper_defaults:
        base = RunConfig()
        if path is None:
            return base
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if paper_defaults:
        data = dict(data)
        data["model"] = RunConfig().model.to_dict()
    return RunConfig.from_dict(data)


class Output:
    """Writes artifacts and their metadata under <out>/<command>/."""

    def __init__(self, cfg: RunConfig, command: str, argv: dict):
        self.cfg = cfg
        self.dir = Path(cfg.out) / command
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.argv = argv
        self.written: list[str] = []

    def path(self, label: str, ext: str) -> Path:
        p = self.dir / f"{label}.{ext}"
        self.written.append(str(p))
        return p

    def meta(self, label: str, extra: dict | None = None) -> None:
        data = {"command": self.command, "options": self.argv, "config": self.cfg.to_dict(),
                "config_hash": self.cfg.hash(),
                "versions": {"triplewell": __version__, "numpy": np.__version__,
                             "scipy": scipy.__version__, "python": platform.python_version()},
                "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
        if extra:
            data["result"] = extra
        (self.dir / f"{label}.meta.json").write_text(json.dumps(data, indent=2, sort_keys=True))


# --- commands --------------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig, args, out: Output) -> dict:
    _, es = solve(cfg.model)
    write_spectrum_csv(out.path("spectrum", "csv"), es.energies)
    res = {"n_states": len(es), "e_min": float(es.energies[0]), "e_max": float(es.energies[-1])}
    out.meta("spectrum", res)
    return res


def cmd_wavefn(cfg: RunConfig, args, out: Output) -> dict:
    basis, es = solve(cfg.model)
    grid = cfg.grid.build()
    res = {}
    for k in args.states:
        f = synthesize(es.state(k), basis, grid)
        label = f"state{k}"
        write_csv_matrix(out.path(f"{label}_density", "csv"), f.density)
        write_csv_matrix(out.path(f"{label}_phase", "csv"), f.phase)
        write_pgm(out.path(f"{label}_density", "pgm"), f.density)
        write_pgm(out.path(f"{label}_phase", "pgm"), f.phase, vmax=2 * np.pi)
        res[label] = {"energy": es.energy(k), "norm": f.norm()}
        out.meta(label, res[label])
    return res


def cmd_classify(cfg: RunConfig, args, out: Output) -> dict:
    from .classifier import classify_all, write_assignments_csv, write_summary_json

    basis, es = solve(cfg.model)
    bands = None
    if args.chaos:
        from .classical import chaotic_bands
        energies = np.linspace(es.energies[0], es.energies[-1], args.chaos_points) - cfg.model.zero_point
        bands = chaotic_bands(energies, cfg.model, seed=cfg.seed)
    assignments, summary = classify_all(es, basis, params=cfg.model,
                                        config=cfg.classifier_config(), chaotic_bands=bands)
    write_assignments_csv(out.path("assignments", "csv"), assignments)
    write_summary_json(out.path("summary", "json"), summary, {"chaotic_bands": bands or []})
    out.meta("assignments", summary)
    return summary


def _parse_seeds(text: str) -> list[tuple[float, float]]:
    try:
        return [tuple(float(v) for v in item.split(",")) for item in text.split(";") if item.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad seed list {text!r}; expected 'psi2,j2;psi2,j2'") from exc


def cmd_poincare(cfg: RunConfig, args, out: Output) -> dict:
    from .classical import poincare_section

    if args.seeds:
        seeds = _parse_seeds(args.seeds)
    else:
        seeds = [(0.0, j) for j in np.linspace(0.5, cfg.model.k_total - 0.5, args.n_seeds)]
    sec = poincare_section(args.energy, cfg.model, seeds, args.crossings,
                           rtol=min(cfg.integrator.rtol, 1e-12))
    label = f"E{args.energy:g}"
    sec.to_csv(out.path(label, "csv"))
    res = {"energy": args.energy, "n_crossings": int(len(sec.crossings)),
           "failures": {str(k): v for k, v in sec.failures.items()}}
    out.meta(label, res)
    return res


def _ints(text: str, n: int) -> list[int]:
    vals = [int(v) for v in text.split(",")]
    if len(vals) != n:
        raise ConfigError(f"expected {n} comma-separated integers, got {text!r}")
    return vals


def cmd_evolve(cfg: RunConfig, args, out: Output) -> dict:
    from .meanfield import (AmplitudeState, detect_locking, evolve, ic_from_eigenstate,
                            ic_from_number_state)

    if args.number_state:
        n = _ints(args.number_state, 3)
        state = ic_from_number_state(*n)
        label = "n" + "_".join(map(str, n))
    elif args.eigenstate:
        basis, es = solve(cfg.model)
        state = ic_from_eigenstate(es.state(args.eigenstate), basis)
        label = f"eig{args.eigenstate}"
    elif args.amplitudes:
        vals = [complex(v) for v in args.amplitudes.split(",")]
        if len(vals) != 3:
            raise ConfigError("--amplitudes needs three complex numbers")
        state = AmplitudeState(tuple(vals))
        label = "amplitudes"
    else:
        raise ConfigError("evolve needs --number-state, --eigenstate or --amplitudes")
    integ = cfg.integrator
    traj = evolve(state, cfg.model, args.t_end, dt=integ.dt, method=integ.method,
                  step=integ.step, rtol=integ.rtol, atol=integ.rtol)
    traj.to_csv(out.path(label, "csv"))
    report = detect_locking(traj, cfg.lock_config())
    report.to_json(out.path(f"{label}.lock", "json"))
    res = {"label": report.label, "locked": report.locked, "intermittent": report.intermittent}
    out.meta(label, res)
    return res


def cmd_gridmap(cfg: RunConfig, args, out: Output) -> dict:
    from .meanfield import classify_basis_grid

    basis, es = solve(cfg.model)
    from .classifier import classify_all
    assignments, _ = classify_all(es, basis, params=cfg.model, config=cfg.classifier_config())
    grid = classify_basis_grid(cfg.model, t_end=args.t_end, config=cfg.lock_config(),
                               assignments=assignments, eigensystem=es, basis=basis,
                               copies=args.copies)
    grid.to_csv(out.path("grid", "csv"))
    frac, n = grid.agreement()
    res = {"agreement": frac, "compared_cells": n}
    out.meta("grid", res)
    return res


COMMANDS = {"spectrum": cmd_spectrum, "wavefn": cmd_wavefn, "classify": cmd_classify,
            "poincare": cmd_poincare, "evolve": cmd_evolve, "gridmap": cmd_gridmap}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--paper-defaults", action="store_true",
                        help="use the default model parameters regardless of the config")

    p = argparse.ArgumentParser(prog="triplewell", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="eigenvalues as CSV")
    w = sub.add_parser("wavefn", parents=[common], help="density/phase grids of eigenstates")
    w.add_argument("--states", type=int, nargs="+", required=True, help="1-based state labels")
    c = sub.add_parser("classify", parents=[common], help="organization centers of all states")
    c.add_argument("--chaos", action="store_true", help="estimate chaotic bands for E2")
    c.add_argument("--chaos-points", type=int, default=16)
    s = sub.add_parser("poincare", parents=[common], help="psi1 = 0 section at fixed energy")
    s.add_argument("--energy", type=float, required=True, help="energy above the zero point")
    s.add_argument("--seeds", help="'psi2,j2;psi2,j2;...'")
    s.add_argument("--n-seeds", type=int, default=10, help="seeds along psi2 = 0 if --seeds is absent")
    s.add_argument("--crossings", type=int, default=100)
    e = sub.add_parser("evolve", parents=[common], help="mean-field trajectory and lock report")
    g = e.add_mutually_exclusive_group()
    g.add_argument("--number-state", help="n1,n2,n3")
    g.add_argument("--eigenstate", type=int)
    g.add_argument("--amplitudes", help="c1,c2,c3 (Python complex literals)")
    e.add_argument("--t-end", type=float, default=500.0)
    m = sub.add_parser("gridmap", parents=[common], help="classical vs quantum basis-state grid")
    m.add_argument("--t-end", type=float, default=300.0)
    m.add_argument("--copies", type=int, default=4, help="phase-jittered copies per cell")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.paper_defaults)
        if args.out:
            cfg = RunConfig(**{**{f.name: getattr(cfg, f.name) for f in fields(cfg)}, "out": args.out})
        opts = {k: v for k, v in vars(args).items() if k not in ("config", "out")}
        out = Output(cfg, args.command, opts)
        result = COMMANDS[args.command](cfg, args, out)
    except Exception as exc:  # reported as JSON for scripted callers
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        print(json.dumps(err), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    print(json.dumps({"command": args.command, "files": out.written, "result": result},
                     default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
