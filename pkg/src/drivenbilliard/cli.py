"""Command-line entry point: configuration, caching, and CSV/JSON emitters.

Every subcommand writes its artifacts plus a machine-readable manifest
(config echo, versions, timings); CSVs carry a ``# manifest:`` comment
line followed by a header row.  Configuration comes from an optional TOML
file (or a previous run's manifest JSON) with command-line flags winning.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from . import __version__
from .driving import GeometryError
from .perturbation import (beating_period, predict_table, rabi_population,
                           two_level_parameters)
from .pipeline import build_law_setup, build_system, make_law
from .propagator import prepare_initial, propagate
from .scan import refine_grid, scan as run_scan

USAGE_EXIT = 2
NUMERIC_EXIT = 1


@dataclass
class RunConfig:
    """Defaults reproduce the published parameter set."""

    law: str = "ratio"
    a0: float = 1.0
    b0: float = float(np.sqrt(0.51))
    amplitude: float = 0.1
    omega: float | None = None
    omega_range: tuple[float, float] | None = None
    omega_step: float = 0.02
    kmax: float = 40.0
    ntau: int = 1024
    nkeep: int = 16
    lmax: int = 32
    tau_run: float = 100.0
    rel_tol: float = 1e-9
    initial_state: int = 4
    init_mode: str = "energy_eigenstate"
    tau_int_cutoff: float = 2000.0
    out: str = "out"
    threads: int = 1
    refine: bool = False
    cache_dir: str | None = None

    def law_obj(self):
        return make_law(self.law, a0=self.a0, b0=self.b0, amplitude=self.amplitude)


class ConfigError(ValueError):
    pass


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    if p.suffix == ".json":  # a previous run's manifest round-trips
        data = json.loads(p.read_text())
        return data.get("config", data)
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def merge_config(file_cfg: dict, args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    known = set(cfg.__dataclass_fields__)
    for key, val in file_cfg.items():
        norm = key.replace("-", "_")
        if norm not in known:
            raise ConfigError(f"unknown config key: {key}")
        if norm == "omega_range" and val is not None:
            val = tuple(float(v) for v in val)
        setattr(cfg, norm, val)
    for key in known:
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if cfg.law not in ("ratio", "breathing", "volume"):
        raise ConfigError(f"unknown law: {cfg.law}")
    if cfg.init_mode not in ("energy_eigenstate", "instantaneous"):
        raise ConfigError(f"unknown init mode: {cfg.init_mode}")
    return cfg


def _manifest(cfg: RunConfig, stage: str, timings: dict, outputs: list[str]) -> dict:
    cfg_dict = asdict(cfg)
    if cfg_dict.get("omega_range") is not None:
        cfg_dict["omega_range"] = list(cfg_dict["omega_range"])
    return {
        "stage": stage,
        "config": cfg_dict,
        "versions": {"drivenbilliard": __version__,
                     "numpy": np.__version__},
        "timings": timings,
        "outputs": outputs,
    }


def write_csv(path: Path, manifest: dict, header: list[str], rows) -> None:
    lines = ["# manifest: " + json.dumps(manifest, sort_keys=True)]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating))
                              else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _setup(cfg: RunConfig, n_keep: int | None = None):
    system = build_system(cfg.kmax, cfg.cache_dir)
    return build_law_setup(system, cfg.law_obj(), n_keep=n_keep or cfg.nkeep,
                           n_tau=cfg.ntau, initial_global=cfg.initial_state)


def cmd_roots(cfg: RunConfig) -> list[str]:
    from .basis import bessel_roots

    out = _outdir(cfg)
    t0 = time.perf_counter()
    rows = []
    m = 0
    while True:
        rts = bessel_roots(m, max(int(cfg.kmax / math.pi) + 2, 1))
        rts = rts[rts <= cfg.kmax]
        if rts.size == 0:
            break
        rows.extend((m, n + 1, float(k)) for n, k in enumerate(rts))
        m += 1
    manifest = _manifest(cfg, "roots", {"seconds": time.perf_counter() - t0},
                         ["roots.csv"])
    write_csv(out / "roots.csv", manifest, ["m", "n", "k"], rows)
    (out / "roots_manifest.json").write_text(json.dumps(manifest, indent=2))
    return ["roots.csv"]


def cmd_eigencurves(cfg: RunConfig) -> list[str]:
    out = _outdir(cfg)
    t0 = time.perf_counter()
    setup = _setup(cfg)
    fr = setup.frames
    header = ["tau"] + [f"e_{i + 1}" for i in range(fr.n_keep)]
    rows = [(fr.tau[i], *fr.energies[i]) for i in range(fr.n_tau)]
    manifest = _manifest(cfg, "eigencurves", {"seconds": time.perf_counter() - t0},
                         ["eigencurves.csv"])
    manifest["global_numbers"] = [setup.global_of_block.get(i + 1) for i in range(fr.n_keep)]
    write_csv(out / "eigencurves.csv", manifest, header, rows)
    (out / "eigencurves_manifest.json").write_text(json.dumps(manifest, indent=2))
    return ["eigencurves.csv"]


def cmd_table(cfg: RunConfig) -> list[str]:
    out = _outdir(cfg)
    t0 = time.perf_counter()
    setup = _setup(cfg)
    rows = predict_table(setup.context(), omega_window=(0.0, 16.0),
                         l_max=cfg.lmax, tau_int_cutoff=cfg.tau_int_cutoff,
                         tau_run=cfg.tau_run)
    manifest = _manifest(cfg, "table", {"seconds": time.perf_counter() - t0},
                         ["table.csv"])
    write_csv(out / "table.csv", manifest,
              ["omega_res", "tau_int", "tau_low", "state_n", "order_l", "resolvable"],
              [(r.omega_res, r.tau_int, r.tau_low, r.state_global, r.order,
                r.resolvable) for r in rows])
    (out / "table_manifest.json").write_text(json.dumps(manifest, indent=2))
    return ["table.csv"]


def _traj_csv(out, name, cfg, setup, traj, manifest_extra=None, t0=0.0):
    labels = [setup.global_of_block.get(b + 1) for b in traj.tracked_blocks]
    header = ["tau", "energy", "norm"] + [f"p_{g}" for g in labels]
    rows = [(traj.taus[i], traj.energies[i], traj.norms[i], *traj.populations[i])
            for i in range(len(traj.taus))]
    manifest = _manifest(cfg, name, {"seconds": time.perf_counter() - t0}, [f"{name}.csv"])
    manifest["tracked_global"] = labels
    if manifest_extra:
        manifest.update(manifest_extra)
    write_csv(out / f"{name}.csv", manifest, header, rows)
    (out / f"{name}_manifest.json").write_text(json.dumps(manifest, indent=2))


def cmd_propagate(cfg: RunConfig) -> list[str]:
    if cfg.omega is None:
        raise ConfigError("propagate needs --omega")
    out = _outdir(cfg)
    t0 = time.perf_counter()
    setup = _setup(cfg)
    initial = prepare_initial(setup.law, cfg.omega, setup.frames,
                              state_block=setup.initial_block, mode=cfg.init_mode)
    traj = propagate(initial, setup.law, cfg.omega, cfg.tau_run, setup.frames,
                     rel_tol=cfg.rel_tol)
    _traj_csv(out, "traj", cfg, setup, traj, t0=t0)
    return ["traj.csv"]


def cmd_rabi(cfg: RunConfig) -> list[str]:
    """Predicted two-level envelope vs simulated populations near resonance."""
    if cfg.omega is None:
        raise ConfigError("rabi needs --omega")
    out = _outdir(cfg)
    t0 = time.perf_counter()
    setup = _setup(cfg)
    ctx = setup.context()
    rows = predict_table(ctx, omega_window=(0.0, max(16.0, cfg.omega + 1)),
                         l_max=cfg.lmax, tau_int_cutoff=cfg.tau_int_cutoff,
                         tau_run=cfg.tau_run)
    if not rows:
        raise ConfigError("no predicted resonances; nothing to compare against")
    row = min(rows, key=lambda r: abs(r.omega_res - cfg.omega))
    th, tau_int = two_level_parameters(ctx, row.state_block, row.order_signed, cfg.omega)

    initial = prepare_initial(setup.law, cfg.omega, setup.frames,
                              state_block=setup.initial_block, mode=cfg.init_mode)
    traj = propagate(initial, setup.law, cfg.omega, cfg.tau_run, setup.frames,
                     rel_tol=cfg.rel_tol,
                     tracked=[setup.initial_block, row.state_block])
    pred = rabi_population(th, tau_int, traj.taus)
    g_ini = setup.initial_global
    g_tgt = row.state_global
    header = ["tau", f"p_{g_ini}_sim", f"p_{g_tgt}_sim", f"p_{g_tgt}_pred"]
    data = [(traj.taus[i], traj.populations[i][0], traj.populations[i][1], pred[i])
            for i in range(len(traj.taus))]
    manifest = _manifest(cfg, "rabi", {"seconds": time.perf_counter() - t0}, ["rabi.csv"])
    manifest["prediction"] = {
        "omega_res": row.omega_res, "state_n": g_tgt, "order_l": row.order,
        "theta": th, "tau_int": tau_int,
        "beating_period": beating_period(th, tau_int),
        "peak": 1.0 / (1.0 + (math.pi * th * tau_int) ** 2),
    }
    write_csv(out / "rabi.csv", manifest, header, data)
    (out / "rabi_manifest.json").write_text(json.dumps(manifest, indent=2))
    return ["rabi.csv"]


def cmd_scan(cfg: RunConfig) -> list[str]:
    if cfg.omega_range is None:
        raise ConfigError("scan needs --omega-range LO HI")
    lo, hi = cfg.omega_range
    out = _outdir(cfg)
    t0 = time.perf_counter()
    setup = _setup(cfg)
    n_steps = int(round((hi - lo) / cfg.omega_step))
    omegas = np.round(lo + cfg.omega_step * np.arange(n_steps + 1), 12)
    omegas = omegas[omegas <= hi + 1e-12]

    ctx = setup.context()
    overlay = [r for r in predict_table(ctx, omega_window=(0.0, max(16.0, hi)),
                                        l_max=cfg.lmax,
                                        tau_int_cutoff=cfg.tau_int_cutoff,
                                        tau_run=cfg.tau_run)
               if lo <= r.omega_res <= hi]
    if cfg.refine:
        omegas = refine_grid(omegas, [r.omega_res for r in overlay], cfg.omega_step)

    records = run_scan(setup, omegas, tau_run=cfg.tau_run, rel_tol=cfg.rel_tol,
                       init_mode=cfg.init_mode, threads=cfg.threads,
                       checkpoint=out / "scan_checkpoint.jsonl")
    manifest = _manifest(cfg, "scan", {"seconds": time.perf_counter() - t0},
                         ["scan.csv", "overlay.csv"])
    ok = [r for r in records if r.error is None]
    failed = [r for r in records if r.error is not None]
    manifest["failures"] = [{"omega": r.omega, "error": r.error} for r in failed]
    write_csv(out / "scan.csv", manifest,
              ["omega", "e_min", "e_max", "e0", "norm_drift"],
              [(r.omega, r.e_min, r.e_max, r.e0, r.norm_drift) for r in ok])
    write_csv(out / "overlay.csv", manifest,
              ["omega_res", "tau_int", "state_n", "order_l"],
              [(r.omega_res, r.tau_int, r.state_global, r.order) for r in overlay])
    (out / "scan_manifest.json").write_text(json.dumps(manifest, indent=2))
    return ["scan.csv", "overlay.csv"]


COMMANDS = {
    "roots": cmd_roots,
    "eigencurves": cmd_eigencurves,
    "table": cmd_table,
    "propagate": cmd_propagate,
    "scan": cmd_scan,
    "rabi": cmd_rabi,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drivenbilliard",
                                description="Driven elliptical quantum billiard toolkit")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="TOML config file or a previous manifest JSON")
    p.add_argument("--law", choices=["ratio", "breathing", "volume"])
    p.add_argument("--a0", type=float)
    p.add_argument("--b0", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--omega", type=float)
    p.add_argument("--omega-range", dest="omega_range", type=float, nargs=2,
                   metavar=("LO", "HI"))
    p.add_argument("--omega-step", dest="omega_step", type=float)
    p.add_argument("--kmax", type=float)
    p.add_argument("--ntau", type=int)
    p.add_argument("--nkeep", type=int)
    p.add_argument("--lmax", type=int)
    p.add_argument("--tau-run", dest="tau_run", type=float)
    p.add_argument("--rel-tol", dest="rel_tol", type=float)
    p.add_argument("--initial-state", dest="initial_state", type=int)
    p.add_argument("--init-mode", dest="init_mode",
                   choices=["energy_eigenstate", "instantaneous"])
    p.add_argument("--tau-int-cutoff", dest="tau_int_cutoff", type=float)
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.add_argument("--refine", action="store_const", const=True, default=None)
    p.add_argument("--cache-dir", dest="cache_dir")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(load_config(args.config), args)
    except (ConfigError, json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        print(f"drivenbilliard: config error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    try:
        outputs = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"drivenbilliard: usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except GeometryError as exc:
        print(f"drivenbilliard: configuration error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except Exception as exc:
        print(f"drivenbilliard: {args.command} failed: "
              f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return NUMERIC_EXIT
    print(f"drivenbilliard {args.command}: wrote {', '.join(outputs)} under {cfg.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
