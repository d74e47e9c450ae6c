"""Frequency sweeps of the propagator with checkpointed, resumable records.

One record per drive frequency: extremal energies over the run, the
starting energy, and the final norm.  Records are independent, so the
sweep parallelizes over omega with shared read-only frames; the
checkpoint file (JSON lines) is appended as records complete and lets an
interrupted sweep resume without recomputation.
"""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .pipeline import LawSetup
from .propagator import prepare_initial, propagate


@dataclass
class ScanRecord:
    omega: float
    e_max: float
    e_min: float
    e0: float
    final_norm: float
    wall_time: float
    error: str | None = None

    @property
    def norm_drift(self) -> float:
        return abs(self.final_norm - 1.0)


def _run_one(setup: LawSetup, omega: float, tau_run: float, rel_tol: float,
             init_mode: str, samples_per_period: int) -> ScanRecord:
    t0 = time.perf_counter()
    try:
        initial = prepare_initial(setup.law, omega, setup.frames,
                                  state_block=setup.initial_block, mode=init_mode)
        traj = propagate(initial, setup.law, omega, tau_run, setup.frames,
                         rel_tol=rel_tol, samples_per_period=samples_per_period)
        return ScanRecord(
            omega=omega,
            e_max=float(np.max(traj.energies)),
            e_min=float(np.min(traj.energies)),
            e0=float(traj.energies[0]),
            final_norm=float(traj.norms[-1]),
            wall_time=time.perf_counter() - t0,
        )
    except Exception as exc:  # per-omega failures never abort the sweep
        return ScanRecord(omega=omega, e_max=math.nan, e_min=math.nan,
                          e0=math.nan, final_norm=math.nan,
                          wall_time=time.perf_counter() - t0, error=str(exc))


_WORKER_SETUP: LawSetup | None = None


def _worker_init(setup: LawSetup) -> None:
    global _WORKER_SETUP
    _WORKER_SETUP = setup


def _worker_run(args) -> ScanRecord:
    omega, tau_run, rel_tol, init_mode, spp = args
    return _run_one(_WORKER_SETUP, omega, tau_run, rel_tol, init_mode, spp)


def load_checkpoint(path: str | Path) -> dict[float, ScanRecord]:
    """Completed records keyed by omega; unreadable lines are skipped."""
    done: dict[float, ScanRecord] = {}
    path = Path(path)
    if not path.exists():
        return done
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            rec = ScanRecord(**json.loads(line))
        except (TypeError, ValueError):
            continue
        done[round(rec.omega, 12)] = rec
    return done


def refine_grid(omegas: np.ndarray, centers: list[float], step: float) -> np.ndarray:
    """Insert half-step points around predicted resonances (--refine mode)."""
    extra = []
    lo, hi = omegas.min(), omegas.max()
    for c in centers:
        if lo <= c <= hi:
            for d in (-1.5, -1.0, -0.5, 0.5, 1.0, 1.5):
                extra.append(c + d * 0.5 * step)
    merged = np.unique(np.round(np.concatenate([omegas, extra]), 12))
    return merged[(merged >= lo) & (merged <= hi)]


def scan(setup: LawSetup, omegas, tau_run: float = 100.0, rel_tol: float = 1e-9,
         init_mode: str = "energy_eigenstate", samples_per_period: int = 64,
         threads: int = 1, checkpoint: str | Path | None = None) -> list[ScanRecord]:
    """Sweep the drive frequency; returns records sorted by omega."""
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size == 0:
        raise ValueError("empty omega grid")
    if np.any(omegas <= 0) or np.any(np.diff(omegas) <= 0):
        raise ValueError("omega grid must be ascending and positive")
    done = load_checkpoint(checkpoint) if checkpoint else {}
    todo = [w for w in omegas if round(float(w), 12) not in done]

    results: dict[float, ScanRecord] = dict(done)
    ckpt_file = open(checkpoint, "a") if checkpoint else None
    try:
        def finish(rec: ScanRecord) -> None:
            results[round(rec.omega, 12)] = rec
            if ckpt_file is not None:  # serialized in the parent process
                ckpt_file.write(json.dumps(asdict(rec)) + "\n")
                ckpt_file.flush()

        if threads <= 1 or len(todo) <= 1:
            for w in todo:
                finish(_run_one(setup, float(w), tau_run, rel_tol, init_mode,
                                samples_per_period))
        else:
            from concurrent.futures import as_completed

            with ProcessPoolExecutor(max_workers=threads, initializer=_worker_init,
                                     initargs=(setup,)) as pool:
                futs = [pool.submit(_worker_run,
                                    (float(w), tau_run, rel_tol, init_mode,
                                     samples_per_period))
                        for w in todo]
                for fut in as_completed(futs):
                    finish(fut.result())
    finally:
        if ckpt_file is not None:
            ckpt_file.close()

    keep = [results[round(float(w), 12)] for w in omegas]
    return sorted(keep, key=lambda r: r.omega)
