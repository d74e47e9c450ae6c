"""Shared assembly: basis -> block operators -> frames -> prediction context.

The published state numbering counts energy eigenstates across all four
parity blocks at tau = 0; the initial state (number 4 by default) lives
in the (even, even) block, and every prediction or population readout
reports global numbers while working with block-internal indices.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .basis import EVEN, BasisSet, BlockOperators, CouplingMatrices, block_operators, parity_block
from .cache import get_matrices
from .driving import DrivingLaw, LawKind, geometry
from .perturbation import PredictionContext, prediction_context
from .spectrum import DEFAULT_N_TAU, FrameSet, block_global_map, compute_frames

DEFAULT_INITIAL_GLOBAL = 4


@dataclass
class System:
    """Basis, matrices, and the working parity block (even, even)."""

    matrices: CouplingMatrices
    ops: BlockOperators

    @property
    def basis(self) -> BasisSet:
        return self.matrices.basis


def build_system(k_max: float, cache_dir: str | Path | None = None) -> System:
    matrices = get_matrices(k_max, cache_dir)
    block = parity_block(matrices.basis, EVEN, EVEN)
    return System(matrices=matrices, ops=block_operators(matrices, block))


@dataclass
class LawSetup:
    """Frames plus label bookkeeping for one driving law."""

    system: System
    law: DrivingLaw
    frames: FrameSet
    global_of_block: dict[int, int]   # 1-based block index -> global number
    block_of_global: dict[int, int]   # global number -> 0-based block index
    initial_block: int                # 0-based
    initial_global: int

    def context(self) -> PredictionContext:
        return prediction_context(self.frames, self.initial_block, self.global_of_block)


def build_law_setup(system: System, law: DrivingLaw, n_keep: int = 32,
                    n_tau: int = DEFAULT_N_TAU,
                    initial_global: int = DEFAULT_INITIAL_GLOBAL,
                    store_vectors_every: int | None = None) -> LawSetup:
    if store_vectors_every is None:
        store_vectors_every = max(1, n_tau // 64)
    frames = compute_frames(law, system.ops, n_keep=n_keep, n_tau=n_tau,
                            store_vectors_every=store_vectors_every)
    r0 = float(geometry(law, 1.0, 0.0).ratio)
    gmap = block_global_map(system.matrices, system.basis, r0,
                            count=max(6 * n_keep, 64))
    inv = {g: bi - 1 for bi, g in gmap.items()}
    if initial_global not in inv:
        raise ValueError(
            f"global state {initial_global} is not in the (even,even) block")
    return LawSetup(system=system, law=law, frames=frames,
                    global_of_block=gmap, block_of_global=inv,
                    initial_block=inv[initial_global],
                    initial_global=initial_global)


def make_law(kind: str | LawKind, a0: float = 1.0, b0: float | None = None,
             amplitude: float = 0.1) -> DrivingLaw:
    if isinstance(kind, str):
        kind = LawKind(kind)
    if b0 is None:
        b0 = DrivingLaw.__dataclass_fields__["b0"].default
    return DrivingLaw(kind=kind, a0=a0, b0=b0, amplitude=amplitude)
