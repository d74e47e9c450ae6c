"""Optional on-disk cache for Bessel roots and coupling matrices.

Entries are .npz archives keyed by (k_max, quadrature version) with an
embedded format-version field; stale or mismatched entries are rebuilt
rather than trusted.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .basis import QUADRATURE_VERSION, CouplingMatrices, build_basis, build_matrices

FORMAT_VERSION = 1


def _cache_path(cache_dir: Path, k_max: float) -> Path:
    return Path(cache_dir) / f"matrices_k{k_max:g}_q{QUADRATURE_VERSION}.npz"


def save_matrices(cache_dir: str | Path, matrices: CouplingMatrices) -> Path:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    basis = matrices.basis
    path = _cache_path(cache_dir, basis.cutoff)
    payload = {
        "format_version": np.array([FORMAT_VERSION]),
        "quadrature_version": np.array([QUADRATURE_VERSION]),
        "k_max": np.array([basis.cutoff]),
        "m_orders": np.array(sorted(basis.roots)),
    }
    for m, rt in basis.roots.items():
        payload[f"roots_{m}"] = rt
    for name in ("f1", "f2", "f3", "f4", "f5", "f6"):
        payload[name] = getattr(matrices, name)
    tmp = path.with_suffix(".tmp.npz")
    np.savez_compressed(tmp, **payload)
    tmp.replace(path)
    return path


def load_matrices(cache_dir: str | Path, k_max: float) -> CouplingMatrices | None:
    path = _cache_path(Path(cache_dir), k_max)
    if not path.exists():
        return None
    try:
        with np.load(path) as data:
            if int(data["format_version"][0]) != FORMAT_VERSION:
                return None
            if int(data["quadrature_version"][0]) != QUADRATURE_VERSION:
                return None
            if abs(float(data["k_max"][0]) - k_max) > 1e-12:
                return None
            basis = build_basis(k_max)
            for m in data["m_orders"]:
                stored = data[f"roots_{int(m)}"]
                if int(m) not in basis.roots or not np.allclose(
                        stored, basis.roots[int(m)], atol=1e-12):
                    return None
            mats = {name: data[name] for name in ("f1", "f2", "f3", "f4", "f5", "f6")}
    except (KeyError, OSError, ValueError):
        return None
    return CouplingMatrices(basis, **mats)


def get_matrices(k_max: float, cache_dir: str | Path | None = None) -> CouplingMatrices:
    """Load from cache when possible, else build (and cache when a dir is given)."""
    if cache_dir is not None:
        cached = load_matrices(cache_dir, k_max)
        if cached is not None:
            return cached
    matrices = build_matrices(build_basis(k_max))
    if cache_dir is not None:
        save_matrices(cache_dir, matrices)
    return matrices
