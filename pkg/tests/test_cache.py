"""On-disk matrix cache: round trip, key checks, stale-entry rejection."""
from __future__ import annotations

import numpy as np

from drivenbilliard import cache
from drivenbilliard.basis import build_basis, build_matrices
from drivenbilliard.cache import get_matrices, load_matrices, save_matrices


def test_round_trip(tmp_path):
    mats = build_matrices(build_basis(10.0))
    save_matrices(tmp_path, mats)
    loaded = load_matrices(tmp_path, 10.0)
    assert loaded is not None
    for name in ("f1", "f2", "f3", "f4", "f5", "f6"):
        assert np.array_equal(getattr(loaded, name), getattr(mats, name))
    assert loaded.basis.size == mats.basis.size


def test_get_matrices_populates_and_reuses(tmp_path):
    a = get_matrices(10.0, tmp_path)
    assert list(tmp_path.glob("matrices_*.npz"))
    b = get_matrices(10.0, tmp_path)
    assert np.array_equal(a.f2, b.f2)


def test_missing_and_mismatched_keys(tmp_path):
    assert load_matrices(tmp_path, 10.0) is None
    mats = build_matrices(build_basis(10.0))
    path = save_matrices(tmp_path, mats)
    assert load_matrices(tmp_path, 12.0) is None  # different cutoff, different file
    # corrupt the version field: entry must be rejected, not trusted
    data = dict(np.load(path))
    data["format_version"] = np.array([cache.FORMAT_VERSION + 1])
    np.savez_compressed(path, **data)
    assert load_matrices(tmp_path, 10.0) is None


def test_pipeline_initial_state_must_be_in_block(system_small):
    import pytest

    from drivenbilliard.pipeline import build_law_setup, make_law

    with pytest.raises(ValueError):  # global state 2 lives in an odd block
        build_law_setup(system_small, make_law("ratio"), n_keep=8,
                        initial_global=2)
