"""Bessel roots, radial integrals, coupling matrices, parity blocks."""
from __future__ import annotations

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import jv

from drivenbilliard.basis import (EVEN, ODD, bessel_roots, block_operators,
                                  build_basis, build_matrices, parity_block,
                                  radial_integral)

mpmath.mp.dps = 30


# ---------------------------------------------------------------- roots

def test_first_roots_frozen_values():
    assert bessel_roots(0, 1)[0] == pytest.approx(2.404825558, abs=1e-9)
    assert bessel_roots(1, 1)[0] == pytest.approx(3.831705970, abs=1e-9)


def test_root_residuals_independent_evaluation():
    # mpmath evaluates J_m independently of the scipy routine used to refine
    for m in (0, 1, 3, 8, 19):
        for k in bessel_roots(m, 4):
            assert abs(mpmath.besselj(m, mpmath.mpf(k))) <= 1e-12


def test_roots_match_mpmath_zeros():
    for m in (0, 2, 7):
        mine = bessel_roots(m, 5)
        ref = [float(mpmath.besseljzero(m, n)) for n in range(1, 6)]
        assert np.allclose(mine, ref, atol=1e-11)


def test_interlacing_of_adjacent_orders():
    n_roots = 50
    for m in range(0, 6):
        a = bessel_roots(m, n_roots)
        b = bessel_roots(m + 1, n_roots)
        assert np.all(a[:-1] < b[:-1])
        assert np.all(b[:-1] < a[1:])


def test_root_preconditions():
    with pytest.raises(ValueError):
        bessel_roots(-1, 3)
    with pytest.raises(ValueError):
        bessel_roots(0, 0)


# ------------------------------------------------------ radial integrals

K01 = bessel_roots(0, 2)


def test_orthonormality_same_root():
    k = K01[0]
    expect = jv(1, k) ** 2 / 2.0
    assert radial_integral(0, k, 0, k, 1) == pytest.approx(expect, rel=1e-12)


def test_orthogonality_distinct_roots():
    assert abs(radial_integral(0, K01[0], 0, K01[1], 1)) <= 1e-10


def test_weighted_integral_against_adaptive_oracle():
    # adaptive QUADPACK as the independent oracle for the r^3 weight
    k = K01[0]
    oracle, err = quad(lambda r: jv(0, k * r) ** 2 * r**3, 0.0, 1.0,
                       epsabs=1e-13, epsrel=1e-13)
    assert err < 1e-12
    assert radial_integral(0, k, 0, k, 3) == pytest.approx(oracle, abs=1e-9)


def test_oscillatory_integral_against_adaptive_oracle():
    ka = bessel_roots(2, 8)[-1]
    kb = bessel_roots(4, 7)[-1]
    oracle, err = quad(lambda r: jv(2, ka * r) * jv(2, kb * r) * r, 0.0, 1.0,
                       epsabs=1e-13, epsrel=1e-13, limit=200)
    assert err < 1e-11
    assert radial_integral(2, ka, 2, kb, 1) == pytest.approx(oracle, abs=1e-10)


def test_power_contract():
    with pytest.raises(ValueError):
        radial_integral(0, K01[0], 0, K01[0], 2)


# ------------------------------------------------------------- matrices

@pytest.fixture(scope="module")
def small():
    basis = build_basis(14.0)
    return basis, build_matrices(basis)


def test_f1_diagonal_value(small):
    basis, mats = small
    i = basis.position(0, 1)
    assert mats.f1[i, i] == pytest.approx(-2.404825558**2 / 4.0, abs=1e-6)
    off = mats.f1 - np.diag(np.diag(mats.f1))
    assert np.all(off == 0.0)


def test_selection_rules_structural(small):
    basis, mats = small
    for i, bi in enumerate(basis.indices):
        for j, bj in enumerate(basis.indices):
            if bj.m != bi.m:
                assert mats.f2[i, j] == 0.0
            if bj.m != bi.m - 2:
                assert mats.f3[i, j] == 0.0
                assert mats.f4[i, j] == 0.0
            if bj.m != bi.m + 2:
                assert mats.f5[i, j] == 0.0
                assert mats.f6[i, j] == 0.0


def test_symmetries(small):
    _, mats = small
    assert np.max(np.abs(mats.f2 - mats.f2.T)) <= 1e-12
    f35 = mats.f35
    f46 = mats.f46
    assert np.max(np.abs(f35 - f35.T)) <= 1e-12
    assert np.max(np.abs(f46 - f46.T)) <= 1e-12
    # transpose pairing entry-wise on the shifted bands
    assert np.max(np.abs(mats.f3 - mats.f5.T)) <= 1e-12
    assert np.max(np.abs(mats.f4 - mats.f6.T)) <= 1e-12


def _mode_norm(m: int, k: float) -> float:
    return 1.0 / (np.sqrt(np.pi) * jv(m + 1, k))


def test_quadratic_operator_entries_against_2d_quadrature(small):
    # <nm| (eta^2 - xi^2)/4 |n'm'> = pi N N' delta_{|m-m'|,2} / 4 *
    #     int J_m(k r) J_{m'}(k' r) r^3 dr  -- independent adaptive quadrature
    basis, mats = small
    cases = [((0, 1), (-2, 1)), ((0, 2), (2, 1)), ((1, 1), (3, 2)), ((-1, 1), (-3, 1))]
    for (m1, n1), (m2, n2) in cases:
        i, j = basis.position(m1, n1), basis.position(m2, n2)
        k1 = basis.roots[abs(m1)][n1 - 1]
        k2 = basis.roots[abs(m2)][n2 - 1]
        rad, _ = quad(lambda r: jv(m1, k1 * r) * jv(m2, k2 * r) * r**3, 0, 1,
                      epsabs=1e-13, epsrel=1e-13)
        expect = np.pi * _mode_norm(m1, k1) * _mode_norm(m2, k2) * rad / 4.0
        assert mats.f46[i, j] == pytest.approx(expect, abs=1e-10)


def test_rho2_operator_entries_against_2d_quadrature(small):
    # <nm| rho^2/4 |n'm> = 2 pi N N' / 4 * int J_m J_m r^3 dr
    basis, mats = small
    for (m, n1, n2) in [(0, 1, 2), (1, 1, 1), (-2, 1, 2)]:
        i, j = basis.position(m, n1), basis.position(m, n2)
        k1 = basis.roots[abs(m)][n1 - 1]
        k2 = basis.roots[abs(m)][n2 - 1]
        rad, _ = quad(lambda r: jv(m, k1 * r) * jv(m, k2 * r) * r**3, 0, 1,
                      epsabs=1e-13, epsrel=1e-13)
        expect = 2.0 * np.pi * _mode_norm(m, k1) * _mode_norm(m, k2) * rad / 4.0
        assert mats.f2[i, j] == pytest.approx(expect, abs=1e-10)


def test_gram_identity_random_subblock(small, rng=np.random.default_rng(7)):
    # orthonormality of the signed basis under the disc inner product,
    # via quadrature independent of the builder's rule
    basis, _ = small
    pick = rng.choice(basis.size, size=20, replace=False)
    x, w = np.polynomial.legendre.leggauss(400)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    gram = np.zeros((20, 20))
    for a, ia in enumerate(pick):
        ba = basis.indices[ia]
        for b, ib in enumerate(pick):
            bb = basis.indices[ib]
            if ba.m != bb.m:
                continue  # angular integral vanishes exactly
            rad = np.sum(w * jv(ba.m, ba.k * x) * jv(bb.m, bb.k * x) * x)
            gram[a, b] = 2 * np.pi * _mode_norm(ba.m, ba.k) * _mode_norm(bb.m, bb.k) * rad
    assert np.max(np.abs(gram - np.eye(20))) <= 1e-9


# ---------------------------------------------------------- parity blocks

def test_every_mode_in_exactly_one_block(small):
    basis, _ = small
    total = 0
    seen = set()
    for pair, entries in basis.block_entries.items():
        for e in entries:
            key = (e.m_abs, e.n, e.kind)
            assert key not in seen
            seen.add(key)
        total += len(entries)
    assert total == basis.size


def test_block_membership_rules(small):
    basis, _ = small
    assert all(e.m_abs % 2 == 0 and e.kind == "cos"
               for e in basis.block_entries[(EVEN, EVEN)])
    assert all(e.m_abs % 2 == 1 and e.kind == "cos"
               for e in basis.block_entries[(ODD, EVEN)])
    assert all(e.m_abs % 2 == 1 and e.kind == "sin"
               for e in basis.block_entries[(EVEN, ODD)])
    assert all(e.m_abs % 2 == 0 and e.m_abs > 0 and e.kind == "sin"
               for e in basis.block_entries[(ODD, ODD)])
    assert any(e.m_abs == 0 for e in basis.block_entries[(EVEN, EVEN)])


def test_block_transform_orthogonal_and_complete(small):
    basis, _ = small
    cols = []
    for pair in ((EVEN, EVEN), (ODD, EVEN), (EVEN, ODD), (ODD, ODD)):
        t = parity_block(basis, *pair).transform
        assert np.max(np.abs(t.T @ t - np.eye(t.shape[1]))) <= 1e-14
        cols.append(t)
    full = np.hstack(cols)
    assert full.shape == (basis.size, basis.size)
    assert np.max(np.abs(full.T @ full - np.eye(basis.size))) <= 1e-14


def test_cross_block_elements_vanish(small):
    basis, mats = small
    blk_ee = parity_block(basis, EVEN, EVEN)
    blk_oe = parity_block(basis, ODD, EVEN)
    blk_eo = parity_block(basis, EVEN, ODD)
    for op in (mats.f2, mats.f35, mats.f46, mats.f1):
        assert np.max(np.abs(blk_ee.transform.T @ op @ blk_oe.transform)) <= 1e-14
        assert np.max(np.abs(blk_ee.transform.T @ op @ blk_eo.transform)) <= 1e-14


def test_parity_validation(small):
    basis, _ = small
    with pytest.raises(ValueError):
        parity_block(basis, "sideways", EVEN)


def test_block_operators_dims(small):
    basis, mats = small
    blk = parity_block(basis, EVEN, EVEN)
    ops = block_operators(mats, blk)
    assert ops.f1.shape == (blk.dim, blk.dim)
    assert ops.dim == blk.dim
