"""Effective-Hamiltonian propagation, boundary unitary, observables."""
from __future__ import annotations

import numpy as np
import pytest

from drivenbilliard.basis import EVEN, ODD, full_operators, parity_block
from drivenbilliard.driving import DrivingLaw, LawKind, geometry
from drivenbilliard.propagator import (BoundaryUnitary, assemble_He,
                                       prepare_initial, propagate,
                                       quadratic_form_generator)
from drivenbilliard.spectrum import assemble_M, eigendecompose

VOL = DrivingLaw(LawKind.VOLUME_PRESERVING)
RAT = DrivingLaw(LawKind.AXES_RATIO)


def test_hermitian_assembly(system_small):
    s = geometry(VOL, 4.0, 0.3, convention="t")
    h = assemble_He(s, system_small.ops)
    assert np.max(np.abs(h - h.T)) <= 1e-12 * np.max(np.abs(h))
    with pytest.raises(ValueError):
        assemble_He(geometry(VOL, 4.0, 0.3, convention="tau"), system_small.ops)


def test_static_limit_is_mathieu(system_small):
    law = DrivingLaw(LawKind.AXES_RATIO, amplitude=0.0)
    r0 = float(np.sqrt(0.51))
    for tau in (0.0, 0.4):
        s = geometry(law, 2.0, tau, convention="t")
        h = assemble_He(s, system_small.ops)
        m = assemble_M(r0, system_small.ops) / float(s.volume)
        assert np.max(np.abs(h - m)) <= 1e-12 * np.max(np.abs(m))


def test_cross_parity_elements_vanish(system_small):
    s = geometry(VOL, 4.0, 0.2, convention="t")
    h_full = assemble_He(s, full_operators(system_small.matrices))
    basis = system_small.basis
    tee = parity_block(basis, EVEN, EVEN).transform
    for pair in ((ODD, EVEN), (EVEN, ODD), (ODD, ODD)):
        t2 = parity_block(basis, *pair).transform
        assert np.max(np.abs(tee.T @ h_full @ t2)) <= 1e-12


# ------------------------------------------------------- initialization

def test_initial_norm_and_population(volume_small):
    ini = prepare_initial(VOL, 3.32, volume_small.frames,
                          state_block=volume_small.initial_block)
    assert ini.norm == pytest.approx(1.0, abs=1e-14)
    traj = propagate(ini, VOL, 3.32, 1, volume_small.frames, engine="direct")
    assert traj.populations[0, volume_small.initial_block] == pytest.approx(1.0, abs=1e-10)
    assert traj.energies[0] == pytest.approx(
        float(volume_small.frames.energies[0, volume_small.initial_block]), rel=1e-9)


@pytest.mark.parametrize("law,omega", [(RAT, 11.84), (VOL, 3.32), (VOL, 10.04)])
def test_initial_overlap_with_instantaneous_state(volume_small, law, omega):
    # the boundary unitary barely rotates the paper-regime initial states
    fr = volume_small.frames
    k = volume_small.initial_block
    u = BoundaryUnitary.at(law, omega, 0.0, fr.ops)
    v = fr.vectors0[:, k].astype(complex)
    overlap = abs(np.vdot(v, u.apply(v))) ** 2
    assert overlap > 0.945


def test_modes_coincide_for_slow_driving(volume_small):
    fr = volume_small.frames
    k = volume_small.initial_block
    a = prepare_initial(VOL, 1e-4, fr, state_block=k, mode="energy_eigenstate")
    b = prepare_initial(VOL, 1e-4, fr, state_block=k, mode="instantaneous")
    assert np.max(np.abs(a.coefficients - b.coefficients)) <= 1e-6
    with pytest.raises(ValueError):
        prepare_initial(VOL, 1.0, fr, state_block=k, mode="something")


def test_unitary_generator_matches_quadratic_form(system_small):
    s = geometry(VOL, 2.5, 0.15, convention="t")
    ops = system_small.ops
    g = quadratic_form_generator(s, ops)
    q_eta = 2 * ops.f2 + 2 * ops.f46
    q_xi = 2 * ops.f2 - 2 * ops.f46
    expect = 0.5 * (s.da * s.a * q_eta + s.db * s.b * q_xi)
    assert np.max(np.abs(g - expect)) <= 1e-14
    u = BoundaryUnitary.at(VOL, 2.5, 0.15, ops)
    m = u.matrix()
    assert np.max(np.abs(m @ m.conj().T - np.eye(ops.dim))) <= 1e-12


# ---------------------------------------------------------- propagation

def test_static_billiard_populations_frozen(system_small):
    from drivenbilliard.pipeline import build_law_setup, make_law
    law = DrivingLaw(LawKind.AXES_RATIO, amplitude=0.0)
    setup = build_law_setup(system_small, law, n_keep=10)
    ini = prepare_initial(law, 5.0, setup.frames, state_block=setup.initial_block)
    traj = propagate(ini, law, 5.0, 100, setup.frames)
    assert np.max(np.abs(traj.populations - traj.populations[0])) <= 1e-8
    assert traj.norm_drift <= 1e-6


def test_engines_agree(volume_small):
    fr = volume_small.frames
    ini = prepare_initial(VOL, 3.32, fr, state_block=volume_small.initial_block)
    a = propagate(ini, VOL, 3.32, 6, fr, engine="direct")
    b = propagate(ini, VOL, 3.32, 6, fr, engine="floquet")
    assert np.max(np.abs(a.populations - b.populations)) <= 1e-7
    assert np.max(np.abs(a.energies - b.energies)) <= 1e-6 * np.max(a.energies)
    with pytest.raises(ValueError):
        propagate(ini, VOL, 3.32, 2.5, fr, engine="floquet")


def test_norm_drift_hundred_periods(volume_small):
    fr = volume_small.frames
    ini = prepare_initial(VOL, 3.32, fr, state_block=volume_small.initial_block)
    traj = propagate(ini, VOL, 3.32, 100, fr)
    assert np.max(np.abs(traj.norms - 1.0)) <= 1e-6


def test_parity_superselection_leakage(system_small):
    # full-basis propagation started inside (even, even) must stay there
    from scipy.integrate import solve_ivp

    mats = system_small.matrices
    ops_full = full_operators(mats)
    blk = parity_block(mats.basis, EVEN, EVEN)
    r0 = float(np.sqrt(0.51))
    m_blk = (-(r0 + 1 / r0) * blk.restrict(mats.f1)
             - (r0 - 1 / r0) * blk.restrict(mats.f35))
    vb = blk.transform @ eigendecompose(m_blk, count=2)[1][:, 1]
    omega = 4.0
    period = 2 * np.pi / omega

    def rhs(t, y):
        s = geometry(VOL, omega, t / period, convention="t")
        return -1j * (assemble_He(s, ops_full) @ y)

    sol = solve_ivp(rhs, (0, period), vb.astype(complex), rtol=1e-10, atol=1e-13)
    out = sol.y[:, -1]
    outside = out - blk.transform @ (blk.transform.T @ out)
    assert np.max(np.abs(outside)) <= 1e-10


def test_population_completeness_full_block(volume_small):
    # sum over ALL block states of |<n|U|Lambda>|^2 equals the norm squared,
    # and the population-weighted energy equals the direct expectation
    from drivenbilliard.driving import g_factors
    from drivenbilliard.propagator import _integrate_direct

    fr = volume_small.frames
    ini = prepare_initial(VOL, 3.32, fr, state_block=volume_small.initial_block)
    tau_f = 2.0
    period = 2 * np.pi / 3.32
    vec = _integrate_direct(fr.ops, VOL, 3.32, np.array([tau_f * period]),
                            ini.coefficients, 1e-10, 1e-13)[0]
    s = geometry(VOL, 3.32, tau_f)
    q_all, v_all = eigendecompose(assemble_M(float(s.ratio), fr.ops))
    u = BoundaryUnitary.at(VOL, 3.32, tau_f, fr.ops)
    w = u.apply(vec)
    amps = v_all.T @ w
    assert float(np.sum(np.abs(amps) ** 2)) == pytest.approx(
        float(np.linalg.norm(vec) ** 2), abs=1e-8)
    e_weighted = float((q_all / float(s.volume)) @ np.abs(amps) ** 2)
    g1, _, g3, _ = g_factors(s)
    hm = g1 * fr.ops.f1 + g3 * fr.ops.f35
    e_direct = float(np.real(np.vdot(w, hm @ w)))
    assert e_weighted == pytest.approx(e_direct, rel=1e-6)


def test_tracked_sums_never_overcount(volume_small):
    fr = volume_small.frames
    ini = prepare_initial(VOL, 3.32, fr, state_block=volume_small.initial_block)
    traj = propagate(ini, VOL, 3.32, 8, fr)
    assert np.all(traj.populations.sum(axis=1) <= traj.norms**2 + 1e-8)


def test_tolerance_convergence(volume_small):
    fr = volume_small.frames
    ini = prepare_initial(VOL, 3.32, fr, state_block=volume_small.initial_block)
    a = propagate(ini, VOL, 3.32, 10, fr, rel_tol=1e-9)
    b = propagate(ini, VOL, 3.32, 10, fr, rel_tol=5e-10)
    assert abs(a.energies[-1] - b.energies[-1]) <= 1e-6 * abs(b.energies[-1])


def test_propagate_validation(volume_small):
    fr = volume_small.frames
    ini = prepare_initial(VOL, 3.32, fr, state_block=volume_small.initial_block)
    with pytest.raises(ValueError):
        propagate(ini, VOL, 3.32, 0.0, fr)
    with pytest.raises(ValueError):
        propagate(ini, VOL, 3.32, 5, fr, rel_tol=1e-6)
    with pytest.raises(ValueError):
        propagate(ini, VOL, -1.0, 5, fr)


def test_off_resonant_population_stays_home(ratio_small):
    # omega = 8.0 sits far from every predicted resonance of the ratio law
    fr = ratio_small.frames
    ini = prepare_initial(RAT, 8.0, fr, state_block=ratio_small.initial_block)
    traj = propagate(ini, RAT, 8.0, 100, fr)
    assert np.min(traj.populations[:, ratio_small.initial_block]) >= 0.95
