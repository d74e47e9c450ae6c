"""Instantaneous spectra of the anisotropic Laplacian and phase integrals.

The operator

    M(r) = -(r + 1/r) f1 - (r - 1/r) (f3 + f5)

is real symmetric on each parity block; its eigenpairs (q_n(r), |n;r>)
give the instantaneous modes of the elliptical billiard and the energies
E_n(tau) = q_n(r(tau)) / V(tau).  Frames on a uniform tau grid are
relabeled by maximal-overlap tracking so that labels and eigenvector
signs are continuous through close approaches, and the one-period phase
integrals split into a linear slope nu_nk and a one-periodic residual
Delta nu_nk(tau) (computed spectrally, so Delta nu(0) = Delta nu(1) = 0
to rounding).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from .basis import EVEN, ODD, BasisSet, BlockOperators, CouplingMatrices, block_operators, parity_block
from .driving import DrivingLaw, g_factors, geometry

DEFAULT_N_TAU = 1024


class EigenConvergenceError(RuntimeError):
    pass


class TrackingError(RuntimeError):
    pass


def assemble_M(r: float, ops: BlockOperators) -> np.ndarray:
    """Mathieu-operator matrix at axis ratio r, restricted to the block."""
    if r <= 0:
        raise ValueError("axis ratio must be positive")
    return -(r + 1.0 / r) * ops.f1 - (r - 1.0 / r) * ops.f35


def assemble_M_derivative(r: float, ops: BlockOperators) -> np.ndarray:
    """d/dr of assemble_M; used by the off-diagonal coupling identity."""
    return -(1.0 - 1.0 / r**2) * ops.f1 - (1.0 + 1.0 / r**2) * ops.f35


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Largest-magnitude component of each eigenvector made positive."""
    lead = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


@dataclass
class SpectralFrame:
    tau: float
    r: float
    q: np.ndarray        # ascending at tau = 0, then label-continuous
    vectors: np.ndarray  # columns are real orthonormal eigenvectors
    labels: np.ndarray


def eigendecompose(m_block: np.ndarray, count: int | None = None,
                   residual_tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Dense symmetric eigendecomposition with sign fixing and residual check."""
    dim = m_block.shape[0]
    count = dim if count is None else count
    if count > dim:
        raise ValueError("requested more states than the block dimension")
    q, v = eigh(m_block)
    q, v = q[:count], _fix_signs(v[:, :count])
    scale = max(abs(q[0]), abs(q[-1]), 1.0)
    resid = np.linalg.norm(m_block @ v - v * q, axis=0)
    bad = np.where(resid > residual_tol * scale)[0]
    if bad.size:
        raise EigenConvergenceError(
            f"eigen-residual {resid[bad[0]]:.2e} above tolerance at state {bad[0]}"
        )
    return q, v


def _track_pair(v_prev, q_new, v_new, overlap_floor=0.5, ambiguity_gap=0.05,
                strict_count=None):
    """Relabel (q_new, v_new) by maximal |overlap| against v_prev columns.

    Overlap-quality guards apply to the first ``strict_count`` labels;
    trailing buffer states near the truncation edge may churn freely.
    Inside a nearly degenerate doublet the eigenvectors rotate arbitrarily
    fast, so ambiguity between columns with essentially equal eigenvalues
    is tolerated (both labelings agree to the size of the gap).
    """
    ov = v_prev.T @ v_new
    n = ov.shape[0]
    strict_count = n if strict_count is None else strict_count
    order = np.empty(n, dtype=int)
    mag = np.abs(ov)
    for _ in range(n):
        i, j = np.unravel_index(np.argmax(mag), mag.shape)
        best = mag[i, j]
        if i < strict_count:
            runner_j = int(np.argmax(np.where(np.arange(mag.shape[1]) == j,
                                              -1.0, mag[i, :])))
            runner = mag[i, runner_j]
            degenerate = abs(q_new[j] - q_new[runner_j]) <= max(
                1e-3 * abs(q_new[j]), 1e-9)
            if best < overlap_floor and not degenerate:
                raise TrackingError(
                    f"max overlap {best:.3f} below {overlap_floor} for state {i}; "
                    "refine the tau grid"
                )
            if best - runner < ambiguity_gap and runner > overlap_floor and not degenerate:
                raise TrackingError(
                    f"ambiguous tracking (overlaps {best:.3f} vs {runner:.3f}); "
                    "refine the tau grid"
                )
        order[i] = j
        mag[i, :] = -1.0
        mag[:, j] = -1.0
    v = v_new[:, order]
    q = q_new[order]
    sgn = np.sign(np.einsum("ij,ij->j", v_prev, v))
    sgn[sgn == 0] = 1.0
    return q, v * sgn


def track_states(frames: list[SpectralFrame], overlap_floor: float = 0.5,
                 ambiguity_gap: float = 0.05) -> list[SpectralFrame]:
    """Relabel a tau-ordered frame list by maximal-overlap continuation."""
    out = [frames[0]]
    for fr in frames[1:]:
        prev = out[-1]
        q, v = _track_pair(prev.vectors, fr.q, fr.vectors, overlap_floor, ambiguity_gap)
        out.append(SpectralFrame(fr.tau, fr.r, q, v, prev.labels.copy()))
    return out


def spectral_antiderivative(values: np.ndarray) -> np.ndarray:
    """Periodic antiderivative of (values - mean) on a uniform [0,1) grid.

    Exact for the trigonometric interpolant, hence zero at tau = 0 and,
    by periodicity, at tau = 1.  values: (N,) or (N, nstates).
    """
    vals = values if values.ndim == 2 else values[:, None]
    n = vals.shape[0]
    c = np.fft.fft(vals, axis=0) / n
    l = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    nz = l != 0
    tau = np.arange(n) / n
    phase = np.exp(2j * np.pi * np.outer(tau, l[nz])) - 1.0
    out = (phase @ (c[nz] / (2j * np.pi * l[nz, None]))).real
    return out.reshape(values.shape)


@dataclass
class PhaseData:
    """Phase-split data for one ordered state pair (n, k)."""

    nu: float                 # int_0^1 (E_n - E_k) dtau
    delta_nu: np.ndarray      # one-periodic residual on the tau grid
    n_tau: int


@dataclass
class FrameSet:
    """Tracked spectral data of one parity block over one driving period.

    Matrix elements of the four block operators between the first
    ``n_keep`` tracked states are tabulated on the grid; tracked
    eigenvectors are retained at a decimated set of grid indices for
    observable projections (``frame_at`` re-diagonalizes at exact tau and
    tracks against the nearest stored sample).
    """

    law: DrivingLaw
    ops: BlockOperators
    n_tau: int
    n_keep: int
    tau: np.ndarray          # (n_tau,)
    q: np.ndarray            # (n_tau, n_keep), tracked
    energies: np.ndarray     # (n_tau, n_keep), E_n = q_n / V
    elem1: np.ndarray        # (n_tau, n_keep, n_keep), tracked <n|f1|m>
    elem35: np.ndarray
    elem2: np.ndarray
    elem46: np.ndarray
    volume: np.ndarray
    ratio: np.ndarray
    dratio: np.ndarray       # tau-convention dr/dtau
    g2: np.ndarray           # tau-convention
    g4: np.ndarray
    sample_indices: np.ndarray   # grid indices with stored vectors
    sample_vectors: np.ndarray   # (n_samples, dim, n_keep)
    _phase_residual: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._phase_residual = spectral_antiderivative(self.energies)

    @property
    def vectors0(self) -> np.ndarray:
        return self.sample_vectors[0]

    @property
    def nu_mean(self) -> np.ndarray:
        return self.energies.mean(axis=0)

    def nu(self, n: int, k: int) -> float:
        """One-period phase slope between tracked block states (0-based)."""
        return float(self.nu_mean[n] - self.nu_mean[k])

    def delta_nu(self, n: int, k: int) -> np.ndarray:
        return self._phase_residual[:, n] - self._phase_residual[:, k]

    def phase_functions(self, n: int, k: int) -> PhaseData:
        if n == k:
            raise ValueError("phase split needs two distinct states")
        return PhaseData(nu=self.nu(n, k), delta_nu=self.delta_nu(n, k), n_tau=self.n_tau)

    def min_gap(self, n: int, k: int) -> float:
        return float(np.min(np.abs(self.q[:, n] - self.q[:, k])))

    def frame_at(self, tau: float) -> SpectralFrame:
        """Re-diagonalize at exact tau, tracked against the nearest sample."""
        sample = geometry(self.law, 1.0, float(tau), convention="tau")
        r = float(sample.ratio)
        q, v = eigendecompose(assemble_M(r, self.ops))
        frac = tau % 1.0
        pos = np.argmin(np.abs(self.tau[self.sample_indices] - frac))
        ref = self.sample_vectors[pos]
        nb = ref.shape[1]
        take = min(nb + 12, q.size)  # tracked states may sit above the lowest nb
        qt, vt = _track_pair(ref, q[:take], v[:, :take], strict_count=nb)
        return SpectralFrame(float(tau), r, qt, vt, np.arange(nb))


def compute_frames(law: DrivingLaw, ops: BlockOperators, n_keep: int = 32,
                   n_tau: int = DEFAULT_N_TAU, store_vectors_every: int = 16) -> FrameSet:
    """Diagonalize per grid point, track, and tabulate matrix elements.

    Decompositions are cached on the (rounded) axis ratio: the harmonic
    drive visits each r twice per period, and the axes-ratio law needs a
    single decomposition for the whole grid.
    """
    if n_keep > ops.dim // 2:
        raise ValueError("n_keep too close to the truncation edge; raise k_max")
    tau = np.arange(n_tau) / n_tau
    sample = geometry(law, 1.0, tau, convention="tau")
    r = sample.ratio
    V = sample.volume
    keys = np.round(r, 13)
    n_buf = min(n_keep + 12, ops.dim)

    q_grid = np.empty((n_tau, n_keep))
    e1 = np.empty((n_tau, n_keep, n_keep))
    e35 = np.empty_like(e1)
    e2 = np.empty_like(e1)
    e46 = np.empty_like(e1)
    s_idx = list(range(0, n_tau, max(1, store_vectors_every)))
    s_pos = {i: p for p, i in enumerate(s_idx)}
    s_vecs = np.empty((len(s_idx), ops.dim, n_keep))

    cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    prev = None
    for i in range(n_tau):
        key = float(keys[i])
        if key not in cache:
            cache[key] = eigendecompose(assemble_M(float(r[i]), ops))
        q_all, v_all = cache[key]
        q_i, v_i = q_all[:n_buf], v_all[:, :n_buf]
        if prev is not None:
            q_i, v_i = _track_pair(prev, q_i, v_i, strict_count=n_keep)
        prev = v_i
        if i in s_pos:
            s_vecs[s_pos[i]] = v_i[:, :n_keep]
        w = v_i[:, :n_keep]
        q_grid[i] = q_i[:n_keep]
        e1[i] = w.T @ (ops.f1 @ w)
        e35[i] = w.T @ (ops.f35 @ w)
        e2[i] = w.T @ (ops.f2 @ w)
        e46[i] = w.T @ (ops.f46 @ w)

    # closure: tracking around the loop must return to the starting frame
    q0, v0 = cache[float(keys[0])]
    _, v_close = _track_pair(prev, q0[:n_buf], v0[:, :n_buf], strict_count=n_keep)
    mism = np.max(np.abs(v_close[:, :n_keep] - s_vecs[0]))
    if mism > 1e-6:
        raise TrackingError(f"period closure failed (mismatch {mism:.2e}); refine the tau grid")

    g1, g2, g3, g4 = g_factors(sample)
    return FrameSet(
        law=law, ops=ops, n_tau=n_tau, n_keep=n_keep, tau=tau,
        q=q_grid, energies=q_grid / V[:, None],
        elem1=e1, elem35=e35, elem2=e2, elem46=e46,
        volume=V, ratio=r, dratio=sample.dratio,
        g2=g2, g4=g4,
        sample_indices=np.array(s_idx), sample_vectors=s_vecs,
    )


def global_state_numbers(matrices: CouplingMatrices, basis: BasisSet,
                         r: float, count: int = 64) -> list[tuple[float, tuple[str, str], int]]:
    """Energy-ordered global labels across all four parity blocks at fixed r.

    Returns [(q, (eta_parity, xi_parity), block_index_1based), ...] for the
    lowest ``count`` states.  Published state numbers (the initial state 4
    and the prediction-table targets) count in this global order.
    """
    items: list[tuple[float, tuple[str, str], int]] = []
    for pair in ((EVEN, EVEN), (ODD, EVEN), (EVEN, ODD), (ODD, ODD)):
        blk = parity_block(basis, *pair)
        ops = block_operators(matrices, blk)
        q = np.linalg.eigvalsh(assemble_M(r, ops))
        take = min(count, len(q))
        items.extend((float(q[i]), pair, i + 1) for i in range(take))
    items.sort()
    return items[:count]


def block_global_map(matrices: CouplingMatrices, basis: BasisSet, r: float,
                     pair: tuple[str, str] = (EVEN, EVEN), count: int = 64) -> dict[int, int]:
    """Map block-internal 1-based indices -> global state numbers at ratio r."""
    ordered = global_state_numbers(matrices, basis, r, count)
    return {bi: g for g, (_, p, bi) in enumerate(ordered, 1) if p == pair}
