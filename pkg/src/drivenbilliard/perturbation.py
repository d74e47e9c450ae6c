"""First-order transition theory: Fourier couplings, resonances, Rabi model.

For a pair of tracked block states (n, m) the one-periodic parts of the
coefficient equation Fourier-transform into harmonics

    F_l^{nm}:  boundary-acceleration coupling, from g2 <n|f2|m> and
               g4 <n|f4+f6|m>, carrying the phase factor
               exp(-2 pi i Delta nu_mn(tau) / omega); enters as omega F_l.
    D_l^{nm}:  ratio-change (Landau-Zener) coupling, from (dr/dtau / r)
               [(r - 1/r) <n|f1|m> + (r + 1/r) <n|f3+f5|m>] / (q_n - q_m)
               with a -i prefactor; zero on the diagonal by definition.

Efficient transfer k -> n needs theta_l^{nk} = nu_nk/omega
+ omega (F_0^nn - F_0^kk) / (2 pi) - l to vanish; solving the quadratic
gives the resonance frequencies, and the resonant coupling magnitude sets
the interaction time tau_int = 1 / |omega F_l + D_l|.  The detunings of
the competing states at the same photon order bound the validity of the
golden-rule delta function from below (tau_low).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectrum import FrameSet

DEGENERACY_FLOOR = 1e-8
COUPLING_FLOOR = 1e-14


class NearDegeneracyError(RuntimeError):
    """Tracked gap fell below the floor; the expansion excludes this case."""


@dataclass
class FourierCoefficients:
    """Harmonics F_l, D_l for one ordered pair (n, m) at one omega.

    Arrays cover l = -l_max .. l_max; index through ``F(l)``/``D(l)``.
    ``delta_f0`` is (F_0^nn - F_0^mm) / (2 pi), omega-independent.
    """

    n: int
    m: int
    omega: float
    l_max: int
    F_arr: np.ndarray
    D_arr: np.ndarray
    delta_f0: float

    def F(self, l: int) -> complex:
        return complex(self.F_arr[l + self.l_max])

    def D(self, l: int) -> complex:
        return complex(self.D_arr[l + self.l_max])

    def coupling(self, l: int) -> complex:
        """omega F_l + D_l, the transition amplitude of harmonic l."""
        return self.omega * self.F(l) + self.D(l)


def _harmonics(values: np.ndarray, l_max: int) -> np.ndarray:
    """Coefficients c_l = int_0^1 values(tau) e^{2 pi i l tau} dtau, l=-l_max..l_max."""
    if l_max < 1:
        raise ValueError("l_max must be at least 1")
    if 2 * l_max + 1 > values.size:
        raise ValueError("harmonic order exceeds the tau-grid Nyquist range")
    c = np.fft.ifft(values)
    return np.concatenate([c[-l_max:], c[: l_max + 1]])


def diagonal_f0(frames: FrameSet, n: int) -> float:
    """F_0^nn: period average of the diagonal coupling; omega-independent."""
    h = frames.g2 * frames.elem2[:, n, n] + frames.g4 * frames.elem46[:, n, n]
    return float(np.mean(h)) / (2.0 * np.pi)


def fourier_coeffs(frames: FrameSet, omega: float, n: int, m: int,
                   l_max: int = 8) -> FourierCoefficients:
    """F_l^{nm} and D_l^{nm} on the frame grid by FFT (block indices, 0-based)."""
    if omega <= 0:
        raise ValueError("omega must be positive")
    phase = np.exp(-2j * np.pi / omega * frames.delta_nu(m, n))
    hF = (frames.g2 * frames.elem2[:, n, m] + frames.g4 * frames.elem46[:, n, m]) / (2.0 * np.pi)
    F_arr = _harmonics(phase * hF, l_max)
    if n == m:
        D_arr = np.zeros(2 * l_max + 1, dtype=complex)
        dF0 = 0.0
    else:
        gap = frames.q[:, n] - frames.q[:, m]
        if np.min(np.abs(gap)) < DEGENERACY_FLOOR:
            raise NearDegeneracyError(
                f"tracked gap |q_{n} - q_{m}| fell below {DEGENERACY_FLOOR:g}"
            )
        r = frames.ratio
        hD = -1j * (frames.dratio / r) * (
            (r - 1.0 / r) * frames.elem1[:, n, m] + (r + 1.0 / r) * frames.elem35[:, n, m]
        ) / gap
        D_arr = _harmonics(phase * hD, l_max)
        dF0 = (diagonal_f0(frames, n) - diagonal_f0(frames, m)) / (2.0 * np.pi)
    return FourierCoefficients(n=n, m=m, omega=omega, l_max=l_max,
                               F_arr=F_arr, D_arr=D_arr, delta_f0=dF0)


def theta(nu_nk: float, delta_f0_nk: float, l: int, omega: float) -> float:
    """Detuning theta_l^{nk} = nu/omega + omega * delta_f0 - l."""
    return nu_nk / omega + omega * delta_f0_nk - l


def resonance_frequency(nu_nk: float, delta_f0_nk: float, l: int) -> float | None:
    """Positive root of theta = 0 that continues to nu/l as delta_f0 -> 0.

    The quadratic delta_f0 w^2 - l w + nu = 0 has a second root ~ l/delta_f0
    (a very large frequency for weak driving) which is discarded.  Returns
    None when no real positive root exists.
    """
    if l == 0 or nu_nk == 0.0:
        return None
    # work with the signed pair; for downward transitions (nu < 0) the
    # physical photon order is -l, which maps onto the mirrored quadratic
    nu_s, df_s, l_s = (nu_nk, delta_f0_nk, l) if nu_nk > 0 else (-nu_nk, -delta_f0_nk, l)
    disc = l_s * l_s - 4.0 * nu_s * df_s
    if disc < 0:
        return None
    w = 2.0 * nu_s / (l_s + math.sqrt(disc))
    return w if w > 0 else None


def rabi_population(theta_det: float, tau_int: float, tau) -> np.ndarray:
    """Two-level population of the target state at detuning theta.

    p(tau) = sin^2(pi tau / T_B) / (1 + (pi theta tau_int)^2) with beating
    period T_B = pi tau_int / sqrt(1 + (pi theta tau_int)^2).
    """
    if tau_int <= 0:
        raise ValueError("tau_int must be positive")
    x = np.pi * theta_det * tau_int
    amp = 1.0 / (1.0 + x * x)
    t_b = beating_period(theta_det, tau_int)
    return amp * np.sin(np.pi * np.asarray(tau) / t_b) ** 2


def beating_period(theta_det: float, tau_int: float) -> float:
    x = np.pi * theta_det * tau_int
    return np.pi * tau_int / math.sqrt(1.0 + x * x)


@dataclass
class ResonanceRow:
    """One predicted resonance of the initial state."""

    omega_res: float
    tau_int: float
    tau_low: float
    state_global: int       # published (global) number of the target state
    state_block: int        # 0-based index within the parity block
    order: int              # photon order |l|
    order_signed: int       # sign carries the transfer direction
    branch: str             # perturbative root of the quadratic ("minus")
    resolvable: str         # "full" | "partial" | "no"


@dataclass
class PredictionContext:
    """Everything predict_table spans: frames plus candidate bookkeeping."""

    frames: FrameSet
    initial: int                    # block index (0-based) of the initial state
    global_of_block: dict[int, int]  # 1-based block index -> global number
    f0: np.ndarray                  # diagonal F_0 per tracked state
    nu: np.ndarray                  # nu_{n, initial} per tracked state
    delta_f0: np.ndarray            # (F0_n - F0_k) / (2 pi)


def prediction_context(frames: FrameSet, initial_block: int,
                       global_of_block: dict[int, int]) -> PredictionContext:
    f0 = np.array([diagonal_f0(frames, i) for i in range(frames.n_keep)])
    nu = frames.nu_mean - frames.nu_mean[initial_block]
    dF0 = (f0 - f0[initial_block]) / (2.0 * np.pi)
    return PredictionContext(frames=frames, initial=initial_block,
                             global_of_block=global_of_block,
                             f0=f0, nu=nu, delta_f0=dF0)


def interaction_time(ctx: PredictionContext, n: int, l_signed: int, omega: float,
                     l_max: int | None = None, theta_tol: float = 1e-9) -> float:
    """tau_int = 1/sqrt(sum over resonant terms of |omega F + D|^2).

    In practice a single (n, l) term is resonant; coincident resonances of
    other candidates at the same omega (|theta| < theta_tol) are summed.
    """
    l_max = max(abs(l_signed), 4) if l_max is None else l_max
    total = 0.0
    for nn in range(ctx.frames.n_keep):
        if nn == ctx.initial:
            continue
        for ll in range(-l_max, l_max + 1):
            if ll == 0:
                continue
            if nn == n and ll == l_signed:
                th = 0.0
            else:
                th = theta(ctx.nu[nn], ctx.delta_f0[nn], ll, omega)
            if abs(th) < theta_tol:
                co = fourier_coeffs(ctx.frames, omega, nn, ctx.initial, abs(ll))
                total += abs(co.coupling(ll)) ** 2
    if total < COUPLING_FLOOR**2:
        return math.inf
    return 1.0 / math.sqrt(total)


def lower_threshold(ctx: PredictionContext, n: int, l_signed: int, omega: float,
                    relevance_tau_int: float = math.inf) -> float:
    """tau_low = max over competing same-order detunings of 1/|theta|.

    Competitors are the other tracked states n' at the same signed photon
    order whose coupling at this omega is non-negligible; a finite
    ``relevance_tau_int`` additionally drops competitors weaker than that
    interaction-time bound.
    """
    best = 0.0
    for nn in range(ctx.frames.n_keep):
        if nn in (n, ctx.initial):
            continue
        co = fourier_coeffs(ctx.frames, omega, nn, ctx.initial, abs(l_signed))
        strength = abs(co.coupling(l_signed))
        if strength < COUPLING_FLOOR:
            continue
        if math.isfinite(relevance_tau_int) and 1.0 / strength > relevance_tau_int:
            continue
        th = theta(ctx.nu[nn], ctx.delta_f0[nn], l_signed, omega)
        if abs(th) > 1e-12:
            best = max(best, 1.0 / abs(th))
    return best


def classify_resolvable(tau_int: float, tau_low: float, tau_run: float) -> str:
    """Fully resolved needs tau_low << tau_int < tau_run (factor-5 margin)."""
    if tau_low >= tau_int:
        return "no"
    if tau_int < tau_run and tau_low <= 0.2 * tau_int:
        return "full"
    return "partial"


def predict_table(ctx: PredictionContext, omega_window: tuple[float, float] = (0.0, 16.0),
                  l_max: int = 32, tau_int_cutoff: float = 2000.0,
                  tau_run: float = 100.0,
                  relevance_tau_int: float = math.inf) -> list[ResonanceRow]:
    """All predicted resonances in the window with tau_int below the cutoff."""
    lo, hi = omega_window
    if lo < 0 or hi <= lo:
        raise ValueError("need 0 <= lo < hi for the omega window")
    rows: list[ResonanceRow] = []
    for n in range(ctx.frames.n_keep):
        if n == ctx.initial:
            continue
        for l in range(1, l_max + 1):
            w = resonance_frequency(ctx.nu[n], ctx.delta_f0[n], l)
            if w is None or not (lo < w <= hi):
                continue
            l_signed = l if ctx.nu[n] > 0 else -l
            th = theta(ctx.nu[n], ctx.delta_f0[n], l_signed, w)
            if abs(th) > 1e-10:  # one polishing pass; quadratic is closed-form
                w -= th / _theta_domega(ctx.nu[n], ctx.delta_f0[n], w)
                th = theta(ctx.nu[n], ctx.delta_f0[n], l_signed, w)
            tau_int = interaction_time(ctx, n, l_signed, w)
            if not tau_int < tau_int_cutoff:
                continue
            tl = lower_threshold(ctx, n, l_signed, w, relevance_tau_int)
            gb = ctx.global_of_block.get(n + 1)
            if gb is None:
                raise ValueError(f"no global label for block state {n + 1}; "
                                 "raise the global-numbering count")
            rows.append(ResonanceRow(
                omega_res=w, tau_int=tau_int, tau_low=tl,
                state_global=gb, state_block=n,
                order=l, order_signed=l_signed, branch="minus",
                resolvable=classify_resolvable(tau_int, tl, tau_run),
            ))
    rows.sort(key=lambda row: row.omega_res)
    return rows


def _theta_domega(nu_nk: float, delta_f0_nk: float, omega: float) -> float:
    return -nu_nk / omega**2 + delta_f0_nk


def two_level_parameters(ctx: PredictionContext, n: int, l_signed: int,
                         omega: float) -> tuple[float, float]:
    """(theta, tau_int) of one transition at an arbitrary drive frequency.

    Feeds the Rabi envelope prediction for near-resonant driving.
    """
    th = theta(ctx.nu[n], ctx.delta_f0[n], l_signed, omega)
    co = fourier_coeffs(ctx.frames, omega, n, ctx.initial, abs(l_signed))
    strength = abs(co.coupling(l_signed))
    tau_int = math.inf if strength < COUPLING_FLOOR else 1.0 / strength
    return th, tau_int
