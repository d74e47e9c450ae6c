"""Circular-billiard eigenbasis and the six coupling matrices.

The working basis is the set of Dirichlet modes of the unit disc,

    Phi_{n,m}(rho, phi) ~ J_m(k_{m,n} rho) e^{i m phi},

with J_m the cylindrical Bessel function and k_{m,n} its n-th positive
root.  The angular index m is SIGNED here; roots and radial profiles obey
k_{-m,n} = k_{m,n} via J_{-m} = (-1)^m J_m.  Six real matrices f1..f6
represent, in this basis, the operators needed by the driven-billiard
Hamiltonians: f1 ~ Laplacian/4 (diagonal), f2 ~ rho^2/4 (same-m),
f3..f6 ~ the m -> m-+2 couplings of (d^2/deta^2 - d^2/dxi^2)/4 and
(eta^2 - xi^2)/4.

All operators used downstream are invariant under sign change of either
scaled coordinate, so the Hilbert space splits into four parity blocks
spanned by real angular combinations cos(m phi) / sin(m phi); see
``parity_block``.

Units: hbar = mu = 1 throughout the package; lengths in units of the
reference semi-axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import jv

# bump when the quadrature rule or matrix formulas change (cache key)
QUADRATURE_VERSION = 1

EVEN = "even"
ODD = "odd"
PARITIES = (EVEN, ODD)


class RootRefinementError(RuntimeError):
    """Newton/bisection failed to pin a Bessel root to tolerance."""


def _mcmahon_guess(m: int, n: int) -> float:
    """McMahon's asymptotic expansion for the n-th zero of J_m."""
    beta = (n + 0.5 * m - 0.25) * np.pi
    mu = 4.0 * m * m
    eb = 8.0 * beta
    return beta - (mu - 1.0) / eb - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * eb**3)


def _refine_root(m: int, n: int, lo: float, hi: float) -> float:
    """Newton inside a sign-change bracket, bisection when Newton strays.

    Seeds from McMahon's guess when it falls inside the bracket (reliable
    away from the turning point of high orders), else the midpoint.
    """
    guess = _mcmahon_guess(m, n)
    x = guess if lo < guess < hi else 0.5 * (lo + hi)
    f_lo = jv(m, lo)
    for _ in range(80):
        f = jv(m, x)
        if abs(f) <= 1e-13:
            return x
        df = 0.5 * (jv(m - 1, x) - jv(m + 1, x))
        step = f / df if df != 0 else np.inf
        # keep the bracket current so bisection stays valid
        if f * f_lo < 0:
            hi = x
        else:
            lo, f_lo = x, f
        if np.isfinite(step) and lo < x - step < hi:
            x -= step
        else:
            x = 0.5 * (lo + hi)
        if hi - lo < 1e-15 * hi:
            return x
    raise RootRefinementError(f"Bessel root (m={m}, n={n}) did not converge")


def bessel_roots(m: int, count: int) -> np.ndarray:
    """First ``count`` positive roots of J_m, ascending, |J_m(k)| <= 1e-12.

    Sign changes are bracketed by a scan with step well below the minimum
    zero spacing (> 3.1 for every order), then polished by Newton with a
    bisection fallback.
    """
    if m < 0 or count < 1:
        raise ValueError("need m >= 0 and count >= 1")
    roots = np.empty(count)
    x = max(float(m), 0.3)  # all zeros of J_m lie above the order
    step = 0.5
    f_prev = jv(m, x)
    found = 0
    limit = _mcmahon_guess(m, count) + 4.0 * count + 50.0
    while found < count:
        x_next = x + step
        f_next = jv(m, x_next)
        if f_prev == 0.0:  # grid landed on a root
            roots[found] = x
            found += 1
        elif f_prev * f_next < 0:
            k = _refine_root(m, found + 1, x, x_next)
            if abs(jv(m, k)) > 1e-12:
                raise RootRefinementError(f"Bessel root (m={m}, n={found + 1}) residual too large")
            roots[found] = k
            found += 1
        x, f_prev = x_next, f_next
        if x > limit:
            raise RootRefinementError(f"Bessel root scan ran past limit at (m={m}, n={found + 1})")
    return roots


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_rule(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    if n_nodes not in _GL_CACHE:
        x, w = leggauss(n_nodes)
        _GL_CACHE[n_nodes] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n_nodes]


def quadrature_nodes(k_max: float) -> int:
    """Node count for integrands oscillating at wavenumber <= 2*k_max."""
    return int(np.ceil(4.0 * k_max)) + 16


def radial_integral(m_a: int, k_a: float, m_b: int, k_b: float, p: int) -> float:
    """int_0^1 J_{m_a}(k_a r) J_{m_b}(k_b r) r^p dr by Gauss-Legendre.

    The integrand oscillates at wavenumber ~ k_a + k_b; the fixed rule
    with ceil(4 max(k_a,k_b)) + 16 nodes resolves it to ~1e-12 relative.
    """
    if p not in (1, 3):
        raise ValueError(f"power p must be 1 or 3, got {p}")
    x, w = _gl_rule(quadrature_nodes(max(k_a, k_b)))
    return float(np.sum(w * jv(m_a, k_a * x) * jv(m_b, k_b * x) * x**p))


@dataclass(frozen=True)
class BasisIndex:
    """One circular-billiard mode: signed angular m, radial n >= 1, root k."""

    m: int
    n: int
    k: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("radial quantum number n must be >= 1")


@dataclass(frozen=True)
class BlockEntry:
    """One real angular-combination mode of a parity block."""

    m_abs: int
    n: int
    k: float
    kind: str  # "cos" or "sin"


@dataclass
class BasisSet:
    """Truncated signed-m basis with parity-block maps.

    Membership is by root cutoff k_{m,n} <= cutoff (one truncation knob);
    indices are sorted by (k, m).  ``block_entries`` lists, per
    (eta-parity, xi-parity), the real cos/sin modes of that block in
    ascending k.
    """

    cutoff: float
    indices: list[BasisIndex]
    roots: dict[int, np.ndarray]
    block_entries: dict[tuple[str, str], list[BlockEntry]] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.indices)

    def position(self, m: int, n: int) -> int:
        return self._pos[(m, n)]

    def __post_init__(self):
        self._pos = {(ix.m, ix.n): i for i, ix in enumerate(self.indices)}
        if not self.block_entries:
            self.block_entries = {
                pair: _collect_block(self, pair)
                for pair in ((EVEN, EVEN), (ODD, EVEN), (EVEN, ODD), (ODD, ODD))
            }


def _collect_block(basis: BasisSet, pair: tuple[str, str]) -> list[BlockEntry]:
    # cos(m phi): xi-even, eta-parity (-1)^m;  sin(m phi): xi-odd, eta-parity (-1)^(m+1)
    eta_p, xi_p = pair
    kind = "cos" if xi_p == EVEN else "sin"
    entries = []
    for m_abs in sorted(basis.roots):
        if kind == "sin" and m_abs == 0:
            continue
        eta_of_mode = EVEN if (m_abs % 2 == 0) == (kind == "cos") else ODD
        if eta_of_mode != eta_p:
            continue
        for n, k in enumerate(basis.roots[m_abs], 1):
            entries.append(BlockEntry(m_abs, n, float(k), kind))
    entries.sort(key=lambda e: e.k)
    return entries


def build_basis(k_max: float) -> BasisSet:
    """All modes with k_{m,n} <= k_max, both signs of m."""
    if k_max <= np.pi:
        raise ValueError("k_max below the first Bessel root yields an empty basis")
    roots: dict[int, np.ndarray] = {}
    m = 0
    while True:
        count = max(int(k_max / np.pi) + 2, 1)
        rt = bessel_roots(m, count)
        rt = rt[rt <= k_max]
        if rt.size == 0:
            break
        roots[m] = rt
        m += 1
    indices = []
    for mm, rt in roots.items():
        for n, k in enumerate(rt, 1):
            indices.append(BasisIndex(mm, n, float(k)))
            if mm > 0:
                indices.append(BasisIndex(-mm, n, float(k)))
    indices.sort(key=lambda ix: (ix.k, ix.m))
    return BasisSet(cutoff=float(k_max), indices=indices, roots=roots)


@dataclass
class CouplingMatrices:
    """The six real coupling matrices over a signed-m BasisSet.

    f1 is diagonal (-k^2/4).  f2 is symmetric.  f3/f5 and f4/f6 occupy the
    m' = m-2 and m' = m+2 bands and are mutual transposes, so f3+f5 and
    f4+f6 are symmetric.  Entries off the selection-rule bands are exact
    structural zeros.
    """

    basis: BasisSet
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    f4: np.ndarray
    f5: np.ndarray
    f6: np.ndarray

    @property
    def f35(self) -> np.ndarray:
        return self.f3 + self.f5

    @property
    def f46(self) -> np.ndarray:
        return self.f4 + self.f6


def _order_sign(m: int) -> float:
    """J_m = sign * J_|m| for integer m (sign = (-1)^m when m < 0)."""
    return -1.0 if (m < 0 and m % 2 != 0) else 1.0


def build_matrices(basis: BasisSet) -> CouplingMatrices:
    """Populate f1..f6 on ``basis`` (vectorized per angular band).

    Every Bessel evaluation is reduced to nonnegative order with the exact
    sign identities J_{-mu} = (-1)^mu J_mu and, at roots of J_mu,
    J_{mu-1} = -J_{mu+1}.  Mirror bands (m <-> -m) then share identical
    floats, which makes the parity-block decoupling exact rather than
    accurate-to-root-tolerance.
    """
    if basis.size == 0:
        raise ValueError("empty basis")
    N = basis.size
    f = [np.zeros((N, N)) for _ in range(6)]
    x, w = _gl_rule(quadrature_nodes(basis.cutoff))
    wx1 = w * x
    wx3 = w * x**3

    # canonical profile and normalizer tables at nonnegative order
    prof = {mu: jv(mu, np.outer(ks, x)) for mu, ks in basis.roots.items()}
    norm_tab = {mu: jv(mu + 1, ks) for mu, ks in basis.roots.items()}

    def norm_at(order: int, root_order: int) -> np.ndarray:
        """J_order(k_{root_order, n}) for all n, canonical evaluation.

        Only two patterns occur: order = mu + 1 directly, and order = 1 - mu,
        which reduces via J_{-(mu-1)} = (-1)^(mu-1) J_{mu-1} and, at roots of
        J_mu, J_{mu-1} = -J_{mu+1}, to (-1)^mu J_{mu+1}.
        """
        mu = abs(root_order)
        if order == mu + 1:
            return norm_tab[mu]
        if order == 1 - mu:
            return (-1.0 if mu % 2 else 1.0) * norm_tab[mu]
        raise ValueError(f"unsupported normalizer order {order} at roots of {root_order}")

    signed_ms = sorted({ix.m for ix in basis.indices})
    rows_of = {
        mm: np.array([basis.position(mm, n)
                      for n in range(1, len(basis.roots[abs(mm)]) + 1)])
        for mm in signed_ms
    }

    for mm in signed_ms:
        am = abs(mm)
        ks = basis.roots[am]
        rows = rows_of[mm]
        norm_self = norm_at(mm + 1, mm)
        prof_m = prof[am]

        f[0][rows, rows] = -(ks**2) / 4.0

        # f2: same-m block, rho^3 weight (profile signs square away)
        g2 = (prof_m * wx3) @ prof_m.T / (2.0 * np.outer(norm_self, norm_self))
        f[1][np.ix_(rows, rows)] = g2

        # f3/f4: couple m -> m-2
        md = mm - 2
        if md in rows_of:
            ad = abs(md)
            kd = basis.roots[ad]
            cols = rows_of[md]
            den = 4.0 * np.outer(norm_self, norm_at(mm - 1, md))
            # f3 carries J_m twice, so the order signs cancel: all canonical
            prof_m_at_kd = jv(am, np.outer(kd, x))
            f[2][np.ix_(rows, cols)] = ((prof_m * wx1) @ prof_m_at_kd.T) * kd**2 / den
            s4 = _order_sign(mm) * _order_sign(md)
            f[3][np.ix_(rows, cols)] = s4 * ((prof_m * wx3) @ prof[ad].T) / den

        # f5/f6: couple m -> m+2
        mu_ = mm + 2
        if mu_ in rows_of:
            au = abs(mu_)
            ku = basis.roots[au]
            cols = rows_of[mu_]
            den = 4.0 * np.outer(norm_self, norm_at(mm + 3, mu_))
            prof_m_at_ku = jv(am, np.outer(ku, x))
            f[4][np.ix_(rows, cols)] = ((prof_m * wx1) @ prof_m_at_ku.T) * ku**2 / den
            s6 = _order_sign(mm) * _order_sign(mu_)
            f[5][np.ix_(rows, cols)] = s6 * ((prof_m * wx3) @ prof[au].T) / den

    return CouplingMatrices(basis, *f)


@dataclass
class ParityBlock:
    """Real-combination sub-basis of one (eta, xi) parity pair.

    ``transform`` maps block coordinates to the signed-m basis; its columns
    are orthonormal, so restriction of an operator A is T^T A T.  The
    cos/sin recombination keeps every restricted operator real.
    """

    eta_parity: str
    xi_parity: str
    entries: list[BlockEntry]
    transform: np.ndarray  # (signed_dim, block_dim), orthogonal columns

    @property
    def dim(self) -> int:
        return len(self.entries)

    def restrict(self, a: np.ndarray) -> np.ndarray:
        return self.transform.T @ a @ self.transform


def parity_block(basis: BasisSet, eta_parity: str, xi_parity: str) -> ParityBlock:
    """Build the real sub-basis of one parity pair and its embedding."""
    if eta_parity not in PARITIES or xi_parity not in PARITIES:
        raise ValueError("parities must be 'even' or 'odd'")
    entries = basis.block_entries[(eta_parity, xi_parity)]
    T = np.zeros((basis.size, len(entries)))
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for j, e in enumerate(entries):
        if e.m_abs == 0:
            T[basis.position(0, e.n), j] = 1.0
        else:
            s = 1.0 if e.kind == "cos" else -1.0
            T[basis.position(e.m_abs, e.n), j] = inv_sqrt2
            T[basis.position(-e.m_abs, e.n), j] = s * inv_sqrt2
    return ParityBlock(eta_parity, xi_parity, entries, T)


@dataclass
class BlockOperators:
    """The four operator combinations restricted to one parity block.

    Everything downstream (Mathieu operator, driving coupling, quadratic
    form of the boundary unitary) is a linear combination of these.
    """

    block: ParityBlock | None
    f1: np.ndarray
    f35: np.ndarray
    f2: np.ndarray
    f46: np.ndarray

    @property
    def dim(self) -> int:
        return self.f1.shape[0]


def block_operators(matrices: CouplingMatrices, block: ParityBlock) -> BlockOperators:
    return BlockOperators(
        block=block,
        f1=block.restrict(matrices.f1),
        f35=block.restrict(matrices.f35),
        f2=block.restrict(matrices.f2),
        f46=block.restrict(matrices.f46),
    )


def full_operators(matrices: CouplingMatrices) -> BlockOperators:
    """Unrestricted operators over the whole signed-m basis.

    Used to exercise parity superselection: propagation started inside one
    block must stay there even without the block restriction.
    """
    return BlockOperators(block=None, f1=matrices.f1, f35=matrices.f35,
                          f2=matrices.f2, f46=matrices.f46)
