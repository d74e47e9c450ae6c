"""Periodic driving laws and the scalar factors g1..g4.

The semi-axis a is driven harmonically, a(tau) = a0 + A sin(2 pi tau),
with tau = omega t / (2 pi) the scaled time (one driving period == 1).
Three closed-form laws fix b:

    axes-ratio preserving:   b = (b0/a0) a      (r = b/a constant)
    breathing:               b = a - a0 + b0    (b - a constant)
    volume preserving:       b = a0 b0 / a      (V = a b constant)

Every sample is tagged with the derivative convention: "tau" derivatives
are with respect to scaled time, "t" with respect to physical time, and
d/dt = (omega / 2 pi) d/dtau.  The propagator consumes t-convention
samples (physical Schroedinger evolution); the perturbation expansion
consumes tau-convention samples, which makes the time-averaged diagonal
coupling independent of omega.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

TWO_PI = 2.0 * np.pi


class LawKind(Enum):
    AXES_RATIO = "ratio"
    BREATHING = "breathing"
    VOLUME_PRESERVING = "volume"


class GeometryError(ValueError):
    """Driving parameters that degenerate the billiard (a <= 0 or b <= 0)."""


@dataclass(frozen=True)
class DrivingLaw:
    kind: LawKind
    a0: float = 1.0
    b0: float = np.sqrt(0.51)
    amplitude: float = 0.1

    def __post_init__(self):
        if self.a0 - self.amplitude <= 0:
            raise GeometryError("a(tau) reaches zero: need a0 - A > 0")
        # once a > 0 holds, only the breathing law can still pinch b off
        if self.kind is LawKind.BREATHING and self.b0 - self.amplitude <= 0:
            raise GeometryError("breathing law: b(tau) reaches zero")
        if self.b0 <= 0:
            raise GeometryError("need b0 > 0")


@dataclass
class GeometrySample:
    """Geometry and derivatives at one scaled time (or an array of them).

    ``ratio`` and ``dratio`` are evaluated law-aware so the defining
    identities are exact: dratio == 0 for the axes-ratio law, volume
    constant for the volume-preserving law.
    """

    a: np.ndarray
    b: np.ndarray
    da: np.ndarray
    db: np.ndarray
    dda: np.ndarray
    ddb: np.ndarray
    volume: np.ndarray
    ratio: np.ndarray
    dratio: np.ndarray
    convention: str  # "t" or "tau"


def geometry(law: DrivingLaw, omega: float, tau, convention: str = "tau") -> GeometrySample:
    """Evaluate a(tau), b(tau) and derivatives; tau may be an array."""
    if convention not in ("t", "tau"):
        raise ValueError("convention must be 't' or 'tau'")
    if convention == "t" and omega <= 0:
        raise ValueError("t-convention derivatives need omega > 0")
    tau = np.asarray(tau, dtype=float)
    a0, b0, A = law.a0, law.b0, law.amplitude
    phase = TWO_PI * tau
    a = a0 + A * np.sin(phase)
    da = TWO_PI * A * np.cos(phase)
    dda = -(TWO_PI**2) * A * np.sin(phase)
    kind = law.kind
    if kind is LawKind.AXES_RATIO:
        r0 = b0 / a0
        b, db, ddb = r0 * a, r0 * da, r0 * dda
        ratio = np.full_like(a, r0)
        dratio = np.zeros_like(a)
        volume = a * b
    elif kind is LawKind.BREATHING:
        b, db, ddb = a - a0 + b0, da.copy(), dda.copy()
        ratio = b / a
        dratio = da * (1.0 - ratio) / a
        volume = a * b
    elif kind is LawKind.VOLUME_PRESERVING:
        c = a0 * b0
        b = c / a
        db = -c * da / a**2
        ddb = c * (2.0 * da**2 / a**3 - dda / a**2)
        ratio = c / a**2
        dratio = -2.0 * c * da / a**3
        volume = np.full_like(a, c)
    else:  # pragma: no cover - closed enumeration
        raise ValueError(f"unknown driving law {kind}")
    if np.any(a <= 0) or np.any(b <= 0):
        raise GeometryError("degenerate geometry: a or b reached zero")
    if convention == "t":
        s = omega / TWO_PI
        da, db, dda, ddb, dratio = s * da, s * db, s * s * dda, s * s * ddb, s * dratio
    return GeometrySample(a=a, b=b, da=da, db=db, dda=dda, ddb=ddb,
                          volume=volume, ratio=ratio, dratio=dratio,
                          convention=convention)


def g_factors(sample: GeometrySample):
    """Scalar factors multiplying f1, f2, f3+f5, f4+f6 (hbar = mu = 1).

    g1, g3 carry no time derivatives; g2, g4 inherit the sample's
    convention through the second derivatives.
    """
    a, b = sample.a, sample.b
    g1 = -(1.0 / a**2 + 1.0 / b**2)
    g3 = -(1.0 / a**2 - 1.0 / b**2)
    g2 = a * sample.dda + b * sample.ddb
    g4 = a * sample.dda - b * sample.ddb
    return g1, g2, g3, g4
