"""Geometry coefficients of the linearized smeared-gravity master equation.

For two point masses at separation ``d`` with Gaussian smearing radius ``R0``
the one-dimensional coefficients are

    eta   = 1 / (6 sqrt(pi) R0^3)
    eta12 = exp(-d^2 / 4R0^2) (4R0^2 + d^2) / (2 sqrt(pi) R0^3 d^2)
            - 2 erf(d / 2R0) / d^3

The quadrature route integrates the momentum-space definition directly and
is kept independent of the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class EtaSet:
    eta: float
    eta12: float
    eta_plus: float
    eta_minus: float

    @classmethod
    def from_pair(cls, eta: float, eta12: float) -> "EtaSet":
        return cls(eta=eta, eta12=eta12, eta_plus=eta + eta12, eta_minus=eta - eta12)


def eta_self(R0: float) -> float:
    if not R0 > 0:
        raise ValueError(f"R0 must be > 0, got {R0}")
    return 1.0 / (6.0 * SQRT_PI * R0**3)


def eta_cross(R0: float, d: float) -> float:
    if not R0 > 0:
        raise ValueError(f"R0 must be > 0, got {R0}")
    if not d > 0:
        raise ValueError(f"d must be > 0, got {d}")
    s = d / R0
    if s < 0.1:
        # Taylor series about d = 0 (s = d/R0); the closed form cancels catastrophically here.
        s2 = s * s
        series = 1.0 - 9.0 * s2 / 20.0 + 15.0 * s2**2 / 224.0 - 7.0 * s2**3 / 1152.0 + 9.0 * s2**4 / 22528.0
        return eta_self(R0) * series
    gauss = math.exp(-d * d / (4.0 * R0 * R0)) * (4.0 * R0 * R0 + d * d) / (2.0 * SQRT_PI * R0**3 * d * d)
    return gauss - 2.0 * math.erf(d / (2.0 * R0)) / d**3


def eta_closed(R0: float, d: float) -> EtaSet:
    """Closed-form eta coefficients for smearing radius R0 and separation d."""
    return EtaSet.from_pair(eta_self(R0), eta_cross(R0, d))


def _angular(s: np.ndarray) -> np.ndarray:
    """Integral of u^2 exp(i s u) over u in [-1, 1] (real, even in s)."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = np.abs(s) < 0.5
    ss = s[small] ** 2
    # sum_n (-1)^n s^(2n) / (2n)! * 2/(2n+3)
    term = np.full_like(ss, 2.0 / 3.0)
    acc = term.copy()
    for n in range(1, 12):
        term = term * (-ss) / ((2 * n - 1) * (2 * n)) * (2 * n + 1) / (2 * n + 3)
        acc += term
    out[small] = acc
    sl = s[~small]
    out[~small] = 2.0 * np.sin(sl) / sl + 4.0 * np.cos(sl) / sl**2 - 4.0 * np.sin(sl) / sl**3
    return out


def eta_quadrature(R0: float, d: float, tol: float = 1e-12, hbar: float = 1.0) -> EtaSet:
    """Evaluate the eta coefficients by adaptive Gauss-Kronrod quadrature.

    The angular part of the momentum integral is done analytically; the
    radial integral over |q| is done numerically with ``hbar`` kept explicit,
    so the result must not depend on it. ``tol`` is relative, with an
    absolute floor well below ``tol * eta`` so that far-field values, which
    are tiny next to ``eta``, do not stall the integrator.
    """
    if tol < 1e-14:
        raise ValueError("tol below 1e-14 is not attainable in double precision")
    if not R0 > 0 or d < 0:
        raise ValueError("need R0 > 0 and d >= 0")

    def radial(sep: float) -> float:
        def f(q):
            return q * q * math.exp(-(q * R0 / hbar) ** 2) * float(_angular(np.array([q * sep / hbar]))[0])

        qmax = 9.0 * hbar / R0
        # split at the oscillation scale so each panel resolves a few periods
        n_panels = max(1, int(math.ceil(qmax * sep / hbar / (4.0 * math.pi))))
        edges = np.linspace(0.0, qmax, n_panels + 1)
        # radial(0) integrand has total weight ~0.3 (hbar/R0)^3
        floor = 1e-2 * tol * (hbar / R0) ** 3 / n_panels
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            val, err = integrate.quad(f, a, b, epsabs=floor, epsrel=tol, limit=400)
            total += val
        return total / (math.pi * hbar**3)

    eta = radial(0.0)
    eta12 = radial(d) if d > 0 else eta
    return EtaSet.from_pair(eta, eta12)
