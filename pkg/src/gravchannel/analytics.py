"""Closed-form predictions: heating rates, asymptotic energies, effective temperatures."""

from __future__ import annotations

import math
from typing import Literal, Sequence

from .errors import NotDissipative
from .eta import SQRT_PI, EtaSet, eta_closed, eta_quadrature
from .model import KtmParams, TdLinearParams, coupling_constant
from .units import UnitConstants

__all__ = [
    "EtaSet",
    "caldeira_asymptote",
    "effective_temperature",
    "eta_closed",
    "eta_quadrature",
    "ktm_asymptote_explicit",
    "ktm_asymptotic_energy",
    "ktm_growth_rate",
    "td_asymptotic_energy",
    "td_growth_rate",
]

Limit = Literal["small_alpha"] | None


def _identical_pair(params: KtmParams) -> None:
    if (params.m1, params.omega1, params.alpha1, params.gamma1) != (params.m2, params.omega2, params.alpha2, params.gamma2):
        raise ValueError("closed forms assume identical particles (equal m, omega, alpha, gamma)")


def ktm_growth_rate(params: KtmParams, units: UnitConstants | None = None) -> float:
    """Linear heating rate hbar K / m of the minimized KTM model."""
    units = units or params.units
    if params.m1 != params.m2:
        raise ValueError("growth-rate formula assumes equal masses")
    return units.hbar * coupling_constant(params, units) / params.m1


def td_growth_rate(masses: Sequence[float], R0: float, units: UnitConstants | None = None) -> float:
    """Three-dimensional TD heating rate hbar G sum(m) / (4 sqrt(pi) R0^3)."""
    units = units or UnitConstants()
    if not R0 > 0:
        raise ValueError("R0 must be > 0")
    return units.hbar * units.G * sum(masses) / (4.0 * SQRT_PI * R0**3)


def ktm_asymptotic_energy(params: KtmParams, units: UnitConstants | None = None, limit: Limit = None) -> float:
    """Asymptotic mean energy of the dissipative KTM model.

    With ``minimized_gamma`` this is ``hbar^2/(m a) + a m Omega^2/2 + K^2 a^3 m/(4 hbar^2)``;
    otherwise the general-gamma expression is used. ``limit="small_alpha"``
    keeps only the terms that survive as alpha (and gamma) go to zero.
    """
    units = units or params.units
    _identical_pair(params)
    hbar, G = units.hbar, units.G
    m, w, a, d = params.m1, params.omega1, params.alpha1, params.d
    if a == 0.0:
        raise NotDissipative("alpha = 0: the energy grows without bound")
    if a < 0:
        raise ValueError("alpha must be > 0")
    K = coupling_constant(params, units)
    if params.minimized_gamma:
        if limit == "small_alpha":
            return hbar**2 / (m * a)
        W2 = w * w - K / m
        return hbar**2 / (m * a) + a * m * W2 / 2.0 + K * K * a**3 * m / (4.0 * hbar**2)
    g = params.gamma1
    if not g > 0:
        raise ValueError("general-gamma asymptote needs gamma > 0")
    measurement = hbar**2 / (2.0 * m * a)
    feedback = 8.0 * hbar**4 * G * G * m**3 / (g * g * a * d**6)
    if limit == "small_alpha":
        return measurement + feedback
    return measurement + feedback + a * m * w * w / 2.0 - a * m * m * G / d**3 + m * a**3 * g * g / (16.0 * hbar**4)


def ktm_asymptote_explicit(m: float, omega: float, alpha: float, d: float, units: UnitConstants | None = None) -> float:
    """Minimized-gamma asymptote written in terms of G, m, d instead of K."""
    units = units or UnitConstants()
    hbar, G = units.hbar, units.G
    return (
        hbar**2 / (m * alpha)
        + alpha * m * omega**2 / 2.0
        - alpha * m * m * G / d**3
        + G * G * alpha**3 * m**5 / (hbar**2 * d**6)
    )


def td_asymptotic_energy(params: TdLinearParams, units: UnitConstants | None = None) -> float:
    units = units or params.units
    if params.N != 2 or params.masses[0] != params.masses[1] or params.alphas[0] != params.alphas[1]:
        raise ValueError("closed form assumes two identical particles")
    hbar, G = units.hbar, units.G
    m, a, w = params.masses[0], params.alphas[0], params.omega
    if a == 0.0:
        raise NotDissipative("alpha = 0: the energy grows without bound")
    e = eta_closed(params.R0, abs(params.x0[1] - params.x0[0]))
    return (
        hbar**2 / (m * a)
        + a * m * w * w / 2.0
        - a * m * m * G * e.eta_minus / 2.0
        + G * G * a**3 * m**5 * (e.eta**2 + e.eta12**2) / (4.0 * hbar**2)
    )


def effective_temperature(
    mode: Literal["minimized", "general"],
    m0: float,
    alpha0: float,
    gamma0: float | None = None,
    units: UnitConstants | None = None,
) -> float:
    """Temperature whose equipartition energy 2 kB T equals the small-alpha asymptote.

    ``alpha = m0 alpha0 / m`` and, in general mode, ``gamma = m^2 gamma0 / (m0^2 d^3)``
    make the result independent of the particle mass and separation.
    """
    units = units or UnitConstants()
    hbar, G, kB = units.hbar, units.G, units.kB
    if not (m0 > 0 and alpha0 > 0):
        raise ValueError("m0 and alpha0 must be > 0")
    if mode == "minimized":
        return hbar**2 / (2.0 * m0 * alpha0 * kB)
    if mode == "general":
        if gamma0 is None or not gamma0 > 0:
            raise ValueError("general mode needs gamma0 > 0")
        if math.isinf(gamma0):
            return hbar**2 / (4.0 * m0 * alpha0 * kB)
        return hbar**2 / (4.0 * m0 * alpha0 * kB) + 4.0 * hbar**4 * G * G * m0**3 / (gamma0**2 * alpha0 * kB)
    raise ValueError(f"unknown mode {mode!r}")


def caldeira_asymptote(T: float, units: UnitConstants | None = None) -> float:
    """Equipartition energy 2 kB T of two one-dimensional oscillators."""
    if T < 0:
        raise ValueError("T must be >= 0")
    return 2.0 * (units or UnitConstants()).kB * T
