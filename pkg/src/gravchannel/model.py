"""Model parameters and generator builders for the classical-channel gravity models.

Four master equations are supported, all quadratic in the canonical
operators:

* KTM: continuous position measurement with feedback, which reproduces a
  linearized gravitational coupling ``K x1 x2`` plus position diffusion.
* dissipative KTM: the measured operator is ``x + i alpha p / hbar``, which
  adds friction, momentum diffusion and cross x-p diffusion.
* linearized dissipative TD: small-fluctuation limit of the smeared
  mass-density scheme, in one dimension with geometry weights ``eta_kj``.
* Caldeira-Leggett: two independent damped oscillators in a thermal bath,
  used as the thermalization reference.

Every builder first produces a list of :class:`LindbladTerm` and then goes
through :func:`lindblad_to_generator`, so there is a single conversion path.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace
from typing import Union

import numpy as np

from .eta import eta_closed, eta_self
from .generator import (
    LindbladTerm,
    QuadraticGenerator,
    lindblad_to_generator,
    p_index,
    unit,
    x_index,
)
from .units import UnitConstants


class InvertedTrapWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KtmParams:
    """Two trapped masses coupled through measurement and feedback.

    ``gamma`` has units hbar^2 / (length^2 time); ``alpha`` has units length^2.
    Non-zero alphas select the dissipative variant. With ``minimized_gamma``
    both rates are overwritten by ``2 hbar K``.
    """

    m1: float
    m2: float
    omega1: float
    omega2: float
    d: float
    gamma1: float = 0.0
    gamma2: float = 0.0
    alpha1: float = 0.0
    alpha2: float = 0.0
    minimized_gamma: bool = False
    include_delta_h0: bool = False
    units: UnitConstants = field(default_factory=UnitConstants)

    def __post_init__(self):
        for name in ("m1", "m2", "d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ("omega1", "omega2", "gamma1", "gamma2"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.minimized_gamma:
            g = optimal_gamma(coupling_constant(self), self.units)
            object.__setattr__(self, "gamma1", g)
            object.__setattr__(self, "gamma2", g)
        K = coupling_constant(self)
        for k, (m, w) in enumerate(((self.m1, self.omega1), (self.m2, self.omega2)), start=1):
            if w > 0 and w * w - K / m < 0:
                warnings.warn(
                    f"particle {k}: Omega^2 = omega^2 - K/m = {w * w - K / m:.3g} < 0 (inverted trap)",
                    InvertedTrapWarning,
                    stacklevel=3,
                )

    @classmethod
    def from_coupling(cls, K: float, m: float = 1.0, omega: float = 1.0, units: UnitConstants | None = None, **kw):
        """Identical particles with the separation chosen so that ``2 G m^2 / d^3 = K``."""
        units = units or UnitConstants()
        if not K > 0 or not units.G > 0:
            raise ValueError("from_coupling needs K > 0 and G > 0; use G = 0 to decouple")
        d = (2.0 * units.G * m * m / K) ** (1.0 / 3.0)
        return cls(m1=m, m2=m, omega1=omega, omega2=omega, d=d, units=units, **kw)

    @property
    def alphas(self) -> tuple[float, float]:
        return (self.alpha1, self.alpha2)

    @property
    def is_dissipative(self) -> bool:
        return self.alpha1 != 0.0 or self.alpha2 != 0.0

    @property
    def kind(self) -> str:
        return "dissipative_ktm" if self.is_dissipative else "ktm"


@dataclass(frozen=True)
class TdLinearParams:
    """N point masses on a line, linearized about classical positions ``x0``."""

    masses: tuple[float, ...]
    x0: tuple[float, ...]
    alphas: tuple[float, ...]
    R0: float
    omega: float
    units: UnitConstants = field(default_factory=UnitConstants)

    def __post_init__(self):
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        object.__setattr__(self, "x0", tuple(float(x) for x in self.x0))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        n = len(self.masses)
        if n < 1 or len(self.x0) != n or len(self.alphas) != n:
            raise ValueError("masses, x0 and alphas must have the same non-zero length")
        if any(not m > 0 for m in self.masses):
            raise ValueError("masses must be > 0")
        if not self.R0 > 0:
            raise ValueError(f"R0 must be > 0 (point-particle limit diverges), got {self.R0}")
        if not self.omega >= 0:
            raise ValueError("omega must be >= 0")
        for k, j in itertools.combinations(range(n), 2):
            if not abs(self.x0[k] - self.x0[j]) > 0:
                raise ValueError(f"particles {k} and {j} coincide")

    @classmethod
    def pair(cls, m: float, d: float, alpha: float, R0: float, omega: float, units: UnitConstants | None = None):
        return cls((m, m), (0.0, d), (alpha, alpha), R0, omega, units or UnitConstants())

    @property
    def N(self) -> int:
        return len(self.masses)

    @property
    def kind(self) -> str:
        return "td_linear"


@dataclass(frozen=True)
class CaldeiraParams:
    m1: float
    m2: float
    omega1: float
    omega2: float
    lambda1: float
    lambda2: float
    T: float
    high_T: bool = False
    units: UnitConstants = field(default_factory=UnitConstants)

    def __post_init__(self):
        if not (self.m1 > 0 and self.m2 > 0):
            raise ValueError("masses must be > 0")
        if not (self.lambda1 >= 0 and self.lambda2 >= 0):
            raise ValueError("dissipation rates must be >= 0")
        if not self.T > 0:
            raise ValueError("bath temperature must be > 0")

    @property
    def kind(self) -> str:
        return "caldeira"


ModelSpec = Union[KtmParams, TdLinearParams, CaldeiraParams]


def coupling_constant(params: KtmParams, units: UnitConstants | None = None) -> float:
    """Linearized gravitational stiffness ``K = 2 G m1 m2 / d^3``."""
    units = units or params.units
    return 2.0 * units.G * params.m1 * params.m2 / params.d**3


def optimal_gamma(K: float, units: UnitConstants | None = None) -> float:
    """Measurement rate ``2 hbar K`` that minimizes the KTM decoherence."""
    if K < 0:
        raise ValueError("K must be >= 0")
    return 2.0 * (units or UnitConstants()).hbar * K


def _trap_frequencies_sq(params: KtmParams) -> tuple[float, float]:
    K = coupling_constant(params)
    return (params.omega1**2 - K / params.m1, params.omega2**2 - K / params.m2)


def ktm_hamiltonian(params: KtmParams) -> np.ndarray:
    """Hm for H0 + K x1 x2 with the gravity-shifted trap frequencies."""
    K = coupling_constant(params)
    W1, W2 = _trap_frequencies_sq(params)
    H = np.zeros((4, 4))
    H[0, 0] = params.m1 * W1
    H[1, 1] = 1.0 / params.m1
    H[2, 2] = params.m2 * W2
    H[3, 3] = 1.0 / params.m2
    H[0, 2] = H[2, 0] = K
    return H


def delta_h0(params: KtmParams) -> np.ndarray:
    """Hm of the measurement-induced correction -(gamma alpha / 8 hbar^2) {x, p}."""
    hbar = params.units.hbar
    H = np.zeros((4, 4))
    for k, (g, a) in enumerate(((params.gamma1, params.alpha1), (params.gamma2, params.alpha2))):
        h = -g * a / (4.0 * hbar**2)
        H[x_index(k), p_index(k)] = H[p_index(k), x_index(k)] = h
    return H


def _position_diffusion_rates(params: KtmParams) -> tuple[float, float]:
    """Coefficients of [x_k, [x_k, rho]]: gamma_k/8hbar^2 + K^2/2gamma_j."""
    hbar = params.units.hbar
    K = coupling_constant(params)
    gammas = (params.gamma1, params.gamma2)
    rates = []
    for k in range(2):
        j = 1 - k
        feedback = 0.0
        if K != 0.0:
            if gammas[j] == 0.0:
                raise ValueError(f"gamma{j + 1} = 0 with K != 0: feedback noise diverges")
            feedback = K * K / (2.0 * gammas[j])
        rates.append(gammas[k] / (8.0 * hbar**2) + feedback)
    return rates[0], rates[1]


def ktm_terms(params: KtmParams, dissipative: bool = True) -> list[LindbladTerm]:
    """Lindblad terms of the (dissipative) KTM master equation."""
    hbar = params.units.hbar
    K = coupling_constant(params)
    e = [unit(4, i) for i in range(4)]
    x = (e[0], e[2])
    p = (e[1], e[3])
    gammas = (params.gamma1, params.gamma2)
    alphas = params.alphas if dissipative else (0.0, 0.0)

    hm = ktm_hamiltonian(params)
    if dissipative and params.include_delta_h0:
        hm = hm + delta_h0(params)
    terms = [LindbladTerm.hamiltonian(hm)]
    for k, c in enumerate(_position_diffusion_rates(params)):
        terms.append(LindbladTerm.double_commutator(c, x[k], x[k]))
    for k in range(2):
        g, a = gammas[k], alphas[k]
        if a == 0.0:
            continue
        terms.append(LindbladTerm.anticommutator(g * a / (4.0 * hbar**3), x[k], p[k]))
        terms.append(LindbladTerm.double_commutator(g * a * a / (8.0 * hbar**4), p[k], p[k]))
    for k in range(2):
        j = 1 - k
        if alphas[j] != 0.0 and K != 0.0:
            # +(alpha_j K / 2hbar^2) [x_k, [p_j, rho]]
            terms.append(LindbladTerm.double_commutator(-alphas[j] * K / (2.0 * hbar**2), x[k], p[j]))
    return terms


def build_ktm_generator(params: KtmParams) -> QuadraticGenerator:
    if params.is_dissipative:
        raise ValueError("build_ktm_generator requires alpha1 = alpha2 = 0")
    return lindblad_to_generator(ktm_terms(params, dissipative=False), params.units, 2, provenance="ktm")


def build_dissipative_ktm_generator(params: KtmParams) -> QuadraticGenerator:
    return lindblad_to_generator(ktm_terms(params), params.units, 2, provenance="dissipative_ktm")


def caldeira_terms(params: CaldeiraParams) -> list[LindbladTerm]:
    hbar, kB = params.units.hbar, params.units.kB
    e = [unit(4, i) for i in range(4)]
    hm = np.diag([params.m1 * params.omega1**2, 1.0 / params.m1, params.m2 * params.omega2**2, 1.0 / params.m2])
    terms = [LindbladTerm.hamiltonian(hm)]
    for k, (m, lam) in enumerate(((params.m1, params.lambda1), (params.m2, params.lambda2))):
        if lam == 0.0:
            continue
        xk, pk = e[x_index(k)], e[p_index(k)]
        terms.append(LindbladTerm.anticommutator(lam / hbar, xk, pk))
        terms.append(LindbladTerm.double_commutator(2.0 * lam * m * kB * params.T / hbar**2, xk, xk))
        if not params.high_T:
            terms.append(LindbladTerm.double_commutator(lam / (8.0 * m * kB * params.T), pk, pk))
    return terms


def build_caldeira_generator(params: CaldeiraParams) -> QuadraticGenerator:
    return lindblad_to_generator(caldeira_terms(params), params.units, 2, provenance="caldeira")


def td_eta_matrix(params: TdLinearParams) -> np.ndarray:
    """Matrix of eta_kj for all particle pairs (self terms on the diagonal)."""
    n = params.N
    E = np.full((n, n), eta_self(params.R0))
    for k, j in itertools.combinations(range(n), 2):
        E[k, j] = E[j, k] = eta_closed(params.R0, abs(params.x0[k] - params.x0[j])).eta12
    return E


def td_hamiltonian(params: TdLinearParams, eta: np.ndarray | None = None) -> np.ndarray:
    """Hm for H0 + (G/4) sum_kj m_k m_j eta_kj (x_k - x_j)^2."""
    eta = td_eta_matrix(params) if eta is None else eta
    n, G = params.N, params.units.G
    H = np.zeros((2 * n, 2 * n))
    for k, m in enumerate(params.masses):
        H[x_index(k), x_index(k)] = m * params.omega**2
        H[p_index(k), p_index(k)] = 1.0 / m
    for k, j in itertools.permutations(range(n), 2):
        # each ordered pair carries (G/4) m_k m_j eta_kj (x_k - x_j)^2
        w = G * params.masses[k] * params.masses[j] * eta[k, j]
        H[x_index(k), x_index(k)] += w
        H[x_index(k), x_index(j)] -= w
    return 0.5 * (H + H.T)


def td_linear_terms(params: TdLinearParams) -> list[LindbladTerm]:
    hbar, G = params.units.hbar, params.units.G
    n = params.N
    eta = td_eta_matrix(params)
    dim = 2 * n
    x = [unit(dim, x_index(k)) for k in range(n)]
    p = [unit(dim, p_index(k)) for k in range(n)]
    m, a = params.masses, params.alphas
    terms = [LindbladTerm.hamiltonian(td_hamiltonian(params, eta))]
    for k in range(n):
        for j in range(n):
            w = G * m[k] * m[j] * eta[k, j]
            terms.append(LindbladTerm.double_commutator(w / (2.0 * hbar), x[k], x[j]))
            if a[j] != 0.0:
                terms.append(LindbladTerm.anticommutator(w * a[j] / (2.0 * hbar**2), x[k], p[j]))
                terms.append(LindbladTerm.double_commutator(w * a[j] / (2.0 * hbar**2), x[k], p[j]))
            if a[k] != 0.0 and a[j] != 0.0:
                terms.append(LindbladTerm.double_commutator(w * a[k] * a[j] / (4.0 * hbar**3), p[k], p[j]))
    return terms


def build_td_linear_generator(params: TdLinearParams, units: UnitConstants | None = None) -> QuadraticGenerator:
    if units is not None:
        params = replace(params, units=units)
    return lindblad_to_generator(td_linear_terms(params), params.units, params.N, provenance="td_linear")


def model_terms(model: ModelSpec) -> list[LindbladTerm]:
    if isinstance(model, KtmParams):
        return ktm_terms(model)
    if isinstance(model, TdLinearParams):
        return td_linear_terms(model)
    if isinstance(model, CaldeiraParams):
        return caldeira_terms(model)
    raise TypeError(f"unsupported model {type(model).__name__}")


def build_generator(model: ModelSpec) -> QuadraticGenerator:
    if isinstance(model, KtmParams):
        return build_dissipative_ktm_generator(model) if model.is_dissipative else build_ktm_generator(model)
    if isinstance(model, TdLinearParams):
        return build_td_linear_generator(model)
    if isinstance(model, CaldeiraParams):
        return build_caldeira_generator(model)
    raise TypeError(f"unsupported model {type(model).__name__}")


# x_cm = (x1 + x2)/2, p_cm = p1 + p2, x_rel = x1 - x2, p_rel = (p1 - p2)/2
COM_REL_TRANSFORM = np.array(
    [
        [0.5, 0.0, 0.5, 0.0],
        [0.0, 1.0, 0.0, 1.0],
        [1.0, 0.0, -1.0, 0.0],
        [0.0, 0.5, 0.0, -0.5],
    ]
)


def com_rel_generator(gen: QuadraticGenerator) -> QuadraticGenerator:
    """Two-mode generator expressed in (x_cm, p_cm, x_rel, p_rel)."""
    if gen.n_modes != 2:
        raise ValueError("centre-of-mass split needs exactly two modes")
    return gen.transformed(COM_REL_TRANSFORM, provenance=f"{gen.provenance}:com_rel")


def split_com_rel(gen: QuadraticGenerator, rtol: float = 1e-13) -> tuple[QuadraticGenerator, QuadraticGenerator]:
    """Split a symmetric two-particle generator into CoM and relative modes."""
    full = com_rel_generator(gen)
    scale = max(np.abs(full.drift).max(), np.abs(full.diffusion).max(), np.abs(full.ham).max(), 1e-300)
    for name in ("drift", "diffusion", "ham"):
        M = getattr(full, name)
        cross = max(np.abs(M[:2, 2:]).max(), np.abs(M[2:, :2]).max())
        if cross > rtol * scale:
            raise ValueError(f"CoM/relative {name} blocks couple (residual {cross:.3g}); parameters are not symmetric")
    return full.block([0], f"{gen.provenance}:cm"), full.block([1], f"{gen.provenance}:rel")


EXCHANGE_PERMUTATION = (2, 3, 0, 1)


def mass_of(model: ModelSpec, k: int) -> float:
    if isinstance(model, TdLinearParams):
        return model.masses[k]
    return (model.m1, model.m2)[k]


def trap_frequency(model: ModelSpec, k: int) -> float:
    if isinstance(model, TdLinearParams):
        return model.omega
    return (model.omega1, model.omega2)[k]


def n_modes(model: ModelSpec) -> int:
    return model.N if isinstance(model, TdLinearParams) else 2


def is_exchange_symmetric(gen: QuadraticGenerator) -> bool:
    return (
        np.array_equal(gen.permuted(EXCHANGE_PERMUTATION).drift, gen.drift)
        and np.array_equal(gen.permuted(EXCHANGE_PERMUTATION).diffusion, gen.diffusion)
        and np.array_equal(gen.permuted(EXCHANGE_PERMUTATION).ham, gen.ham)
    )


def with_alpha(params: KtmParams, alpha: float) -> KtmParams:
    return replace(params, alpha1=alpha, alpha2=alpha)


__all__ = [
    "CaldeiraParams",
    "COM_REL_TRANSFORM",
    "InvertedTrapWarning",
    "KtmParams",
    "ModelSpec",
    "TdLinearParams",
    "build_caldeira_generator",
    "build_dissipative_ktm_generator",
    "build_generator",
    "build_ktm_generator",
    "build_td_linear_generator",
    "com_rel_generator",
    "coupling_constant",
    "model_terms",
    "optimal_gamma",
    "split_com_rel",
]

