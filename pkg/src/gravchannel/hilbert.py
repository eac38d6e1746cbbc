"""Dense density-matrix oracle on a truncated two-mode number basis.

Every supported master equation is compiled into

    drho/dt = M rho + (M rho)^dag + sum_s (P_s rho Q_s + (P_s rho Q_s)^dag)

with sparse operators, which keeps the right-hand side Hermitian by
construction and makes a step cost a handful of sparse-dense products.

The KTM family is compiled from its measurement/feedback structures
(measured operator ``A_k = x_k + i alpha_k p_k / hbar``, feedback operator
``B_j = x_j``, gain ``chi = K``), so the ``K x1 x2`` coupling is not put in
by hand; it appears from the feedback cross term. Caldeira and the
linearized TD model are compiled from their :class:`LindbladTerm` lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import CovarianceViolation, LeakageError, StepSizeError
from .generator import LindbladTerm, p_index, x_index
from .model import (
    CaldeiraParams,
    KtmParams,
    ModelSpec,
    TdLinearParams,
    coupling_constant,
    delta_h0,
    ktm_hamiltonian,
    mass_of,
    model_terms,
    n_modes,
    trap_frequency,
)
from .units import NATURAL, UnitConstants

__all__ = [
    "CompiledModel",
    "DenseState",
    "canonical_operators",
    "coherent_ket",
    "compile_model",
    "compile_terms",
    "dense_integrate",
    "dense_moments",
    "dense_rhs",
    "mode_operators",
]

DEFAULT_NCUT = 12
LEAKAGE_TOL = 1e-6
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-8
LOCAL_ERROR_TOL = 1e-8


def canonical_operators(ncut: int, m: float, omega: float, units: UnitConstants = NATURAL) -> dict[str, np.ndarray]:
    """Single-mode ``x``, ``p``, ``a``, ``n`` and ``H0 = hbar omega (n + 1/2)`` in the number basis.

    The commutator ``[x, p]`` equals ``i hbar`` except on the top level, where
    truncation puts ``-i hbar (ncut - 1)``.
    """
    if ncut < 4:
        raise ValueError("ncut must be >= 4")
    if not (m > 0 and omega > 0):
        raise ValueError("m and omega must be > 0")
    hbar = units.hbar
    a = np.diag(np.sqrt(np.arange(1, ncut, dtype=float)), 1).astype(complex)
    ad = a.conj().T
    x = np.sqrt(hbar / (2.0 * m * omega)) * (a + ad)
    p = 1j * np.sqrt(hbar * m * omega / 2.0) * (ad - a)
    n = np.diag(np.arange(ncut, dtype=float)).astype(complex)
    H0 = hbar * omega * (n + 0.5 * np.eye(ncut))
    return {"x": x, "p": p, "a": a, "n": n, "H0": H0}


@lru_cache(maxsize=32)
def _mode_operators_cached(ncut, masses, omegas, hbar):
    units = UnitConstants(hbar=hbar)
    n = len(masses)
    eye = sp.identity(ncut, dtype=complex, format="csr")
    ops = []
    for k in range(n):
        single = canonical_operators(ncut, masses[k], omegas[k], units)
        for name in ("x", "p"):
            factors = [eye] * n
            factors[k] = sp.csr_matrix(single[name])
            op = factors[0]
            for f in factors[1:]:
                op = sp.kron(op, f, format="csr")
            ops.append(op)
    return tuple(ops)


def mode_operators(model: ModelSpec, ncut: int = DEFAULT_NCUT) -> list[sp.csr_matrix]:
    """Sparse ``(x1, p1, x2, p2, ...)`` on the tensor-product number basis of the model's traps."""
    n = n_modes(model)
    masses = tuple(float(mass_of(model, k)) for k in range(n))
    omegas = tuple(float(trap_frequency(model, k)) for k in range(n))
    return list(_mode_operators_cached(ncut, masses, omegas, model.units.hbar))


def _linear_op(vec: np.ndarray, ops: Sequence[sp.csr_matrix]) -> sp.csr_matrix:
    out = None
    for c, op in zip(vec, ops):
        if c != 0.0:
            out = c * op if out is None else out + c * op
    if out is None:
        return sp.csr_matrix(ops[0].shape, dtype=complex)
    return out.tocsr()


def _quadratic_op(hm: np.ndarray, ops: Sequence[sp.csr_matrix]) -> sp.csr_matrix:
    """Sparse ``1/2 r^T Hm r`` (Weyl-symmetric since Hm is symmetric)."""
    out = sp.csr_matrix(ops[0].shape, dtype=complex)
    for i, j in zip(*np.nonzero(hm)):
        out = out + 0.5 * hm[i, j] * (ops[i] @ ops[j])
    return out.tocsr()


@dataclass
class CompiledModel:
    """Sparse structures of a master equation in left-multiplier/sandwich form."""

    M: sp.csr_matrix
    sandwiches: list[tuple[sp.csr_matrix, sp.csr_matrix]]
    ops: list[sp.csr_matrix]
    ncut: int
    n_modes: int
    ham: np.ndarray
    hbar: float
    label: str = ""

    @property
    def dim(self) -> int:
        return self.ncut**self.n_modes


class _Builder:
    def __init__(self, ops, hbar):
        self.ops = ops
        self.hbar = hbar
        self.M = sp.csr_matrix(ops[0].shape, dtype=complex)
        self.sandwiches: list[tuple[sp.csr_matrix, sp.csr_matrix]] = []

    def hamiltonian_op(self, H):
        self.M = self.M - (1j / self.hbar) * H

    def double_commutator(self, c, U, V):
        # -c [U, [V, rho]] = -c UV rho - c rho VU + c (U rho V + V rho U)
        self.M = self.M - c * (U @ V)
        self.sandwiches.append((c * U, V))

    def anticommutator(self, lam, U, V):
        # -i lam [U, {V, rho}]
        self.M = self.M - 1j * lam * (U @ V)
        self.sandwiches.append((-1j * lam * U, V))

    def dissipator(self, rate, A):
        # rate (A rho A^dag - 1/2 {A^dag A, rho})
        Ad = A.conj().T.tocsr()
        self.M = self.M - 0.5 * rate * (Ad @ A)
        self.sandwiches.append((0.5 * rate * A, Ad))

    def feedback_cross(self, chi, B, A):
        # -(i chi / 2 hbar) [B, A rho + rho A^dag]
        Ad = A.conj().T.tocsr()
        self.M = self.M - (1j * chi / (2.0 * self.hbar)) * (B @ A)
        self.sandwiches.append((-(1j * chi / (2.0 * self.hbar)) * B, Ad))

    def finish(self, ncut, n, ham, label):
        sandwiches = [(P.tocsr(), Q.tocsr()) for P, Q in self.sandwiches]
        return CompiledModel(self.M.tocsr(), sandwiches, self.ops, ncut, n, ham, self.hbar, label)


def compile_terms(
    terms: Sequence[LindbladTerm],
    model: ModelSpec,
    ncut: int = DEFAULT_NCUT,
    label: str = "terms",
) -> CompiledModel:
    """Compile a list of quadratic Lindblad terms onto the truncated basis."""
    ops = mode_operators(model, ncut)
    b = _Builder(ops, model.units.hbar)
    ham = np.zeros((len(ops), len(ops)))
    for t in terms:
        if t.kind == "hamiltonian":
            ham = ham + t.hm
            b.hamiltonian_op(_quadratic_op(t.hm, ops))
        elif t.kind == "double_commutator":
            b.double_commutator(t.coeff, _linear_op(t.u, ops), _linear_op(t.v, ops))
        elif t.kind == "anticommutator":
            b.anticommutator(t.coeff, _linear_op(t.u, ops), _linear_op(t.v, ops))
        else:
            raise ValueError(f"unknown term kind {t.kind!r}")
    return b.finish(ncut, n_modes(model), ham, label)


def ktm_free_hamiltonian(params: KtmParams, compensate_delta_h0: bool = True) -> np.ndarray:
    """Hm of the bare part H0 (gravity-shifted traps, no coupling) used by the unraveling.

    The measurement of a non-Hermitian ``A`` already generates the
    ``-(gamma alpha / 8 hbar^2) {x, p}`` correction; when the model excludes
    it, the opposite term is added here so all engines agree.
    """
    K = coupling_constant(params)
    H = np.diag(
        [
            params.m1 * (params.omega1**2 - K / params.m1),
            1.0 / params.m1,
            params.m2 * (params.omega2**2 - K / params.m2),
            1.0 / params.m2,
        ]
    )
    if compensate_delta_h0 and params.is_dissipative and not params.include_delta_h0:
        H = H - delta_h0(params)
    return H


def ktm_channel_operators(params: KtmParams, ops: Sequence[sp.csr_matrix]):
    """Measured operators ``A_k``, feedback operators ``B_k``, rates and gains."""
    hbar = params.units.hbar
    alphas = params.alphas
    A = [(ops[x_index(k)] + (1j * alphas[k] / hbar) * ops[p_index(k)]).tocsr() for k in range(2)]
    B = [ops[x_index(k)] for k in range(2)]
    gammas = (params.gamma1, params.gamma2)
    K = coupling_constant(params)
    chis = (K, K)
    for k in range(2):
        if chis[k] != 0.0 and gammas[k] == 0.0:
            raise ValueError(f"gamma{k + 1} = 0 with K != 0: feedback noise diverges")
    return A, B, gammas, chis


def compile_ktm_channel(params: KtmParams, ncut: int = DEFAULT_NCUT) -> CompiledModel:
    """Compile the measurement + feedback master equation of the (dissipative) KTM model."""
    ops = mode_operators(params, ncut)
    hbar = params.units.hbar
    b = _Builder(ops, hbar)
    hm0 = ktm_free_hamiltonian(params)
    b.hamiltonian_op(_quadratic_op(hm0, ops))
    A, B, gammas, chis = ktm_channel_operators(params, ops)
    for k in range(2):
        j = 1 - k
        if gammas[k] > 0.0:
            b.dissipator(gammas[k] / (4.0 * hbar**2), A[k])
        if chis[k] != 0.0:
            b.double_commutator(chis[k] ** 2 / (2.0 * gammas[k]), B[j], B[j])
            b.feedback_cross(chis[k], B[j], A[k])
    ham = ktm_hamiltonian(params)
    if params.is_dissipative and params.include_delta_h0:
        ham = ham + delta_h0(params)
    return b.finish(ncut, 2, ham, "ktm_channel")


def compile_model(model: ModelSpec, ncut: int = DEFAULT_NCUT) -> CompiledModel:
    if isinstance(model, KtmParams):
        return compile_ktm_channel(model, ncut)
    if isinstance(model, (CaldeiraParams, TdLinearParams)):
        return compile_terms(model_terms(model), model, ncut, label=model.kind)
    raise TypeError(f"unsupported model {type(model).__name__}")


def _apply(cm: CompiledModel, rho: np.ndarray) -> np.ndarray:
    Mr = cm.M @ rho
    out = Mr + Mr.conj().T
    for P, Q in cm.sandwiches:
        S = P @ (Q.T @ rho.T).T
        out += S + S.conj().T
    return out


@dataclass
class DenseState:
    """Density matrix on the tensor-product truncated number basis."""

    rho: np.ndarray
    ncut: int
    n_modes: int = 2
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=complex)
        dim = self.ncut**self.n_modes
        if self.rho.shape != (dim, dim):
            raise ValueError(f"rho must be {dim}x{dim} for ncut={self.ncut}, n_modes={self.n_modes}")
        if self.check:
            self.validate()

    @classmethod
    def from_ket(cls, psi: np.ndarray, ncut: int, n_modes: int = 2) -> "DenseState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()), ncut, n_modes)

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.rho - self.rho.conj().T).max())

    def trace(self) -> float:
        return float(np.trace(self.rho).real)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())

    def purity(self) -> float:
        return float(np.real(np.vdot(self.rho.conj().T, self.rho)))

    def mode_populations(self) -> np.ndarray:
        """Number-state populations of each mode, shape (n_modes, ncut)."""
        diag = np.real(np.diag(self.rho)).reshape((self.ncut,) * self.n_modes)
        out = []
        for k in range(self.n_modes):
            axes = tuple(i for i in range(self.n_modes) if i != k)
            out.append(diag.sum(axis=axes))
        return np.array(out)

    def leakage(self) -> float:
        return float(self.mode_populations()[:, -2:].sum(axis=1).max())

    def validate(self) -> None:
        if self.hermiticity_defect() > HERMITIAN_TOL:
            raise CovarianceViolation(f"rho not Hermitian (defect {self.hermiticity_defect():.3g})")
        if abs(self.trace() - 1.0) > TRACE_TOL:
            raise CovarianceViolation(f"trace {self.trace():.15g} != 1")
        if self.leakage() >= LEAKAGE_TOL:
            raise LeakageError(f"top-two-level population {self.leakage():.3g} >= {LEAKAGE_TOL}")
        if self.min_eigenvalue() < -POSITIVITY_TOL:
            raise CovarianceViolation(f"rho has eigenvalue {self.min_eigenvalue():.3g}")


def coherent_ket(ncut: int, betas: Sequence[complex]) -> np.ndarray:
    """Product of truncated, renormalized coherent states."""
    n = np.arange(ncut)
    log_fact = np.cumsum(np.log(np.maximum(n, 1)))
    psi = np.ones(1, dtype=complex)
    for beta in betas:
        beta = complex(beta)
        if beta == 0:
            single = np.zeros(ncut, dtype=complex)
            single[0] = 1.0
        else:
            single = np.exp(n * np.log(beta) - 0.5 * log_fact - 0.5 * abs(beta) ** 2)
        single /= np.linalg.norm(single)
        psi = np.kron(psi, single)
    return psi


def coherent_amplitude(x0: float, p0: float, m: float, omega: float, units: UnitConstants = NATURAL) -> complex:
    return np.sqrt(m * omega / (2.0 * units.hbar)) * (x0 + 1j * p0 / (m * omega))


def dense_rhs(model: ModelSpec | CompiledModel, rho: DenseState | np.ndarray, ncut: int | None = None) -> np.ndarray:
    """Time derivative of rho under the model's master equation."""
    if isinstance(rho, DenseState):
        ncut = rho.ncut
        rho = rho.rho
    cm = model if isinstance(model, CompiledModel) else compile_model(model, ncut or DEFAULT_NCUT)
    return _apply(cm, np.asarray(rho, dtype=complex))


def dense_moments(rho: DenseState | np.ndarray, ops: Sequence[sp.csr_matrix]) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and symmetrized covariance ``<{dr_i, dr_j}>/2`` of rho."""
    r = rho.rho if isinstance(rho, DenseState) else rho
    dim = len(ops)
    mean = np.array([np.real(np.sum(op.T.multiply(r))) for op in ops])
    second = np.empty((dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            prod = ops[i] @ ops[j]
            # Re tr(r_i r_j rho) is the symmetrized moment for Hermitian r_i, r_j
            second[i, j] = second[j, i] = np.real(np.sum(prod.T.multiply(r)))
    cov = second - np.outer(mean, mean)
    return mean, 0.5 * (cov + cov.T)


def dense_energy(rho: DenseState | np.ndarray, cm: CompiledModel) -> float:
    mean, cov = dense_moments(rho, cm.ops)
    return 0.5 * float(np.sum(cm.ham * (cov + np.outer(mean, mean))))


def _rk4_step(cm, rho, h):
    k1 = _apply(cm, rho)
    k2 = _apply(cm, rho + 0.5 * h * k1)
    k3 = _apply(cm, rho + 0.5 * h * k2)
    k4 = _apply(cm, rho + h * k3)
    return rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def local_error_estimate(cm: CompiledModel, rho: np.ndarray, h: float) -> float:
    """Step-doubling estimate of the RK4 local error (max-norm)."""
    full = _rk4_step(cm, rho, h)
    half = _rk4_step(cm, _rk4_step(cm, rho, 0.5 * h), 0.5 * h)
    return float(np.abs(full - half).max()) / 15.0


def dense_integrate(
    model: ModelSpec | CompiledModel,
    rho0: DenseState,
    t_grid,
    dt: float = 5e-3,
    check: bool = True,
) -> list[DenseState]:
    """Fixed-step RK4 evolution, returning one validated state per grid time.

    The local error is estimated by step doubling at the start of every
    output interval; exceeding ``1e-8`` raises :class:`StepSizeError`.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    cm = model if isinstance(model, CompiledModel) else compile_model(model, rho0.ncut)
    if cm.dim != rho0.rho.shape[0]:
        raise ValueError("model and state cutoffs differ")
    rho = rho0.rho.copy()
    out = [DenseState(rho.copy(), rho0.ncut, rho0.n_modes, check=check)]
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        n = max(1, int(np.ceil((t1 - t0) / dt - 1e-9)))
        h = (t1 - t0) / n
        if check:
            err = local_error_estimate(cm, rho, h)
            if err > LOCAL_ERROR_TOL:
                raise StepSizeError(f"RK4 local error {err:.3g} > {LOCAL_ERROR_TOL} at t={t0:g}; reduce dt")
        for _ in range(n):
            rho = _rk4_step(cm, rho, h)
        drift = float(np.abs(rho - rho.conj().T).max())
        if check and drift > HERMITIAN_TOL:
            raise CovarianceViolation(f"non-Hermitian drift {drift:.3g} at t={t1:g}")
        rho = 0.5 * (rho + rho.conj().T)
        out.append(DenseState(rho.copy(), rho0.ncut, rho0.n_modes, check=check))
    return out
