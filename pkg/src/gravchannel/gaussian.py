"""First and second moment dynamics of Gaussian states under a quadratic generator."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.integrate import solve_ivp

from .errors import CovarianceViolation, NotDissipative, StepSizeError
from .generator import LindbladTerm, QuadraticGenerator, lindblad_to_generator, symplectic_form
from .units import NATURAL, UnitConstants

__all__ = [
    "GaussianState",
    "LindbladTerm",
    "energy",
    "integrate_moments",
    "lindblad_to_generator",
    "moment_rhs",
    "steady_state",
    "symplectic_eigenvalues",
    "vacuum_state",
]

VALIDITY_RTOL = 1e-9
HURWITZ_MARGIN = 1e-12


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Sorted symplectic eigenvalues (moduli of the eigenvalues of i Omega cov)."""
    n = cov.shape[0] // 2
    ev = np.abs(np.linalg.eigvals(1j * symplectic_form(n) @ cov))
    return np.sort(ev)[::2]


def covariance_defect(cov: np.ndarray, hbar: float) -> float:
    """Most negative eigenvalue of cov + (i hbar / 2) Omega (zero when valid)."""
    n = cov.shape[0] // 2
    M = cov + 0.5j * hbar * symplectic_form(n)
    return float(min(0.0, np.linalg.eigvalsh(0.5 * (M + M.conj().T)).min()))


@dataclass(frozen=True)
class GaussianState:
    """Mean vector and symmetric covariance ``cov_ij = <{dr_i, dr_j}>/2``."""

    mean: np.ndarray
    cov: np.ndarray
    hbar: float = 1.0
    check: bool = True

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (len(mean), len(mean)) or len(mean) % 2:
            raise ValueError("mean must have even length 2n and cov shape (2n, 2n)")
        cov = 0.5 * (cov + cov.T)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if self.check:
            self.validate()

    @property
    def n_modes(self) -> int:
        return len(self.mean) // 2

    def validate(self, rtol: float = VALIDITY_RTOL) -> None:
        defect = covariance_defect(self.cov, self.hbar)
        tol = rtol * max(np.linalg.norm(self.cov), self.hbar)
        if defect < -tol:
            raise CovarianceViolation(f"cov + i hbar Omega/2 has eigenvalue {defect:.3g} < -{tol:.3g}")

    def second_moments(self) -> np.ndarray:
        return self.cov + np.outer(self.mean, self.mean)


def vacuum_state(masses, omegas, units: UnitConstants = NATURAL) -> GaussianState:
    """Product of oscillator ground states, mean zero."""
    hbar = units.hbar
    diag = []
    for m, w in zip(masses, omegas):
        if not w > 0:
            raise ValueError("vacuum state needs a positive trap frequency")
        diag += [hbar / (2.0 * m * w), hbar * m * w / 2.0]
    return GaussianState(np.zeros(len(diag)), np.diag(diag), hbar)


def moment_rhs(gen: QuadraticGenerator, state: GaussianState) -> tuple[np.ndarray, np.ndarray]:
    A = gen.drift
    if state.mean.shape != (gen.dim,):
        raise ValueError("state and generator dimensions differ")
    dmean = A @ state.mean + gen.constant_drift
    AS = A @ state.cov
    return dmean, AS + AS.T + gen.diffusion


def energy(state: GaussianState, Hm: np.ndarray) -> float:
    """<H> for H = 1/2 r^T Hm r."""
    Hm = np.asarray(Hm)
    if Hm.shape != state.cov.shape:
        raise ValueError("Hm and state dimensions differ")
    return 0.5 * float(np.sum(Hm * state.cov)) + 0.5 * float(state.mean @ Hm @ state.mean)


def _pack(mean, cov):
    return np.concatenate([mean, cov.ravel()])


def _unpack(y, dim):
    return y[:dim], y[dim:].reshape(dim, dim)


def _rk4(f, y0, t_grid, dt):
    out = [y0]
    y = y0.copy()
    t = t_grid[0]
    for t_next in t_grid[1:]:
        n = max(1, int(np.ceil((t_next - t) / dt - 1e-9)))
        h = (t_next - t) / n
        for _ in range(n):
            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        t = t_next
        out.append(y.copy())
    return np.array(out)


def integrate_moments(
    gen: QuadraticGenerator,
    state0: GaussianState,
    t_grid,
    method: Literal["rk45_adaptive", "rk4_fixed"] = "rk45_adaptive",
    rtol: float = 1e-9,
    atol: float = 1e-12,
    dt: float | None = None,
    check: bool = True,
) -> list[GaussianState]:
    """Integrate mean and covariance on ``t_grid``; one state per grid point."""
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with at least two points")
    dim = gen.dim
    A, D, b = gen.drift, gen.diffusion, gen.constant_drift

    def f(_t, y):
        mean, cov = _unpack(y, dim)
        AS = A @ cov
        return _pack(A @ mean + b, AS + AS.T + D)

    y0 = _pack(state0.mean, state0.cov)
    if method == "rk45_adaptive":
        sol = solve_ivp(f, (t_grid[0], t_grid[-1]), y0, method="RK45", t_eval=t_grid, rtol=rtol, atol=atol)
        if not sol.success:
            raise StepSizeError(sol.message)
        ys = sol.y.T
    elif method == "rk4_fixed":
        if dt is None:
            dt = float(np.min(np.diff(t_grid)))
        ys = _rk4(f, y0, t_grid, dt)
    else:
        raise ValueError(f"unknown method {method!r}")

    states = []
    for y in ys:
        mean, cov = _unpack(y, dim)
        states.append(GaussianState(mean, cov, state0.hbar, check=check))
    return states


def is_hurwitz(A: np.ndarray, margin: float = HURWITZ_MARGIN) -> bool:
    return bool(np.max(np.linalg.eigvals(A).real) < -margin)


def solve_lyapunov(A: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Solve A S + S A^T + D = 0 by Kronecker linearization."""
    n = A.shape[0]
    eye = np.eye(n)
    L = np.kron(A, eye) + np.kron(eye, A)
    S = np.linalg.solve(L, -D.reshape(-1)).reshape(n, n)
    return 0.5 * (S + S.T)


def steady_state(gen: QuadraticGenerator, hbar: float | None = None) -> tuple[GaussianState, float]:
    """Unique Gaussian fixed point of a Hurwitz generator and its energy."""
    A, D = gen.drift, gen.diffusion
    if not is_hurwitz(A):
        worst = np.max(np.linalg.eigvals(A).real)
        raise NotDissipative(f"drift is not Hurwitz (max Re eigenvalue {worst:.3g}); no steady state")
    S = solve_lyapunov(A, D)
    residual = np.linalg.norm(A @ S + S @ A.T + D)
    bound = 1e-10 * (np.linalg.norm(A) * np.linalg.norm(S) + np.linalg.norm(D))
    if residual > bound:
        raise NotDissipative(f"Lyapunov residual {residual:.3g} exceeds {bound:.3g}")
    mean = -np.linalg.solve(A, gen.constant_drift)
    state = GaussianState(mean, S, hbar if hbar is not None else 1.0, check=hbar is not None)
    return state, energy(state, gen.ham)
