"""Quadratic open-dynamics generators and the Lindblad-term converter.

Phase-space vectors are ordered ``r = (x1, p1, x2, p2, ...)`` with
``[r_i, r_j] = i hbar Omega_ij`` and ``Omega = diag([[0, 1], [-1, 0]], ...)``.
A generator describes

    d mean / dt = A mean + b
    d cov / dt  = A cov + cov A^T + D

together with the Hamiltonian quadratic form ``H = 1/2 r^T Hm r``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .units import NATURAL, UnitConstants


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal symplectic form for ``n_modes`` in (x, p) ordering."""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def x_index(k: int) -> int:
    return 2 * k


def p_index(k: int) -> int:
    return 2 * k + 1


def unit(dim: int, i: int) -> np.ndarray:
    e = np.zeros(dim)
    e[i] = 1.0
    return e


@dataclass(frozen=True)
class QuadraticGenerator:
    n_modes: int
    drift: np.ndarray
    diffusion: np.ndarray
    constant_drift: np.ndarray
    ham: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        dim = 2 * self.n_modes
        for name in ("drift", "diffusion", "ham"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (dim, dim):
                raise ValueError(f"{name} has shape {m.shape}, expected {(dim, dim)}")
            if not np.all(np.isfinite(m)):
                raise ValueError(f"{name} has non-finite entries")
            object.__setattr__(self, name, m)
        b = np.asarray(self.constant_drift, dtype=float)
        if b.shape != (dim,) or not np.all(np.isfinite(b)):
            raise ValueError("constant_drift must be a finite vector of length 2n")
        object.__setattr__(self, "constant_drift", b)
        if not np.array_equal(self.diffusion, self.diffusion.T):
            raise ValueError("diffusion matrix must be exactly symmetric")
        if not np.array_equal(self.ham, self.ham.T):
            raise ValueError("Hamiltonian form must be exactly symmetric")

    @property
    def dim(self) -> int:
        return 2 * self.n_modes

    def transformed(self, T: np.ndarray, provenance: str | None = None) -> "QuadraticGenerator":
        """Apply the linear change of variables ``r' = T r``."""
        T = np.asarray(T, dtype=float)
        Tinv = np.linalg.inv(T)
        D = T @ self.diffusion @ T.T
        H = Tinv.T @ self.ham @ Tinv
        return QuadraticGenerator(
            n_modes=self.n_modes,
            drift=T @ self.drift @ Tinv,
            diffusion=0.5 * (D + D.T),
            constant_drift=T @ self.constant_drift,
            ham=0.5 * (H + H.T),
            provenance=provenance if provenance is not None else self.provenance,
        )

    def permuted(self, perm: Sequence[int]) -> "QuadraticGenerator":
        """Reorder phase-space coordinates; ``perm[i]`` is the old index of new slot i.

        Uses pure indexing so that the result is bit-exact.
        """
        idx = np.asarray(perm)
        return QuadraticGenerator(
            n_modes=self.n_modes,
            drift=self.drift[np.ix_(idx, idx)],
            diffusion=self.diffusion[np.ix_(idx, idx)],
            constant_drift=self.constant_drift[idx],
            ham=self.ham[np.ix_(idx, idx)],
            provenance=self.provenance,
        )

    def block(self, modes: Sequence[int], provenance: str = "") -> "QuadraticGenerator":
        idx = np.array([i for k in modes for i in (x_index(k), p_index(k))])
        return QuadraticGenerator(
            n_modes=len(modes),
            drift=self.drift[np.ix_(idx, idx)],
            diffusion=self.diffusion[np.ix_(idx, idx)],
            constant_drift=self.constant_drift[idx],
            ham=self.ham[np.ix_(idx, idx)],
            provenance=provenance or self.provenance,
        )


TermKind = Literal["hamiltonian", "double_commutator", "anticommutator"]


@dataclass(frozen=True)
class LindbladTerm:
    """One quadratic structure of a master equation.

    * ``hamiltonian``:        -(i/hbar) [1/2 r^T Hm r, rho]
    * ``double_commutator``:  -c [u.r, [v.r, rho]]
    * ``anticommutator``:     -i lam [u.r, {v.r, rho}]

    ``coeff`` holds c or lam. The operators ``u.r`` are linear in the
    canonical coordinates.
    """

    kind: TermKind
    coeff: float = 0.0
    u: np.ndarray | None = None
    v: np.ndarray | None = None
    hm: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def hamiltonian(cls, hm) -> "LindbladTerm":
        hm = np.asarray(hm, dtype=float)
        return cls("hamiltonian", hm=0.5 * (hm + hm.T))

    @classmethod
    def double_commutator(cls, c, u, v) -> "LindbladTerm":
        return cls("double_commutator", float(c), np.asarray(u, float), np.asarray(v, float))

    @classmethod
    def anticommutator(cls, lam, u, v) -> "LindbladTerm":
        return cls("anticommutator", float(lam), np.asarray(u, float), np.asarray(v, float))

    @property
    def dim(self) -> int:
        return len(self.hm) if self.kind == "hamiltonian" else len(self.u)


def lindblad_to_generator(
    terms: Sequence[LindbladTerm],
    units: UnitConstants = NATURAL,
    n_modes: int | None = None,
    provenance: str = "",
) -> QuadraticGenerator:
    """Convert quadratic master-equation terms into drift/diffusion form.

    The conversion follows from the canonical commutators alone:

    * Hamiltonian ``Hm``:               A += Omega Hm
    * ``-c [U, [V, rho]]``:             D += c hbar^2 (u' v'^T + v' u'^T)
    * ``-i lam [U, {V, rho}]``:         A += 2 lam hbar u' v^T

    with ``u' = Omega u`` and ``v' = Omega v``.
    """
    dims = {t.dim for t in terms}
    if n_modes is None:
        if not dims:
            raise ValueError("n_modes is required for an empty term list")
        if len(dims) > 1:
            raise ValueError(f"inconsistent term dimensions {sorted(dims)}")
        n_modes = dims.pop() // 2
    elif dims - {2 * n_modes}:
        raise ValueError(f"term dimensions {sorted(dims)} do not match n_modes={n_modes}")

    dim = 2 * n_modes
    hbar = units.hbar
    Om = symplectic_form(n_modes)
    A = np.zeros((dim, dim))
    D = np.zeros((dim, dim))
    H = np.zeros((dim, dim))
    for t in terms:
        if t.kind == "hamiltonian":
            H += t.hm
            A += Om @ t.hm
        elif t.kind == "double_commutator":
            ub, vb = Om @ t.u, Om @ t.v
            D += t.coeff * hbar**2 * (np.outer(ub, vb) + np.outer(vb, ub))
        elif t.kind == "anticommutator":
            A += 2.0 * t.coeff * hbar * np.outer(Om @ t.u, t.v)
        else:
            raise ValueError(f"unknown term kind {t.kind!r}")
    return QuadraticGenerator(
        n_modes=n_modes,
        drift=A,
        diffusion=0.5 * (D + D.T),
        constant_drift=np.zeros(dim),
        ham=0.5 * (H + H.T),
        provenance=provenance,
    )
