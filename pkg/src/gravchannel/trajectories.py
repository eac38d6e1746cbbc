"""Measurement + feedback unraveling of the (dissipative) KTM master equation.

Each trajectory obeys the Ito equation

    d|psi> = f(psi) dt + sum_k b_k(psi) dW_k

assembled from three parts: continuous measurement of ``A_k = x_k + i alpha_k p_k / hbar``
at rate ``gamma_k``, unitary feedback ``chi_k r_k B_j`` with ``B_j = x_j`` driven by the
record ``r_k`` of the other particle, and the Ito correction coupling the two. The scheme is
Euler-Maruyama followed by explicit renormalization.

Trajectories are advanced in fixed-size chunks as columns of a matrix. Each trajectory owns a
Philox stream keyed by ``(master_seed, index)``, so results do not depend on how chunks are
scheduled over threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NormCollapse
from .hilbert import (
    DEFAULT_NCUT,
    _quadratic_op,
    ktm_channel_operators,
    ktm_free_hamiltonian,
    mode_operators,
)
from .model import KtmParams, delta_h0, ktm_hamiltonian

__all__ = [
    "EnsembleStats",
    "MeasurementRecordSample",
    "SseModel",
    "Trajectory",
    "compile_sse",
    "ensemble_run",
    "measurement_record",
    "sse_coefficients",
    "sse_step",
    "trajectory_rng",
]

CHUNK_SIZE = 250
NORM_FLOOR = 0.5


@dataclass
class Trajectory:
    psi: np.ndarray
    rng_stream: int
    t: float = 0.0

    def __post_init__(self):
        self.psi = np.asarray(self.psi, dtype=complex)
        norm = np.linalg.norm(self.psi)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"trajectory state must be normalized, |psi| = {norm:.15g}")


@dataclass(frozen=True)
class MeasurementRecordSample:
    """Records ``r_k`` of one step: ``1/2 <A_k + A_k^dag> + hbar dW_k / (sqrt(gamma_k) dt)``."""

    t: float
    r: tuple[float, ...]


@dataclass
class SseModel:
    """Sparse operators needed to evaluate the stochastic equation."""

    params: KtmParams
    ncut: int
    H: sp.csr_matrix
    A: list[sp.csr_matrix]
    AdA: list[sp.csr_matrix]
    B: list[sp.csr_matrix]
    gammas: tuple[float, float]
    chis: tuple[float, float]
    ops: list[sp.csr_matrix]
    ham: np.ndarray = field(repr=False)

    @property
    def hbar(self) -> float:
        return self.params.units.hbar

    @property
    def dim(self) -> int:
        return self.ncut**2


def compile_sse(params: KtmParams, ncut: int = DEFAULT_NCUT) -> SseModel:
    if not isinstance(params, KtmParams):
        raise TypeError("the unraveling is defined for the KTM family only")
    ops = mode_operators(params, ncut)
    A, B, gammas, chis = ktm_channel_operators(params, ops)
    AdA = [(a.conj().T @ a).tocsr() for a in A]
    H = _quadratic_op(ktm_free_hamiltonian(params), ops)
    ham = ktm_hamiltonian(params)
    if params.is_dissipative and params.include_delta_h0:
        ham = ham + delta_h0(params)
    return SseModel(params, ncut, H, A, AdA, B, gammas, chis, ops, ham)


def _expect(psi: np.ndarray, Opsi: np.ndarray) -> np.ndarray:
    return np.sum(psi.conj() * Opsi, axis=0)


def sse_coefficients(psi: np.ndarray, model: SseModel) -> tuple[np.ndarray, list[np.ndarray]]:
    """Drift ``f`` and noise vectors ``b_k`` of the Ito equation at ``psi``.

    ``psi`` may be a single ket of shape ``(dim,)`` or a batch ``(dim, n)``.
    """
    hbar = model.hbar
    f = (-1j / hbar) * (model.H @ psi)
    noise = []
    for k in range(2):
        j = 1 - k
        g, chi = model.gammas[k], model.chis[k]
        Apsi = model.A[k] @ psi
        eA = _expect(psi, Apsi)
        b = np.zeros_like(psi)
        if g > 0.0:
            # measurement of A_k
            f -= (g / (8.0 * hbar**2)) * (model.AdA[k] @ psi + (eA.conj() * eA) * psi - 2.0 * eA.conj() * Apsi)
            b = b + (np.sqrt(g) / (2.0 * hbar)) * (Apsi - eA * psi)
        if chi != 0.0:
            Bpsi = model.B[j] @ psi
            # feedback chi_k r_k B_j, with the Ito cross term
            f -= (1j * chi / (2.0 * hbar)) * (2.0 * eA.real) * Bpsi
            f -= (chi**2 / (2.0 * g)) * (model.B[j] @ Bpsi)
            f -= (1j * chi / (2.0 * hbar)) * (model.B[j] @ Apsi - eA * Bpsi)
            b = b - (1j * chi / np.sqrt(g)) * Bpsi
        noise.append(b)
    return f, noise


def _em_step(psi, model, dt, dW):
    f, bs = sse_coefficients(psi, model)
    new = psi + dt * f
    for k, b in enumerate(bs):
        new = new + b * dW[k]
    norm = np.sqrt(np.sum(np.abs(new) ** 2, axis=0))
    if np.any(norm < NORM_FLOOR) or not np.all(np.isfinite(norm)):
        raise NormCollapse(f"norm fell to {norm.min():.3g} before renormalization; reduce dt")
    return new / norm


def sse_step(traj: Trajectory, model: SseModel, dt: float, noise) -> Trajectory:
    """One Euler-Maruyama step; ``noise`` holds standard normal draws, ``dW_k = sqrt(dt) noise_k``."""
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (2,):
        raise ValueError("noise must hold one draw per particle")
    psi = _em_step(traj.psi, model, dt, np.sqrt(dt) * noise)
    return Trajectory(psi, traj.rng_stream, traj.t + dt)


def measurement_record(traj: Trajectory, model: SseModel, dt: float, noise) -> MeasurementRecordSample:
    """Record sample for the step that ``sse_step`` would take with the same draws."""
    noise = np.asarray(noise, dtype=float)
    r = []
    for k in range(2):
        g = model.gammas[k]
        centre = float(np.real(np.vdot(traj.psi, model.B[k] @ traj.psi)))
        if g == 0.0:
            r.append(float("nan"))
            continue
        # 1/2 <A + A^dag> = <x> since the p part of A is anti-Hermitian
        r.append(centre + model.hbar * np.sqrt(dt) * noise[k] / (np.sqrt(g) * dt))
    return MeasurementRecordSample(traj.t, tuple(r))


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Counter-based stream for one trajectory, independent of all others."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=(index,))))


def _observables(psi, model):
    ops = model.ops
    rpsi = [op @ psi for op in ops]
    n = len(ops)
    mean = np.stack([_expect(psi, r).real for r in rpsi], axis=-1)
    second = np.empty(mean.shape + (n,))
    for i in range(n):
        for j in range(i, n):
            # Re <r_i r_j> is the symmetrized moment
            v = np.real(np.sum(rpsi[i].conj() * rpsi[j], axis=0))
            second[..., i, j] = v
            second[..., j, i] = v
    energy = 0.5 * np.einsum("ij,...ij->...", model.ham, second)
    return mean, second, energy


def _pairwise_mean(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and standard error over axis 0, summed pairwise along a contiguous axis."""
    n = a.shape[0]
    b = np.ascontiguousarray(np.moveaxis(a, 0, -1))
    mean = b.sum(axis=-1) / n
    var = ((b - mean[..., None]) ** 2).sum(axis=-1) / max(n - 1, 1)
    return mean, np.sqrt(var / n)


@dataclass
class EnsembleStats:
    """Per-time ensemble statistics of trajectory expectations.

    ``mean``/``second`` hold E[<r_i>] and E[Re <r_i r_j>]; each has a matching
    standard error. Per-trajectory values are kept for further analysis.
    """

    t: np.ndarray
    n_traj: int
    master_seed: int
    traj_mean: np.ndarray = field(repr=False)
    traj_second: np.ndarray = field(repr=False)
    traj_energy: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.mean, self.mean_se = _pairwise_mean(self.traj_mean)
        self.second, self.second_se = _pairwise_mean(self.traj_second)
        self.energy, self.energy_se = _pairwise_mean(self.traj_energy)

    @property
    def cov(self) -> np.ndarray:
        """Covariance of the ensemble state (not of the trajectory spread)."""
        return self.second - np.einsum("ti,tj->tij", self.mean, self.mean)


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("GRAVCHANNEL_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


def _steps_between(t_grid, dt):
    steps = []
    for t0, t1 in zip(t_grid[:-1], t_grid[1:]):
        n = int(round((t1 - t0) / dt))
        if n < 1 or abs(n * dt - (t1 - t0)) > 1e-9 * max(1.0, abs(t1)):
            raise ValueError(f"output interval {t1 - t0:g} is not a multiple of dt={dt:g}")
        steps.append(n)
    return steps


def _run_chunk(model, psi0, indices, steps, dt, master_seed, substeps, zero_noise):
    total = sum(steps)
    if zero_noise:
        draws = np.zeros((total, 2, len(indices)))
    else:
        fine = np.stack(
            [trajectory_rng(master_seed, i).standard_normal((total * substeps, 2)) for i in indices], axis=-1
        )
        # coarse increments are sums of the fine Brownian increments
        draws = fine.reshape(total, substeps, 2, len(indices)).sum(axis=1) / np.sqrt(substeps)
    psi = np.repeat(psi0[:, None], len(indices), axis=1)
    out = [_observables(psi, model)]
    sq = np.sqrt(dt)
    s = 0
    for n in steps:
        for _ in range(n):
            psi = _em_step(psi, model, dt, sq * draws[s])
            s += 1
        out.append(_observables(psi, model))
    mean = np.stack([o[0] for o in out], axis=1)
    second = np.stack([o[1] for o in out], axis=1)
    energy = np.stack([o[2] for o in out], axis=1)
    return mean, second, energy


def ensemble_run(
    model: KtmParams | SseModel,
    psi0: np.ndarray,
    n_traj: int,
    t_grid,
    master_seed: int,
    dt: float = 1e-3,
    workers: int | None = None,
    noise_substeps: int = 1,
    zero_noise: bool = False,
    ncut: int = DEFAULT_NCUT,
    min_traj: int = 100,
) -> EnsembleStats:
    """Run ``n_traj`` trajectories from ``psi0`` and collect moment statistics on ``t_grid``.

    ``noise_substeps`` generates each trajectory's Brownian path on a grid
    ``noise_substeps`` times finer than ``dt`` and sums it, so runs at
    different ``dt`` can share the same paths. ``zero_noise`` sets every
    draw to zero. Any failing trajectory aborts the whole run.
    """
    if n_traj < min_traj:
        raise ValueError(f"n_traj must be >= {min_traj}")
    sse = model if isinstance(model, SseModel) else compile_sse(model, ncut)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (sse.dim,):
        raise ValueError(f"psi0 must have length {sse.dim}")
    psi0 = psi0 / np.linalg.norm(psi0)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing with at least two points")
    steps = _steps_between(t_grid, dt)
    chunks = [range(a, min(a + CHUNK_SIZE, n_traj)) for a in range(0, n_traj, CHUNK_SIZE)]

    def job(idx):
        return _run_chunk(sse, psi0, idx, steps, dt, master_seed, noise_substeps, zero_noise)

    n_workers = min(worker_count(workers), len(chunks))
    if n_workers == 1:
        results = [job(c) for c in chunks]
    else:
        with ThreadPoolExecutor(n_workers) as pool:
            results = list(pool.map(job, chunks))
    # results are indexed by chunk, so concatenation order is fixed
    return EnsembleStats(
        t=t_grid,
        n_traj=n_traj,
        master_seed=master_seed,
        traj_mean=np.concatenate([r[0] for r in results], axis=0),
        traj_second=np.concatenate([r[1] for r in results], axis=0),
        traj_energy=np.concatenate([r[2] for r in results], axis=0),
    )
