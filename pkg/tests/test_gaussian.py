import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from gravchannel.errors import CovarianceViolation, NotDissipative, StepSizeError
from gravchannel.gaussian import (
    GaussianState,
    covariance_defect,
    energy,
    integrate_moments,
    is_hurwitz,
    moment_rhs,
    solve_lyapunov,
    steady_state,
    symplectic_eigenvalues,
    vacuum_state,
)
from gravchannel.generator import LindbladTerm, lindblad_to_generator, unit
from gravchannel.model import CaldeiraParams, KtmParams, build_generator
from gravchannel.units import UnitConstants


def _oscillator(m=1.0, w=1.0, lam=0.0, c=0.0):
    terms = [LindbladTerm.hamiltonian(np.diag([m * w * w, 1 / m]))]
    if lam:
        terms.append(LindbladTerm.anticommutator(lam, unit(2, 0), unit(2, 1)))
    if c:
        terms.append(LindbladTerm.double_commutator(c, unit(2, 0), unit(2, 0)))
    return lindblad_to_generator(terms)


def test_vacuum_is_pure_and_has_zero_point_energy():
    s = vacuum_state([2.0], [3.0], UnitConstants(hbar=0.5))
    assert symplectic_eigenvalues(s.cov) == pytest.approx([0.25])
    assert energy(s, np.diag([2.0 * 9.0, 0.5])) == pytest.approx(0.5 * 0.5 * 3.0)


def test_uncertainty_violation_raises():
    with pytest.raises(CovarianceViolation):
        GaussianState(np.zeros(2), np.diag([0.1, 0.1]))
    GaussianState(np.zeros(2), np.diag([0.1, 0.1]), check=False)
    assert covariance_defect(np.diag([0.1, 0.1]), 1.0) < 0


def test_shape_validation():
    with pytest.raises(ValueError):
        GaussianState(np.zeros(3), np.eye(3))


def test_unitary_evolution_matches_matrix_exponential():
    g = _oscillator(m=1.3, w=0.7)
    s0 = GaussianState(np.array([1.0, -0.4]), np.diag([0.8, 0.9]))
    t = np.linspace(0, 5, 6)
    states = integrate_moments(g, s0, t, rtol=1e-12, atol=1e-14)
    for ti, s in zip(t, states):
        F = expm(g.drift * ti)
        assert np.allclose(s.mean, F @ s0.mean, atol=1e-10)
        assert np.allclose(s.cov, F @ s0.cov @ F.T, atol=1e-10)
    E = [energy(s, g.ham) for s in states]
    assert np.ptp(E) < 1e-9


def test_rk4_and_rk45_agree():
    g = build_generator(KtmParams.from_coupling(0.2, minimized_gamma=True, alpha1=0.1, alpha2=0.1))
    s0 = vacuum_state([1, 1], [1, 1])
    t = np.linspace(0, 3, 4)
    a = integrate_moments(g, s0, t, rtol=1e-11, atol=1e-13)
    b = integrate_moments(g, s0, t, method="rk4_fixed", dt=1e-3)
    for x, y in zip(a, b):
        assert np.allclose(x.cov, y.cov, atol=1e-9)


def test_integrator_input_validation():
    g = _oscillator()
    with pytest.raises(ValueError):
        integrate_moments(g, vacuum_state([1], [1]), [0.0])
    with pytest.raises(ValueError):
        integrate_moments(g, vacuum_state([1], [1]), [0.0, 1.0], method="euler")
    with pytest.raises(ValueError):
        moment_rhs(g, vacuum_state([1, 1], [1, 1]))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_integrator_failure_is_reported():
    g = lindblad_to_generator([LindbladTerm.hamiltonian(np.diag([-1e6, 1.0]))])
    with pytest.raises(StepSizeError):
        integrate_moments(g, vacuum_state([1], [1]), [0.0, 1e3], rtol=1e-3)


def test_lyapunov_damped_oscillator_thermal_state():
    # hbar = 1: momentum variance c / 2 lam
    lam, c = 0.05, 2.0
    g = _oscillator(lam=lam, c=c)
    S = solve_lyapunov(g.drift, g.diffusion)
    assert np.allclose(g.drift @ S + S @ g.drift.T + g.diffusion, 0, atol=1e-12)
    assert S[1, 1] == pytest.approx(c / (2 * lam), rel=1e-12)


def test_steady_state_requires_hurwitz():
    assert not is_hurwitz(_oscillator().drift)
    with pytest.raises(NotDissipative):
        steady_state(_oscillator(c=0.1))


@settings(max_examples=30)
@given(lam=st.floats(0.01, 1.0), kT=st.floats(0.1, 20.0))
def test_steady_state_is_fixed_point_of_integrator(lam, kT):
    g = build_generator(CaldeiraParams(1, 1, 1, 1, lam, lam, T=kT))
    state, E = steady_state(g, hbar=1.0)
    dm, dS = moment_rhs(g, state)
    assert np.abs(dS).max() <= 1e-10 * max(1.0, np.abs(state.cov).max())
    assert E == pytest.approx(energy(state, g.ham))


@settings(max_examples=30)
@given(lam=st.floats(0.01, 0.5), kT=st.floats(0.05, 5.0), x0=st.floats(-2, 2))
def test_caldeira_stays_physical(lam, kT, x0):
    g = build_generator(CaldeiraParams(1, 1, 1, 1, lam, lam, T=kT))
    s0 = GaussianState(np.array([x0, 0, -x0, 0.5]), np.eye(4) * 0.5)
    for s in integrate_moments(g, s0, np.linspace(0, 5, 11)):
        assert symplectic_eigenvalues(s.cov).min() >= 0.5 - 1e-9
