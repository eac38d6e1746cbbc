import math

import pytest
from _reference import ktm_asymptote_explicit, ktm_asymptote_general, ktm_asymptote_K
from hypothesis import given
from hypothesis import strategies as st

from gravchannel import analytics
from gravchannel.errors import NotDissipative
from gravchannel.gaussian import steady_state
from gravchannel.model import CaldeiraParams, KtmParams, TdLinearParams, build_generator
from gravchannel.units import UnitConstants

pos = st.floats(0.3, 3.0)


def test_ktm_growth_rate_example():
    p = KtmParams.from_coupling(0.5, m=1.0, omega=1.0, minimized_gamma=True)
    assert analytics.ktm_growth_rate(p) == pytest.approx(0.5)
    assert analytics.ktm_growth_rate(p, UnitConstants(hbar=2.0)) == pytest.approx(1.0)


def test_growth_rate_needs_equal_masses():
    with pytest.raises(ValueError):
        analytics.ktm_growth_rate(KtmParams(1.0, 2.0, 1.0, 1.0, 2.0))


def test_td_growth_rate_sums_masses():
    r = analytics.td_growth_rate([1.0, 2.0], 1.0)
    assert r == pytest.approx(3 / (4 * math.sqrt(math.pi)))
    with pytest.raises(ValueError):
        analytics.td_growth_rate([1.0], 0.0)


def test_asymptote_example_value_and_marginal_relative_mode():
    p = KtmParams.from_coupling(0.5, m=1.0, omega=1.0, minimized_gamma=True, alpha1=0.1, alpha2=0.1)
    assert analytics.ktm_asymptotic_energy(p) == pytest.approx(10.0250625, rel=1e-14)
    # relative-mode frequency^2 = omega^2 - 2K/m = 0: no Gaussian steady state
    with pytest.raises(NotDissipative):
        steady_state(build_generator(p))


def test_alpha_zero_has_no_asymptote():
    p = KtmParams.from_coupling(0.2, minimized_gamma=True)
    with pytest.raises(NotDissipative):
        analytics.ktm_asymptotic_energy(p)
    with pytest.raises(NotDissipative):
        analytics.td_asymptotic_energy(TdLinearParams.pair(1.0, 3.0, 0.0, 1.0, 1.0))


def test_identical_particles_required():
    p = KtmParams(1.0, 1.0, 1.0, 1.0, 3.0, minimized_gamma=True, alpha1=0.1, alpha2=0.2)
    with pytest.raises(ValueError):
        analytics.ktm_asymptotic_energy(p)


@pytest.mark.filterwarnings("ignore::gravchannel.model.InvertedTrapWarning")
@given(m=pos, w=pos, a=st.floats(0.01, 0.5), d=st.floats(1.0, 10.0), hbar=pos, G=pos)
def test_coupling_and_explicit_forms_agree(m, w, a, d, hbar, G):
    u = UnitConstants(hbar=hbar, G=G)
    p = KtmParams(m, m, w, w, d, minimized_gamma=True, alpha1=a, alpha2=a, units=u)
    K = 2 * G * m * m / d**3
    via_K = analytics.ktm_asymptotic_energy(p)
    assert via_K == pytest.approx(ktm_asymptote_K(hbar, m, w, a, K), rel=1e-12)
    assert via_K == pytest.approx(analytics.ktm_asymptote_explicit(m, w, a, d, u), rel=1e-12)
    assert via_K == pytest.approx(ktm_asymptote_explicit(hbar, G, m, w, a, d), rel=1e-12)


@pytest.mark.filterwarnings("ignore::gravchannel.model.InvertedTrapWarning")
@given(m=pos, w=pos, a=st.floats(0.01, 0.5), K=st.floats(0.01, 0.5), g=st.floats(0.05, 5.0))
def test_general_form_matches_reference(m, w, a, K, g):
    p = KtmParams.from_coupling(K, m=m, omega=w, gamma1=g, gamma2=g, alpha1=a, alpha2=a)
    assert analytics.ktm_asymptotic_energy(p) == pytest.approx(ktm_asymptote_general(1.0, m, w, a, K, g), rel=1e-12)


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_small_alpha_limit_is_universal(m):
    # alpha = alpha0 m0 / m makes the leading term mass independent
    alpha0, m0 = 1e-3, 1.0
    alpha = alpha0 * m0 / m
    p = KtmParams.from_coupling(0.3 * m, m=m, minimized_gamma=True, alpha1=alpha, alpha2=alpha)
    E_lim = analytics.ktm_asymptotic_energy(p, limit="small_alpha")
    assert E_lim == pytest.approx(1 / (m0 * alpha0), rel=1e-14)
    assert abs(analytics.ktm_asymptotic_energy(p) / E_lim - 1) < 2 * alpha0


def test_effective_temperature_modes():
    assert analytics.effective_temperature("minimized", 1.0, 0.1) == pytest.approx(5.0)
    assert analytics.effective_temperature("general", 1.0, 0.1, math.inf) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        analytics.effective_temperature("general", 1.0, 0.1)
    with pytest.raises(ValueError):
        analytics.effective_temperature("other", 1.0, 0.1)
    with pytest.raises(ValueError):
        analytics.effective_temperature("minimized", 0.0, 0.1)


@given(m0=pos, hbar=pos, G=pos)
def test_effective_temperature_terms_equal_at_crossover(m0, hbar, G):
    u = UnitConstants(hbar=hbar, G=G)
    alpha0 = 0.01
    gamma0 = 4 * hbar * G * m0**2
    measurement = analytics.effective_temperature("general", m0, alpha0, math.inf, u)
    assert analytics.effective_temperature("general", m0, alpha0, gamma0, u) == pytest.approx(2 * measurement, rel=1e-12)


def test_effective_temperature_printed_crossover_differs():
    # the crossover quoted as sqrt(8) hbar G m0^2 does not balance the two terms
    measurement = analytics.effective_temperature("general", 1.0, 0.01, math.inf)
    at_printed = analytics.effective_temperature("general", 1.0, 0.01, math.sqrt(8))
    assert at_printed != pytest.approx(2 * measurement, rel=1e-3)


def test_td_asymptote_positive_and_far_field():
    p = TdLinearParams.pair(1.0, 20.0, 0.1, 1.0, 1.0)
    td = analytics.td_asymptotic_energy(p)
    ktm = analytics.ktm_asymptote_explicit(1.0, 1.0, 0.1, 20.0)
    assert abs(td - ktm) / ktm < 1e-3
    with pytest.raises(ValueError):
        analytics.td_asymptotic_energy(TdLinearParams((1.0, 2.0), (0.0, 3.0), (0.1, 0.1), 1.0, 1.0))


def test_caldeira_asymptote():
    assert analytics.caldeira_asymptote(3.0, UnitConstants(kB=2.0)) == 12.0
    p = CaldeiraParams(1, 1, 1, 1, 0.02, 0.02, T=100.0, high_T=True)
    _, E = steady_state(build_generator(p))
    assert E / analytics.caldeira_asymptote(100.0) == pytest.approx(1.0, abs=0.01)
