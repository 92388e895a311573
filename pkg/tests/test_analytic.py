import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from pulsechi import analytic as an
from pulsechi.model import Equidistant, Linear, OscillatorParams, ProbeAmplitudes, PulseSequence, expand_family, total_time
from pulsechi.states import chi_coherent

P = OscillatorParams(gamma=1e-2)
taus_st = st.lists(st.floats(0.05, 2 * math.pi), min_size=1, max_size=8)
params_st = st.builds(OscillatorParams, gamma=st.floats(0, 0.5), nbar=st.floats(0, 2), g=st.floats(0, 0.3))


def test_frozen_scalars():
    # DERIVED: evaluated once from g / (2 nu~) etc., cross-checked with mpmath below
    assert abs(an.epsilon(P) - complex(0.037499062523437, 1.874953126171846e-4)) < 1e-15
    assert math.isclose(an.gamma_interference(P), 2.812429689257769e-5, rel_tol=1e-12)
    assert abs(an.skew_params(P).xi1 - (-7.499812504687383e-4j)) < 1e-16
    assert abs(an.epsilon(P) - complex(oracles.eps(1, 1e-2, 0.075))) < 1e-16


def test_appendix_relations():
    p = OscillatorParams(gamma=0.05, nbar=0.3, g=0.2)
    xi = an.skew_params(p)
    assert abs(xi.xi2 - xi.xi3 - 2 * an.epsilon(p).conjugate()) < 1e-15
    assert abs(an.gamma_interference(p) - 0.5j * p.g * xi.xi1) < 1e-15


def test_zeta_matches_mpmath():
    for taus in ([0.7, 1.9, 1.1], [math.pi] * 5, [0.3]):
        for gamma in (0.0, 1e-2, 0.3):
            p = OscillatorParams(gamma=gamma)
            ref = complex(oracles.zeta(taus, gamma=gamma))
            assert abs(an.zeta(p, PulseSequence(taus)) - ref) < 1e-14


def test_max_distance_anchor():
    # DERIVED: tau0 = pi, gamma = 0 gives 4 N g exactly
    p = OscillatorParams()
    for n in (1, 5, 20):
        assert abs(abs(an.zeta(p, expand_family(Equidistant(math.pi, n)))) - 4 * n * p.g) < 1e-12


def test_equidistant_closed_form_and_pole():
    for gamma in (0.0, 1e-4, 1e-2):
        p = OscillatorParams(gamma=gamma)
        for tau0 in (0.3, 1.0, 2.5, 4.0):
            for n in (1, 4, 13):
                gen = an.zeta(p, expand_family(Equidistant(tau0, n)))
                assert abs(an.zeta_equidistant_closed(p, tau0, n) - gen) < 1e-12
    with pytest.raises(an.PoleError):
        an.zeta_equidistant_closed(OscillatorParams(), math.pi, 3)
    # the dispatcher falls back to the general sum at the pole
    assert abs(an.zeta_equidistant(OscillatorParams(), math.pi, 3) - 0.9) < 1e-12


def test_batch_matches_scalar():
    rng = np.random.default_rng(5)
    taus = rng.uniform(0.1, 6, (20, 6))
    b = an.zeta_batch(P, taus)
    assert np.max(np.abs(b - [an.zeta(P, PulseSequence(t)) for t in taus])) < 1e-14
    mask = np.ones_like(taus, dtype=bool)
    mask[:, 4:] = False
    b = an.zeta_batch(P, taus, mask)
    assert np.max(np.abs(b - [an.zeta(P, PulseSequence(t[:4])) for t in taus])) < 1e-14


@given(params_st, taus_st)
def test_zeta_is_conjugate_of_reversed_upsilon(p, taus):
    seq = PulseSequence(taus)
    rev = PulseSequence(taus[::-1])
    assert abs(an.zeta(p, seq) - 2 * an.upsilon(p, rev).conjugate()) < 1e-12


@given(params_st, taus_st)
def test_phi_is_beta_n_at_zeta(p, taus):
    seq = PulseSequence(taus)
    z = an.zeta(p, seq)
    for n in range(1, len(seq) + 1):
        phi = an.phi_n(p, seq, n)
        assert abs(phi - an.beta_n(p, seq, z, n, +1)) < 1e-12 * max(1.0, abs(phi)) * math.exp(p.gamma * sum(taus))
    # the first displacement argument is beta - 0, the last phi is the single-term tail
    assert abs(an.beta_n(p, seq, 0.3j, 1, -1) - 0.3j) < 1e-15


def test_index_errors():
    seq = PulseSequence([1.0, 2.0])
    with pytest.raises(IndexError):
        an.phi_n(P, seq, 0)
    with pytest.raises(IndexError):
        an.beta_n(P, seq, 0j, 3, 1)
    with pytest.raises(ValueError):
        an.beta_n(P, seq, 0j, 1, 0)


@settings(max_examples=50)
@given(params_st, st.lists(st.floats(0.05, 6.0), min_size=1, max_size=6), st.integers(1, 5))
def test_log_scaling_batch_matches(p, taus, m):
    arr = np.array([taus] * m) * np.linspace(1, 0.5, m)[:, None]
    batch = an.log_scaling_batch(p, arr)
    ref = [an.log_scaling(p, PulseSequence(t)) for t in arr]
    assert np.max(np.abs(batch - ref)) < 1e-10 * max(1, np.max(np.abs(ref)))


def test_no_damping_scaling_is_probe_only():
    p = OscillatorParams(gamma=0.0, nbar=3.0)
    seq = PulseSequence([0.4, 2.0, 1.3])
    assert an.log_scaling(p, seq) == 0
    c_plus, c_minus = an.scaling_factor(p, ProbeAmplitudes(), seq)
    assert abs(c_plus - 1) < 1e-15 and abs(c_minus - 1) < 1e-15


def test_g_zero_is_exact():
    p = OscillatorParams(gamma=0.3, nbar=1.0, g=0.0)
    seq = PulseSequence([0.4, 2.0])
    assert an.zeta(p, seq) == 0
    assert an.log_scaling(p, seq) == 0


@given(params_st, taus_st, st.complex_numbers(max_magnitude=2), st.floats(0, 1e-2))
def test_forward_inverse_round_trip(p, taus, alpha, gamma_d):
    seq = PulseSequence(taus)
    probe = ProbeAmplitudes.normalized(1, cmath.exp(0.4j))
    chi = lambda b: chi_coherent(alpha, b)
    pauli = an.predict_pauli(p, probe, seq, chi, gamma_d)
    pred = an.invert_measurement(p, probe, seq, pauli, gamma_d)
    z = pred.zeta
    assert abs(pred.chi_plus - chi(z)) < 1e-9
    assert abs(pred.chi_minus - chi(-z)) < 1e-9
    assert pred.hermiticity_residual < 1e-9


def test_degenerate_probe():
    with pytest.raises(an.DegenerateProbeError):
        an.scaling_factor(P, ProbeAmplitudes(1.0, 0.0), PulseSequence([1.0]))


def test_invert_rejects_nonfinite():
    with pytest.raises(ValueError):
        an.invert_measurement(P, ProbeAmplitudes(), PulseSequence([1.0]), (float("nan"), 0j))


def test_dephasing_factor():
    assert math.isclose(an.dephasing_compensation(1e-3, 40.0), math.exp(0.04))
    seq = PulseSequence([1.0, 2.0])
    c0 = an.scaling_factor(P, ProbeAmplitudes(), seq)[0]
    c1 = an.scaling_factor(P, ProbeAmplitudes(), seq, gamma_d=1e-3)[0]
    assert abs(c1 / c0 - math.exp(1e-3 * total_time(seq))) < 1e-14


def test_damping_shrinks_reach():
    grid = np.linspace(0, 2 * math.pi, 801)[1:]
    for n in (1, 5, 20):
        taus = np.repeat(grid[:, None], n, axis=1)
        free = np.abs(an.zeta_batch(OscillatorParams(), taus)).max()
        damped = np.abs(an.zeta_batch(OscillatorParams(gamma=1e-2), taus)).max()
        assert damped < free
    lin = [Linear(t, 10) for t in grid]
    free = max(abs(an.zeta(OscillatorParams(), expand_family(f))) for f in lin)
    damped = max(abs(an.zeta(OscillatorParams(gamma=1e-2), expand_family(f))) for f in lin)
    assert damped < 0.5 * free
