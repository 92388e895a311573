import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pulsechi.model import (
    Equidistant,
    Linear,
    OscillatorParams,
    ProbeAmplitudes,
    PulseSequence,
    Random,
    expand_family,
    family_from_dict,
    family_to_dict,
    nbar_from_ratio,
    random_taus,
    total_time,
)


def test_defaults_and_nu_tilde():
    p = OscillatorParams(gamma=0.02)
    assert p.g == 0.075
    assert p.nu_tilde == complex(1.0, -0.01)


@pytest.mark.parametrize("kw", [dict(nu=0), dict(gamma=-1e-3), dict(nbar=-1), dict(g=float("nan")), dict(gamma=float("inf"))])
def test_params_reject_invalid(kw):
    with pytest.raises(ValueError):
        OscillatorParams(**kw)


def test_replace_keeps_other_fields():
    p = OscillatorParams(gamma=0.1, nbar=0.5).replace(gamma=0.2)
    assert (p.gamma, p.nbar, p.g) == (0.2, 0.5, 0.075)


def test_probe_normalization():
    with pytest.raises(ValueError):
        ProbeAmplitudes(1.0, 1.0)
    pr = ProbeAmplitudes.normalized(1, 1j)
    assert abs(pr.coherence - (-0.5j)) < 1e-15
    with pytest.raises(ValueError):
        ProbeAmplitudes.normalized(0, 0)


def test_sequence_validation():
    with pytest.raises(ValueError):
        PulseSequence([])
    with pytest.raises(ValueError):
        PulseSequence([1.0, 0.0])
    with pytest.raises(ValueError):
        PulseSequence([1.0, -2.0])
    seq = PulseSequence([0.5, 1.5])
    assert len(seq) == seq.n_segments == 2
    assert total_time(seq) == 4.0


def test_family_expansion():
    assert expand_family(Equidistant(math.pi, 3)).taus == (math.pi,) * 3
    lin = expand_family(Linear(0.1, 3))
    assert np.allclose(lin.taus, [0.1, 0.2, 0.3, 0.2, 0.1])
    # total length 2 N^2 tau0
    assert math.isclose(total_time(lin), 2 * 9 * 0.1)
    with pytest.raises(ValueError):
        expand_family(Equidistant(0.0, 2))
    with pytest.raises(ValueError):
        expand_family(Linear(1.0, 0))


def test_random_family_reproducible_and_bounded():
    a = expand_family(Random(50, seed=3))
    b = expand_family(Random(50, seed=3))
    c = expand_family(Random(50, seed=4))
    assert a == b and a != c
    assert all(0 < t <= 2 * math.pi for t in a.taus)


def test_nbar_from_ratio():
    assert nbar_from_ratio(float("inf")) == 0.0
    assert math.isclose(nbar_from_ratio(math.log(2)), 1.0)
    # high-temperature limit kT / hbar nu
    assert math.isclose(nbar_from_ratio(1e-6), 1e6 - 0.5, rel_tol=1e-9)
    with pytest.raises(ValueError):
        nbar_from_ratio(0.0)


@given(st.sampled_from(["equidistant", "linear", "random"]), st.integers(1, 30), st.floats(0.01, 7.0), st.integers(0, 2**32))
def test_family_dict_round_trip(kind, n, tau0, seed):
    fam = {"equidistant": Equidistant(tau0, n), "linear": Linear(tau0, n), "random": Random(n, seed)}[kind]
    back = family_from_dict(family_to_dict(fam))
    assert back == fam
    assert expand_family(back) == expand_family(fam)


@given(st.integers(1, 40), st.integers(0, 2**63))
def test_random_taus_positive(n, seed):
    t = random_taus(n, seed)
    assert t.shape == (n,) and np.all(t > 0) and np.all(t <= 2 * math.pi)
