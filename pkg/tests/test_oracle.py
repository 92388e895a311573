import math

import numpy as np
import pytest

from pulsechi import analytic as an
from pulsechi import oracle as o
from pulsechi.model import Equidistant, OscillatorParams, ProbeAmplitudes, PulseSequence, expand_family
from pulsechi.states import Cat, Coherent, FockPair, density_matrix

P = OscillatorParams(gamma=0.05, nbar=0.3, g=0.2)


def test_ladder_operators():
    sp = o.FockSpace(8)
    comm = sp.a @ sp.adag - sp.adag @ sp.a
    assert np.allclose(np.diag(comm)[:-1], 1)
    assert np.allclose(sp.num, sp.adag @ sp.a)
    assert np.allclose(sp.x, sp.x.conj().T)
    with pytest.raises(ValueError):
        o.FockSpace(1)


def test_liouvillian_preserves_trace_and_hermiticity():
    sp = o.FockSpace(12)
    gen = o.liouvillian(sp, P)
    ops = sp.basis_operators()
    out = gen(ops)
    assert np.max(np.abs(np.trace(out, axis1=1, axis2=2))) < 1e-13
    herm = (ops + np.conj(np.swapaxes(ops, 1, 2))) / 2
    lh = gen(herm)
    assert np.max(np.abs(lh - np.conj(np.swapaxes(lh, 1, 2)))) < 1e-13


def test_vacuum_relaxes_to_thermal():
    sp = o.FockSpace(30)
    p = OscillatorParams(gamma=0.5, nbar=0.4)
    rho = o.liouvillian(sp, p).propagate(sp.projector(1), 60.0)
    n = np.arange(30)
    thermal = (p.nbar / (1 + p.nbar)) ** n / (1 + p.nbar)
    assert np.max(np.abs(np.diag(rho).real - thermal)) < 1e-8


def test_propagate_matches_dense_expm():
    sp = o.FockSpace(10)
    gen = o.generator_a(sp, P, 1)
    dense = gen.dense_expm(0.7)
    ops = sp.basis_operators()[[3, 17, 55]]
    via = (dense @ ops.reshape(3, -1).T).T.reshape(ops.shape)
    assert np.max(np.abs(gen.propagate(ops, 0.7) - via)) < 1e-12
    with pytest.raises(ValueError):
        gen.propagate(ops, -1.0)


def test_superop_algebra():
    sp = o.FockSpace(20)
    d1 = o.superdisplacement_sym(sp, 0.2 + 0.1j)
    d2 = o.superdisplacement_sym(sp, -0.2 - 0.1j)
    ident = o.identity_superop(20)
    x = sp.basis_operators()[7]
    assert np.allclose((d1 + ident)(x), d1(x) + x)
    assert np.allclose((d1 * 2.0)(x), 2 * d1(x))
    assert np.allclose((d1 - d1)(x), 0)
    assert o.superop_residual(sp, d2 @ d1, ident) < 1e-9
    assert o.sandwich(sp.a[:4, :4], sp.adag[:4, :4]).matrix().shape == (16, 16)


def test_displacement_flags():
    sp = o.FockSpace(20)
    assert o.displacement_matrix(sp, 1.0).flags == []
    assert o.displacement_matrix(sp, 3.0).flags


def test_bulk_levels_fixed():
    assert o.bulk_levels(o.FockSpace(60)) == 15
    assert o.bulk_levels(o.FockSpace(20)) == 10
    assert o.bulk_levels(o.FockSpace(11)) == 2


@pytest.mark.parametrize("state", [FockPair(), Coherent(1.5), Cat(1.5)], ids=lambda s: s.kind)
def test_run_sequence_physical_and_main_relation(state):
    sp = o.FockSpace(40)
    p = OscillatorParams(gamma=1e-2, g=0.075)
    seq = expand_family(Equidistant(0.8 * math.pi, 3))
    rho0 = density_matrix(state, 40)
    joint = o.run_sequence(sp, p, ProbeAmplitudes(), seq, rho0)
    chk = joint.check()
    assert chk["ok"], chk
    assert joint.flags == []
    assert math.isclose(joint.time, 6 * 0.8 * math.pi)
    zeta, pred, flags = o.oracle_chi_samples(sp, p, ProbeAmplitudes(), seq, rho0)
    assert abs(pred.chi_plus - state.chi(zeta)) < 1e-10
    assert abs(pred.chi_minus - state.chi(-zeta)) < 1e-10


def test_no_coupling_returns_probe():
    sp = o.FockSpace(10)
    probe = ProbeAmplitudes.normalized(0.6, 0.8j)
    joint = o.run_sequence(sp, OscillatorParams(gamma=0.1, g=0.0), probe, PulseSequence([0.3, 1.1]), sp.projector(1))
    e = o.pauli_expectations(joint)
    psi = probe.vector
    assert abs(e["xy_minus"] - 2 * psi[1].conjugate() * psi[0]) < 1e-12
    assert abs(e["sz"] - (abs(psi[0]) ** 2 - abs(psi[1]) ** 2)) < 1e-12


def test_dephasing_decays_coherence():
    sp = o.FockSpace(8)
    seq = PulseSequence([1.0, 2.0])
    base = o.run_sequence(sp, OscillatorParams(g=0.0), ProbeAmplitudes(), seq, sp.projector(1))
    deph = o.run_sequence(sp, OscillatorParams(g=0.0), ProbeAmplitudes(), seq, sp.projector(1), dephasing=0.05)
    ratio = o.pauli_expectations(deph)["sx"] / o.pauli_expectations(base)["sx"]
    assert math.isclose(ratio, math.exp(-0.05 * 6.0), rel_tol=1e-10)


def test_leakage_flag():
    sp = o.FockSpace(12)
    rho0 = density_matrix(Coherent(2.5), 12)
    joint = o.run_sequence(sp, OscillatorParams(), ProbeAmplitudes(), PulseSequence([math.pi]), rho0)
    assert any("leakage" in f for f in joint.flags)


def test_fock_trace_chi():
    sp = o.FockSpace(40)
    rho = density_matrix(Cat(1.5), 40)
    for beta in (0.3 - 1.0j, 2.0):
        assert abs(o.fock_trace_chi(sp, rho, beta) - Cat(1.5).chi(beta)) < 1e-10


def test_sequence_propagators_diagonal():
    # U_+[tau] rho = D[upsilon] e^{L T} rho on the bulk
    sp = o.FockSpace(50)
    seq = PulseSequence([0.7, 1.9, 1.1])
    ops = o.test_operators(sp)
    props = o.sequence_propagators(sp, P, seq, ops)
    free = o.liouvillian(sp, P).propagate(ops, 2 * sum(seq.taus))
    ups = an.upsilon(P, seq)
    assert o.bulk_residual(sp, props["U+"], o.superdisplacement_sym(sp, ups)(free)) < 1e-6


def test_dump_round_trip(tmp_path):
    arrays = {"rho": np.eye(3, dtype=complex) * (1 + 2j), "axis": np.arange(5.0)}
    npz, meta = o.dump_arrays(tmp_path / "sub" / "dump", arrays, {"gamma": 1e-4})
    back, info = o.load_arrays(tmp_path / "sub" / "dump")
    assert np.array_equal(back["rho"], arrays["rho"])
    assert info["gamma"] == 1e-4 and info["arrays"]["rho"]["shape"] == [3, 3]
