import itertools

import numpy as np
import pytest

from oracles import five_qubit_oracle, pauli, phase_code_oracle
from varqec import baselines as bl
from varqec import channels as ch
from varqec import qmath
from varqec.fidelity import SchemeLayout, average_code_fidelity

US = 1e-6


@pytest.mark.parametrize("p", [0.0, 0.01, 0.045, 0.091, 0.2, 0.5])
def test_logical_flip_oracle(p):
    q = bl.logical_flip_oracle(p)
    assert 1 - (2 / 3) * q == pytest.approx(phase_code_oracle(p), abs=1e-15)
    assert bl.logical_flip_oracle(0.091) == pytest.approx(0.0233, abs=1e-4)
    with pytest.raises(ValueError):
        bl.logical_flip_oracle(0.6)


def test_phase_code_structure():
    code = bl.three_qubit_phase_code()
    assert qmath.is_unitary(code.encoder)
    assert code.recovery.is_cptp()
    plus = np.array([1, 1]) / np.sqrt(2)
    assert np.allclose(code.encoder @ qmath.ket("000"), np.kron(np.kron(plus, plus), plus))
    assert code.fidelity(None) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("q", [0, 1, 2])
def test_phase_code_corrects_single_z(q):
    code = bl.three_qubit_phase_code()
    z = ch.RegisterNoise(ch.unitary_channel(qmath.embed(qmath.Z, [q], 3)))
    assert code.fidelity(z) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("p", [0.01, 0.045, 0.091, 0.2])
def test_phase_code_under_phase_damping(p):
    code = bl.three_qubit_phase_code()
    assert code.fidelity(ch.pd_channel(p)) == pytest.approx(phase_code_oracle(p), abs=1e-12)


def test_syndrome_table_is_a_perfect_code_table():
    table = bl.syndrome_table()
    assert len(table) == 16
    assert table[(0, 0, 0, 0)] == "IIIII"
    weights = sorted(sum(c != "I" for c in p) for p in table.values())
    assert weights == [0] + [1] * 15


def test_stabilizers_commute():
    gens = bl.FIVE_QUBIT_STABILIZERS
    for a, b in itertools.combinations(gens, 2):
        assert np.allclose(pauli(a) @ pauli(b), pauli(b) @ pauli(a))


def test_five_qubit_structure():
    code = bl.five_qubit_code()
    assert qmath.is_unitary(code.encoder)
    assert code.recovery.is_cptp()
    assert code.fidelity(None) == pytest.approx(1.0, abs=1e-12)


def test_five_qubit_corrects_every_single_pauli():
    code = bl.five_qubit_code()
    for q in range(5):
        for P in "XYZ":
            s = "".join(P if i == q else "I" for i in range(5))
            noise = ch.RegisterNoise(ch.unitary_channel(pauli(s)))
            assert code.fidelity(noise) == pytest.approx(1.0, abs=1e-12), s


def test_five_qubit_matches_composition_oracle():
    g, l = ch.apd_params(4 * US, 57 * US, 19 * US)
    code = bl.five_qubit_code()
    for one in (ch.apd_channel(g, l), ch.pta_apd_channel(g, l), ch.pd_channel(0.1)):
        assert code.fidelity(one) == pytest.approx(five_qubit_oracle(one), abs=1e-10)


def test_five_qubit_same_under_twirl():
    # a stabilizer code with Pauli recovery only sees the twirled channel
    g, l = ch.apd_params(4 * US, 57 * US, 19 * US)
    code = bl.five_qubit_code()
    assert code.fidelity(ch.apd_channel(g, l)) == pytest.approx(code.fidelity(ch.pta_apd_channel(g, l)), abs=1e-12)


def test_no_encoding_fidelity():
    assert bl.no_encoding_fidelity(ch.pd_channel(0.045)) == pytest.approx(0.97)
    g, l = ch.apd_params(4 * US, 57 * US, 19 * US)
    # six-state average for the T1/T2 map: (1/2)(1 - g/2) + (1/6)(... ) derived from populations and coherence
    eta = np.sqrt(1 - g - l)
    # |0> stays, |1> survives with 1 - g, equator states keep 1/2 + eta/2
    want = (1 + (1 - g)) / 6 + 4 * (0.5 + 0.5 * eta) / 6
    assert bl.no_encoding_fidelity(ch.apd_channel(g, l)) == pytest.approx(want, abs=1e-12)


def test_transpose_channel_decoder_is_isometry(rng):
    enc = bl.three_qubit_phase_code().encoder[:, [0, 4]]
    noise = bl.independent_noise_channel(ch.pd_channel(0.1), 3)
    dec = bl.transpose_channel_decoder(enc, noise.kraus_ops)
    assert np.allclose(dec.conj().T @ dec, np.eye(8), atol=1e-10)


def test_transpose_channel_beats_bare_qubit():
    p = 0.091
    enc = bl.three_qubit_phase_code().encoder[:, [0, 4]]
    noise = bl.independent_noise_channel(ch.pd_channel(p), 3)
    dec = bl.transpose_channel_decoder(enc, noise.kraus_ops)
    f = bl.encode_decode_fidelity(enc, noise, dec)
    assert 1 - 2 * p / 3 < f <= phase_code_oracle(p) + 1e-12


def test_alternating_identity_noise_reaches_one(rng):
    res = bl.alternating_channel_optimization(ch.identity_channel(2), 1, iters=5, rng=rng)
    assert res.fidelity == pytest.approx(1.0, abs=1e-10)


def test_alternating_phase_damping_matches_phase_code():
    noise = bl.independent_noise_channel(ch.pd_channel(0.091), 3)
    res = bl.alternating_channel_optimization(noise, 1, iters=200, rng=np.random.default_rng(0))
    assert res.monotone
    assert np.all(np.diff(res.trace) >= -1e-12)
    assert res.fidelity == pytest.approx(phase_code_oracle(0.091), abs=1e-3)
    assert res.fidelity <= phase_code_oracle(0.091) + 1e-9


def test_alternating_result_consistency(rng):
    noise = bl.independent_noise_channel(ch.apd_channel(0.2, 0.2), 3)
    res = bl.alternating_channel_optimization(noise, 1, iters=10, rng=rng)
    assert bl.encode_decode_fidelity(res.encoder, noise, res.decoder_isometry) == pytest.approx(res.fidelity, abs=1e-10)
    blocks = res.decoder_kraus()
    total = sum(b.conj().T @ b for b in blocks)
    assert np.allclose(total, np.eye(8), atol=1e-10)
    assert np.allclose(res.encoder.conj().T @ res.encoder, np.eye(2), atol=1e-10)


def test_alternating_beats_phase_code_start():
    # starting from the phase code cannot end below it
    p = 0.15
    noise = bl.independent_noise_channel(ch.pd_channel(p), 3)
    enc = bl.three_qubit_phase_code().encoder[:, [0, 4]]
    res = bl.alternating_channel_optimization(noise, 1, iters=5, encoder=enc)
    assert res.fidelity >= phase_code_oracle(p) - 1e-10


def test_average_from_entanglement():
    assert bl.average_from_entanglement(1.0, 2) == 1.0
    assert bl.average_from_entanglement(0.25, 2) == pytest.approx(0.5)


def test_code_scheme_layout():
    code = bl.five_qubit_code()
    assert code.layout == SchemeLayout(1, 5, 0)
    V = code.encoder
    assert average_code_fidelity(V, code.recovery, None, code.layout) == pytest.approx(1.0)


def test_quadratic_forms_match_kraus_sum(rng):
    kraus = ch.apd_channel(0.2, 0.3)
    noise = ch.IndependentNoise(kraus, (0, 1, 2))
    ops = noise.as_channel(3).kraus_ops
    enc = bl._polar(rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2)))
    dec = bl._polar(rng.normal(size=(32, 8)) + 1j * rng.normal(size=(32, 8)))
    ref = bl.entanglement_fidelity_kraus(enc, ops, dec)
    u = bl._blocks_to_rows(dec, 2)
    assert bl._quad(u, bl._decoder_form(enc, noise, 3)) / 4 == pytest.approx(ref, abs=1e-12)
    v = enc.reshape(-1)
    n_form = bl._encoder_form(dec, noise, 3, 2)
    assert np.real(v @ n_form @ v.conj()) / 4 == pytest.approx(ref, abs=1e-12)
    # compressing the decoder to minimal Kraus rank leaves the channel unchanged
    assert bl.entanglement_fidelity_kraus(enc, ops, bl._compress(dec, 2, 16)) == pytest.approx(ref, abs=1e-12)


def test_alternating_accepts_independent_noise():
    kraus = ch.pd_channel(0.1)
    a = bl.alternating_channel_optimization(
        ch.IndependentNoise(kraus, (0, 1, 2)), 1, iters=30, rng=np.random.default_rng(3), n=3
    )
    b = bl.alternating_channel_optimization(
        bl.independent_noise_channel(kraus, 3), 1, iters=30, rng=np.random.default_rng(3)
    )
    assert a.fidelity == pytest.approx(b.fidelity, abs=1e-10)
    assert a.monotone and b.monotone
