import numpy as np
import pytest

from varqec import channels as ch
from varqec import qmath
from varqec import twodesign as td


def random_channel(rng, dim=2, rank=3):
    """Random CPTP map from an isometry cut into Kraus blocks."""
    a = rng.normal(size=(dim * rank, dim)) + 1j * rng.normal(size=(dim * rank, dim))
    q, _ = np.linalg.qr(a)
    return ch.KrausChannel(tuple(q.reshape(rank, dim, dim)))


def entanglement_fidelity(c):
    # <Omega| (E x I)(|Omega><Omega|) |Omega> from the Choi state
    d = c.dim
    omega = np.eye(d).reshape(-1) / np.sqrt(d)
    return float(np.real(omega.conj() @ c.choi() @ omega))


def six_state_average(c):
    return float(np.mean([np.real(np.vdot(s, c(np.outer(s, s.conj())) @ s)) for s in td.stabilizer_states()]))


def test_stabilizer_states_are_a_one_design():
    mix = np.mean([qmath.projector(s) for s in td.stabilizer_states()], axis=0)
    assert np.allclose(mix, np.eye(2) / 2, atol=1e-15)


def test_stabilizer_preparations_map_zero_to_each_state():
    for s, u in zip(td.stabilizer_states(), td.stabilizer_preparations()):
        assert qmath.is_unitary(u)
        assert np.allclose(u[:, 0], s)


def test_six_state_average_equals_entanglement_formula(rng):
    for _ in range(20):
        c = random_channel(rng)
        assert six_state_average(c) == pytest.approx((2 * entanglement_fidelity(c) + 1) / 3, abs=1e-10)
    assert six_state_average(ch.identity_channel()) == pytest.approx(1.0)


def test_nakata_samples_are_unitary_and_seeded():
    a = td.sample_nakata(3, 2, np.random.default_rng(5))
    b = td.sample_nakata(3, 2, np.random.default_rng(5))
    assert qmath.is_unitary(a, atol=1e-12)
    assert np.array_equal(a, b)


def _up_to_phase_key(u):
    idx = np.flatnonzero(np.abs(u.ravel()) > 1e-9)[0]
    v = u.ravel() * np.exp(-1j * np.angle(u.ravel()[idx]))
    return tuple(np.round(v, 8))


def test_single_cell_single_qubit_reaches_three_unitaries():
    rng = np.random.default_rng(0)
    keys = {_up_to_phase_key(u) for u in td.sample_nakata_batch(1, 1, 300, rng)}
    assert len(keys) == 3
    want = {_up_to_phase_key(qmath.H @ np.diag([1, np.exp(1j * phi)])) for phi in (0, 2 * np.pi / 3, 4 * np.pi / 3)}
    assert keys == want


def test_nakata_two_qubit_cell_against_explicit_product():
    # replay the draws of one cell and rebuild the cell gate by gate
    seed = 17
    u = td.sample_nakata(1, 2, np.random.default_rng(seed))
    g = np.random.default_rng(seed)
    phi = g.integers(0, 3, size=(1, 2))[0] * (2 * np.pi / 3)
    theta = g.integers(0, 2, size=(1, 1))[0] * np.pi
    d1 = np.kron(np.diag([1, np.exp(1j * phi[0])]), np.diag([1, np.exp(1j * phi[1])]))
    d2 = np.diag([1, 1, 1, np.exp(1j * theta[0])])
    want = np.kron(qmath.H, qmath.H) @ d2 @ d1
    assert np.allclose(u, want)


def test_bias_bound_values():
    assert td.bias_bound(2, 1) == 0.625
    assert td.bias_bound(2, 2) == pytest.approx(78 / 768)
    vals = [td.bias_bound(l, 1) for l in range(1, 21)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-5


def test_deviation_bound():
    assert td.deviation_bound(10**4, 5, 1) == pytest.approx(0.01 + td.bias_bound(5, 1))
    assert td.deviation_bound(10**12, 40, 1) < 1e-5
    with pytest.raises(ValueError):
        td.deviation_bound(0, 2, 1)


def test_sampler_modes():
    s = td.TwoDesignSampler("stabilizer", seed=3)
    assert s.exact and s.bias == 0.0
    states = s.sample_states(50)
    assert states.shape == (50, 2)
    assert qmath.is_unitary(s.sample())
    n = td.TwoDesignSampler("nakata", k=2, l=3, seed=3)
    assert n.bias == td.bias_bound(3, 2)
    assert n.sample_states(4).shape == (4, 4)
    with pytest.raises(ValueError):
        td.TwoDesignSampler("stabilizer", k=2)
    with pytest.raises(ValueError):
        td.TwoDesignSampler("haar")


def test_sampler_is_seeded():
    a = td.TwoDesignSampler("nakata", k=1, l=2, seed=9).sample_states(20)
    b = td.TwoDesignSampler("nakata", k=1, l=2, seed=9).sample_states(20)
    assert np.array_equal(a, b)
