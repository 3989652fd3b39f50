import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import sqrtm

from varqec import qmath


def test_ket_ordering_puts_qubit_zero_first():
    assert np.argmax(qmath.ket("01")) == 1
    assert np.argmax(qmath.ket([1, 0])) == 2
    assert np.argmax(qmath.ket("110")) == 6


def test_embed_matches_kron_with_identities():
    got = qmath.embed(qmath.X, [1], 3)
    want = np.kron(np.kron(qmath.I2, qmath.X), qmath.I2)
    assert np.allclose(got, want)


def test_embed_two_qubit_op_on_reversed_targets(rng):
    u = qmath.random_unitary(4, rng)
    swap = np.eye(4)[[0, 2, 1, 3]]
    assert np.allclose(qmath.embed(u, [1, 0], 2), swap @ u @ swap)


def test_apply_left_and_right_agree_with_dense_products(rng):
    u = qmath.random_unitary(4, rng)
    m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    full = qmath.embed(u, [2, 0], 3)
    assert np.allclose(qmath.apply_left(u, m, [2, 0], 3), full @ m)
    assert np.allclose(qmath.apply_right(m, u, [2, 0], 3), m @ full)
    assert np.allclose(qmath.conjugate(u, m, [2, 0], 3), full @ m @ full.conj().T)


def test_apply_left_is_batched(rng):
    u = qmath.random_unitary(2, rng)
    batch = np.stack([qmath.random_density_matrix(4, rng) for _ in range(3)])
    out = qmath.apply_left(u, batch, [1], 2)
    for b, o in zip(batch, out):
        assert np.allclose(o, qmath.embed(u, [1], 2) @ b)


def test_apply_to_state(rng):
    psi = qmath.random_state(8, rng)
    u = qmath.random_unitary(4, rng)
    assert np.allclose(qmath.apply_to_state(u, psi, [0, 2], 3), qmath.embed(u, [0, 2], 3) @ psi)


def _partial_trace_loop(rho, keep, n):
    # explicit index sum over the traced-out qubits
    drop = [q for q in range(n) if q not in keep]
    dk = 2 ** len(keep)
    out = np.zeros((dk, dk), dtype=complex)
    for i in range(2**n):
        for j in range(2**n):
            bi = [(i >> (n - 1 - q)) & 1 for q in range(n)]
            bj = [(j >> (n - 1 - q)) & 1 for q in range(n)]
            if any(bi[q] != bj[q] for q in drop):
                continue
            a = int("".join(str(bi[q]) for q in keep), 2)
            b = int("".join(str(bj[q]) for q in keep), 2)
            out[a, b] += rho[i, j]
    return out


@pytest.mark.parametrize("keep", [[0], [1], [2], [0, 2], [1, 2]])
def test_partial_trace_against_index_loop(rng, keep):
    rho = qmath.random_density_matrix(8, rng)
    assert np.allclose(qmath.partial_trace(rho, keep), _partial_trace_loop(rho, keep, 3))


def test_partial_trace_of_product(rng):
    a = qmath.random_density_matrix(2, rng)
    b = qmath.random_density_matrix(4, rng)
    assert np.allclose(qmath.partial_trace(np.kron(a, b), [0]), a)
    assert np.allclose(qmath.partial_trace(np.kron(a, b), [1, 2]), b)


def test_partial_trace_rejects_empty_keep(rng):
    with pytest.raises(ValueError):
        qmath.partial_trace(qmath.random_density_matrix(4, rng), [])


def test_fidelity_pure_states_is_overlap_squared(rng):
    a, b = qmath.random_state(4, rng), qmath.random_state(4, rng)
    assert qmath.fidelity(qmath.projector(a), qmath.projector(b)) == pytest.approx(abs(np.vdot(a, b)) ** 2)


def test_fidelity_commuting_states():
    p = np.array([0.7, 0.2, 0.1])
    q = np.array([0.3, 0.3, 0.4])
    want = np.sum(np.sqrt(p * q)) ** 2
    assert qmath.fidelity(np.diag(p), np.diag(q)) == pytest.approx(want, abs=1e-12)


def test_fidelity_against_sqrtm_oracle(rng):
    for _ in range(5):
        r = qmath.random_density_matrix(4, rng)
        s = qmath.random_density_matrix(4, rng)
        sr = sqrtm(r)
        want = np.real(np.trace(sqrtm(sr @ s @ sr))) ** 2
        assert qmath.fidelity(r, s) == pytest.approx(want, abs=1e-8)


def test_fidelity_rejects_non_states():
    with pytest.raises(ValueError):
        qmath.fidelity(np.diag([1.5, -0.5]), np.eye(2) / 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_fidelity_bounded_and_symmetric(seed, n):
    g = np.random.default_rng(seed)
    r = qmath.random_density_matrix(2**n, g)
    s = qmath.random_density_matrix(2**n, g)
    f = qmath.fidelity(r, s)
    assert -1e-12 <= f <= 1 + 1e-12
    assert f == pytest.approx(qmath.fidelity(s, r), abs=1e-8)


def test_random_objects_are_valid(rng):
    assert qmath.is_unitary(qmath.random_unitary(8, rng))
    assert qmath.is_density_matrix(qmath.random_density_matrix(8, rng))
    assert qmath.is_density_matrix(qmath.random_density_matrix(8, rng, rank=1))
    assert np.linalg.norm(qmath.random_state(8, rng)) == pytest.approx(1.0)


def test_num_qubits_rejects_non_powers_of_two():
    assert qmath.num_qubits(8) == 3
    with pytest.raises(ValueError):
        qmath.num_qubits(6)
