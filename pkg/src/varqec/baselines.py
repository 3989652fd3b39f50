"""Reference codes and an alternating encoder/decoder optimiser."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import qmath
from .channels import IndependentNoise, KrausChannel, as_noise, tensor_channels
from .fidelity import SchemeLayout, average_code_fidelity
from .twodesign import stabilizer_states

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CodeScheme:
    """Unitary encoder on ``n`` qubits plus a recovery channel back into the code."""

    name: str
    encoder: np.ndarray
    recovery: KrausChannel
    k: int
    n: int

    @property
    def layout(self) -> SchemeLayout:
        return SchemeLayout(self.k, self.n, 0, "FULL_REGISTER")

    def fidelity(self, noise) -> float:
        return average_code_fidelity(self.encoder, self.recovery, noise, self.layout)


def _pauli_string(s: str) -> np.ndarray:
    return qmath.tensor_all(*(qmath.PAULIS[c] for c in s))


def logical_flip_oracle(p: float) -> float:
    """Probability that majority vote over three independent flips fails."""
    if not 0 <= p <= 0.5:
        raise ValueError("p outside [0, 1/2]")
    return 3 * p**2 - 2 * p**3


def three_qubit_phase_code() -> CodeScheme:
    """Phase-flip repetition code ``|0> -> |+++>``, ``|1> -> |--->`` with majority vote."""
    n = 3
    cnot = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
    h3 = qmath.tensor_all(qmath.H, qmath.H, qmath.H)
    enc = h3 @ qmath.embed(cnot, [0, 2], n) @ qmath.embed(cnot, [0, 1], n)
    # bit-flip syndrome subspaces in the Hadamard frame, each with its correction
    cases = [("000", "111", None), ("100", "011", 0), ("010", "101", 1), ("001", "110", 2)]
    kraus = []
    for a, b, flip in cases:
        proj = qmath.projector(qmath.ket(a)) + qmath.projector(qmath.ket(b))
        fix = np.eye(8) if flip is None else qmath.embed(qmath.X, [flip], n)
        kraus.append(h3 @ fix @ proj @ h3)
    return CodeScheme("three-qubit phase code", enc, KrausChannel(tuple(kraus)), 1, n)


FIVE_QUBIT_STABILIZERS = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")


def _commutes(a: str, b: str) -> bool:
    anti = sum(1 for x, y in zip(a, b) if x != "I" and y != "I" and x != y)
    return anti % 2 == 0


def pauli_syndrome(pauli: str, stabilizers=FIVE_QUBIT_STABILIZERS) -> tuple[int, ...]:
    return tuple(0 if _commutes(pauli, g) else 1 for g in stabilizers)


def syndrome_table(stabilizers=FIVE_QUBIT_STABILIZERS) -> dict[tuple[int, ...], str]:
    """Minimum-weight Pauli for every syndrome; ties go to the first in I<X<Y<Z order."""
    n = len(stabilizers[0])
    table: dict[tuple[int, ...], tuple[int, str]] = {}
    for letters in itertools.product("IXYZ", repeat=n):
        p = "".join(letters)
        w = sum(c != "I" for c in p)
        s = pauli_syndrome(p, stabilizers)
        if s not in table or w < table[s][0]:
            table[s] = (w, p)
    return {s: p for s, (w, p) in table.items()}


def five_qubit_code() -> CodeScheme:
    """The [[5,1,3]] code with a lookup-table recovery.

    The encoder maps ``|a>|s>`` to ``E_s |a_L>``, where ``E_s`` is the table
    correction for syndrome ``s``, so ``|a>|0000>`` lands on ``|a_L>``.
    """
    n = 5
    gens = [_pauli_string(g) for g in FIVE_QUBIT_STABILIZERS]
    code_proj = np.eye(32, dtype=complex)
    for g in gens:
        code_proj = code_proj @ (np.eye(32) + g) / 2
    zero_l = code_proj @ qmath.ket("00000")
    zero_l /= np.linalg.norm(zero_l)
    one_l = _pauli_string("XXXXX") @ zero_l
    table = syndrome_table()
    enc = np.zeros((32, 32), dtype=complex)
    kraus = []
    for s_idx, s in enumerate(itertools.product((0, 1), repeat=4)):
        e = _pauli_string(table[s])
        enc[:, 0 * 16 + s_idx] = e @ zero_l
        enc[:, 1 * 16 + s_idx] = e @ one_l
        proj = np.eye(32, dtype=complex)
        for g, bit in zip(gens, s):
            proj = proj @ (np.eye(32) + (-1) ** bit * g) / 2
        kraus.append(e @ proj)
    return CodeScheme("five-qubit code", enc, KrausChannel(tuple(kraus)), 1, n)


def no_encoding_fidelity(single_qubit_channel: KrausChannel) -> float:
    """Six-state average fidelity of a bare qubit under one channel use."""
    lay = SchemeLayout(1, 1, 0)
    return average_code_fidelity(np.eye(2), np.eye(2), single_qubit_channel, lay)


# ----------------------------------------------------------------------------
# alternating encoder/decoder optimisation


def _polar(a: np.ndarray) -> np.ndarray:
    """Closest isometry to ``a`` (columns orthonormal)."""
    u, _, vh = np.linalg.svd(a, full_matrices=False)
    return u @ vh


def _traces(enc, ops, dec, d):
    """``t[j, b] = tr(D_b K_j E)`` for stacked noise operators ``ops``."""
    m = dec.shape[0] // d
    a = np.einsum("rx,jxy,yc->jrc", dec, ops, enc, optimize=True)
    return np.trace(a.reshape(len(ops), m, d, d), axis1=2, axis2=3)


def entanglement_fidelity_kraus(enc: np.ndarray, ops, dec: np.ndarray) -> float:
    """``F_e`` of decoder o noise o encoder summed over explicit Kraus operators."""
    d = enc.shape[1]
    return float(np.sum(np.abs(_traces(enc, np.asarray(ops), dec, d)) ** 2) / d**2)


# With u_b[(x, c)] = D_b[c, x] and v[(y, c)] = E[y, c], the entanglement
# fidelity is d^2 F_e = sum_b u_b^T M conj(u_b) = v^T N conj(v), where the
# Hermitian forms M (fixed encoder) and N (fixed decoder) each cost d^2
# channel applications.


def _blocks_to_rows(dec: np.ndarray, d: int) -> np.ndarray:
    D = dec.shape[1]
    return dec.reshape(-1, d, D).transpose(0, 2, 1).reshape(-1, D * d)


def _rows_to_blocks(u: np.ndarray, d: int) -> np.ndarray:
    D = u.shape[1] // d
    return u.reshape(-1, D, d).transpose(0, 2, 1).reshape(-1, D)


def _decoder_form(enc: np.ndarray, noise, n: int) -> np.ndarray:
    """``M[(x, c), (x', c')] = N(E|c><c'|E^dag)[x, x']``."""
    D, d = enc.shape
    x = np.einsum("xc,yd->cdxy", enc, enc.conj())
    y = noise.apply(x, n)
    return y.transpose(2, 0, 3, 1).reshape(D * d, D * d)


def _encoder_form(dec: np.ndarray, noise, n: int, d: int) -> np.ndarray:
    """``N[(y, c), (y', c')] = N^dag(Z_cc')[y', y]`` with ``Z_cc' = sum_b D_b^dag |c'><c| D_b``."""
    D = dec.shape[1]
    blocks = dec.reshape(-1, d, D)
    z = np.einsum("bdx,bcy->cdxy", blocks.conj(), blocks)
    a = noise.adjoint(z, n)
    return a.transpose(3, 0, 2, 1).reshape(D * d, D * d)


def _quad(rows: np.ndarray, form: np.ndarray) -> float:
    return float(np.real(np.einsum("bi,ij,bj->", rows, form, rows.conj())))


def _compress(dec: np.ndarray, d: int, rank: int) -> np.ndarray:
    """Same decoder channel with exactly ``rank`` Kraus blocks (zero padded)."""
    u = _blocks_to_rows(dec, d)
    w, v = np.linalg.eigh(u.T @ u.conj())
    keep = w > 1e-14 * max(w.max(), 1e-300)
    rows = (v[:, keep] * np.sqrt(w[keep])).T
    rows = np.concatenate([rows, np.zeros((rank - len(rows), rows.shape[1]), dtype=complex)])
    return _rows_to_blocks(rows, d)


def transpose_channel_decoder(enc: np.ndarray, noise_ops) -> np.ndarray:
    """Stinespring isometry of the transpose-channel recovery for encoder ``enc``.

    Kraus operators are ``E^dag K_j^dag N(P)^(-1/2)`` with ``P = E E^dag``,
    completed on the support complement so the map is trace preserving.
    """
    ops = np.asarray(noise_ops)
    D, d = enc.shape
    proj = enc @ enc.conj().T
    npr = np.einsum("jab,bc,jdc->ad", ops, proj, ops.conj())
    w, v = np.linalg.eigh(npr)
    keep = w > 1e-12 * w.max()
    inv_sqrt = (v[:, keep] / np.sqrt(w[keep])) @ v[:, keep].conj().T
    blocks = [enc.conj().T @ k.conj().T @ inv_sqrt for k in ops]
    # the complement of the support of N(P) is sent to |0>
    comp = v[:, ~keep]
    for i in range(comp.shape[1]):
        out = np.zeros((d, D), dtype=complex)
        out[0] = comp[:, i].conj()
        blocks.append(out)
    return _polar(np.concatenate(blocks, axis=0))


@dataclass
class AlternatingResult:
    encoder: np.ndarray  # isometry (2^n, 2^k)
    decoder_isometry: np.ndarray  # stacked Kraus blocks, (m * 2^k, 2^n)
    fidelity: float
    trace: list[float] = field(default_factory=list)
    monotone: bool = True

    def decoder_kraus(self, atol: float = 1e-14) -> list[np.ndarray]:
        """Nonzero ``2^k x 2^n`` Kraus blocks of the decoder."""
        d = self.encoder.shape[1]
        blocks = self.decoder_isometry.reshape(-1, d, self.encoder.shape[0])
        return [b for b in blocks if np.linalg.norm(b) > atol]


def average_from_entanglement(fe: float, d: int) -> float:
    return (d * fe + 1) / (d + 1)


def alternating_channel_optimization(
    noise,
    k: int = 1,
    iters: int = 200,
    rng: np.random.Generator | None = None,
    inner: int = 5,
    tol: float = 1e-10,
    encoder: np.ndarray | None = None,
    decoder: np.ndarray | None = None,
    n: int | None = None,
) -> AlternatingResult:
    """Alternate decoder and encoder improvements for a fixed ``n``-qubit noise channel.

    ``noise`` is a :class:`KrausChannel` on the register or an
    ``IndependentNoise`` (then pass ``n``).  The decoder is a Stinespring
    isometry from ``n`` qubits to ``k`` qubits times an environment of
    dimension ``2^n * 2^k``; the encoder is an isometry from ``k`` to ``n``
    qubits.  The entanglement fidelity is a convex quadratic in either
    isometry, so replacing an isometry by the polar factor of its gradient
    never lowers the objective.  The decoder is warm started from the
    transpose channel of the current encoder unless ``decoder`` (a stacked
    Kraus isometry) is given.  The returned average fidelity is a lower bound
    on the optimum.
    """
    rng = np.random.default_rng() if rng is None else rng
    if n is None:
        n = noise.n_qubits
    noise = as_noise(noise, n)
    D = 2**n
    d = 2**k
    if encoder is None:
        encoder = _polar(rng.normal(size=(D, d)) + 1j * rng.normal(size=(D, d)))
    enc = np.asarray(encoder, dtype=complex)
    if decoder is None:
        decoder = transpose_channel_decoder(enc, noise.as_channel(n).kraus_ops)
    dec = _compress(np.asarray(decoder, dtype=complex), d, D * d)
    u = _blocks_to_rows(dec, d)
    m_form = _decoder_form(enc, noise, n)
    fe = _quad(u, m_form) / d**2
    trace = [average_from_entanglement(fe, d)]
    monotone = True
    for it in range(iters):
        prev = fe
        for _ in range(inner):
            cand = _blocks_to_rows(_polar(_rows_to_blocks(u @ m_form, d)), d)
            f_new = _quad(cand, m_form) / d**2
            if f_new < fe - 1e-12:
                monotone = False
                break
            u, fe = cand, f_new
        n_form = _encoder_form(_rows_to_blocks(u, d), noise, n, d)
        v = enc.reshape(-1)
        for _ in range(inner):
            grad = (n_form.T @ v).reshape(D, d)
            cand = _polar(grad).reshape(-1)
            f_new = float(np.real(cand @ n_form @ cand.conj())) / d**2
            if f_new < fe - 1e-12:
                monotone = False
                break
            v, fe = cand, f_new
        enc = v.reshape(D, d)
        m_form = _decoder_form(enc, noise, n)
        trace.append(average_from_entanglement(fe, d))
        if not monotone:
            log.warning("non-monotone alternating step at iteration %d; keeping last iterate", it)
            break
        if fe - prev < tol:
            break
    return AlternatingResult(enc, _rows_to_blocks(u, d), average_from_entanglement(fe, d), trace, monotone)


def unitary_decoder(u: np.ndarray, k: int = 1) -> np.ndarray:
    """Stacked Kraus isometry of ``rho -> Tr_rest[U^dag rho U]`` keeping the first ``k`` qubits."""
    D = u.shape[0]
    d = 2**k
    rest = D // d
    udag = np.asarray(u, dtype=complex).conj().T.reshape(d, rest, D)
    return udag.transpose(1, 0, 2).reshape(rest * d, D)


def reference_starts(n: int, k: int = 1) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Structured ``(name, encoder, decoder)`` starting points for the alternating search.

    The unencoded qubit is always included and the five-qubit code is added
    for ``n = 5, k = 1``, so the search never ends below either.
    """
    D, d = 2**n, 2**k
    eye = np.eye(D, dtype=complex)
    starts = [("no_encoding", eye[:, :: D // d][:, :d], unitary_decoder(eye, k))]
    if n == 5 and k == 1:
        v = five_qubit_code().encoder
        starts.append(("five_qubit", v[:, [0, 16]], unitary_decoder(v, k)))
    return starts


def alternating_baseline(
    single_qubit_channel: KrausChannel,
    n: int,
    k: int = 1,
    iters: int = 300,
    restarts: int = 2,
    rng: np.random.Generator | None = None,
    inner: int = 5,
) -> AlternatingResult:
    """Best alternating optimum over the reference starts plus ``restarts`` random ones."""
    rng = np.random.default_rng() if rng is None else rng
    noise = IndependentNoise(single_qubit_channel, tuple(range(n)))
    runs = [
        alternating_channel_optimization(noise, k, iters, rng, inner, encoder=e, decoder=dec, n=n)
        for _, e, dec in reference_starts(n, k)
    ]
    runs += [alternating_channel_optimization(noise, k, iters, rng, inner, n=n) for _ in range(restarts)]
    return max(runs, key=lambda r: r.fidelity)


def encode_decode_fidelity(enc: np.ndarray, noise: KrausChannel, dec_isometry: np.ndarray) -> float:
    """Six-state average fidelity of ``dec o noise o enc`` for one logical qubit."""
    d = enc.shape[1]
    blocks = dec_isometry.reshape(-1, d, enc.shape[0])
    fids = []
    for s in stabilizer_states():
        rho = noise(enc @ np.outer(s, s.conj()) @ enc.conj().T)
        out = np.einsum("bij,jk,blk->il", blocks, rho, blocks.conj())
        fids.append(np.real(s.conj() @ out @ s))
    return float(np.mean(fids))


def independent_noise_channel(ch: KrausChannel, n: int) -> KrausChannel:
    return tensor_channels(*([ch] * n))
