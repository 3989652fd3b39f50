"""Exact and approximate 2-designs for average-fidelity estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qmath

_S2 = 1 / math.sqrt(2)

STABILIZER_LABELS = ("+", "-", "0", "1", "+i", "-i")


def stabilizer_states() -> list[np.ndarray]:
    """The six single-qubit stabilizer states ``|+>, |->, |0>, |1>, |+i>, |-i>``."""
    return [
        np.array([_S2, _S2], dtype=complex),
        np.array([_S2, -_S2], dtype=complex),
        np.array([1, 0], dtype=complex),
        np.array([0, 1], dtype=complex),
        np.array([_S2, 1j * _S2], dtype=complex),
        np.array([_S2, -1j * _S2], dtype=complex),
    ]


def stabilizer_preparations() -> list[np.ndarray]:
    """Unitaries ``S`` with ``S|0>`` equal to each stabilizer state, in the same order."""
    out = []
    for psi in stabilizer_states():
        # complete psi to a unitary with second column orthogonal to it
        perp = np.array([-psi[1].conj(), psi[0].conj()])
        out.append(np.column_stack([psi, perp]))
    return out


def _nakata_cells(l: int, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Batch of ``size`` unitaries of ``l`` cells on ``k`` qubits."""
    d = 2**k
    bits = (np.arange(d)[:, None] >> (k - 1 - np.arange(k))[None, :]) & 1
    pairs = [(p, q) for p in range(k) for q in range(p + 1, k)]
    hk = np.eye(1, dtype=complex)
    for _ in range(k):
        hk = np.kron(hk, qmath.H)
    u = np.broadcast_to(np.eye(d, dtype=complex), (size, d, d)).copy()
    for _ in range(l):
        phi = rng.integers(0, 3, size=(size, k)) * (2 * np.pi / 3)
        phase = bits @ phi.T  # (d, size)
        if pairs:
            theta = rng.integers(0, 2, size=(size, len(pairs))) * np.pi
            both = np.stack([bits[:, p] & bits[:, q] for p, q in pairs], axis=1)
            phase = phase + both @ theta.T
        u = np.exp(1j * phase.T)[:, :, None] * u
        u = hk @ u
    return u


def sample_nakata(l: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """One draw of the random diagonal-phase/Hadamard circuit with ``l`` cells.

    Each cell applies ``diag(1, e^{i phi})`` to every qubit with ``phi`` from
    ``{0, 2pi/3, 4pi/3}``, ``diag(1, 1, 1, e^{i theta})`` to every pair with
    ``theta`` from ``{0, pi}``, then Hadamards on all qubits.
    """
    if l < 1 or k < 1:
        raise ValueError("need l >= 1 and k >= 1")
    return _nakata_cells(l, k, 1, rng)[0]


def sample_nakata_batch(l: int, k: int, size: int, rng: np.random.Generator) -> np.ndarray:
    if l < 1 or k < 1:
        raise ValueError("need l >= 1 and k >= 1")
    return _nakata_cells(l, k, size, rng)


def bias_bound(l: int, k: int) -> float:
    """Upper bound on the bias of the fidelity estimator using ``l`` cells on ``k`` qubits."""
    if l < 1 or k < 1:
        raise ValueError("need l >= 1 and k >= 1")
    d = 2**k
    return (d ** (l + 1) + d**l - 2) / (d ** (2 * l) * (d - 1))


def deviation_bound(N: int, l: int, k: int) -> float:
    """Envelope ``1/sqrt(N) + bias_bound(l, k)`` for an ``N``-shot estimate."""
    if N < 1:
        raise ValueError("N must be positive")
    return 1 / math.sqrt(N) + bias_bound(l, k)


@dataclass
class TwoDesignSampler:
    """Draws state-preparation unitaries ``S`` on ``k`` logical qubits.

    ``mode="stabilizer"`` picks uniformly among the six stabilizer
    preparations (``k = 1`` only); ``mode="nakata"`` draws ``l``-cell random
    circuits.
    """

    mode: str = "stabilizer"
    k: int = 1
    l: int = 1
    seed: int | None = None
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("stabilizer", "nakata"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.mode == "stabilizer" and self.k != 1:
            raise ValueError("the stabilizer design is for a single logical qubit")
        if self.mode == "nakata" and (self.l < 1 or self.k < 1):
            raise ValueError("need l >= 1 and k >= 1")
        self.rng = np.random.default_rng(self.seed)
        self._preps = stabilizer_preparations()

    @property
    def exact(self) -> bool:
        return self.mode == "stabilizer"

    @property
    def bias(self) -> float:
        return 0.0 if self.exact else bias_bound(self.l, self.k)

    def sample(self) -> np.ndarray:
        if self.exact:
            return self._preps[int(self.rng.integers(6))]
        return sample_nakata(self.l, self.k, self.rng)

    def sample_states(self, size: int) -> np.ndarray:
        """``size`` prepared states ``S|0...0>`` as rows."""
        if self.exact:
            idx = self.rng.integers(6, size=size)
            return np.array(stabilizer_states())[idx]
        return sample_nakata_batch(self.l, self.k, size, self.rng)[:, :, 0]
