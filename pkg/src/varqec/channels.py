"""Kraus channels for the phase-damping and T1/T2 noise models.

Channel composition reads left to right: ``a.then(b)`` applies ``a`` first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import qmath
from .qmath import I2, X, Y, Z

_COMPLETENESS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """CPTP map ``rho -> sum_j K_j rho K_j^dagger`` on a qubit register."""

    kraus_ops: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops) or shape[0] != shape[1]:
            raise ValueError("Kraus operators must be square and of equal shape")
        qmath.num_qubits(shape[0])
        object.__setattr__(self, "kraus_ops", ops)

    @property
    def dim(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def n_qubits(self) -> int:
        return qmath.num_qubits(self.dim)

    def completeness_error(self) -> float:
        s = sum(k.conj().T @ k for k in self.kraus_ops)
        return float(np.max(np.abs(s - np.eye(self.dim))))

    def is_cptp(self, atol: float = _COMPLETENESS_TOL) -> bool:
        return self.completeness_error() <= atol

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho)
        return sum(k @ rho @ k.conj().T for k in self.kraus_ops)

    def adjoint(self, op: np.ndarray) -> np.ndarray:
        """Heisenberg-picture map ``A -> sum_j K_j^dagger A K_j``."""
        op = np.asarray(op)
        return sum(k.conj().T @ op @ k for k in self.kraus_ops)

    def on(self, rho: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
        """Apply this channel to ``targets`` of an ``n``-qubit (batched) state."""
        return sum(qmath.conjugate(k, rho, targets, n) for k in self.kraus_ops)

    def adjoint_on(self, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
        return sum(qmath.conjugate(k.conj().T, op, targets, n) for k in self.kraus_ops)

    def then(self, other: "KrausChannel") -> "KrausChannel":
        """Composition applying ``self`` first and ``other`` second."""
        return compose(self, other)

    def superoperator(self) -> np.ndarray:
        """Row-major vectorised superoperator: ``vec(E(rho)) = S @ vec(rho)``."""
        return sum(np.kron(k, k.conj()) for k in self.kraus_ops)

    def choi(self) -> np.ndarray:
        """Normalised Choi state ``(E x I)(|Omega><Omega|)`` with the output first."""
        d = self.dim
        omega = np.eye(d, dtype=complex).reshape(d * d) / np.sqrt(d)
        return sum(
            np.outer(v, v.conj())
            for v in (np.kron(k, np.eye(d)) @ omega for k in self.kraus_ops)
        )


def identity_channel(n_qubits: int = 1) -> KrausChannel:
    return KrausChannel((np.eye(2**n_qubits, dtype=complex),))


def unitary_channel(u: np.ndarray) -> KrausChannel:
    return KrausChannel((np.asarray(u, dtype=complex),))


def compose(first: KrausChannel, second: KrausChannel) -> KrausChannel:
    if first.dim != second.dim:
        raise ValueError("cannot compose channels of different dimension")
    return KrausChannel(tuple(b @ a for a in first.kraus_ops for b in second.kraus_ops))


def tensor_channels(*chs: KrausChannel) -> KrausChannel:
    """Independent product channel, the first argument on qubit 0."""
    ops = [np.eye(1, dtype=complex)]
    for ch in chs:
        ops = [np.kron(a, b) for a in ops for b in ch.kraus_ops]
    return KrausChannel(tuple(ops))


def pd_error_prob(t: float, T2: float) -> float:
    """Phase-flip probability ``(1 - exp(-t/T2)) / 2`` accumulated over ``t``."""
    if T2 <= 0:
        raise ValueError("T2 must be positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    return (1.0 - math.exp(-t / T2)) / 2.0


def apd_params(t: float, T1: float, T2: float) -> tuple[float, float]:
    """Return ``(gamma, lambda)`` for a wait of ``t`` under T1 relaxation and T2 dephasing.

    ``lambda`` is chosen so that the surviving coherence factor
    ``sqrt(1 - gamma - lambda)`` equals ``exp(-t / T2)``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if T1 <= 0 or T2 <= 0:
        raise ValueError("T1 and T2 must be positive")
    if T2 > 2 * T1 * (1 + 1e-12):
        raise ValueError(f"T2={T2} exceeds 2*T1={2 * T1}; pure-dephasing time would be negative")
    gamma = 1.0 - math.exp(-t / T1)
    lam = max(math.exp(-t / T1) - math.exp(-2 * t / T2), 0.0)
    return gamma, lam


def dephasing_time(T1: float, T2: float) -> float:
    """Pure-dephasing time from ``1/T_phi = 1/T2 - 1/(2 T1)``; inf when T2 = 2 T1."""
    rate = 1.0 / T2 - 1.0 / (2.0 * T1)
    return math.inf if rate <= 0 else 1.0 / rate


def pd_channel(p: float) -> KrausChannel:
    """Phase flip with probability ``p``."""
    if not 0 <= p <= 0.5:
        raise ValueError(f"phase-flip probability {p} outside [0, 1/2]")
    return KrausChannel((math.sqrt(1 - p) * I2, math.sqrt(p) * Z))


def apd_channel(gamma: float, lam: float) -> KrausChannel:
    """Amplitude plus phase damping with decay ``gamma`` and dephasing ``lam``."""
    if gamma < 0 or lam < 0:
        raise ValueError("gamma and lambda must be non-negative")
    if gamma + lam > 1 + 1e-12:
        raise ValueError(f"gamma + lambda = {gamma + lam} exceeds 1")
    eta = math.sqrt(max(1 - gamma - lam, 0.0))
    k1 = np.array([[1, 0], [0, eta]], dtype=complex)
    k2 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    k3 = np.array([[0, 0], [0, math.sqrt(lam)]], dtype=complex)
    return KrausChannel((k1, k2, k3))


def pauli_channel(px: float, py: float, pz: float) -> KrausChannel:
    probs = np.array([1 - px - py - pz, px, py, pz])
    if np.any(probs < -1e-12) or np.any(probs > 1 + 1e-12):
        raise ValueError(f"Pauli probabilities {probs} outside [0, 1]")
    probs = np.clip(probs, 0, 1)
    return KrausChannel(tuple(math.sqrt(p) * P for p, P in zip(probs, (I2, X, Y, Z))))


def pta_apd_probs(gamma: float, lam: float) -> tuple[float, float, float]:
    if gamma < 0 or lam < 0 or gamma + lam > 1 + 1e-12:
        raise ValueError("invalid (gamma, lambda)")
    eta = math.sqrt(max(1 - gamma - lam, 0.0))
    px = py = gamma / 4
    pz = 0.5 - gamma / 4 - eta / 2
    return px, py, pz


def pta_apd_channel(gamma: float, lam: float) -> KrausChannel:
    """Pauli-twirled amplitude plus phase damping."""
    return pauli_channel(*pta_apd_probs(gamma, lam))


def pauli_probabilities(ch: KrausChannel) -> np.ndarray:
    """Diagonal of the single-qubit chi matrix in the order I, X, Y, Z."""
    if ch.dim != 2:
        raise ValueError("Pauli twirl is implemented for single-qubit channels")
    return np.array(
        [sum(abs(np.trace(P.conj().T @ k) / 2) ** 2 for k in ch.kraus_ops) for P in (I2, X, Y, Z)]
    )


def pauli_twirl(ch: KrausChannel) -> KrausChannel:
    """Average of ``P^dagger ch(P rho P^dagger) P`` over the single-qubit Paulis."""
    p = pauli_probabilities(ch)
    return pauli_channel(p[1], p[2], p[3])


def apply_noise_independent(
    rho: np.ndarray, ch: KrausChannel, targets: Iterable[int], n: int | None = None
) -> np.ndarray:
    """Apply a single-qubit channel independently to every target qubit."""
    rho = np.asarray(rho)
    if n is None:
        n = qmath.num_qubits(rho.shape[-1])
    targets = qmath._check_targets(list(targets), n)
    if ch.dim != 2:
        raise ValueError("independent noise expects a single-qubit channel")
    for q in targets:
        rho = ch.on(rho, [q], n)
    return rho


def aggregate_phase_flip(probs: Iterable[float]) -> float:
    """Net flip probability of independent phase flips applied in sequence."""
    prod = 1.0
    for p in probs:
        if not 0 <= p <= 0.5:
            raise ValueError(f"phase-flip probability {p} outside [0, 1/2]")
        prod *= 1 - 2 * p
    return 0.5 * (1 - prod)


@dataclass(frozen=True, eq=False)
class IndependentNoise:
    """Single-qubit channel acting independently on each listed qubit."""

    channel: KrausChannel
    targets: tuple[int, ...]

    def apply(self, rho: np.ndarray, n: int) -> np.ndarray:
        for q in self.targets:
            rho = self.channel.on(rho, [q], n)
        return rho

    def adjoint(self, op: np.ndarray, n: int) -> np.ndarray:
        for q in self.targets:
            op = self.channel.adjoint_on(op, [q], n)
        return op

    def as_channel(self, n: int) -> KrausChannel:
        per_qubit = [self.channel if q in self.targets else identity_channel() for q in range(n)]
        return tensor_channels(*per_qubit)


@dataclass(frozen=True, eq=False)
class RegisterNoise:
    """General channel on the whole code register."""

    channel: KrausChannel

    def apply(self, rho: np.ndarray, n: int) -> np.ndarray:
        return self.channel(rho)

    def adjoint(self, op: np.ndarray, n: int) -> np.ndarray:
        return self.channel.adjoint(op)

    def as_channel(self, n: int) -> KrausChannel:
        return self.channel


def as_noise(noise, n: int):
    """Coerce a channel, an ``(channel, targets)`` pair or ``None`` to a noise object."""
    if noise is None:
        return IndependentNoise(identity_channel(), ())
    if isinstance(noise, (IndependentNoise, RegisterNoise)):
        return noise
    if isinstance(noise, KrausChannel):
        if noise.dim == 2 and n != 1:
            return IndependentNoise(noise, tuple(range(n)))
        if noise.dim != 2**n:
            raise ValueError(f"channel of dim {noise.dim} does not act on {n} qubits")
        return RegisterNoise(noise)
    ch, targets = noise
    return IndependentNoise(ch, tuple(targets))


NOISE_KINDS = ("PD", "APD", "PTA_APD", "NONE")


@dataclass(frozen=True)
class NoiseSpec:
    """Declarative noise description; times in seconds.

    For ``PD`` either give ``p`` directly or ``t_step`` and ``T2``.
    """

    kind: str = "NONE"
    t_step: float = 0.0
    T1: float = math.inf
    T2: float = math.inf
    p: float | None = None
    targets: tuple[int, ...] | None = field(default=None)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.kind == "PD" and not 0 <= self.phase_flip_prob <= 0.5:
            raise ValueError("PD probability outside [0, 1/2]")
        if self.kind in ("APD", "PTA_APD"):
            apd_params(self.t_step, self.T1, self.T2)

    @property
    def phase_flip_prob(self) -> float:
        if self.p is not None:
            return float(self.p)
        if math.isinf(self.T2):
            return 0.0
        return pd_error_prob(self.t_step, self.T2)

    @property
    def gamma(self) -> float:
        return apd_params(self.t_step, self.T1, self.T2)[0]

    @property
    def lam(self) -> float:
        return apd_params(self.t_step, self.T1, self.T2)[1]

    @property
    def t_phi(self) -> float:
        return dephasing_time(self.T1, self.T2)

    def channel(self) -> KrausChannel:
        """Single-qubit channel for one time step."""
        if self.kind == "NONE":
            return identity_channel()
        if self.kind == "PD":
            return pd_channel(self.phase_flip_prob)
        gamma, lam = apd_params(self.t_step, self.T1, self.T2)
        if self.kind == "APD":
            return apd_channel(gamma, lam)
        return pta_apd_channel(gamma, lam)

    def noise(self, n: int) -> IndependentNoise:
        targets = tuple(range(n)) if self.targets is None else tuple(self.targets)
        return IndependentNoise(self.channel(), targets)

    def with_kind(self, kind: str) -> "NoiseSpec":
        return NoiseSpec(kind, self.t_step, self.T1, self.T2, self.p, self.targets)

    def with_time(self, t_step: float) -> "NoiseSpec":
        return NoiseSpec(self.kind, t_step, self.T1, self.T2, self.p, self.targets)

    @classmethod
    def from_config(cls, cfg: dict) -> "NoiseSpec":
        """Build from a config table with times in microseconds."""
        allowed = {"kind", "t_step_us", "T1_us", "T2_us", "p", "targets"}
        for key in cfg:
            if key not in allowed:
                raise KeyError(f"noise.{key}")
        us = 1e-6
        targets = cfg.get("targets")
        return cls(
            kind=str(cfg.get("kind", "NONE")).upper(),
            t_step=float(cfg.get("t_step_us", 0.0)) * us,
            T1=float(cfg.get("T1_us", math.inf)) * us,
            T2=float(cfg.get("T2_us", math.inf)) * us,
            p=None if cfg.get("p") is None else float(cfg["p"]),
            targets=None if targets is None else tuple(int(t) for t in targets),
        )

    def to_config(self) -> dict:
        out = {"kind": self.kind}
        if self.t_step:
            out["t_step_us"] = self.t_step * 1e6
        if not math.isinf(self.T1):
            out["T1_us"] = self.T1 * 1e6
        if not math.isinf(self.T2):
            out["T2_us"] = self.T2 * 1e6
        if self.p is not None:
            out["p"] = self.p
        if self.targets is not None:
            out["targets"] = list(self.targets)
        return out
