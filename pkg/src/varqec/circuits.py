"""Parameterised circuits: the two layered ansatze, compilation and gradients.

Rotations follow ``A_theta = exp(-i theta A / 2)``.  The tunable two-qubit
phase gate is ``CZ_theta = diag(1, 1, 1, exp(-i theta / 2))``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qmath

GATE_KINDS = ("RX", "RZ", "CZ", "H", "DIAG1", "DIAG2", "CR")
_N_ANGLES = {"RX": 1, "RZ": 1, "CZ": 1, "H": 0, "DIAG1": 1, "DIAG2": 1, "CR": 3}
_N_TARGETS = {"RX": 1, "RZ": 1, "CZ": 2, "H": 1, "DIAG1": 1, "DIAG2": 2, "CR": 2}


@dataclass(frozen=True)
class GateSpec:
    """One gate.  Angles come from parameter ``slots`` or, if absent, fixed ``angles``.

    ``CR`` is a controlled ``Z(a) X(b) Z(c)`` rotation with the control on
    ``targets[0]``.
    """

    kind: str
    targets: tuple[int, ...]
    slots: tuple[int, ...] = ()
    angles: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "slots", tuple(int(s) for s in self.slots))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if len(self.targets) != _N_TARGETS[self.kind] or len(set(self.targets)) != len(self.targets):
            raise ValueError(f"{self.kind} needs {_N_TARGETS[self.kind]} distinct targets")
        need = _N_ANGLES[self.kind]
        if self.slots and len(self.slots) != need:
            raise ValueError(f"{self.kind} takes {need} parameter slots")
        if not self.slots and len(self.angles) != need:
            raise ValueError(f"{self.kind} needs {need} fixed angles when no slots are given")


# Primitive gates G(theta) = exp(-i * scale * theta * gen).  Generators are
# either diagonal (stored as the diagonal) or Pauli-X-like on the last target.
_GEN_DIAG = {
    "RZ": np.array([1.0, -1.0]),
    "CZ": np.array([0.0, 0.0, 0.0, 1.0]),
    "CRZ": np.array([0.0, 0.0, 1.0, -1.0]),
    "DIAG1": np.array([0.0, 1.0]),
    "DIAG2": np.array([0.0, 0.0, 0.0, 1.0]),
}
_SCALE = {"RZ": 0.5, "CZ": 0.5, "CRZ": 0.5, "RX": 0.5, "CRX": 0.5, "DIAG1": -1.0, "DIAG2": -1.0}


def _basis_bits(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    return (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1


class _Prim:
    __slots__ = ("kind", "targets", "slot", "angle", "scale", "hfull", "mat")

    def __init__(self, kind, targets, slot, angle, n, bits):
        self.kind = kind
        self.targets = list(targets)
        self.slot = slot
        self.angle = angle
        self.scale = _SCALE.get(kind, 0.0)
        self.hfull = None
        self.mat = None
        if kind in _GEN_DIAG:
            local = _GEN_DIAG[kind]
            sub = np.zeros(2**n, dtype=int)
            for t in self.targets:
                sub = 2 * sub + bits[:, t]
            self.hfull = local[sub]
        elif kind == "H":
            self.mat = qmath.H

    def local_matrix(self, theta: float) -> np.ndarray:
        c, s = np.cos(self.scale * theta), np.sin(self.scale * theta)
        rx = np.array([[c, -1j * s], [-1j * s, c]])
        if self.kind == "RX":
            return rx
        out = np.eye(4, dtype=complex)
        out[2:, 2:] = rx
        return out

    def local_generator(self) -> np.ndarray:
        if self.kind == "RX":
            return qmath.X
        out = np.zeros((4, 4), dtype=complex)
        out[2:, 2:] = qmath.X
        return out


@dataclass
class ParamCircuit:
    """Ordered gate list over ``n_qubits`` with a flat parameter vector."""

    n_qubits: int
    gates: list[GateSpec] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            if any(t >= self.n_qubits for t in g.targets):
                raise ValueError(f"gate {g} exceeds register of {self.n_qubits} qubits")
        self._prims = None

    @property
    def param_count(self) -> int:
        slots = [s for g in self.gates for s in g.slots]
        return 1 + max(slots) if slots else 0

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def _primitives(self) -> list[_Prim]:
        if self._prims is not None:
            return self._prims
        n = self.n_qubits
        bits = _basis_bits(n)
        prims = []
        for g in self.gates:
            if g.kind == "CR":
                c, t = g.targets
                a = g.slots or (None,) * 3
                f = g.angles or (None,) * 3
                # R = Z(a0) X(a1) Z(a2): time order is Z(a2), X(a1), Z(a0)
                for kind, i in (("CRZ", 2), ("CRX", 1), ("CRZ", 0)):
                    prims.append(_Prim(kind, (c, t), a[i], f[i], n, bits))
            else:
                slot = g.slots[0] if g.slots else None
                angle = g.angles[0] if g.angles else None
                prims.append(_Prim(g.kind, g.targets, slot, angle, n, bits))
        self._prims = prims
        return prims

    def _angle(self, p: _Prim, params: np.ndarray) -> float:
        return params[p.slot] if p.slot is not None else p.angle

    def _check(self, params) -> np.ndarray:
        params = np.asarray(params, dtype=float)
        if params.shape != (self.param_count,):
            raise ValueError(f"expected {self.param_count} parameters, got {params.shape}")
        return params

    def unitary(self, params: Sequence[float] | None = None) -> np.ndarray:
        """Ordered product of all gates, the first gate rightmost."""
        params = self._check(np.zeros(self.param_count) if params is None else params)
        n = self.n_qubits
        u = np.eye(self.dim, dtype=complex)
        for p in self._primitives():
            if p.hfull is not None:
                u = np.exp(-1j * p.scale * self._angle(p, params) * p.hfull)[:, None] * u
            elif p.mat is not None:
                u = qmath.apply_left(p.mat, u, p.targets, n)
            else:
                u = qmath.apply_left(p.local_matrix(self._angle(p, params)), u, p.targets, n)
        return u

    def gradient(self, params: Sequence[float], gamma: np.ndarray, u: np.ndarray | None = None) -> np.ndarray:
        """Chain a matrix gradient through the circuit.

        ``gamma`` is the conjugate-Wirtinger gradient of a real cost ``f`` with
        respect to the compiled unitary ``U``, i.e.
        ``df = 2 Re tr(gamma^dagger dU)``.  Returns ``df/dparams``.
        """
        params = self._check(params)
        if u is None:
            u = self.unitary(params)
        n = self.n_qubits
        grad = np.zeros(self.param_count)
        m = u @ gamma.conj().T
        for p in reversed(self._primitives()):
            if p.mat is not None:
                m = qmath.apply_right(qmath.apply_left(p.mat.conj().T, m, p.targets, n), p.mat, p.targets, n)
                continue
            theta = self._angle(p, params)
            if p.hfull is not None:
                if p.slot is not None:
                    grad[p.slot] += 2 * p.scale * np.imag(np.dot(np.diagonal(m), p.hfull))
                g = np.exp(-1j * p.scale * theta * p.hfull)
                m = (g.conj()[:, None] * m) * g[None, :]
            else:
                if p.slot is not None:
                    hm = qmath.apply_left(p.local_generator(), m, p.targets, n)
                    grad[p.slot] += 2 * p.scale * np.imag(np.trace(hm))
                g = p.local_matrix(theta)
                m = qmath.apply_right(qmath.apply_left(g.conj().T, m, p.targets, n), g, p.targets, n)
        return grad

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "gates": [
                {"kind": g.kind, "targets": list(g.targets), "slots": list(g.slots), "angles": list(g.angles)}
                for g in self.gates
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamCircuit":
        gates = [
            GateSpec(g["kind"], tuple(g["targets"]), tuple(g.get("slots", ())), tuple(g.get("angles", ())))
            for g in d["gates"]
        ]
        return cls(int(d["n_qubits"]), gates)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "ParamCircuit":
        return cls.from_dict(json.loads(s))


def compile(circuit: ParamCircuit, params: Sequence[float]) -> np.ndarray:  # noqa: A001
    return circuit.unitary(params)


class _SlotCounter:
    def __init__(self):
        self.next = 0

    def take(self, k: int = 1) -> tuple[int, ...]:
        out = tuple(range(self.next, self.next + k))
        self.next += k
        return out


def _zx_layer(n: int, slots: _SlotCounter) -> list[GateSpec]:
    gates = []
    for q in range(n):
        gates.append(GateSpec("RZ", (q,), slots.take()))
        gates.append(GateSpec("RX", (q,), slots.take()))
    return gates


def build_ansatz_a(n: int, l: int) -> ParamCircuit:
    """Cells of Z/X rotation layers interleaved with adjacent ``CZ_theta`` layers.

    Each cell: rotations, CZ on pairs (0,1),(2,3),..., rotations, CZ on pairs
    (1,2),(3,4),...; a final rotation layer follows the last cell.  The
    parameter count is ``2n + l(5n - 1)``.
    """
    if n < 2:
        raise ValueError("ansatz A needs at least two qubits")
    if l < 0:
        raise ValueError("cell count must be non-negative")
    slots = _SlotCounter()
    gates: list[GateSpec] = []
    for _ in range(l):
        gates += _zx_layer(n, slots)
        gates += [GateSpec("CZ", (q, q + 1), slots.take()) for q in range(0, n - 1, 2)]
        gates += _zx_layer(n, slots)
        gates += [GateSpec("CZ", (q, q + 1), slots.take()) for q in range(1, n - 1, 2)]
    gates += _zx_layer(n, slots)
    return ParamCircuit(n, gates)


def _rotation_layer(n: int, slots: _SlotCounter) -> list[GateSpec]:
    gates = []
    for q in range(n):
        a, b, c = slots.take(3)
        # R = Z(a) X(b) Z(c) applied as Z(c), then X(b), then Z(a)
        gates += [GateSpec("RZ", (q,), (c,)), GateSpec("RX", (q,), (b,)), GateSpec("RZ", (q,), (a,))]
    return gates


def build_ansatz_b(n: int, l: int) -> ParamCircuit:
    """Cells of arbitrary rotations and controlled arbitrary rotations.

    Within a cell, for each control qubit ``i``: a rotation layer on every
    qubit followed by controlled rotations from ``i`` to each other qubit.
    The parameter count is ``3 l n (2n - 1) + 3n``.
    """
    if n < 2:
        raise ValueError("ansatz B needs at least two qubits")
    if l < 0:
        raise ValueError("cell count must be non-negative")
    slots = _SlotCounter()
    gates: list[GateSpec] = []
    for _ in range(l):
        for i in range(n):
            gates += _rotation_layer(n, slots)
            gates += [GateSpec("CR", (i, j), slots.take(3)) for j in range(n) if j != i]
    gates += _rotation_layer(n, slots)
    return ParamCircuit(n, gates)


def build_ansatz(name: str, n: int, l: int) -> ParamCircuit:
    builders = {"A": build_ansatz_a, "B": build_ansatz_b}
    try:
        return builders[name.upper()](n, l)
    except KeyError:
        raise ValueError(f"unknown ansatz {name!r}; expected 'A' or 'B'") from None


def identity_circuit(n: int) -> ParamCircuit:
    return ParamCircuit(n, [])


def circuit_duration(circuit: ParamCircuit, t1q: float, t2q: float) -> float:
    """As-soon-as-possible makespan; gates on disjoint qubits run in parallel."""
    ready = [0.0] * circuit.n_qubits
    for g in circuit.gates:
        dt = t2q if len(g.targets) == 2 else t1q
        start = max(ready[t] for t in g.targets)
        for t in g.targets:
            ready[t] = start + dt
    return max(ready) if circuit.gates else 0.0
