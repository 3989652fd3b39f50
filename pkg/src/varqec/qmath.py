"""Dense linear algebra over qubit registers.

Qubit 0 is the most significant bit of a basis index, so a state vector of
``n`` qubits reshaped to ``(2,) * n`` has qubit ``q`` on axis ``q``.  Every
helper here accepts arbitrary leading batch dimensions.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}


def num_qubits(dim: int) -> int:
    """Return ``log2(dim)``, raising if ``dim`` is not a power of two."""
    n = int(dim).bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _check_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError(f"repeated target index in {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise ValueError(f"target {t} out of range for {n} qubits")
    return targets


def _contract(op: np.ndarray, t: np.ndarray, axes: list[int]) -> np.ndarray:
    """Contract a ``2^m`` operator into ``m`` tensor axes of ``t``."""
    m = len(axes)
    opt = op.reshape((2,) * (2 * m))
    out = np.tensordot(opt, t, axes=(list(range(m, 2 * m)), axes))
    return np.moveaxis(out, list(range(m)), axes)


def apply_to_state(op: np.ndarray, psi: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply ``op`` on ``targets`` to state vectors of shape ``(..., 2^n)``."""
    targets = _check_targets(targets, n)
    psi = np.asarray(psi)
    batch = psi.shape[:-1]
    nb = len(batch)
    t = psi.reshape(batch + (2,) * n)
    out = _contract(np.asarray(op), t, [nb + q for q in targets])
    return out.reshape(psi.shape)


def apply_left(op: np.ndarray, mat: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Return ``(op on targets) @ mat`` for ``mat`` of shape ``(..., 2^n, m)``."""
    mat = np.asarray(mat)
    batch = mat.shape[:-2]
    nb = len(batch)
    t = mat.reshape(batch + (2,) * n + mat.shape[-1:])
    out = _contract(np.asarray(op), t, [nb + q for q in targets])
    return out.reshape(mat.shape)


def apply_right(mat: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Return ``mat @ (op on targets)`` for ``mat`` of shape ``(..., m, 2^n)``."""
    mat = np.asarray(mat)
    batch = mat.shape[:-2]
    nb = len(batch)
    t = mat.reshape(batch + mat.shape[-2:-1] + (2,) * n)
    # (mat @ op)[a, b] = sum_c mat[a, c] op[c, b]  ->  contract op^T into column axes
    out = _contract(np.asarray(op).T, t, [nb + 1 + q for q in targets])
    return out.reshape(mat.shape)


def conjugate(op: np.ndarray, rho: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Return ``K rho K^dagger`` with ``K`` acting on ``targets``."""
    op = np.asarray(op)
    return apply_right(apply_left(op, rho, targets, n), op.conj().T, targets, n)


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with ``a`` on the more significant qubits."""
    a = np.asarray(a)
    b = np.asarray(b)
    for m in (a, b):
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("tensor operands must be square matrices")
        num_qubits(m.shape[0])
    return np.kron(a, b)


def tensor_all(*ops: np.ndarray) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = tensor(out, op)
    return out


def embed(op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Lift ``op`` acting on ``targets`` (in the listed order) to ``n`` qubits."""
    op = np.asarray(op, dtype=complex)
    targets = _check_targets(targets, n)
    if op.shape != (2 ** len(targets),) * 2:
        raise ValueError(f"operator of shape {op.shape} does not match {len(targets)} targets")
    return apply_left(op, np.eye(2**n, dtype=complex), targets, n)


def ket(bits: str | Sequence[int]) -> np.ndarray:
    """Computational basis vector, e.g. ``ket("010")``."""
    bits = [int(b) for b in bits]
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int("".join(map(str, bits)) or "0", 2)] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.einsum("...i,...j->...ij", psi, psi.conj())


def dagger(m: np.ndarray) -> np.ndarray:
    return np.swapaxes(np.asarray(m), -1, -2).conj()


def partial_trace(rho: np.ndarray, keep: Sequence[int], n: int | None = None) -> np.ndarray:
    """Trace out every qubit not in ``keep``.

    The kept qubits appear in ascending order of their original index.
    Leading batch dimensions are preserved.
    """
    rho = np.asarray(rho)
    if n is None:
        n = num_qubits(rho.shape[-1])
    keep = sorted(_check_targets(keep, n))
    if not keep:
        raise ValueError("keep list must not be empty")
    batch = rho.shape[:-2]
    nb = len(batch)
    t = rho.reshape(batch + (2,) * (2 * n))
    # einsum letters: batch, row qubits, column qubits
    letters = iter("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ")
    bl = [next(letters) for _ in range(nb)]
    rows = [next(letters) for _ in range(n)]
    cols = [rows[q] if q not in keep else next(letters) for q in range(n)]
    out = bl + [rows[q] for q in keep] + [cols[q] for q in keep]
    expr = "".join(bl + rows + cols) + "->" + "".join(out)
    dk = 2 ** len(keep)
    return np.einsum(expr, t).reshape(batch + (dk, dk))


def is_density_matrix(rho: np.ndarray, atol: float = 1e-10) -> bool:
    rho = np.asarray(rho)
    if abs(np.trace(rho) - 1) > atol:
        return False
    if not np.allclose(rho, rho.conj().T, atol=atol, rtol=0):
        return False
    return bool(np.linalg.eigvalsh(rho).min() >= -atol)


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return bool(np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=atol, rtol=0))


def _pure_vector(rho: np.ndarray, atol: float) -> np.ndarray | None:
    """Return ``psi`` with ``rho = |psi><psi|`` if ``rho`` is rank one."""
    purity = np.real(np.vdot(rho, rho))
    if abs(purity - 1) > atol or abs(np.trace(rho) - 1) > atol:
        return None
    j = int(np.argmax(np.real(np.diag(rho))))
    psi = rho[:, j] / np.sqrt(np.real(rho[j, j]))
    if not np.allclose(np.outer(psi, psi.conj()), rho, atol=atol, rtol=0):
        return None
    return psi


def _psd_eig(m: np.ndarray, atol: float) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    if w.min() < -atol:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w.min():.3e})")
    return np.clip(w, 0, None), v


def fidelity(rho: np.ndarray, sigma: np.ndarray, atol: float = 1e-10) -> float:
    """Uhlmann fidelity ``tr(sqrt(sqrt(sigma) rho sqrt(sigma)))**2``.

    Rank-one inputs take the ``<psi|sigma|psi>`` shortcut.
    """
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValueError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    ws, vs = _psd_eig(sigma, atol)
    wr, _ = _psd_eig(rho, atol)
    for a, b in ((rho, sigma), (sigma, rho)):
        psi = _pure_vector(a, atol)
        if psi is not None:
            return float(np.clip(np.real(psi.conj() @ b @ psi), 0.0, 1.0))
    sq = (vs * np.sqrt(ws)) @ vs.conj().T
    w = np.linalg.eigvalsh(sq @ rho @ sq)
    return float(np.clip(np.sum(np.sqrt(np.clip(w, 0, None))) ** 2, 0.0, 1.0))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase fix."""
    g = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)
