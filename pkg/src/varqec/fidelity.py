"""Average code fidelity of encode -> noise -> recover -> decode schemes.

Two routes compute the same number.  :func:`average_code_fidelity` walks each
design state through the protocol with explicit partial traces and the
Uhlmann fidelity.  :class:`CodeFidelity` batches the design states and also
returns matrix gradients with respect to the encoder ``V`` and recovery
``W``; it is the training cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from . import qmath
from .channels import KrausChannel, as_noise
from .twodesign import TwoDesignSampler, stabilizer_states

SCOPES = ("FULL_REGISTER", "LOGICAL_MARGINAL")


class FitError(RuntimeError):
    """Raised when the effective-T2 fit does not converge."""


@dataclass(frozen=True)
class SchemeLayout:
    """``k`` logical qubits encoded into ``n`` code qubits, with ``r`` refresh qubits."""

    k: int = 1
    n: int = 1
    r: int = 0
    scope: str = "FULL_REGISTER"

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.r < 0:
            raise ValueError("r must be non-negative")
        if self.scope not in SCOPES:
            raise ValueError(f"unknown fidelity scope {self.scope!r}")

    @property
    def code_dim(self) -> int:
        return 2**self.n

    @property
    def total_qubits(self) -> int:
        return self.n + self.r


def design_states(k: int) -> np.ndarray:
    if k != 1:
        raise ValueError("the built-in exact design covers one logical qubit; pass states explicitly")
    return np.array(stabilizer_states())


def _padded(states: np.ndarray, layout: SchemeLayout) -> np.ndarray:
    """``|s> (x) |0^(n-k)>`` for each row ``s``."""
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    if states.shape[1] != 2**layout.k:
        raise ValueError("logical states do not match k")
    pad = np.zeros(2 ** (layout.n - layout.k), dtype=complex)
    pad[0] = 1
    return np.einsum("si,j->sij", states, pad).reshape(len(states), layout.code_dim)


def _check_dims(V, W, layout: SchemeLayout):
    if np.shape(V) != (layout.code_dim,) * 2:
        raise ValueError(f"encoder must act on {layout.n} qubits")
    wdim = W.dim if isinstance(W, KrausChannel) else np.shape(W)[0]
    if wdim != 2**layout.total_qubits:
        raise ValueError(f"recovery must act on {layout.total_qubits} qubits")


def _recover(W, sigma: np.ndarray, layout: SchemeLayout) -> np.ndarray:
    """Adjoin ``|0^r>``, apply the recovery and trace out the refresh qubits."""
    R = 2**layout.r
    D = layout.code_dim
    if isinstance(W, KrausChannel):
        big = np.zeros(sigma.shape[:-2] + (D * R, D * R), dtype=complex)
        big[..., ::R, ::R] = sigma
        out = W(big)
    else:
        w0 = np.asarray(W)[:, ::R]
        out = w0 @ sigma @ qmath.dagger(w0)
    if R == 1:
        return out
    return np.einsum("...arbr->...ab", out.reshape(sigma.shape[:-2] + (D, R, D, R)))


def average_code_fidelity(
    V: np.ndarray,
    W: np.ndarray | KrausChannel,
    noise,
    layout: SchemeLayout,
    states: Sequence[np.ndarray] | None = None,
) -> float:
    """Mean fidelity over design states of ``V^dag Tr_R[W (N(V rho V^dag) x |0><0|) W^dag] V``.

    ``noise`` may be a single-qubit :class:`KrausChannel` (applied to every code
    qubit), an ``(channel, targets)`` pair, an ``IndependentNoise`` or
    ``RegisterNoise`` instance, or ``None``.  ``W`` is a unitary on ``n + r``
    qubits or a channel.
    """
    V = np.asarray(V, dtype=complex)
    _check_dims(V, W, layout)
    noise = as_noise(noise, layout.n)
    logical = design_states(layout.k) if states is None else np.asarray(states, dtype=complex)
    n, k = layout.n, layout.k
    fids = []
    for s, psi in zip(logical, _padded(logical, layout)):
        rho = qmath.projector(psi)
        sigma = noise.apply(V @ rho @ V.conj().T, n)
        ref = np.zeros((2**layout.r,) * 2, dtype=complex)
        ref[0, 0] = 1
        big = qmath.tensor(sigma, ref) if layout.r else sigma
        if isinstance(W, KrausChannel):
            big = W(big)
        else:
            big = W @ big @ W.conj().T
        out = qmath.partial_trace(big, range(n), layout.total_qubits) if layout.r else big
        out = V.conj().T @ out @ V
        if layout.scope == "FULL_REGISTER":
            fids.append(qmath.fidelity(rho, out))
        else:
            reduced = qmath.partial_trace(out, range(k), n) if n > k else out
            fids.append(qmath.fidelity(qmath.projector(s), reduced))
    return float(np.mean(fids))


class CodeFidelity:
    """Batched average code fidelity with gradients in ``V`` and ``W``.

    Gradients are conjugate-Wirtinger matrices ``G`` such that
    ``dF = 2 Re tr(G_V^dag dV) + 2 Re tr(G_W^dag dW)``.
    """

    def __init__(self, layout: SchemeLayout, noise, states: np.ndarray | None = None):
        self.layout = layout
        self.noise = as_noise(noise, layout.n)
        logical = design_states(layout.k) if states is None else np.atleast_2d(states)
        psi = _padded(logical, layout)
        self.rho = qmath.projector(psi)
        if layout.scope == "FULL_REGISTER":
            self.target = self.rho
        else:
            rest = np.eye(2 ** (layout.n - layout.k))
            self.target = np.array([np.kron(qmath.projector(s), rest) for s in logical])

    def per_state(self, V: np.ndarray, W: np.ndarray | KrausChannel) -> np.ndarray:
        V = np.asarray(V, dtype=complex)
        sigma = self.noise.apply(V @ self.rho @ V.conj().T, self.layout.n)
        tau = _recover(W, sigma, self.layout)
        q = V @ self.target @ V.conj().T
        return np.real(np.einsum("sab,sba->s", q, tau))

    def value(self, V: np.ndarray, W: np.ndarray | KrausChannel) -> float:
        return float(np.mean(self.per_state(V, W)))

    def value_and_grad(self, V: np.ndarray, W: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        lay = self.layout
        D, R = lay.code_dim, 2**lay.r
        S = len(self.rho)
        V = np.asarray(V, dtype=complex)
        W = np.asarray(W, dtype=complex)
        vrho = V @ self.rho
        sigma = self.noise.apply(vrho @ V.conj().T, lay.n)
        w0 = W[:, ::R]
        c = w0 @ sigma @ w0.conj().T
        tau = np.einsum("sarbr->sab", c.reshape(S, D, R, D, R)) if R > 1 else c
        vt = V @ self.target
        q = vt @ V.conj().T
        fid = float(np.mean(np.real(np.einsum("sab,sba->s", q, tau))))
        # (Q x I_R) W0, rows indexed by (code, refresh)
        qw0 = np.einsum("sab,brc->sarc", q, w0.reshape(D, R, D)).reshape(S, D * R, D)
        gw = np.zeros((D * R, D * R), dtype=complex)
        gw[:, ::R] = np.mean(qw0 @ sigma, axis=0)
        y = w0.conj().T @ qw0
        z = self.noise.adjoint(y, lay.n)
        gv = np.mean(tau @ vt + z @ vrho, axis=0)
        return fid, gv, gw


def code_fidelity_grad_params(cost: CodeFidelity, enc, dec, params: np.ndarray) -> tuple[float, np.ndarray]:
    """Fidelity and its gradient with respect to the concatenated ``(p, q)`` vector."""
    pv = params[: enc.param_count]
    pw = params[enc.param_count :]
    V = enc.unitary(pv)
    W = dec.unitary(pw)
    f, gv, gw = cost.value_and_grad(V, W)
    return f, np.concatenate([enc.gradient(pv, gv, V), dec.gradient(pw, gw, W)])


def repeated_recovery_fidelity(
    V: np.ndarray,
    W: np.ndarray | KrausChannel,
    noise,
    layout: SchemeLayout,
    M: int,
    states: np.ndarray | None = None,
) -> np.ndarray:
    """Average fidelity after each of ``M`` noise-plus-recovery cycles.

    Fresh ``|0^r>`` refresh qubits are adjoined before every recovery.
    Entry ``m - 1`` is the fidelity after ``m`` cycles.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    cost = CodeFidelity(layout, noise, states)
    V = np.asarray(V, dtype=complex)
    rho = V @ cost.rho @ V.conj().T
    q = V @ cost.target @ V.conj().T
    out = np.empty(M)
    for m in range(M):
        rho = _recover(W, cost.noise.apply(rho, layout.n), layout)
        out[m] = np.mean(np.real(np.einsum("sab,sba->s", q, rho)))
    return out


def _unique_rows(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    keys = np.round(np.concatenate([states.real, states.imag], axis=1), 10)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return states[first], inverse.ravel()


def shot_estimate(
    V: np.ndarray,
    W: np.ndarray | KrausChannel,
    noise,
    layout: SchemeLayout,
    sampler: TwoDesignSampler,
    N: int,
    rng: np.random.Generator,
) -> float:
    """Fraction of all-zero outcomes over ``N`` single-shot trials.

    Each trial draws ``S`` from ``sampler``, runs ``S^dag V^dag W N V S`` on
    ``|0...0>`` and records one Bernoulli outcome with the exact all-zero
    probability.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if sampler.k != layout.k:
        raise ValueError("sampler and layout disagree on k")
    prepared = sampler.sample_states(N)
    unique, inverse = _unique_rows(prepared)
    q = CodeFidelity(layout, noise, unique).per_state(V, W)
    hits = rng.random(N) < np.clip(q, 0, 1)[inverse]
    return float(np.mean(hits))


def _decay(m, a, b, t2, t_step):
    return a + b * np.exp(-m * t_step / t2)


def fit_effective_t2(series, t_step: float) -> float:
    """Fit ``F(M) = A + B exp(-M t_step / T2eff)`` and return ``T2eff`` in seconds.

    ``series`` is a sequence of ``(M, F)`` pairs.
    """
    arr = np.asarray(series, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise ValueError("need at least three (M, F) points")
    m, f = arr[:, 0], arr[:, 1]
    a0 = float(np.min(f))
    b0 = float(f[0] - a0)
    d1, d2 = f[0] - a0, f[1] - a0
    if d1 > 0 and d2 > 0 and d1 != d2:
        t0 = (m[1] - m[0]) * t_step / math.log(d1 / d2)
    else:
        t0 = (m[-1] - m[0]) * t_step
    if not np.isfinite(t0) or t0 <= 0:
        t0 = (m[-1] - m[0]) * t_step
    # fit in units of t_step so the parameters are comparable in size
    model = lambda mm, a, b, tau: _decay(mm, a, b, tau, 1.0)  # noqa: E731
    try:
        popt, _ = curve_fit(model, m, f, p0=(a0, b0, t0 / t_step), maxfev=20000)
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"effective-T2 fit failed: {exc}") from exc
    tau = popt[2]
    if not np.isfinite(tau) or tau <= 0:
        raise FitError(f"effective-T2 fit returned a non-physical time constant {tau}")
    return float(tau * t_step)


def series_rows(fids: np.ndarray, t_step: float) -> list[tuple[int, float, float]]:
    """CSV rows ``(M, t_us, F)``."""
    return [(m + 1, (m + 1) * t_step * 1e6, float(f)) for m, f in enumerate(fids)]
