"""Training loop: finite differences, L-BFGS, SPSA and multi-start restarts."""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .circuits import ParamCircuit
from .fidelity import CodeFidelity, SchemeLayout, average_code_fidelity, code_fidelity_grad_params, shot_estimate
from .twodesign import TwoDesignSampler

log = logging.getLogger(__name__)

METHODS = ("LBFGS", "SPSA")
GRADIENTS = ("adjoint", "fd")
COSTS = ("exact", "shots")
WORKERS_ENV = "VARQEC_WORKERS"


class OptimizationError(RuntimeError):
    """Raised when a cost evaluation is not finite or every restart fails."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for :func:`train_qvector` and the individual optimisers.

    ``gradient`` selects the analytic adjoint gradient or central finite
    differences with step ``fd_step``; ``cost`` selects the exact six-state
    average or the shot-based estimator with ``shots`` samples.
    """

    method: str = "LBFGS"
    fd_step: float = 1e-6
    max_iters: int = 500
    grad_tol: float = 1e-8
    lbfgs_memory: int = 10
    spsa_a: float = 1.0
    spsa_c: float = 0.1
    spsa_A: float = 50.0
    spsa_alpha: float = 0.602
    spsa_gamma: float = 0.101
    restarts: int = 12
    init_candidates: int = 100
    seed: int = 0
    gradient: str = "adjoint"
    cost: str = "exact"
    shots: int = 1000

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"optimizer.method must be one of {METHODS}, got {self.method!r}")
        if self.gradient not in GRADIENTS:
            raise ValueError(f"optimizer.gradient must be one of {GRADIENTS}, got {self.gradient!r}")
        if self.cost not in COSTS:
            raise ValueError(f"optimizer.cost must be one of {COSTS}, got {self.cost!r}")
        if not self.fd_step > 0:
            raise ValueError("optimizer.fd_step must be positive")
        if self.restarts < 1:
            raise ValueError("optimizer.restarts must be at least 1")
        if self.init_candidates < 1:
            raise ValueError("optimizer.init_candidates must be at least 1")
        if self.max_iters < 0:
            raise ValueError("optimizer.max_iters must be non-negative")
        if self.shots < 1:
            raise ValueError("optimizer.shots must be positive")

    @classmethod
    def from_config(cls, d: dict) -> "OptimizerConfig":
        names = {f.name for f in fields(cls)}
        for key in d:
            if key not in names:
                raise KeyError(f"optimizer.{key}")
        return cls(**d)

    def to_config(self) -> dict:
        return asdict(self)


def _finite(value: float, where: str) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise OptimizationError(f"non-finite cost {value!r} during {where}")
    return value


def fd_gradient(f: Callable[[np.ndarray], float], x, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient ``(f(x + h e_i) - f(x - h e_i)) / 2h``."""
    if not h > 0:
        raise ValueError("step h must be positive")
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    e = np.zeros_like(x)
    for i in range(x.size):
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
        e[i] = 0.0
    return g


def lbfgs_maximize(f, x0, cfg: OptimizerConfig | None = None, grad=None):
    """Maximise ``f`` with limited-memory BFGS.

    ``grad`` may be a callable returning the gradient, or ``None`` to use
    :func:`fd_gradient` with ``cfg.fd_step``.  Returns ``(x, f(x), trace)``
    where ``trace`` lists the cost after each accepted iteration.
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    x0 = np.asarray(x0, dtype=float)
    f0 = _finite(f(x0), "initial evaluation")
    if grad is None:
        grad = lambda x: fd_gradient(f, x, cfg.fd_step)  # noqa: E731

    def neg(x):
        return -_finite(f(x), "L-BFGS"), -np.asarray(grad(x), dtype=float)

    trace = [f0]
    if cfg.max_iters == 0:
        return x0.copy(), f0, trace
    res = minimize(
        neg,
        x0,
        jac=True,
        method="L-BFGS-B",
        callback=lambda xk: trace.append(float(f(xk))),
        options={"maxcor": cfg.lbfgs_memory, "maxiter": cfg.max_iters, "gtol": cfg.grad_tol, "ftol": 0.0},
    )
    x, fx = res.x, -float(res.fun)
    if fx < f0:
        x, fx = x0.copy(), f0
    log.debug("L-BFGS stopped after %d iterations: %s", res.nit, res.message)
    return x, fx, trace


def spsa_maximize(f, x0, cfg: OptimizerConfig | None = None, rng: np.random.Generator | None = None):
    """Simultaneous-perturbation ascent with the usual power-law gain schedules.

    Each iteration spends two evaluations of ``f`` on a Rademacher
    perturbation.  Returns ``(x, f(x), trace)``.
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    x = np.asarray(x0, dtype=float).copy()
    trace = [_finite(f(x), "initial evaluation")]
    for k in range(cfg.max_iters):
        ak = cfg.spsa_a / (k + 1 + cfg.spsa_A) ** cfg.spsa_alpha
        ck = cfg.spsa_c / (k + 1) ** cfg.spsa_gamma
        delta = rng.choice((-1.0, 1.0), size=x.size)
        fp = _finite(f(x + ck * delta), "SPSA")
        fm = _finite(f(x - ck * delta), "SPSA")
        x = x + ak * (fp - fm) / (2 * ck) * delta
        trace.append(0.5 * (fp + fm))
    return x, _finite(f(x), "final evaluation"), trace


def multistart_init(f, count: int, rng: np.random.Generator, dim: int | None = None, return_values: bool = False):
    """Best of ``count`` uniform draws from ``[0, 4 pi)^dim`` under ``f``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    if dim is None:
        raise ValueError("dim is required")
    cands = rng.uniform(0.0, 4 * np.pi, size=(count, dim))
    values = np.array([f(c) for c in cands])
    best = cands[int(np.argmax(values))]
    return (best, values) if return_values else best


@dataclass
class TrainingResult:
    """Best parameters over all restarts plus a per-restart table."""

    best_params_V: np.ndarray
    best_params_W: np.ndarray
    best_fidelity: float
    restarts: list[dict] = field(default_factory=list)
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "best_params_V": [float(v) for v in self.best_params_V],
            "best_params_W": [float(v) for v in self.best_params_W],
            "best_fidelity": float(self.best_fidelity),
            "restarts": self.restarts,
            "config": self.config,
        }
        if timing:
            d["wall_time"] = self.wall_time
        return d

    def to_json(self, timing: bool = False) -> str:
        """JSON text; wall time is left out unless asked for so reruns are byte-identical."""
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingResult":
        return cls(
            np.array(d["best_params_V"], dtype=float),
            np.array(d["best_params_W"], dtype=float),
            float(d["best_fidelity"]),
            list(d.get("restarts", [])),
            float(d.get("wall_time", 0.0)),
            dict(d.get("config", {})),
        )

    @classmethod
    def from_json(cls, s: str) -> "TrainingResult":
        return cls.from_dict(json.loads(s))

    def save(self, path) -> None:
        with open(path, "x", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "TrainingResult":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class _Problem:
    encoder: ParamCircuit
    decoder: ParamCircuit
    layout: SchemeLayout
    noise: object
    cfg: OptimizerConfig
    states: np.ndarray | None = None

    def split(self, x):
        return x[: self.encoder.param_count], x[self.encoder.param_count :]


def _exact_cost(prob: _Problem):
    cost = CodeFidelity(prob.layout, prob.noise, prob.states)

    def f(x):
        pv, pw = prob.split(x)
        return cost.value(prob.encoder.unitary(pv), prob.decoder.unitary(pw))

    def fg(x):
        return code_fidelity_grad_params(cost, prob.encoder, prob.decoder, x)[1]

    return f, fg


def _run_restart(prob: _Problem, seed: int) -> dict:
    cfg = prob.cfg
    rng = np.random.default_rng(seed)
    exact, exact_grad = _exact_cost(prob)
    dim = prob.encoder.param_count + prob.decoder.param_count
    x0, values = multistart_init(exact, cfg.init_candidates, rng, dim, return_values=True)
    init_f = float(values.max())
    if cfg.cost == "shots":
        sampler = TwoDesignSampler("stabilizer", prob.layout.k, seed=int(rng.integers(2**63)))

        def objective(x):
            pv, pw = prob.split(x)
            V, W = prob.encoder.unitary(pv), prob.decoder.unitary(pw)
            return shot_estimate(V, W, prob.noise, prob.layout, sampler, cfg.shots, rng)

    else:
        objective = exact
    grad = exact_grad if (cfg.gradient == "adjoint" and cfg.cost == "exact") else None
    if cfg.method == "LBFGS":
        x, _, trace = lbfgs_maximize(objective, x0, cfg, grad=grad)
    else:
        x, _, trace = spsa_maximize(objective, x0, cfg, rng)
    final = exact(x)
    if final < init_f:
        x, final = x0, init_f
    return {
        "seed": int(seed),
        "init_fidelity": init_f,
        "final_fidelity": float(final),
        "iterations": len(trace) - 1,
        "params": x,
    }


def _safe_restart(args):
    prob, seed = args
    try:
        return _run_restart(prob, seed)
    except (OptimizationError, np.linalg.LinAlgError) as exc:
        log.warning("restart with seed %d failed: %s", seed, exc)
        return {"seed": int(seed), "error": str(exc)}


def restart_seeds(seed: int, count: int) -> list[int]:
    """Independent per-restart seeds derived from one master seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count, np.uint64)]


def _workers(requested: int | None) -> int:
    if requested is not None:
        return max(1, requested)
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def train_qvector(
    encoder: ParamCircuit,
    decoder: ParamCircuit,
    layout: SchemeLayout,
    noise,
    cfg: OptimizerConfig | None = None,
    states: np.ndarray | None = None,
    workers: int | None = None,
    config_echo: dict | None = None,
) -> TrainingResult:
    """Train encoder and decoder circuits jointly, keeping the best of ``cfg.restarts`` runs.

    Each restart draws ``cfg.init_candidates`` uniform parameter vectors,
    starts from the best one and runs the configured optimiser on the
    concatenated ``(p, q)`` vector.  Restarts may run in ``workers`` processes
    (default from the ``VARQEC_WORKERS`` environment variable); results do not
    depend on the worker count.
    """
    cfg = OptimizerConfig() if cfg is None else cfg
    if encoder.n_qubits != layout.n:
        raise ValueError(f"encoder acts on {encoder.n_qubits} qubits, layout has n={layout.n}")
    if decoder.n_qubits != layout.total_qubits:
        raise ValueError(f"decoder acts on {decoder.n_qubits} qubits, expected {layout.total_qubits}")
    prob = _Problem(encoder, decoder, layout, noise, cfg, states)
    seeds = restart_seeds(cfg.seed, cfg.restarts)
    t0 = time.perf_counter()
    nw = _workers(workers)
    if nw > 1:
        with ProcessPoolExecutor(nw) as pool:
            runs = list(pool.map(_safe_restart, [(prob, s) for s in seeds]))
    else:
        runs = [_safe_restart((prob, s)) for s in seeds]
    ok = [r for r in runs if "error" not in r]
    if not ok:
        raise OptimizationError("all restarts failed: " + "; ".join(r["error"] for r in runs))
    best = max(ok, key=lambda r: r["final_fidelity"])
    pv, pw = prob.split(best["params"])
    fid = average_code_fidelity(encoder.unitary(pv), decoder.unitary(pw), noise, layout, states)
    table = [{k: v for k, v in r.items() if k != "params"} for r in runs]
    return TrainingResult(pv.copy(), pw.copy(), float(fid), table, time.perf_counter() - t0, dict(config_echo or {}))
