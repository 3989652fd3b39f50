"""Config-driven experiments and the ``varqec`` command line."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .baselines import alternating_baseline, five_qubit_code, no_encoding_fidelity, three_qubit_phase_code
from .channels import NoiseSpec
from .circuits import ParamCircuit, build_ansatz
from .fidelity import (
    CodeFidelity,
    FitError,
    SchemeLayout,
    average_code_fidelity,
    code_fidelity_grad_params,
    fit_effective_t2,
    repeated_recovery_fidelity,
)
from .optimize import OptimizerConfig, TrainingResult, lbfgs_maximize, train_qvector
from .twodesign import bias_bound

log = logging.getLogger(__name__)

EXPERIMENTS = ("PD_MEMORY", "APD_SWEEP", "PTA_TABLE", "TRAIN", "EVALUATE", "BIAS_BOUND")
DEFAULT_WAITS_US = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0)


class ConfigError(ValueError):
    """Malformed configuration; ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class AlternatingConfig:
    iters: int = 300
    restarts: int = 2
    inner: int = 5
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved experiment description.

    Times in the config file are in microseconds; ``raw`` keeps the parsed
    table so it can be echoed into every output.
    """

    experiment: str = "TRAIN"
    seed: int = 0
    layout: SchemeLayout = field(default_factory=SchemeLayout)
    encoder: str = "A"
    decoder: str = "A"
    l_V: int = 1
    l_W: int = 1
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    bare_noise: NoiseSpec | None = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    alternating: AlternatingConfig = field(default_factory=AlternatingConfig)
    wait_times_us: tuple[float, ...] = DEFAULT_WAITS_US
    warm_iters: int = 200
    M_max: int = 300
    trained: Path | None = None
    raw: dict = field(default_factory=dict)

    def encoder_circuit(self) -> ParamCircuit:
        return build_ansatz(self.encoder, self.layout.n, self.l_V)

    def decoder_circuit(self) -> ParamCircuit:
        return build_ansatz(self.decoder, self.layout.total_qubits, self.l_W)

    def echo(self) -> dict:
        d = json.loads(json.dumps(self.raw, default=str))
        d["seed"] = self.seed
        d.setdefault("optimizer", {})["seed"] = self.optimizer.seed
        return d


_TOP_KEYS = {
    "experiment", "seed", "layout", "ansatz", "noise", "bare_noise", "optimizer",
    "alternating", "sweep", "memory", "trained",
}


def _section(raw: dict, name: str, allowed: set[str]) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(name, "expected a table")
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}", "unknown key")
    return sec


def _build(fn, key: str, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except KeyError as exc:
        raise ConfigError(str(exc.args[0]), "unknown key") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, str(exc)) from None


def parse_config(raw: dict, base_dir: Path | None = None, seed: int | None = None) -> ExperimentConfig:
    """Validate a parsed config table; ``seed`` overrides the file's seed."""
    for key in raw:
        if key not in _TOP_KEYS:
            raise ConfigError(key, "unknown key")
    raw = json.loads(json.dumps(raw))
    experiment = str(raw.get("experiment", "TRAIN")).upper()
    if experiment not in EXPERIMENTS:
        raise ConfigError("experiment", f"expected one of {EXPERIMENTS}")
    if seed is not None:
        raw["seed"] = seed
    try:
        top_seed = int(raw.get("seed", 0))
    except (TypeError, ValueError):
        raise ConfigError("seed", "expected an integer") from None
    if not 0 <= top_seed < 2**64:
        raise ConfigError("seed", "expected an unsigned 64-bit integer")

    lay = _section(raw, "layout", {"k", "n", "r", "scope"})
    layout = _build(SchemeLayout, "layout", int(lay.get("k", 1)), int(lay.get("n", 1)), int(lay.get("r", 0)),
                    str(lay.get("scope", "FULL_REGISTER")).upper())
    ans = _section(raw, "ansatz", {"encoder", "decoder", "l_V", "l_W"})
    noise = _build(NoiseSpec.from_config, "noise", _section(raw, "noise", set(_NOISE_KEYS)))
    bare = None
    if "bare_noise" in raw:
        sec = raw["bare_noise"]
        try:
            bare = NoiseSpec.from_config(sec)
        except KeyError as exc:
            raise ConfigError("bare_" + str(exc.args[0]), "unknown key") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError("bare_noise", str(exc)) from None
    opt = dict(_section(raw, "optimizer", set(OptimizerConfig.__dataclass_fields__)))
    if "seed" not in opt:
        opt["seed"] = top_seed
    optimizer = _build(OptimizerConfig.from_config, "optimizer", opt)
    alt = _section(raw, "alternating", set(AlternatingConfig.__dataclass_fields__))
    alternating = AlternatingConfig(**{k: int(v) for k, v in alt.items()})
    sweep = _section(raw, "sweep", {"wait_times_us", "warm_iters"})
    mem = _section(raw, "memory", {"M_max"})
    trained = raw.get("trained")
    if trained is not None:
        trained = Path(trained)
        if not trained.is_absolute() and base_dir is not None:
            trained = base_dir / trained
    for name in ("encoder", "decoder"):
        if str(ans.get(name, "A")).upper() not in ("A", "B"):
            raise ConfigError(f"ansatz.{name}", "expected 'A' or 'B'")
    cfg = ExperimentConfig(
        experiment=experiment,
        seed=top_seed,
        layout=layout,
        encoder=str(ans.get("encoder", "A")).upper(),
        decoder=str(ans.get("decoder", "A")).upper(),
        l_V=int(ans.get("l_V", 1)),
        l_W=int(ans.get("l_W", 1)),
        noise=noise,
        bare_noise=bare,
        optimizer=optimizer,
        alternating=alternating,
        wait_times_us=tuple(float(t) for t in sweep.get("wait_times_us", DEFAULT_WAITS_US)),
        warm_iters=int(sweep.get("warm_iters", 200)),
        M_max=int(mem.get("M_max", 300)),
        trained=trained,
        raw=raw,
    )
    if cfg.M_max < 1:
        raise ConfigError("memory.M_max", "must be at least 1")
    if cfg.l_V < 0 or cfg.l_W < 0:
        raise ConfigError("ansatz", "cell counts must be non-negative")
    return cfg


_NOISE_KEYS = ("kind", "t_step_us", "T1_us", "T2_us", "p", "targets")


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"cannot parse {path}: {exc}") from None
    return parse_config(raw, path.parent, seed)


def bundled_config(name: str) -> Path:
    """Path of a config shipped with the package, e.g. ``"pd.toml"``."""
    return Path(str(resources.files("varqec") / "data" / name))


# ----------------------------------------------------------------------------
# results


@dataclass
class ResultRecord:
    config: dict
    rows: list[dict]
    summary: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    version: str = __version__

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "rows": self.rows,
                "summary": self.summary,
                "started": self.started,
                "finished": self.finished,
                "version": self.version,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def make_output_dir(out) -> Path:
    """Create ``out``; refuse to reuse an existing directory."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=False)
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "x", encoding="utf-8") as fh:
        fh.write(text)


# ----------------------------------------------------------------------------
# experiments


def load_trained(cfg: ExperimentConfig, path=None) -> TrainingResult:
    path = cfg.trained if path is None else Path(path)
    if path is None:
        raise FileNotFoundError("no trained parameters given; pass --load or set 'trained' in the config")
    res = TrainingResult.load(path)
    enc, dec = cfg.encoder_circuit(), cfg.decoder_circuit()
    if res.best_params_V.size != enc.param_count or res.best_params_W.size != dec.param_count:
        raise ValueError(f"{path}: parameter counts do not match the configured ansatz")
    return res


def run_train(cfg: ExperimentConfig) -> TrainingResult:
    enc, dec = cfg.encoder_circuit(), cfg.decoder_circuit()
    noise = cfg.noise.noise(cfg.layout.n)
    return train_qvector(enc, dec, cfg.layout, noise, cfg.optimizer, config_echo=cfg.echo())


def scheme_unitaries(cfg: ExperimentConfig, trained: TrainingResult):
    return cfg.encoder_circuit().unitary(trained.best_params_V), cfg.decoder_circuit().unitary(trained.best_params_W)


def evaluate_trained(cfg: ExperimentConfig, trained: TrainingResult, noise: NoiseSpec | None = None) -> float:
    V, W = scheme_unitaries(cfg, trained)
    spec = cfg.noise if noise is None else noise
    return average_code_fidelity(V, W, spec.noise(cfg.layout.n), cfg.layout)


def _t2_or_nan(series: np.ndarray, t_step: float) -> float:
    m = np.arange(1, len(series) + 1)
    try:
        return fit_effective_t2(np.column_stack([m, series]), t_step)
    except FitError as exc:
        log.warning("%s", exc)
        return math.nan


def run_pd_memory(cfg: ExperimentConfig, trained: TrainingResult | None = None) -> tuple[ResultRecord, str]:
    """Repeated-recovery memory: trained scheme, optimal phase code and a bare qubit.

    Returns the record and the CSV text with columns
    ``M, t_us, F_qvector, F_optimal, F_bare``.
    """
    started = _now()
    if trained is None:
        trained = load_trained(cfg) if cfg.trained is not None else run_train(cfg)
    t_step = cfg.noise.t_step
    if not t_step:
        raise ConfigError("noise.t_step_us", "the memory experiment needs a step duration")
    V, W = scheme_unitaries(cfg, trained)
    noise = cfg.noise.noise(cfg.layout.n)
    f_q = repeated_recovery_fidelity(V, W, noise, cfg.layout, cfg.M_max)
    code = three_qubit_phase_code()
    f_opt = repeated_recovery_fidelity(code.encoder, code.recovery, cfg.noise.noise(3), code.layout, cfg.M_max)
    bare_spec = cfg.bare_noise if cfg.bare_noise is not None else cfg.noise
    lay1 = SchemeLayout(1, 1, 0)
    f_bare = repeated_recovery_fidelity(np.eye(2), np.eye(2), bare_spec.noise(1), lay1, cfg.M_max)
    rows = [
        {"M": m + 1, "t_us": (m + 1) * t_step * 1e6, "F_qvector": f_q[m], "F_optimal": f_opt[m], "F_bare": f_bare[m]}
        for m in range(cfg.M_max)
    ]
    summary = {
        "best_fidelity": trained.best_fidelity,
        "T2eff_us": {
            "qvector": _t2_or_nan(f_q, t_step) * 1e6,
            "optimal": _t2_or_nan(f_opt, t_step) * 1e6,
            "bare": _t2_or_nan(f_bare, t_step) * 1e6,
        },
    }
    csv_text = rows_to_csv(rows, ["M", "t_us", "F_qvector", "F_optimal", "F_bare"])
    rec = ResultRecord(cfg.echo(), [{k: float(v) for k, v in r.items()} for r in rows], summary, started, _now())
    return rec, csv_text


def _alternating_best(channel, cfg: ExperimentConfig, n: int) -> float:
    alt = cfg.alternating
    rng = np.random.default_rng(alt.seed)
    return alternating_baseline(channel, n, cfg.layout.k, alt.iters, alt.restarts, rng, alt.inner).fidelity


def _warm_start(cfg: ExperimentConfig, trained: TrainingResult, spec: NoiseSpec) -> float:
    enc, dec = cfg.encoder_circuit(), cfg.decoder_circuit()
    cost = CodeFidelity(cfg.layout, spec.noise(cfg.layout.n))
    x0 = np.concatenate([trained.best_params_V, trained.best_params_W])

    def f(x):
        return cost.value(enc.unitary(x[: enc.param_count]), dec.unitary(x[enc.param_count :]))

    def g(x):
        return code_fidelity_grad_params(cost, enc, dec, x)[1]

    opt = replace(cfg.optimizer, max_iters=cfg.warm_iters)
    _, fx, _ = lbfgs_maximize(f, x0, opt, grad=g)
    return fx


def run_apd_sweep(cfg: ExperimentConfig, trained: TrainingResult | None = None) -> tuple[ResultRecord, str]:
    """Fidelity versus wait time for no encoding, the five-qubit code, the
    alternating optimum and the trained scheme warm-started at every wait."""
    started = _now()
    if trained is None:
        trained = load_trained(cfg) if cfg.trained is not None else run_train(cfg)
    five = five_qubit_code()
    rows = []
    for t_us in cfg.wait_times_us:
        spec = cfg.noise.with_time(t_us * 1e-6)
        ch1 = spec.channel()
        rows.append(
            {
                "t_us": float(t_us),
                "F_none": no_encoding_fidelity(ch1),
                "F_five_qubit": five.fidelity(spec.noise(5)),
                "F_alternating": _alternating_best(ch1, cfg, cfg.layout.n),
                "F_qvector": _warm_start(cfg, trained, spec),
            }
        )
        log.info("wait %.2f us: %s", t_us, rows[-1])
    cols = ["t_us", "F_none", "F_five_qubit", "F_alternating", "F_qvector"]
    rec = ResultRecord(cfg.echo(), rows, {"best_fidelity": trained.best_fidelity}, started, _now())
    return rec, rows_to_csv(rows, cols)


def run_pta_table(cfg: ExperimentConfig, trained: TrainingResult | None = None) -> tuple[ResultRecord, str]:
    """Exact versus twirled noise for the trained scheme and three references.

    The trained circuits are the same in both columns.
    """
    started = _now()
    if trained is None:
        trained = load_trained(cfg) if cfg.trained is not None else run_train(cfg)
    exact = cfg.noise.with_kind("APD")
    pta = cfg.noise.with_kind("PTA_APD")
    five = five_qubit_code()
    rows = [
        {"scheme": "qvector", "APD": evaluate_trained(cfg, trained, exact), "PTA_APD": evaluate_trained(cfg, trained, pta)},
        {
            "scheme": "alternating",
            "APD": _alternating_best(exact.channel(), cfg, cfg.layout.n),
            "PTA_APD": _alternating_best(pta.channel(), cfg, cfg.layout.n),
        },
        {"scheme": "no_encoding", "APD": no_encoding_fidelity(exact.channel()), "PTA_APD": no_encoding_fidelity(pta.channel())},
        {"scheme": "five_qubit", "APD": five.fidelity(exact.noise(5)), "PTA_APD": five.fidelity(pta.noise(5))},
    ]
    rec = ResultRecord(cfg.echo(), rows, {"best_fidelity": trained.best_fidelity}, started, _now())
    return rec, rows_to_csv(rows, ["scheme", "APD", "PTA_APD"])


def bias_bound_csv(k: int, lmax: int) -> str:
    """``l, p_l`` for ``l = 2 .. lmax``."""
    if lmax < 2:
        raise ValueError("lmax must be at least 2")
    rows = [{"l": l, "p_l": bias_bound(l, k)} for l in range(2, lmax + 1)]
    return rows_to_csv(rows, ["l", "p_l"])


# ----------------------------------------------------------------------------
# command line


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varqec", description="Variational quantum error correction experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, text in (
        ("train", "train encoder and decoder circuits"),
        ("evaluate", "re-evaluate trained parameters; runs the memory experiment for PD configs"),
        ("sweep", "fidelity versus wait time under amplitude and phase damping"),
        ("table", "exact versus Pauli-twirled noise comparison"),
    ):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, help="TOML experiment config")
        s.add_argument("--seed", type=int, default=None, help="override the config seed")
        s.add_argument("--out", default=None, help="output directory (must not exist)")
        s.add_argument("--load", default=None, help="trained parameters JSON")
    b = sub.add_parser("bias-bound", help="bias bound of the random-circuit 2-design")
    b.add_argument("--k", type=int, default=1)
    b.add_argument("--lmax", type=int, default=8)
    b.add_argument("--out", default=None, help="output directory (must not exist)")
    return p


def _emit(out, files: dict[str, str], stdout_name: str | None = None) -> None:
    if out is None:
        if stdout_name is not None:
            sys.stdout.write(files[stdout_name])
        return
    d = make_output_dir(out)
    for name, text in files.items():
        _write(d / name, text)


def _dispatch(args) -> None:
    if args.command == "bias-bound":
        _emit(args.out, {"bias_bound.csv": bias_bound_csv(args.k, args.lmax)}, "bias_bound.csv")
        return
    cfg = load_config(args.config, args.seed)
    trained = load_trained(cfg, args.load) if args.load else None
    if args.command == "train":
        res = run_train(cfg)
        files = {"trained.json": res.to_json(), "timing.json": json.dumps({"wall_time": res.wall_time}) + "\n"}
        _emit(args.out, files, "trained.json")
        return
    if args.command == "evaluate":
        if trained is None:
            trained = load_trained(cfg)
        fid = evaluate_trained(cfg, trained)
        files = {"evaluation.json": json.dumps({"fidelity": fid, "stored_fidelity": trained.best_fidelity, "config": cfg.echo()},
                                               indent=2, sort_keys=True) + "\n"}
        if cfg.experiment == "PD_MEMORY":
            rec, text = run_pd_memory(cfg, trained)
            files["pd_memory.csv"] = text
            files["record.json"] = rec.to_json()
        _emit(args.out, files, "evaluation.json")
        return
    runner = run_apd_sweep if args.command == "sweep" else run_pta_table
    rec, text = runner(cfg, trained)
    name = "apd_sweep.csv" if args.command == "sweep" else "pta_table.csv"
    _emit(args.out, {name: text, "record.json": rec.to_json()}, name)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": "config", "key": exc.key, "message": str(exc)}) + "\n")
        return 2
    except (FileNotFoundError, FileExistsError, ValueError, KeyError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0
