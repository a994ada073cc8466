"""Experiment orchestration: TOML configs, multi-trial runs with per-iteration
metrics, the (T, M) timing sweep, and CSV / SVG outputs.

Random streams: trial ``t`` initializes its agents from ``seed -> (0, t)`` for
every method, so all methods of a trial start from the same state, and runs
method ``m`` from ``seed -> (1, code(m), t)``.  Adding or removing methods
from a config therefore never changes another method's results.
"""

from __future__ import annotations

import csv
import logging
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, generate_clustered_fixture, generate_synthetic, load_feature_file
from .errors import ConfigError
from .game import GameConfig, Method, play
from .kernels import RngStream
from .metrics import adjusted_rand_index, collect_sign_counts, kappa_coefficient, posterior_agreement
from .model import Hyperparams, init_agents, kmeans_signs

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("rmhng")

METHOD_CODES = {m: i for i, m in enumerate(Method)}
ALL_METHODS = [
    Method.RMHNG,
    Method.OS,
    Method.LL,
    Method.OS_AND_LL,
    Method.NO_COMMUNICATION,
    Method.ALL_ACCEPTANCE,
    Method.GIBBS,
]

SUMMARY_FIELDS = ["method", "agent", "ari_mean", "ari_std", "kappa_mean", "kappa_std", "agreement"]
PER_ITERATION_FIELDS = ["method", "trial", "iteration", "agent", "ari", "kappa"]
TIMING_FIELDS = ["method", "T", "M", "engine", "runs", "iterations", "seconds_per_iteration"]


@dataclass
class MethodSpec:
    """One method with optional overrides of its default ``T``, ``M`` and init."""

    method: Method
    internal_iterations: int | None = None
    chain_length: int | None = None
    init: str | None = None

    @property
    def initializer(self) -> str:
        if self.init is not None:
            return self.init
        return "kmeans" if self.method is Method.GIBBS else "random"


@dataclass
class ExperimentConfig:
    dataset: dict = field(default_factory=lambda: {"kind": "synthetic", "n_per_cluster": 200, "seed": 0})
    methods: list = field(default_factory=lambda: [MethodSpec(m) for m in ALL_METHODS])
    n_signs: int = 5
    iterations: int = 100
    n_trials: int = 5
    window: int = 10
    seed: int = 0
    hyper: dict = field(default_factory=lambda: {"alpha_bar": 1.0, "m": 0.0, "w": 0.01, "nu": 1.0})
    agent_hyper: dict = field(default_factory=dict)
    kappa: str = "pairwise"
    agreement: bool = True
    agreement_source: str = "tail"
    shuffle_per_object: bool = False
    output_dir: str = "results"
    emit_plots: bool = False
    time_budget: float | None = None

    def __post_init__(self):
        self.methods = [m if isinstance(m, MethodSpec) else MethodSpec(Method.parse(m)) for m in self.methods]
        self.validate()

    def validate(self):
        if self.n_trials < 1:
            raise ConfigError("n_trials must be >= 1")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 1 <= self.window <= self.iterations:
            raise ConfigError(f"window {self.window} must lie in [1, iterations={self.iterations}]")
        if self.n_signs < 1:
            raise ConfigError("n_signs must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.kappa not in ("pairwise", "fleiss"):
            raise ConfigError(f"kappa must be 'pairwise' or 'fleiss', got {self.kappa!r}")
        if self.agreement_source not in ("tail", "mean"):
            raise ConfigError(f"agreement_source must be 'tail' or 'mean', got {self.agreement_source!r}")
        if self.dataset.get("kind") not in ("synthetic", "features", "fixture"):
            raise ConfigError(f"unknown dataset kind {self.dataset.get('kind')!r}")
        if self.dataset["kind"] == "features" and not self.dataset.get("path"):
            raise ConfigError("a features dataset needs a path")
        for spec in self.methods:
            if spec.initializer not in ("random", "kmeans"):
                raise ConfigError(f"{spec.method.value}: init must be 'random' or 'kmeans'")
            if spec.initializer == "kmeans" and spec.method is not Method.GIBBS:
                raise ConfigError("k-means initialization reads every agent's features; only GIBBS may use it")
        if not self.methods:
            raise ConfigError("no methods selected")

    def with_methods(self, names) -> ExperimentConfig:
        """Copy restricted to ``names``, keeping any per-method overrides."""
        wanted = [Method.parse(n) for n in names]
        known = {s.method: s for s in self.methods}
        return replace(self, methods=[known.get(m, MethodSpec(m)) for m in wanted])

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
        raw = dict(raw)
        try:
            dataset = dict(raw.pop("dataset", {"kind": "synthetic"}))
            dataset.setdefault("kind", "synthetic")
            if dataset["kind"] == "synthetic":
                dataset.setdefault("n_per_cluster", 200)
                dataset.setdefault("seed", 0)
            if "path" in dataset and base_dir is not None:
                dataset["path"] = str((base_dir / dataset["path"]).resolve())
            game = dict(raw.pop("game", {}))
            experiment = dict(raw.pop("experiment", {}))
            hyper = dict(raw.pop("hyperparams", {}))
            agent_hyper = {int(k): dict(v) for k, v in hyper.pop("agents", {}).items()}
            overrides = dict(raw.pop("methods", {}))
            if raw:
                raise ConfigError(f"unknown config sections {sorted(raw)}")
            names = game.pop("methods", [m.value for m in ALL_METHODS])
            specs = []
            for name in names:
                method = Method.parse(name)
                table = {Method.parse(k): v for k, v in overrides.items()}.get(method, {})
                extra = set(table) - {"internal_iterations", "chain_length", "init"}
                if extra:
                    raise ConfigError(f"unknown keys {sorted(extra)} in [methods.{name}]")
                specs.append(MethodSpec(method, **table))
            defaults = cls()
            config = cls(
                dataset=dataset,
                methods=specs,
                n_signs=int(game.pop("n_signs", 5)),
                iterations=int(game.pop("iterations", 100)),
                seed=int(game.pop("seed", 0)),
                shuffle_per_object=bool(game.pop("shuffle_per_object", False)),
                n_trials=int(experiment.pop("n_trials", 5)),
                window=int(experiment.pop("window", 10)),
                kappa=str(experiment.pop("kappa", "pairwise")),
                agreement=bool(experiment.pop("agreement", True)),
                agreement_source=str(experiment.pop("agreement_source", "tail")),
                output_dir=str(experiment.pop("output_dir", "results")),
                emit_plots=bool(experiment.pop("emit_plots", False)),
                time_budget=experiment.pop("time_budget", None),
                hyper={**defaults.hyper, **hyper},
                agent_hyper=agent_hyper,
            )
            leftover = {k: v for k, v in {**game, **experiment}.items()}
            if leftover:
                raise ConfigError(f"unknown config keys {sorted(leftover)}")
            return config
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)


def build_dataset(config: ExperimentConfig) -> Dataset:
    spec = config.dataset
    if spec["kind"] == "synthetic":
        return generate_synthetic(int(spec["n_per_cluster"]), seed=int(spec["seed"]))
    if spec["kind"] == "fixture":
        keys = {"n_classes", "n_per_class", "n_agents", "dim", "separation", "seed", "scale"}
        return generate_clustered_fixture(**{k: v for k, v in spec.items() if k in keys})
    return load_feature_file(spec["path"], n_agents=spec.get("n_agents"), dim=spec.get("dim"))


def build_hyperparams(config: ExperimentConfig, dataset: Dataset):
    def make(values):
        return Hyperparams.isotropic(
            dataset.dim,
            config.n_signs,
            m=values["m"],
            alpha_bar=values["alpha_bar"],
            nu=values["nu"],
            w=values["w"],
        )

    try:
        shared = make(config.hyper)
        per_agent = [make({**config.hyper, **config.agent_hyper.get(n, {})}) for n in range(dataset.n_agents)]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid hyperparameters: {exc}") from None
    return shared, per_agent


def _game_config(config: ExperimentConfig, spec: MethodSpec, dataset: Dataset) -> GameConfig:
    kwargs = {}
    if spec.internal_iterations is not None:
        kwargs["internal_iterations"] = spec.internal_iterations
    if spec.chain_length is not None:
        kwargs["chain_length"] = spec.chain_length
    return GameConfig.for_method(
        spec.method,
        dataset.n_agents,
        config.n_signs,
        dataset.n_objects,
        iterations=config.iterations,
        seed=config.seed,
        shuffle_per_object=config.shuffle_per_object,
        **kwargs,
    )


def _stats(values):
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    if values.size == 0:
        return math.nan, math.nan
    std = float(np.std(values, ddof=1)) if values.size > 1 else 0.0
    return float(np.mean(values)), std


@dataclass
class RunRecord:
    """Metrics of one (method, trial) run, plus its final-window sign counts."""

    method: Method
    trial: int
    ari: np.ndarray  # (I, N), NaN without ground truth
    kappa: np.ndarray  # (I,), NaN for the shared-table topline
    counts: list  # agreement sources: [tail] or one (D, K) matrix per agent
    seconds_per_iteration: float
    T: int
    M: int
    seconds: float = math.nan  # whole trial, initialization included


@dataclass
class ResultTable:
    config: ExperimentConfig
    summary: list
    per_iteration: list
    timing: list
    records: list
    elapsed: float

    def row(self, method, agent="all") -> dict:
        method = Method.parse(method)
        for r in self.summary:
            if r["method"] == method.value and str(r["agent"]) == str(agent):
                return r
        raise KeyError((method.value, agent))


def run_trial(config: ExperimentConfig, spec: MethodSpec, dataset: Dataset, trial: int) -> RunRecord:
    """Play one method once on ``dataset`` and score every iteration."""
    start = time.perf_counter()
    game = _game_config(config, spec, dataset)
    shared, per_agent = build_hyperparams(config, dataset)
    master = RngStream(config.seed)
    init_rng = master.spawn(0, trial)
    signs = None
    if spec.initializer == "kmeans":
        signs = kmeans_signs(dataset.features, config.n_signs, init_rng.spawn(99))
    agents = init_agents(dataset.features, shared, init_rng, hypers=per_agent, signs=signs)
    truth = dataset.ground_truth
    n = dataset.n_agents
    ari = np.full((config.iterations, n), np.nan)
    kappa = np.full(config.iterations, np.nan)
    shared_table = spec.method is Method.GIBBS

    def score(i, agents):
        held = np.stack([a.signs for a in agents])
        if truth is not None:
            if shared_table:
                ari[i] = adjusted_rand_index(held[0], truth)
            else:
                ari[i] = [adjusted_rand_index(s, truth) for s in held]
        if not shared_table and n >= 2:
            kappa[i] = kappa_coefficient(held, config.n_signs, method=config.kappa)

    trace = play(game, agents, master.spawn(1, METHOD_CODES[spec.method], trial), callback=score)
    if config.agreement_source == "tail" or shared_table:
        counts = [collect_sign_counts(trace, config.window, config.n_signs, source="tail")]
    else:
        counts = [collect_sign_counts(trace, config.window, config.n_signs, source=a) for a in range(n)]
    return RunRecord(
        spec.method,
        trial,
        ari,
        kappa,
        counts,
        float(np.mean(trace.durations)),
        game.internal_iterations,
        game.chain_length,
        time.perf_counter() - start,
    )


def run_experiment(config: ExperimentConfig, dataset: Dataset | None = None) -> ResultTable:
    """Run every configured method for ``n_trials`` trials and aggregate.

    Final-window statistics pool ``n_trials * window`` samples per agent.
    Agreement compares each run's final-window sign counts with the topline
    run of the same trial; the topline is scheduled automatically if needed.
    """
    start = time.perf_counter()
    dataset = build_dataset(config) if dataset is None else dataset
    specs = list(config.methods)
    if config.agreement and not any(s.method is Method.GIBBS for s in specs):
        specs.append(MethodSpec(Method.GIBBS))
    # the topline runs first so agreement can be scored as runs finish
    specs.sort(key=lambda s: s.method is not Method.GIBBS)
    records = []
    for spec in specs:
        for trial in range(config.n_trials):
            log.info("running %s trial %d", spec.method.value, trial)
            records.append(run_trial(config, spec, dataset, trial))
    elapsed = time.perf_counter() - start
    if config.time_budget is not None and elapsed > float(config.time_budget):
        log.warning("experiment took %.1fs, over the %.1fs budget", elapsed, float(config.time_budget))
    order = {s.method: i for i, s in enumerate(sorted(specs, key=lambda s: ALL_METHODS.index(s.method)))}
    records.sort(key=lambda r: (order[r.method], r.trial))
    summary, per_iteration, timing = _aggregate(config, dataset, records)
    return ResultTable(config, summary, per_iteration, timing, records, elapsed)


def _agreement(config, records):
    gibbs = {r.trial: r.counts[0] for r in records if r.method is Method.GIBBS}
    out = {}
    for method in dict.fromkeys(r.method for r in records):
        values = []
        for r in records:
            if r.method is not method or r.trial not in gibbs:
                continue
            values.append(np.mean([posterior_agreement(c, gibbs[r.trial], config.window) for c in r.counts]))
        out[method] = float(np.mean(values)) if values else math.nan
    return out


def _aggregate(config, dataset, records):
    window = slice(config.iterations - config.window, config.iterations)
    agreement = _agreement(config, records) if config.agreement else {}
    summary, per_iteration, timing = [], [], []
    for method in dict.fromkeys(r.method for r in records):
        runs = [r for r in records if r.method is method]
        kappa_mean, kappa_std = _stats(np.concatenate([r.kappa[window] for r in runs]))
        agree = agreement.get(method, math.nan)
        for agent in range(dataset.n_agents):
            mean, std = _stats(np.concatenate([r.ari[window, agent] for r in runs]))
            summary.append(dict(method=method.value, agent=agent, ari_mean=mean, ari_std=std,
                                kappa_mean=kappa_mean, kappa_std=kappa_std, agreement=agree))
        mean, std = _stats(np.concatenate([r.ari[window].ravel() for r in runs]))
        summary.append(dict(method=method.value, agent="all", ari_mean=mean, ari_std=std,
                            kappa_mean=kappa_mean, kappa_std=kappa_std, agreement=agree))
        for r in runs:
            for i in range(config.iterations):
                for agent in range(dataset.n_agents):
                    per_iteration.append(dict(method=method.value, trial=r.trial, iteration=i + 1,
                                              agent=agent, ari=r.ari[i, agent], kappa=r.kappa[i]))
        timing.append(dict(method=method.value, T=runs[0].T, M=runs[0].M, engine="vectorized", runs=len(runs),
                           iterations=config.iterations,
                           seconds_per_iteration=float(np.mean([r.seconds_per_iteration for r in runs]))))
    return summary, per_iteration, timing


def run_timing_sweep(config: ExperimentConfig, T_values=(1, 2, 3, 4), M_values=(1, 2, 3),
                     runs: int = 3, iterations: int = 10, dataset: Dataset | None = None,
                     vectorized: bool = True) -> list:
    """Average seconds per iteration of the game for every ``(T, M)`` pair.

    Each pair is run ``runs`` times from fresh agents for ``iterations``
    iterations; only the iteration loop is timed.  ``vectorized=False`` times
    the per-object reference engine, whose cost follows the message count.
    """
    dataset = build_dataset(config) if dataset is None else dataset
    shared, per_agent = build_hyperparams(config, dataset)
    rows = []
    for M in M_values:
        for T in T_values:
            if not 1 <= M <= dataset.n_agents or T < 1:
                raise ConfigError(f"cannot time T={T}, M={M} with {dataset.n_agents} agents")
            method = Method.classify(T, M, dataset.n_agents)
            game = GameConfig(dataset.n_agents, config.n_signs, dataset.n_objects, iterations=iterations,
                              internal_iterations=T, chain_length=M, method=method,
                              shuffle_per_object=config.shuffle_per_object, vectorized=vectorized)
            seconds = []
            for run in range(runs):
                rng = RngStream(config.seed).spawn(2, T, M, run)
                agents = init_agents(dataset.features, shared, rng.spawn(0), hypers=per_agent)
                trace = play(game, agents, rng.spawn(1))
                seconds.append(float(np.mean(trace.durations)))
            log.info("T=%d M=%d: %.4fs/iteration", T, M, np.mean(seconds))
            rows.append(dict(method=method.value, T=T, M=M, engine="vectorized" if vectorized else "per_object",
                             runs=runs, iterations=iterations,
                             seconds_per_iteration=float(np.mean(seconds))))
    return rows


def loglog_slope(T_values, seconds) -> float:
    """Least-squares slope of ``log(seconds)`` against ``log(T)``."""
    return float(np.polyfit(np.log(np.asarray(T_values, float)), np.log(np.asarray(seconds, float)), 1)[0])


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return "" if math.isnan(value) else repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path, rows, fields):
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow([_fmt(row[f]) for f in fields])
    return path


def read_csv(path) -> list:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def emit_outputs(table: ResultTable, out_dir=None, plots: bool | None = None) -> dict:
    """Write ``summary.csv``, ``per_iteration.csv``, ``timing.csv`` and optional SVG plots."""
    out = Path(out_dir if out_dir is not None else table.config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "summary": write_csv(out / "summary.csv", table.summary, SUMMARY_FIELDS),
        "per_iteration": write_csv(out / "per_iteration.csv", table.per_iteration, PER_ITERATION_FIELDS),
        "timing": write_csv(out / "timing.csv", table.timing, TIMING_FIELDS),
    }
    if plots if plots is not None else table.config.emit_plots:
        from .plots import plot_curves

        files.update(plot_curves(files["per_iteration"], out))
    return files
