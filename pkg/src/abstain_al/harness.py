"""Experiment orchestration: datasets, the policy/fraction/seed grid, AUAC.

Datasets use a sparse line format, one example per line:

    <label> <index>:<value> <index>:<value> ...

with labels in ``1..l`` and ``-1`` marking a redundant example (no target
label; the unrelated-abstention labeler refuses these). Feature indices must
be strictly increasing within a line.

A grid run executes one active-learning run per (policy, abstention
fraction, seed) cell, scores each accuracy curve with AUAC (100 times the
mean per-query test accuracy, so 100 is a curve pinned at accuracy 1), and
writes a per-cell CSV, a per-(policy, fraction) aggregate CSV, and a JSON
manifest with a content hash of every input. Runs are deterministic: cells
derive all randomness from their seed, and output rows are sorted, so
repeated runs produce byte-identical files. Setting ABSTAIN_AL_THREADS > 1
runs cells concurrently without changing any output.
"""

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    AbstainALError,
    Dataset,
    Example,
    LabelSpace,
    evaluate_accuracy,
    run_active_learning,
)
from .criteria import POLICY_NAMES, make_policy
from .finite_bayes import FiniteBelief
from .map_models import DEFAULT_SIGMA2, PluginBelief, fixed_rate_estimator
from .oracle import induce, load_instance
from .sim import Scenario, SimulatedLabeler, swap_in_redundant

__all__ = [
    "DatasetFormatError",
    "ConfigError",
    "load_dataset",
    "save_dataset",
    "synth_dataset",
    "auac",
    "evaluate_accuracy",
    "ExperimentConfig",
    "ResultRow",
    "GridResult",
    "run_grid",
    "write_results",
    "run_config_file",
    "parse_config_text",
]


class DatasetFormatError(AbstainALError):
    """A dataset file does not parse."""


class ConfigError(AbstainALError):
    """An experiment config is malformed."""


REDUNDANT_LABEL = -1


def load_dataset(path, num_labels: int | None = None, name: str = "") -> Dataset:
    """Parse the sparse line format; errors carry the offending line number."""
    examples = []
    max_label = 2
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            try:
                label = int(parts[0])
            except ValueError as err:
                raise DatasetFormatError(f"line {lineno}: bad label {parts[0]!r}") from err
            if label != REDUNDANT_LABEL and label < 1:
                raise DatasetFormatError(f"line {lineno}: label {label} out of range")
            features = []
            prev = -1
            for token in parts[1:]:
                try:
                    idx_str, val_str = token.split(":", 1)
                    idx, val = int(idx_str), float(val_str)
                except ValueError as err:
                    raise DatasetFormatError(
                        f"line {lineno}: bad feature token {token!r}"
                    ) from err
                if idx <= prev:
                    raise DatasetFormatError(
                        f"line {lineno}: feature indices must be strictly increasing"
                    )
                prev = idx
                features.append((idx, val))
            redundant = label == REDUNDANT_LABEL
            examples.append(
                Example(
                    len(examples),
                    tuple(features),
                    None if redundant else label,
                    redundant,
                )
            )
            if not redundant:
                max_label = max(max_label, label)
    if not examples:
        raise DatasetFormatError(f"{path}: no examples")
    space = LabelSpace(num_labels if num_labels is not None else max_label)
    return Dataset(examples, space, name=name or str(path))


def save_dataset(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in dataset:
            label = REDUNDANT_LABEL if ex.redundant else ex.true_label
            tokens = " ".join(f"{i}:{v:.17g}" for i, v in ex.features)
            fh.write(f"{label} {tokens}\n".rstrip() + "\n")


def synth_dataset(
    n: int,
    dim: int,
    seed: int,
    separation: float = 3.0,
    redundant: int = 0,
    redundant_offset: float = 4.0,
    name: str = "synth",
) -> Dataset:
    """Two Gaussian clouds split along the first axis, labels 1 and 2.

    Optional redundant examples are drawn from a third cloud offset along the
    second axis, far enough from both target clouds that a linear model can
    tell them apart.
    """
    if dim < 2 and redundant:
        raise ValueError("redundant examples need dim >= 2")
    rng = np.random.default_rng(seed)
    labels = np.array([1] * (n // 2) + [2] * (n - n // 2))
    rng.shuffle(labels)
    examples = []
    for i in range(n):
        center = np.zeros(dim)
        center[0] = -separation / 2 if labels[i] == 1 else separation / 2
        values = center + rng.standard_normal(dim)
        examples.append(Example.from_dense(i, values, int(labels[i])))
    for i in range(redundant):
        center = np.zeros(dim)
        center[1] = redundant_offset
        values = center + rng.standard_normal(dim)
        examples.append(Example.from_dense(n + i, values, None, True))
    return Dataset(examples, LabelSpace(2), name=name)


def auac(accuracies) -> float:
    """Area under the accuracy curve: 100 times the mean per-query accuracy."""
    accuracies = np.asarray(accuracies, dtype=float)
    if accuracies.size == 0:
        raise ValueError("accuracy curve is empty")
    return float(100.0 * accuracies.mean())


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment: loaded datasets plus grid parameters.

    Two belief modes exist. The default "plugin" mode runs MAP logistic
    beliefs over real or synthetic datasets. The "finite" mode is the
    oracle-scale demo: it runs the exact finite belief from ``instance``,
    sampling a ground-truth labeling and abstention pattern per seed; the
    scenario and fraction grid axes do not apply there (the instance's own
    rates drive abstention) and are recorded as constants.
    """

    train: Dataset | None = None
    test: Dataset | None = None
    policies: tuple = ()
    scenario: str = "finite"
    fractions: tuple = (0.0,)
    budget: int = 300
    seeds: tuple = tuple(range(10))
    sigma2_label: float = DEFAULT_SIGMA2
    sigma2_abstain: float = DEFAULT_SIGMA2
    generator_sigma2: float = 0.5
    redundant: Dataset | None = None
    belief_kind: str = "plugin"
    instance: FiniteBelief | None = None
    out: str = "results"
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.policies:
            raise ConfigError("no policies configured")
        for p in self.policies:
            if p not in POLICY_NAMES:
                raise ConfigError(f"unknown policy {p!r}")
        for f in self.fractions:
            if not 0.0 <= f <= 1.0:
                raise ConfigError(f"fraction {f} outside [0, 1]")
        if self.belief_kind == "plugin":
            if self.train is None or self.test is None:
                raise ConfigError("plugin mode needs train and test datasets")
            if self.budget > len(self.train):
                raise ConfigError("budget exceeds train pool size")
            if self.scenario == "unrelated" and self.redundant is None:
                raise ConfigError("unrelated scenario needs a redundant pool")
        elif self.belief_kind == "finite":
            if self.instance is None:
                raise ConfigError("finite mode needs an instance")
            pool_size = len(self.instance.hypotheses[0].pmfs)
            if self.budget > pool_size:
                raise ConfigError("budget exceeds instance pool size")
        else:
            raise ConfigError(f"unknown belief kind {self.belief_kind!r}")


@dataclass(frozen=True)
class ResultRow:
    policy: str
    scenario: str
    fraction: float
    seed: int
    auac: float
    accuracies: tuple


@dataclass(frozen=True)
class GridResult:
    rows: tuple
    aggregates: tuple  # (policy, scenario, fraction, mean_auac, stddev_auac)
    errors: tuple  # (policy, fraction, seed, message)


def _feature_dim(config: ExperimentConfig) -> int:
    dims = [config.train.feature_dim, config.test.feature_dim]
    if config.redundant is not None:
        dims.append(config.redundant.feature_dim)
    return max(dims)


def _build_cell_pool(config: ExperimentConfig, fraction: float, seed: int):
    scenario = Scenario(config.scenario, fraction, config.generator_sigma2)
    if config.scenario == "unrelated":
        pool = swap_in_redundant(
            config.train, config.redundant, fraction, np.random.SeedSequence([seed, 1])
        )
    else:
        pool = config.train
    labeler = scenario.build_labeler(pool, np.random.SeedSequence([seed, 2]))
    return pool, labeler


def _finite_cell_setup(config: ExperimentConfig, seed: int):
    """Sample a ground truth from the instance prior and build its labeler."""
    instance = config.instance
    induced = induce(instance)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    f = induced.labelings[rng.choice(len(induced.qf), p=induced.qf)]
    k = induced.patterns[rng.choice(len(induced.qk), p=induced.qk)]
    examples = [
        Example(x, ((x, 1.0),), int(f[x])) for x in range(induced.num_examples)
    ]
    pool = Dataset(examples, LabelSpace(instance.num_labels), name="instance")
    labeler = SimulatedLabeler(
        {x: 0 if k[x] == 1 else int(f[x]) for x in range(len(pool))}, "instance"
    )
    return pool, labeler, pool, instance


def run_cell(config: ExperimentConfig, policy_name: str, fraction: float, seed: int) -> ResultRow:
    """One grid cell: build the labeler, run the loop, score the curve."""
    if config.belief_kind == "finite":
        pool, labeler, test, belief = _finite_cell_setup(config, seed)
        dim = pool.feature_dim
    else:
        pool, labeler = _build_cell_pool(config, fraction, seed)
        test = config.test
        dim = _feature_dim(config)
        belief = PluginBelief(
            config.train.num_labels, dim, config.sigma2_label, config.sigma2_abstain
        )
    if policy_name.endswith("-known"):
        pattern = [
            (ex, int(z)) for ex, z in zip(pool, labeler.abstention_pattern(pool))
        ]
        policy = make_policy(
            policy_name, fixed_rate_estimator(pattern, config.sigma2_abstain, dim)
        )
    else:
        policy = make_policy(policy_name)
    trace = run_active_learning(
        policy,
        labeler,
        pool,
        config.budget,
        belief,
        test,
        rng_seed=seed,
        scenario=config.scenario,
    )
    accuracies = tuple(float(a) for a in trace.accuracies())
    return ResultRow(
        policy_name, config.scenario, fraction, seed, auac(accuracies), accuracies
    )


def _max_workers() -> int:
    raw = os.environ.get("ABSTAIN_AL_THREADS", "0")
    try:
        return max(int(raw), 0)
    except ValueError:
        return 0


def run_grid(config: ExperimentConfig) -> GridResult:
    """Run every (policy, fraction, seed) cell; a failed cell is recorded, not fatal."""
    cells = [
        (policy, fraction, seed)
        for policy in config.policies
        for fraction in config.fractions
        for seed in config.seeds
    ]

    def execute(cell):
        policy, fraction, seed = cell
        try:
            return run_cell(config, policy, fraction, seed), None
        except Exception as err:  # error isolated to the cell by contract
            return None, (policy, fraction, seed, f"{type(err).__name__}: {err}")

    workers = _max_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(execute, cells))
    else:
        outcomes = [execute(cell) for cell in cells]

    rows = tuple(row for row, _ in outcomes if row is not None)
    errors = tuple(err for _, err in outcomes if err is not None)

    aggregates = []
    for policy in config.policies:
        for fraction in config.fractions:
            scores = [
                r.auac for r in rows if r.policy == policy and r.fraction == fraction
            ]
            if not scores:
                continue
            mean = float(np.mean(scores))
            std = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
            aggregates.append((policy, config.scenario, fraction, mean, std))
    return GridResult(rows, tuple(aggregates), errors)


def _content_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_results(result: GridResult, out_dir, config_echo: dict, input_paths=()) -> dict:
    """Write results.csv, aggregate.csv, curves.json, and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    results_path = out / "results.csv"
    lines = ["policy,scenario,fraction,seed,auac"]
    for r in sorted(result.rows, key=lambda r: (r.policy, r.fraction, r.seed)):
        lines.append(f"{r.policy},{r.scenario},{r.fraction:g},{r.seed},{r.auac:.6f}")
    results_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    aggregate_path = out / "aggregate.csv"
    lines = ["policy,scenario,fraction,mean_auac,stddev_auac"]
    for policy, scenario, fraction, mean, std in sorted(result.aggregates):
        lines.append(f"{policy},{scenario},{fraction:g},{mean:.6f},{std:.6f}")
    aggregate_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    curves_path = out / "curves.json"
    curves = {
        f"{r.policy}/{r.fraction:g}/{r.seed}": list(r.accuracies)
        for r in sorted(result.rows, key=lambda r: (r.policy, r.fraction, r.seed))
    }
    curves_path.write_text(json.dumps(curves, sort_keys=True), encoding="utf-8")

    manifest_path = out / "manifest.json"
    manifest = {
        "config": config_echo,
        "inputs": {str(p): _content_hash(Path(p)) for p in input_paths},
        "errors": [list(e) for e in result.errors],
        "rows": len(result.rows),
        "outputs": ["results.csv", "aggregate.csv", "curves.json"],
    }
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    return {
        "results": results_path,
        "aggregate": aggregate_path,
        "curves": curves_path,
        "manifest": manifest_path,
    }


_CONFIG_KEYS = {
    "train",
    "test",
    "redundant",
    "policies",
    "scenario",
    "fractions",
    "budget",
    "seeds",
    "sigma2_label",
    "sigma2_abstain",
    "generator_sigma2",
    "belief",
    "instance",
    "out",
}


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; unknown keys are an error."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    if "policies" not in raw:
        raise ConfigError("missing required key 'policies'")
    if raw.get("belief", "plugin") == "finite":
        if "instance" not in raw:
            raise ConfigError("missing required key 'instance' (finite belief)")
    else:
        for required in ("train", "test", "scenario", "fractions"):
            if required not in raw:
                raise ConfigError(f"missing required key {required!r}")
    return raw


def _parse_float_list(value: str):
    return tuple(float(v) for v in value.split(",") if v.strip())


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    raw = parse_config_text(path.read_text(encoding="utf-8"))
    base = path.parent

    def resolve(p):
        p = Path(p)
        return p if p.is_absolute() else base / p

    belief_kind = raw.get("belief", "plugin")
    common = {
        "policies": tuple(p.strip() for p in raw["policies"].split(",") if p.strip()),
        "seeds": (
            tuple(int(s) for s in raw["seeds"].split(",") if s.strip())
            if "seeds" in raw
            else tuple(range(10))
        ),
        "sigma2_label": float(raw.get("sigma2_label", str(DEFAULT_SIGMA2))),
        "sigma2_abstain": float(raw.get("sigma2_abstain", str(DEFAULT_SIGMA2))),
        "generator_sigma2": float(raw.get("generator_sigma2", "0.5")),
        "belief_kind": belief_kind,
        "out": raw.get("out", "results"),
        "raw": raw,
    }
    if belief_kind == "finite":
        instance = load_instance(resolve(raw["instance"]))
        pool_size = len(instance.hypotheses[0].pmfs)
        return ExperimentConfig(
            instance=instance,
            budget=int(raw.get("budget", str(pool_size))),
            **common,
        )
    train = load_dataset(resolve(raw["train"]), name="train")
    test = load_dataset(resolve(raw["test"]), num_labels=train.num_labels, name="test")
    redundant = (
        load_dataset(resolve(raw["redundant"]), num_labels=train.num_labels, name="redundant")
        if "redundant" in raw
        else None
    )
    return ExperimentConfig(
        train=train,
        test=test,
        scenario=raw["scenario"],
        fractions=_parse_float_list(raw["fractions"]),
        budget=int(raw.get("budget", "300")),
        redundant=redundant,
        **common,
    )


def run_config_file(path) -> dict:
    """Load a config, run the grid, and persist outputs next to the config."""
    path = Path(path)
    config = load_config(path)
    result = run_grid(config)
    out_dir = Path(config.out)
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir
    input_paths = [path]
    base = path.parent
    for key in ("train", "test", "redundant", "instance"):
        if key in config.raw:
            p = Path(config.raw[key])
            input_paths.append(p if p.is_absolute() else base / p)
    return write_results(result, out_dir, dict(config.raw), input_paths)
