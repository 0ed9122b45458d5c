"""Active-learning experiment driver.

Per seed: build or load the pool, split it 50/10/40 into train/val/test,
label a seeded random fraction of the training videos, then for each cycle
train from scratch, score the test split, and (except after the last cycle)
let the strategy pick a batch of training videos for oracle annotation.
"""

import csv
import hashlib
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import yaml

from .exceptions import InvalidConfig, StepALError
from .learner import TrainConfig, infer, train
from .manifest import encode, read_manifest
from .metrics import AVERAGING, METRIC_NAMES, MetricReport, evaluate
from .strategies import SelectionRequest, get_strategy
from .synthgen import GenConfig, benchmark_suite, generate, split_ids
from .uncertainty import DEFAULT_EPS

logger = logging.getLogger(__name__)

SPLIT_FRACTIONS = (0.5, 0.1, 0.4)


@dataclass(frozen=True)
class ExperimentConfig:
    gen: Optional[GenConfig] = None
    manifest: Optional[str] = None
    strategy: str = "stepal"
    initial_label_frac: float = 0.10
    budget_frac: float = 0.10
    cycles: int = 4
    train: TrainConfig = TrainConfig()
    seeds: Tuple[int, ...] = (0,)
    eps: float = DEFAULT_EPS
    output_dir: str = "results"
    workers: int = 1
    restarts: int = 10

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        self.validate()

    def validate(self):
        if (self.gen is None) == (self.manifest is None):
            raise InvalidConfig("exactly one of gen or manifest must be given")
        for name in ("initial_label_frac", "budget_frac"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise InvalidConfig(f"{name} must lie in (0, 1], got {value}")
        if self.cycles < 0:
            raise InvalidConfig("cycles must be >= 0")
        if self.initial_label_frac + self.cycles * self.budget_frac > 1 + 1e-9:
            raise InvalidConfig("initial_label_frac + cycles * budget_frac exceeds 1")
        if not self.seeds:
            raise InvalidConfig("at least one seed is required")
        if self.workers < 1:
            raise InvalidConfig("workers must be >= 1")
        if not 0 < self.eps <= 1e-6:
            raise InvalidConfig("eps must lie in (0, 1e-6]")


@dataclass(frozen=True)
class CycleReport:
    seed: int
    strategy: str
    cycle: int
    labeled_count: int
    chosen: tuple
    metrics: MetricReport
    wall_time: float = field(compare=False)
    pool_digest: str = ""


@dataclass(frozen=True)
class ErrorRecord:
    seed: int
    strategy: str
    cycle: int
    error: str
    message: str


def _round_half_up(x):
    return int(math.floor(x + 0.5))


def _derived_seed(*parts):
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def load_pool(cfg: ExperimentConfig, seed: int):
    if cfg.manifest is not None:
        return read_manifest(cfg.manifest)
    return generate(replace(cfg.gen, seed=seed))


def pool_digest(pool) -> str:
    return hashlib.sha256(encode(pool)).hexdigest()[:16]


def run_seed(cfg: ExperimentConfig, strategy: str, seed: int):
    """Run one (strategy, seed) trajectory; returns ``(reports, error_or_None)``."""
    select = get_strategy(strategy)
    pool = load_pool(cfg, seed)
    digest = pool_digest(pool)
    train_ids, _val_ids, test_ids = split_ids(pool.ids, seed, SPLIT_FRACTIONS)
    n_train = len(train_ids)
    n_init = max(1, _round_half_up(cfg.initial_label_frac * n_train))
    budget = max(1, _round_half_up(cfg.budget_frac * n_train))
    rng = np.random.default_rng(_derived_seed(seed, 1))
    initial = sorted(train_ids[i] for i in rng.choice(n_train, size=n_init, replace=False))
    train_pool = pool.subset(train_ids).with_states(initial)
    test_pool = pool.subset(test_ids)

    reports = []
    for r in range(cfg.cycles + 1):
        start = time.perf_counter()
        try:
            labeled_count = len(train_pool.labeled_ids)
            model = train(train_pool, replace(cfg.train, seed=_derived_seed(cfg.train.seed, seed, r)))
            metrics = evaluate(test_pool, model)
            chosen = ()
            if r < cfg.cycles:
                unlabeled = train_pool.unlabeled_ids
                if not unlabeled:
                    logger.warning("seed %d cycle %d: unlabelled pool exhausted, skipping selection", seed, r)
                else:
                    scored = infer(model, train_pool, unlabeled)
                    req = SelectionRequest(
                        scored, budget, seed=_derived_seed(seed, r, 2), eps=cfg.eps, restarts=cfg.restarts
                    )
                    chosen = tuple(select(req).chosen)
                    train_pool = train_pool.move_to_labeled(chosen)
        except StepALError as exc:
            logger.error("seed %d strategy %s cycle %d failed: %s", seed, strategy, r, exc)
            return reports, ErrorRecord(seed, strategy, r, type(exc).__name__, str(exc))
        reports.append(
            CycleReport(seed, strategy, r, labeled_count, chosen, metrics, time.perf_counter() - start, digest)
        )
    return reports, None


def _run_task(args):
    cfg, strategy, seed = args
    return run_seed(cfg, strategy, seed)


def execute(cfg: ExperimentConfig, strategies):
    """Run every (strategy, seed) pair; results come back sorted, independent of workers."""
    for s in strategies:
        get_strategy(s)
    tasks = [(cfg, s.lower(), seed) for s in strategies for seed in cfg.seeds]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            outputs = list(ex.map(_run_task, tasks))
    else:
        outputs = [_run_task(t) for t in tasks]
    order = {s.lower(): i for i, s in enumerate(strategies)}
    reports = [rep for reps, _ in outputs for rep in reps]
    reports.sort(key=lambda rep: (order[rep.strategy], rep.seed, rep.cycle))
    errors = sorted((err for _, err in outputs if err is not None), key=lambda e: (order[e.strategy], e.seed))
    return reports, errors


def run_experiment(cfg: ExperimentConfig):
    """All cycle reports for ``cfg.strategy`` over ``cfg.seeds`` (r = 0..R per seed)."""
    reports, errors = execute(cfg, [cfg.strategy])
    for err in errors:
        logger.error("seed %d aborted at cycle %d: %s: %s", err.seed, err.cycle, err.error, err.message)
    return reports


@dataclass
class Comparison:
    strategies: list
    reports: list
    errors: list

    def summary(self):
        """Rows of (strategy, cycle, metric, mean, std, n) aggregated over seeds."""
        rows = []
        for s in self.strategies:
            by_cycle = {}
            for rep in self.reports:
                if rep.strategy == s:
                    by_cycle.setdefault(rep.cycle, []).append(rep)
            for cycle in sorted(by_cycle):
                reps = by_cycle[cycle]
                for metric in METRIC_NAMES:
                    values = np.array([getattr(rep.metrics, metric) for rep in reps])
                    std = float(values.std(ddof=1)) if values.size > 1 else 0.0
                    rows.append((s, cycle, metric, float(values.mean()), std, int(values.size)))
        return rows

    def mean_metric(self, strategy, cycle, metric="accuracy"):
        values = [getattr(r.metrics, metric) for r in self.reports if r.strategy == strategy and r.cycle == cycle]
        return float(np.mean(values))

    def per_seed(self, strategy, cycle, metric="accuracy"):
        return {
            r.seed: getattr(r.metrics, metric) for r in self.reports if r.strategy == strategy and r.cycle == cycle
        }


def check_pairing(reports):
    """Every strategy must have seen bitwise the same pool for a given seed."""
    digests = {}
    for rep in reports:
        seen = digests.setdefault(rep.seed, rep.pool_digest)
        if seen != rep.pool_digest:
            raise AssertionError(f"seed {rep.seed}: strategies saw different pools")


def compare_strategies(cfg: ExperimentConfig, strategies) -> Comparison:
    if not strategies:
        raise InvalidConfig("compare needs at least one strategy")
    strategies = [s.lower() for s in strategies]
    reports, errors = execute(cfg, strategies)
    check_pairing(reports)
    return Comparison(strategies, reports, errors)


def _fmt(x):
    return repr(float(x))


def results_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "strategy", "cycle", "labeled_count", "metric", "value"])
    for rep in reports:
        for metric in METRIC_NAMES:
            w.writerow([rep.seed, rep.strategy, rep.cycle, rep.labeled_count, metric, _fmt(getattr(rep.metrics, metric))])
    return buf.getvalue()


def summary_csv(comparison: Comparison) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["strategy", "cycle", "metric", "mean", "std", "n_seeds"])
    for s, cycle, metric, mean, std, n in comparison.summary():
        w.writerow([s, cycle, metric, _fmt(mean), _fmt(std), n])
    return buf.getvalue()


def selections_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "strategy", "cycle", "chosen"])
    for rep in reports:
        w.writerow([rep.seed, rep.strategy, rep.cycle, " ".join(rep.chosen)])
    return buf.getvalue()


def write_outputs(comparison: Comparison, output_dir, plot=True):
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "results": out / "results.csv",
        "summary": out / "summary.csv",
        "selections": out / "selections.csv",
    }
    paths["results"].write_text(results_csv(comparison.reports))
    paths["summary"].write_text(summary_csv(comparison))
    paths["selections"].write_text(selections_csv(comparison.reports))
    if comparison.errors:
        paths["errors"] = out / "errors.yaml"
        paths["errors"].write_text(yaml.safe_dump([asdict(e) for e in comparison.errors], sort_keys=True))
    if plot:
        from .plotting import learning_curves_svg

        paths["curves"] = out / "curves.svg"
        paths["curves"].write_text(learning_curves_svg(comparison))
    return paths


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    gen = data.pop("gen", None)
    if isinstance(gen, dict):
        gen = dict(gen)
        preset = gen.pop("preset", None)
        gen = benchmark_suite(preset, **gen) if preset else GenConfig(**gen)
    elif isinstance(gen, str):
        gen = benchmark_suite(gen)
    if gen is None and data.get("manifest") is None:
        gen = benchmark_suite("default")
    train_cfg = data.pop("train", None) or {}
    known = set(ExperimentConfig.__dataclass_fields__) - {"gen", "train"}
    unknown = set(data) - known - {"strategies"}
    if unknown:
        raise InvalidConfig(f"unknown config keys: {', '.join(sorted(unknown))}")
    data.pop("strategies", None)
    try:
        return ExperimentConfig(gen=gen, train=TrainConfig(**train_cfg), **data)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(str(exc)) from exc


def load_config(path) -> dict:
    """Read a YAML (or JSON) experiment file into a plain dict."""
    with open(path) as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise InvalidConfig(f"{path}: expected a mapping at top level")
    return data
