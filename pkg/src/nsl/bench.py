"""Experiment orchestration: task building, metrics, sweeps, reports.

A sweep runs the full pipeline per (perturbation fraction, fold) cell:
simulate or load per-feature predictions, generate weighted examples, learn
the optimal hypothesis, then evaluate on two held-out variants; a
ground-truth test (true symbolic features, deterministic coverage) and a
perturbed test (extractor outputs at the training perturbation fraction,
probabilistic inference).  Reports carry per-cell rows plus mean and
standard error per fraction, and are byte-deterministic for a fixed
configuration.
"""
from __future__ import annotations

import functools
import json
import math
import time
from dataclasses import asdict, dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import extractors as ex
from .datasets import (CELL_NAMES, ZOO_LABELS, SudokuBoard, ZooRecord,
                       sudoku_background, sudoku_bias, zoo_background, zoo_bias)
from .errors import ResourceLimitError
from .learner import (CandidateRule, ContextIndex, Hypothesis, LanguageBias,
                      LearningTask, RulePlan, enumerate_candidates, fire_matrix,
                      interpretability, learn_optimal)
from .logic import Atom, LogicProgram, Rule, answer_set
from .probinfer import AnnotatedSlot, classify_prob, slot_from_prediction
from .wcdpi import WCDPI, AggregatorConfig, FeaturePrediction, generate_example

__all__ = [
    "TaskBundle", "GtCase", "PertCase", "build_task", "make_folds",
    "accuracy", "prob_accuracy", "SweepConfig", "CellResult", "EvalReport",
    "run_sweep", "emit_report", "read_report", "gt_predict", "cached_candidates",
    "encode_zoo_label", "encode_nullary_label",
]

DIGIT_CLASSES = 10


def encode_zoo_label(label: str) -> Atom:
    return Atom("class", (label,))


def encode_nullary_label(label: str) -> Atom:
    return Atom(label)


@dataclass(frozen=True)
class GtCase:
    example_id: str
    context: LogicProgram
    label: str


@dataclass(frozen=True)
class PertCase:
    example_id: str
    slots: tuple[AnnotatedSlot, ...]
    label: str


@dataclass
class TaskBundle:
    task: LearningTask
    train_ids: list[str]
    test_ids: list[str]
    gt_test: list[GtCase]
    pert_test: list[PertCase]
    labels: tuple[str, ...]
    mode: str
    positive_label: str | None
    encode_label: Callable[[str], Atom]
    train_records: dict[str, list[ex.PredictionRecord]]


def make_folds(n: int, folds: int, seed: int) -> list[list[int]]:
    """Disjoint test buckets covering 0..n-1; earlier buckets absorb the
    remainder."""
    if folds < 2:
        raise ValueError("folds must be at least 2")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n).tolist()
    sizes = [n // folds + (1 if i < n % folds else 0) for i in range(folds)]
    buckets = []
    at = 0
    for s in sizes:
        buckets.append(sorted(order[at:at + s]))
        at += s
    return buckets


def _slots_of(item) -> list[tuple[str, str | None, int]]:
    """(feature, alpha, true value) triples of one dataset record."""
    if isinstance(item, ZooRecord):
        return [(f, None, v) for f, v in item.features]
    if isinstance(item, SudokuBoard):
        return [("digit", CELL_NAMES[i], v) for i, v in sorted(item.filled().items())]
    raise TypeError(f"unsupported dataset item {type(item).__name__}")


def _label_of(item) -> str:
    return item.label


@functools.lru_cache(maxsize=8)
def _cached_candidate_rules(bias: LanguageBias, background: LogicProgram,
                            cap: int) -> tuple[Rule, ...]:
    return tuple(c.rule for c in enumerate_candidates(bias, background, cap=cap))


def cached_candidates(bias: LanguageBias, background: LogicProgram,
                      cap: int = 100_000) -> list[CandidateRule]:
    """Fresh CandidateRule wrappers over a cached enumeration (the candidate
    space depends only on bias and background, not on the examples)."""
    return [CandidateRule.from_rule(r)
            for r in _cached_candidate_rules(bias, background, cap)]


def build_task(dataset: Sequence, fold: int, *, folds: int = 5,
               fraction: float = 0.0, profile: ex.OracleProfile | None = None,
               prediction_records: Sequence[ex.PredictionRecord] | None = None,
               lam: int = 100, gamma: float = 1.0, baseline_mode: bool = False,
               seed: int = 0, max_body: int | None = None) -> TaskBundle:
    """Assemble one cross-validation cell into a learning task plus its two
    held-out test variants.

    Feature values are treated as digit-classifier outputs (k=10 classes).
    ``profile`` simulates the extractors; ``prediction_records`` substitutes
    real exported predictions matched by (example id, feature, alpha).
    Labels are never perturbed.  ``baseline_mode`` forces every example
    penalty to the constant 10.
    """
    if (profile is None) == (prediction_records is None):
        raise ValueError("exactly one of profile / prediction_records is required")
    first = dataset[0]
    if isinstance(first, ZooRecord):
        kind = "zoo"
        labels = ZOO_LABELS
        mode, positive = "multiclass", None
        encode = encode_zoo_label
        background = zoo_background()
        bias = zoo_bias() if max_body is None else zoo_bias(max_body)
        ids = [f"zoo{i}" for i in range(len(dataset))]
    else:
        kind = "sudoku"
        labels = ("invalid", "valid")
        mode, positive = "binary", "invalid"
        encode = encode_nullary_label
        background = sudoku_background()
        bias = sudoku_bias() if max_body is None else sudoku_bias(max_body)
        ids = [f"b{i}" for i in range(len(dataset))]

    buckets = make_folds(len(dataset), folds, ex.stable_seed(seed, kind, "folds"))
    if not 0 <= fold < folds:
        raise ValueError(f"fold {fold} outside 0..{folds - 1}")
    test_idx = buckets[fold]
    train_idx = sorted(set(range(len(dataset))) - set(test_idx))
    train_ids = [ids[i] for i in train_idx]
    test_ids = [ids[i] for i in test_idx]

    train_plan = ex.PerturbationPlan(fraction, "train",
                                     ex.stable_seed(seed, kind, "perturb-train"))
    test_plan = ex.PerturbationPlan(fraction, "test",
                                    ex.stable_seed(seed, kind, "perturb-test"))
    perturbed_train = ex.plan_perturbation(train_ids, train_plan)
    perturbed_test = ex.plan_perturbation(test_ids, test_plan)

    by_slot: dict[tuple[str, str, str | None], ex.PredictionRecord] = {}
    if prediction_records is not None:
        for r in prediction_records:
            by_slot[(r.example_id, r.feature, r.alpha)] = r

    def records_for(i: int, perturbed: bool) -> list[ex.PredictionRecord]:
        eid = ids[i]
        out = []
        for feature, alpha, true_value in _slots_of(dataset[i]):
            if prediction_records is not None:
                key = (eid, feature, alpha)
                if key not in by_slot:
                    raise ValueError(f"prediction file lacks a record for {key}")
                out.append(by_slot[key])
            else:
                out.append(ex.make_record(eid, feature, alpha, true_value,
                                          DIGIT_CLASSES, perturbed, profile))
        return out

    cfg = AggregatorConfig(lam)
    examples: list[WCDPI] = []
    train_records: dict[str, list[ex.PredictionRecord]] = {}
    for i in train_idx:
        eid = ids[i]
        recs = records_for(i, eid in perturbed_train)
        train_records[eid] = recs
        preds = [FeaturePrediction(r.y_pred, r.feature,
                                   () if r.alpha is None else (r.alpha,),
                                   r.y_conf) for r in recs]
        w = generate_example(eid, preds, _label_of(dataset[i]), labels, cfg,
                             mode=mode, positive_label=positive,
                             encode_label=encode)
        if baseline_mode:
            w = WCDPI(w.id, 10, w.pi, w.context)
        examples.append(w)

    gt_test: list[GtCase] = []
    pert_test: list[PertCase] = []
    for i in test_idx:
        eid = ids[i]
        true_preds = [FeaturePrediction(v, f, () if a is None else (a,), 1.0)
                      for f, a, v in _slots_of(dataset[i])]
        from .wcdpi import build_context
        gt_test.append(GtCase(eid, build_context(true_preds), _label_of(dataset[i])))
        recs = records_for(i, eid in perturbed_test)
        slots = tuple(slot_from_prediction(r) for r in recs)
        pert_test.append(PertCase(eid, slots, _label_of(dataset[i])))

    task = LearningTask(background, bias, tuple(examples), gamma, mode, positive)
    return TaskBundle(task, train_ids, test_ids, gt_test, pert_test, labels,
                      mode, positive, encode, train_records)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def accuracy(predictions: Sequence, labels: Sequence) -> float:
    """Fraction of exact matches."""
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs "
                         f"{len(labels)} labels")
    if not labels:
        raise ValueError("cannot compute accuracy of an empty list")
    return sum(1 for p, l in zip(predictions, labels) if p == l) / len(labels)


def prob_accuracy(true_class_probs: Sequence[float]) -> float:
    """Mean probability assigned to the ground-truth class; penalizes both
    confident errors and unconfident correct answers."""
    if not true_class_probs:
        raise ValueError("cannot compute probabilistic accuracy of an empty list")
    for p in true_class_probs:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability {p} outside [0, 1]")
    return math.fsum(true_class_probs) / len(true_class_probs)


def gt_predict(rules: Sequence[Rule], background: LogicProgram,
               context: LogicProgram, mode: str, labels: Sequence[str],
               positive_label: str | None,
               encode_label: Callable[[str], Atom]) -> str | None:
    """Deterministic prediction on true symbolic features.

    Binary: positive when any rule fires.  Multiclass: the unique derived
    label, or None (abstention) when zero or several labels fire.
    """
    if background.is_facts_only():
        atoms = frozenset(background.fact_atoms) | frozenset(context.fact_atoms)
    else:
        atoms = answer_set(background + context)
    index = ContextIndex(atoms)
    fired = set()
    for l in labels:
        atom = encode_label(l)
        if atom in atoms:
            fired.add(l)
    for r in rules:
        for l in labels:
            if r.head == encode_label(l) and l not in fired:
                if RulePlan(r, background).fires(index):
                    fired.add(l)
    if mode == "binary":
        negative = next(l for l in labels if l != positive_label)
        return positive_label if positive_label in fired else negative
    if len(fired) == 1:
        return next(iter(fired))
    return None


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    task: str                                   # zoo | sudoku
    fractions: tuple[float, ...] = tuple(round(f * 0.1, 1) for f in range(11))
    folds: int = 5
    profile: str = "softmax_sim"
    predictions_path: str | None = None
    lam: int = 100
    gamma: float = 1.0
    baseline_mode: bool = False
    seed: int = 0
    mc_samples: int = 4000
    prune_eps: float = 1e-6
    exact_cap: int = 10 ** 6
    candidate_cap: int = 100_000
    timeout_s: float = 300.0
    max_nodes: int = 200_000
    timing: bool = False
    zoo_path: str | None = None
    sudoku_valid: int = 200
    sudoku_invalid: int = 200

    def __post_init__(self):
        if self.task not in ("zoo", "sudoku"):
            raise ValueError(f"unknown task {self.task!r}")
        for f in self.fractions:
            if not 0.0 <= f <= 1.0:
                raise ValueError(f"fraction {f} outside [0, 1]")
        if self.folds < 2:
            raise ValueError("folds must be at least 2")


@dataclass
class CellResult:
    task: str
    fraction: float
    fold: int
    acc_gt: float
    acc_pert: float
    prob_acc: float
    interp: int
    score: float
    time_s: float
    hypothesis: str
    optimal: bool
    error: str | None = None


@dataclass
class Aggregate:
    fraction: float
    n: int
    acc_gt_mean: float
    acc_gt_se: float
    acc_pert_mean: float
    acc_pert_se: float
    prob_acc_mean: float
    prob_acc_se: float
    interp_mean: float
    interp_se: float
    score_mean: float
    score_se: float


@dataclass
class EvalReport:
    task: str
    profile: str
    baseline_mode: bool
    seed: int
    fractions: tuple[float, ...]
    folds: int
    cells: list[CellResult]
    aggregates: list[Aggregate]


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var) / math.sqrt(n)


def _aggregate(cells: list[CellResult], fractions: Sequence[float]) -> list[Aggregate]:
    out = []
    for f in fractions:
        rows = [c for c in cells if c.fraction == f and c.error is None]
        if not rows:
            continue
        agg = {}
        for name in ("acc_gt", "acc_pert", "prob_acc", "interp", "score"):
            mean, se = _mean_se([getattr(c, name) for c in rows])
            agg[f"{name}_mean"] = mean
            agg[f"{name}_se"] = se
        out.append(Aggregate(fraction=f, n=len(rows), **agg))
    return out


def _load_dataset(cfg: SweepConfig):
    from .datasets import generate_sudoku_dataset, load_zoo
    if cfg.task == "zoo":
        return load_zoo(cfg.zoo_path)
    return generate_sudoku_dataset(cfg.sudoku_valid, cfg.sudoku_invalid,
                                   seed=ex.stable_seed(cfg.seed, "sudoku-data"))


def run_sweep(cfg: SweepConfig) -> EvalReport:
    """Run every (fraction, fold) cell and aggregate mean and standard error
    per fraction.  Deterministic for a fixed configuration; cell failures
    (timeouts, resource caps) are recorded and the sweep continues."""
    dataset = _load_dataset(cfg)
    profile = None
    prediction_records = None
    if cfg.predictions_path is not None:
        prediction_records = ex.load_predictions(cfg.predictions_path)
    else:
        profile = replace(ex.PROFILES[cfg.profile],
                          rng_seed=ex.stable_seed(cfg.seed, cfg.task, "extractor"))

    cells: list[CellResult] = []
    candidates = None
    for fraction in cfg.fractions:
        for fold in range(cfg.folds):
            t0 = time.perf_counter()
            try:
                bundle = build_task(dataset, fold, folds=cfg.folds,
                                    fraction=fraction, profile=profile,
                                    prediction_records=prediction_records,
                                    lam=cfg.lam, gamma=cfg.gamma,
                                    baseline_mode=cfg.baseline_mode, seed=cfg.seed)
                if candidates is None:
                    candidates = cached_candidates(bundle.task.bias,
                                                   bundle.task.background,
                                                   cfg.candidate_cap)
                table = fire_matrix(candidates, bundle.task.examples,
                                    bundle.task.background)
                hyp = learn_optimal(bundle.task, candidates=candidates,
                                    table=table, timeout_s=cfg.timeout_s,
                                    max_nodes=cfg.max_nodes)
                cell = _evaluate_cell(cfg, bundle, hyp, fraction, fold)
            except (ResourceLimitError, ValueError) as exc:
                cell = CellResult(cfg.task, fraction, fold, float("nan"),
                                  float("nan"), float("nan"), 0, float("nan"),
                                  0.0, "", False, error=str(exc))
            cell.time_s = round(time.perf_counter() - t0, 4) if cfg.timing else 0.0
            cells.append(cell)
    return EvalReport(cfg.task, cfg.profile if cfg.predictions_path is None
                      else f"file:{cfg.predictions_path}",
                      cfg.baseline_mode, cfg.seed, tuple(cfg.fractions),
                      cfg.folds, cells, _aggregate(cells, cfg.fractions))


def _evaluate_cell(cfg: SweepConfig, bundle: TaskBundle, hyp: Hypothesis,
                   fraction: float, fold: int) -> CellResult:
    rules = hyp.rules
    bg = bundle.task.background
    gt_preds = [gt_predict(rules, bg, case.context, bundle.mode, bundle.labels,
                           bundle.positive_label, bundle.encode_label)
                for case in bundle.gt_test]
    acc_gt = accuracy(gt_preds, [c.label for c in bundle.gt_test])

    pert_preds = []
    p_true = []
    for case in bundle.pert_test:
        dist = classify_prob(rules, bg, case.slots, bundle.mode, bundle.labels,
                             positive_label=bundle.positive_label,
                             encode_label=bundle.encode_label,
                             epsilon=cfg.prune_eps, exact_cap=cfg.exact_cap,
                             mc=True, mc_samples=cfg.mc_samples,
                             seed=ex.stable_seed(cfg.seed, case.example_id, "mc"))
        pert_preds.append(dist.predicted)
        p_true.append(dist.probs.get(case.label, 0.0))
    acc_pert = accuracy(pert_preds, [c.label for c in bundle.pert_test])
    pa = prob_accuracy(p_true)

    return CellResult(cfg.task, fraction, fold, acc_gt, acc_pert, pa,
                      interpretability(hyp), hyp.score, 0.0, hyp.text,
                      hyp.optimal)


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

CSV_HEADER = "task,fraction,fold,acc_gt,acc_pert,prob_acc,interp,score,time_s"


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    if x == float("inf"):
        return "inf"
    return f"{x:.4f}"


def emit_report(report: EvalReport, fmt: str = "csv") -> bytes:
    """Serialize a report; stable column order, 4 decimal places, identical
    bytes for identical runs."""
    if fmt == "csv":
        lines = [CSV_HEADER]
        for c in report.cells:
            lines.append(",".join([
                c.task, _fmt(c.fraction), str(c.fold), _fmt(c.acc_gt),
                _fmt(c.acc_pert), _fmt(c.prob_acc), str(c.interp),
                _fmt(c.score), _fmt(c.time_s)]))
        return ("\n".join(lines) + "\n").encode()
    if fmt == "json":
        payload = {
            "task": report.task,
            "profile": report.profile,
            "baseline_mode": report.baseline_mode,
            "seed": report.seed,
            "fractions": list(report.fractions),
            "folds": report.folds,
            "cells": [asdict(c) for c in report.cells],
            "aggregates": [asdict(a) for a in report.aggregates],
        }
        return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()
    if fmt == "markdown":
        lines = [f"# Sweep report: {report.task} ({report.profile}"
                 f"{', baseline penalty' if report.baseline_mode else ''})", ""]
        lines.append("| fraction | acc_gt | acc_pert | prob_acc | interp | score |")
        lines.append("|---|---|---|---|---|---|")
        for a in report.aggregates:
            lines.append(
                f"| {_fmt(a.fraction)} "
                f"| {_fmt(a.acc_gt_mean)} ± {_fmt(a.acc_gt_se)} "
                f"| {_fmt(a.acc_pert_mean)} ± {_fmt(a.acc_pert_se)} "
                f"| {_fmt(a.prob_acc_mean)} ± {_fmt(a.prob_acc_se)} "
                f"| {_fmt(a.interp_mean)} ± {_fmt(a.interp_se)} "
                f"| {_fmt(a.score_mean)} ± {_fmt(a.score_se)} |")
        lines.append("")
        lines.append("## Learned hypotheses")
        for c in report.cells:
            lines.append("")
            lines.append(f"### fraction {_fmt(c.fraction)}, fold {c.fold}"
                         f"{'' if c.optimal else ' (non-optimal: timeout)'}")
            if c.error:
                lines.append(f"error: {c.error}")
            else:
                lines.append("```")
                lines.append(c.hypothesis if c.hypothesis else "% empty hypothesis")
                lines.append("```")
        return ("\n".join(lines) + "\n").encode()
    raise ValueError(f"unknown report format {fmt!r}")


def read_report(data: bytes) -> EvalReport:
    """Inverse of the JSON emitter."""
    payload = json.loads(data.decode())
    cells = [CellResult(**c) for c in payload["cells"]]
    aggregates = [Aggregate(**a) for a in payload["aggregates"]]
    return EvalReport(payload["task"], payload["profile"], payload["baseline_mode"],
                      payload["seed"], tuple(payload["fractions"]),
                      payload["folds"], cells, aggregates)
