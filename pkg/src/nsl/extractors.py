"""Per-feature probability vectors: synthetic oracles and prediction files.

Two sources are supported.  A synthetic confusion-model oracle simulates
softmax-like (overconfident under shift) and uncertainty-aware (underconfident
under shift) classifiers, keyed deterministically per (seed, example, slot).
A file-backed provider loads prediction exports produced elsewhere; the
line-delimited record format below is the wire contract with exporters.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import IO, Iterable, Sequence, Union

import numpy as np

from .errors import ParseError

__all__ = [
    "PredictionRecord", "OracleProfile", "PerturbationPlan", "PROFILES",
    "plan_perturbation", "synth_predict", "load_predictions", "write_predictions",
]


@dataclass(frozen=True)
class PredictionRecord:
    """One feature extractor output for one slot of one example."""

    example_id: str
    feature: str
    alpha: str | None
    k: int
    probs: tuple[float, ...]
    true_value: int
    perturbed: bool = False

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"class count k={self.k} must be at least 2")
        if len(self.probs) != self.k:
            raise ValueError(f"probability vector has length {len(self.probs)}, expected {self.k}")
        for p in self.probs:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probability vector sums to {total}, not 1")
        if not 0 <= self.true_value < self.k:
            raise ValueError(f"true value {self.true_value} outside 0..{self.k - 1}")

    @property
    def y_pred(self) -> int:
        return max(range(self.k), key=lambda i: (self.probs[i], -i))

    @property
    def y_conf(self) -> float:
        return max(self.probs)

    @property
    def slot(self) -> tuple[str, str | None]:
        return (self.feature, self.alpha)


@dataclass(frozen=True)
class OracleProfile:
    """Accuracy/confidence regimes of a simulated extractor on clean vs.
    perturbed inputs."""

    name: str
    clean_accuracy: float
    clean_conf_range: tuple[float, float]
    perturbed_accuracy: float
    perturbed_conf_range: tuple[float, float]
    rng_seed: int = 0

    def __post_init__(self):
        for acc in (self.clean_accuracy, self.perturbed_accuracy):
            if not 0.0 <= acc <= 1.0:
                raise ValueError(f"accuracy {acc} outside [0, 1]")
        for lo, hi in (self.clean_conf_range, self.perturbed_conf_range):
            if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
                raise ValueError(f"confidence range ({lo}, {hi}) outside [0, 1]")
            if lo > hi:
                raise ValueError(f"degenerate confidence range: {lo} > {hi}")

    def regime(self, perturbed: bool) -> tuple[float, tuple[float, float]]:
        if perturbed:
            return self.perturbed_accuracy, self.perturbed_conf_range
        return self.clean_accuracy, self.clean_conf_range


#: Default simulated extractors.  The softmax-like profile stays confident on
#: rotated inputs while being wrong; the uncertainty-aware profile collapses
#: its confidence instead.  That contrast is what penalty weighting exploits.
PROFILES: dict[str, OracleProfile] = {
    "perfect": OracleProfile("perfect", 1.0, (1.0, 1.0), 1.0, (1.0, 1.0)),
    "softmax_sim": OracleProfile("softmax_sim", 0.99, (0.95, 0.999), 0.10, (0.70, 0.99)),
    "edl_sim": OracleProfile("edl_sim", 0.99, (0.95, 0.999), 0.10, (0.10, 0.40)),
}


@dataclass(frozen=True)
class PerturbationPlan:
    """Fraction of examples whose raw inputs get perturbed, and where."""

    fraction: float
    scope: str = "train"        # train | test | both
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError(f"fraction {self.fraction} outside [0, 1]")
        if self.scope not in ("train", "test", "both"):
            raise ValueError(f"unknown scope {self.scope!r}")


def plan_perturbation(example_ids: Sequence[str], plan: PerturbationPlan) -> frozenset[str]:
    """Select ``floor(fraction * n)`` example ids uniformly without replacement.

    Selection is per example: all feature slots of a chosen example are
    perturbed together.  Deterministic for a given id set and seed.
    """
    ids = sorted(example_ids)
    count = math.floor(plan.fraction * len(ids))
    if count == 0:
        return frozenset()
    rng = np.random.default_rng(plan.rng_seed)
    chosen = rng.choice(len(ids), size=count, replace=False)
    return frozenset(ids[i] for i in chosen)


def stable_seed(*parts) -> int:
    """Platform-stable 64-bit seed derived from the given parts."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _derive_seed(base_seed: int, example_id: str, slot: str) -> int:
    return stable_seed(base_seed, example_id, slot)


def synth_predict(true_value: int, k: int, perturbed: bool, profile: OracleProfile,
                  example_id: str = "", slot: str = "") -> tuple[float, ...]:
    """Simulate one extractor output: a k-class probability vector.

    Draws correctness from the regime accuracy and the top confidence from
    the regime range; the predicted class takes the top confidence and the
    remainder spreads uniformly over the other classes.  Deterministic per
    (profile seed, example id, slot).
    """
    if k < 2:
        raise ValueError(f"class count k={k} must be at least 2")
    if not 0 <= true_value < k:
        raise ValueError(f"true value {true_value} outside 0..{k - 1}")
    accuracy, (lo, hi) = profile.regime(perturbed)
    rng = np.random.default_rng(_derive_seed(profile.rng_seed, example_id, slot))
    correct = rng.random() < accuracy
    conf = float(rng.uniform(lo, hi))
    if correct:
        predicted = true_value
    else:
        predicted = int(rng.integers(0, k - 1))
        if predicted >= true_value:
            predicted += 1
    rest = (1.0 - conf) / (k - 1)
    probs = tuple(conf if i == predicted else rest for i in range(k))
    return probs


def make_record(example_id: str, feature: str, alpha: str | None, true_value: int,
                k: int, perturbed: bool, profile: OracleProfile) -> PredictionRecord:
    slot = feature if alpha is None else f"{feature}/{alpha}"
    probs = synth_predict(true_value, k, perturbed, profile, example_id, slot)
    return PredictionRecord(example_id, feature, alpha, k, probs, true_value, perturbed)


# ---------------------------------------------------------------------------
# Prediction files
# ---------------------------------------------------------------------------

_Source = Union[str, Path, IO[str], IO[bytes]]

_FIELDS = ("example_id", "feature", "alpha", "k", "probs", "true_value", "perturbed")


def _read_text(source: _Source) -> str:
    if isinstance(source, (str, Path)):
        return Path(source).read_text(encoding="utf-8")
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _record_from_dict(obj: dict, lineno: int) -> PredictionRecord:
    try:
        k = int(obj["k"])
        probs = [float(p) for p in obj["probs"]]
        alpha = obj.get("alpha")
        if alpha is not None:
            alpha = str(alpha)
        rec = dict(example_id=str(obj["example_id"]), feature=str(obj["feature"]),
                   alpha=alpha, k=k, true_value=int(obj["true_value"]),
                   perturbed=bool(obj.get("perturbed", False)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad prediction record: {exc}", lineno) from None
    if len(probs) != k:
        raise ParseError(f"probability vector has length {len(probs)}, expected {k}", lineno)
    total = math.fsum(probs)
    if abs(total - 1.0) > 1e-6:
        raise ParseError(f"probability vector sums to {total:.8f}", lineno)
    if abs(total - 1.0) > 1e-9:
        probs = [p / total for p in probs]
    try:
        return PredictionRecord(probs=tuple(probs), **rec)
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def load_predictions(source: _Source) -> list[PredictionRecord]:
    """Load prediction records from line-delimited JSON or CSV.

    Lines starting with '#' are comments.  Probability vectors are
    renormalized only when their sum is within 1e-6 of 1; anything further
    off is rejected.
    """
    text = _read_text(source)
    lines = text.splitlines()
    payload = [(i + 1, ln) for i, ln in enumerate(lines)
               if ln.strip() and not ln.lstrip().startswith("#")]
    if not payload:
        return []
    first = payload[0][1].lstrip()
    records: list[PredictionRecord] = []
    if first.startswith("{"):
        for lineno, ln in payload:
            try:
                obj = json.loads(ln)
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON: {exc.msg}", lineno, exc.colno) from None
            records.append(_record_from_dict(obj, lineno))
    else:
        reader = csv.DictReader(io.StringIO("\n".join(ln for _, ln in payload)))
        fields = reader.fieldnames or []
        prob_cols = sorted((f for f in fields if f.startswith("p") and f[1:].isdigit()),
                           key=lambda f: int(f[1:]))
        if not prob_cols:
            raise ParseError("CSV header lacks probability columns p0..p{k-1}", payload[0][0])
        for offset, row in enumerate(reader):
            lineno = payload[min(offset + 1, len(payload) - 1)][0]
            obj = {
                "example_id": row.get("example_id"),
                "feature": row.get("feature"),
                "alpha": row.get("alpha") or None,
                "k": row.get("k", len(prob_cols)),
                "true_value": row.get("true_value"),
                "perturbed": (row.get("perturbed", "false").strip().lower()
                              in ("1", "true", "yes")),
                "probs": [row.get(c) for c in prob_cols],
            }
            if obj["probs"] and any(v is None or v == "" for v in obj["probs"]):
                raise ParseError("missing probability column value", lineno)
            records.append(_record_from_dict(obj, lineno))
    return records


def write_predictions(records: Iterable[PredictionRecord], sink: _Source,
                      header_comments: Sequence[str] = ()) -> None:
    """Write records as line-delimited JSON; bit-exact round trip through
    :func:`load_predictions`."""
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for comment in header_comments:
            fh.write(f"# {comment}\n")
        for r in records:
            obj = {"example_id": r.example_id, "feature": r.feature, "k": r.k,
                   "probs": list(r.probs), "true_value": r.true_value,
                   "perturbed": r.perturbed}
            if r.alpha is not None:
                obj["alpha"] = r.alpha
            fh.write(json.dumps(obj) + "\n")
    finally:
        if own:
            fh.close()
