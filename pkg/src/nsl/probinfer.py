"""Run-time probabilistic classification through learned rules.

Each feature slot's prediction vector acts as an annotated disjunction:
exactly one of its values holds, with the given probabilities.  The
probability that the hypothesis derives a label is the total weight of the
joint value assignments under which it fires.  Inference is exact (full
enumeration of the joint support, vectorized) up to a configurable cap,
with seeded Monte Carlo estimation as an opt-in fallback; a ProbLog-dialect
export is provided as an external cross-check artifact.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ResourceLimitError
from .logic import Atom, LogicProgram, Rule, Term, Var, answer_set

__all__ = [
    "AnnotatedSlot", "LabelDistribution", "classify_prob", "export_problog",
    "prob_support_prune", "slot_from_prediction",
]

DEFAULT_EXACT_CAP = 10 ** 6
DEFAULT_MC_SAMPLES = 10 ** 5
DEFAULT_EPSILON = 1e-6


@dataclass(frozen=True)
class AnnotatedSlot:
    """One feature slot with its value distribution."""

    feature: str
    alpha: tuple[Term, ...]
    support: tuple[tuple[Term, float], ...]
    dropped_mass: float = 0.0

    def __post_init__(self):
        if not self.support:
            raise ValueError("slot support must be nonempty")
        total = sum(p for _, p in self.support)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"slot probabilities sum to {total}, not 1")
        for _, p in self.support:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")

    @property
    def key(self) -> tuple[str, tuple[Term, ...]]:
        return (self.feature, self.alpha)


def slot_from_prediction(record) -> AnnotatedSlot:
    """Annotated slot from a PredictionRecord: values are the class indices."""
    alpha = () if record.alpha is None else (record.alpha,)
    support = tuple((v, p) for v, p in enumerate(record.probs))
    return AnnotatedSlot(record.feature, alpha, support)


def prob_support_prune(slot: AnnotatedSlot, epsilon: float) -> AnnotatedSlot:
    """Drop support values with probability below ``epsilon`` and renormalize;
    the discarded mass is recorded on the returned slot."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"epsilon {epsilon} outside [0, 1)")
    if epsilon == 0.0:
        return slot
    kept = [(v, p) for v, p in slot.support if p >= epsilon]
    if not kept:
        raise ValueError(f"pruning at epsilon={epsilon} removed every value of "
                         f"slot {slot.key}")
    if len(kept) == len(slot.support):
        return slot
    dropped = sum(p for _, p in slot.support) - sum(p for _, p in kept)
    total = sum(p for _, p in kept)
    support = tuple((v, p / total) for v, p in kept)
    return AnnotatedSlot(slot.feature, slot.alpha, support,
                         slot.dropped_mass + dropped)


@dataclass
class LabelDistribution:
    """Per-label probabilities with the mass where no single label is derived."""

    probs: dict[str, float]
    abstain_mass: float
    predicted: str
    confidence: float
    method: str = "exact"            # exact | monte_carlo
    samples: int | None = None


# ---------------------------------------------------------------------------
# Vectorized firing over joint assignments
# ---------------------------------------------------------------------------

class _Unsupported(Exception):
    """Rule shape outside the vectorized fragment; use the naive path."""


def _rule_conditions(rule: Rule, slots: Sequence[AnnotatedSlot],
                     bg_index: Mapping[tuple[str, int], set[tuple]]):
    """All ways to map the rule's context atoms onto slots, each yielding a
    list of per-row conditions.

    Conditions are ('eq_const', col, value) or ('eq_cols', i, j) or
    ('ne_const', col, value) or ('ne_cols', i, j).  Background atoms must
    ground statically; anything else is out of the vectorized fragment.
    """
    slot_keys: dict[tuple[str, int], list[int]] = {}
    for j, s in enumerate(slots):
        slot_keys.setdefault((s.feature, len(s.alpha) + 1), []).append(j)

    ctx_atoms = [a for a in rule.body_pos
                 if (a.predicate, a.arity) in slot_keys]
    bg_atoms = [a for a in rule.body_pos if a not in ctx_atoms]
    if rule.body_neg:
        raise _Unsupported("negation")

    results: list[list[tuple]] = []

    def resolve(term: Term, binding: dict):
        if isinstance(term, Var):
            return binding.get(term)
        return ("const", term)

    def rec(i: int, binding: dict, conds: list):
        if i == len(ctx_atoms):
            # Background atoms must be fully ground under the binding.
            for a in bg_atoms:
                tup = []
                for t in a.args:
                    r = resolve(t, binding)
                    if r is None or r[0] != "const":
                        raise _Unsupported(f"background atom {a} not ground")
                    tup.append(r[1])
                if tuple(tup) not in bg_index.get((a.predicate, a.arity), set()):
                    return
            final = list(conds)
            ok = True
            for c in rule.comparisons:
                l, r = resolve(c.left, binding), resolve(c.right, binding)
                if l is None or r is None:
                    raise _Unsupported(f"comparison {c} has an unbound side")
                if c.op not in ("==", "!="):
                    raise _Unsupported(f"operator {c.op}")
                if l[0] == "const" and r[0] == "const":
                    holds = (l[1] == r[1]) if c.op == "==" else (l[1] != r[1])
                    if not holds:
                        ok = False
                        break
                elif l[0] == "col" and r[0] == "col":
                    final.append(("eq_cols" if c.op == "==" else "ne_cols",
                                  l[1], r[1]))
                else:
                    col = l[1] if l[0] == "col" else r[1]
                    const = r[1] if l[0] == "col" else l[1]
                    final.append(("eq_const" if c.op == "==" else "ne_const",
                                  col, const))
            if ok:
                results.append(final)
            return
        atom = ctx_atoms[i]
        for j in slot_keys.get((atom.predicate, atom.arity), ()):
            slot = slots[j]
            b2 = dict(binding)
            c2 = list(conds)
            good = True
            for t, alpha_val in zip(atom.args[:-1], slot.alpha):
                if isinstance(t, Var):
                    cur = b2.get(t)
                    if cur is None:
                        b2[t] = ("const", alpha_val)
                    elif cur == ("const", alpha_val):
                        pass
                    elif cur[0] == "col":
                        c2.append(("eq_const", cur[1], alpha_val))
                    else:
                        good = False
                        break
                elif t != alpha_val:
                    good = False
                    break
            if not good:
                continue
            vt = atom.args[-1]
            if isinstance(vt, Var):
                cur = b2.get(vt)
                if cur is None:
                    b2[vt] = ("col", j)
                elif cur[0] == "col":
                    if cur[1] != j:
                        c2.append(("eq_cols", cur[1], j))
                else:
                    c2.append(("eq_const", j, cur[1]))
            else:
                c2.append(("eq_const", j, vt))
            rec(i + 1, b2, c2)

    rec(0, {}, [])
    return results


def _fired_array(rule: Rule, slots: Sequence[AnnotatedSlot],
                 columns: list[np.ndarray], n: int,
                 bg_index: Mapping[tuple[str, int], set[tuple]]) -> np.ndarray:
    fired = np.zeros(n, dtype=bool)
    for conds in _rule_conditions(rule, slots, bg_index):
        mask = np.ones(n, dtype=bool)
        for c in conds:
            if c[0] == "eq_const":
                mask &= columns[c[1]] == c[2]
            elif c[0] == "ne_const":
                mask &= columns[c[1]] != c[2]
            elif c[0] == "eq_cols":
                mask &= columns[c[1]] == columns[c[2]]
            else:
                mask &= columns[c[1]] != columns[c[2]]
            if not mask.any():
                break
        fired |= mask
    return fired


def _exact_columns(slots: Sequence[AnnotatedSlot]) -> tuple[list[np.ndarray], np.ndarray]:
    sizes = [len(s.support) for s in slots]
    n = 1
    for k in sizes:
        n *= k
    columns: list[np.ndarray] = []
    weights = np.ones(n, dtype=np.float64)
    repeat = n
    for s, k in zip(slots, sizes):
        repeat //= k
        tile = n // (repeat * k)
        vals = [v for v, _ in s.support]
        probs = np.array([p for _, p in s.support], dtype=np.float64)
        dtype = np.int64 if all(isinstance(v, int) for v in vals) else object
        col = np.tile(np.repeat(np.array(vals, dtype=dtype), repeat), tile)
        columns.append(col)
        weights *= np.tile(np.repeat(probs, repeat), tile)
    return columns, weights


def _mc_columns(slots: Sequence[AnnotatedSlot], n: int,
                rng: np.random.Generator) -> tuple[list[np.ndarray], np.ndarray]:
    columns = []
    for s in slots:
        vals = [v for v, _ in s.support]
        probs = np.array([p for _, p in s.support], dtype=np.float64)
        probs = probs / probs.sum()
        idx = rng.choice(len(vals), size=n, p=probs)
        dtype = np.int64 if all(isinstance(v, int) for v in vals) else object
        columns.append(np.array(vals, dtype=dtype)[idx])
    weights = np.full(n, 1.0 / n, dtype=np.float64)
    return columns, weights


def _naive_fired(rule_set: Sequence[Rule], background: LogicProgram,
                 ctx_atoms: Iterable[Atom], label_atoms: set[Atom]) -> set[Atom]:
    from .wcdpi import facts_program
    prog = background + facts_program(ctx_atoms) + LogicProgram(tuple(rule_set))
    return {a for a in answer_set(prog) if a in label_atoms}


def classify_prob(rules: Sequence[Rule], background: LogicProgram,
                  slots: Sequence[AnnotatedSlot], mode: str,
                  labels: Sequence[str],
                  positive_label: str | None = None,
                  encode_label=None,
                  epsilon: float = DEFAULT_EPSILON,
                  exact_cap: int = DEFAULT_EXACT_CAP,
                  mc: bool = False,
                  mc_samples: int = DEFAULT_MC_SAMPLES,
                  seed: int = 0) -> LabelDistribution:
    """Probability of each label being derived by ``rules`` over the joint
    slot-value distribution.

    Binary mode reports p(positive) and its complement.  Multiclass mode
    reports, per label, the probability that exactly that label is derived;
    assignments deriving no label or several go to ``abstain_mass``.
    Ties in the prediction break toward the lexicographically first label.
    """
    if mode not in ("binary", "multiclass"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "binary" and (positive_label is None or len(labels) != 2):
        raise ValueError("binary mode needs two labels and a positive_label")
    if encode_label is None:
        encode_label = lambda l: Atom(l)

    slots = [prob_support_prune(s, epsilon) for s in slots]
    joint = 1
    for s in slots:
        joint *= len(s.support)
    method = "exact"
    samples = None
    if joint > exact_cap:
        if not mc:
            raise ResourceLimitError(
                f"joint support {joint} exceeds exact cap {exact_cap}; "
                f"enable Monte Carlo estimation")
        method = "monte_carlo"
        samples = mc_samples

    bg_index: dict[tuple[str, int], set[tuple]] = {}
    base_atoms: frozenset[Atom] = frozenset()
    if background.is_facts_only():
        base_atoms = frozenset(background.fact_atoms)
        for a in base_atoms:
            bg_index.setdefault((a.predicate, a.arity), set()).add(a.args)
    label_atom = {l: encode_label(l) for l in labels}

    if method == "exact":
        columns, weights = _exact_columns(slots)
    else:
        rng = np.random.default_rng(seed)
        columns, weights = _mc_columns(slots, mc_samples, rng)
    n = len(weights)

    try:
        if not background.is_facts_only():
            raise _Unsupported("background with rules")
        fired_by_label: dict[str, np.ndarray] = {}
        for l in labels:
            fired = np.zeros(n, dtype=bool)
            if label_atom[l] in base_atoms:
                fired[:] = True
            else:
                for r in rules:
                    if r.head == label_atom[l]:
                        fired |= _fired_array(r, slots, columns, n, bg_index)
            fired_by_label[l] = fired
    except _Unsupported:
        # General path: evaluate every assignment through the answer-set
        # machinery.  Correct for any stratified background, but slow.
        fired_by_label = {l: np.zeros(n, dtype=bool) for l in labels}
        atoms_of_label = {l: label_atom[l] for l in labels}
        all_label_atoms = set(atoms_of_label.values())
        for row in range(n):
            ctx = [Atom(s.feature, s.alpha + (columns[j][row].item()
                                              if hasattr(columns[j][row], "item")
                                              else columns[j][row],))
                   for j, s in enumerate(slots)]
            derived = _naive_fired(rules, background, ctx, all_label_atoms)
            for l in labels:
                if atoms_of_label[l] in derived:
                    fired_by_label[l][row] = True

    probs: dict[str, float] = {}
    abstain = 0.0
    if mode == "binary":
        p_pos = float(weights[fired_by_label[positive_label]].sum())
        p_pos = min(max(p_pos, 0.0), 1.0)
        negative = next(l for l in labels if l != positive_label)
        probs = {positive_label: p_pos, negative: 1.0 - p_pos}
    else:
        stack = np.stack([fired_by_label[l] for l in labels])
        counts = stack.sum(axis=0)
        exactly_one = counts == 1
        for i, l in enumerate(labels):
            probs[l] = min(max(float(weights[stack[i] & exactly_one].sum()), 0.0), 1.0)
        abstain = min(max(float(weights[~exactly_one].sum()), 0.0), 1.0)

    ordered = sorted(labels)
    predicted = max(ordered, key=lambda l: (probs[l], ))
    # max() keeps the first maximum, i.e. the lexicographically first label.
    return LabelDistribution(probs, abstain, predicted, probs[predicted],
                             method, samples)


def export_problog(rules: Sequence[Rule], background: LogicProgram,
                   slots: Sequence[AnnotatedSlot],
                   queries: Sequence[Atom] = ()) -> str:
    """ProbLog-dialect program: rules and background verbatim, one annotated
    disjunction per slot.  An external cross-check artifact; never consumed
    by this module."""
    lines: list[str] = []
    for r in rules:
        lines.append(str(r))
    for r in background.rules:
        lines.append(str(r))
    for s in slots:
        parts = []
        for v, p in s.support:
            atom = Atom(s.feature, s.alpha + (v,))
            parts.append(f"{p}::{atom}")
        lines.append("; ".join(parts) + ".")
    for q in queries:
        lines.append(f"query({q}).")
    return "\n".join(lines) + "\n"
