"""Rule learning: hypothesis space, coverage, and exact optimal search.

A language bias (typed head/body mode declarations with variable and
body-length budgets) generates a finite space of safe, canonical candidate
rules.  Each candidate's firing behaviour over the weighted examples is
precomputed; the search then finds a subset of candidates minimizing

    total = sum of penalties of uncovered examples + gamma * total literals

by branch and bound, branching include/exclude over the candidates that can
cover the currently most-constrained example.  Because learned head
predicates never occur in rule bodies, the labels a hypothesis derives on an
example are exactly the union of the labels its rules fire individually;
the search exploits that compositionality throughout.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, ResourceLimitError
from .logic import (Atom, Comparison, LogicProgram, Rule, Term, Tokenizer, Var,
                    _term_key, answer_set, parse_rule_tokens)
from .wcdpi import WCDPI, read_examples

__all__ = [
    "ModeDecl", "LanguageBias", "CandidateRule", "LearningTask", "Hypothesis",
    "FireTable", "enumerate_candidates", "fire_matrix", "coverage", "score",
    "learn_optimal", "interpretability", "canonical_rule", "parse_task_file",
    "load_task",
]

DEFAULT_CANDIDATE_CAP = 100_000
DEFAULT_TIMEOUT_S = 300.0

#: Reserved predicate name for precomputed background projections in plans.
_BG_PROJ = "__bg"


# ---------------------------------------------------------------------------
# Language bias
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeDecl:
    """A predicate schema: each argument is ('var', type) or ('const', type)."""

    predicate: str
    args: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        for kind, typ in self.args:
            if kind not in ("var", "const"):
                raise ValueError(f"argument kind must be 'var' or 'const', got {kind!r}")
            if not typ:
                raise ValueError("argument type must be nonempty")

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        inner = ", ".join(f"{k}({t})" for k, t in self.args)
        return f"{self.predicate}({inner})"


@dataclass(frozen=True)
class LanguageBias:
    head_modes: tuple[ModeDecl, ...]
    body_modes: tuple[ModeDecl, ...]
    max_body_literals: int
    max_variables: int
    allow_negation: bool = False
    allow_inequality: bool = False
    constant_pools: tuple[tuple[str, tuple[Term, ...]], ...] = ()

    def __post_init__(self):
        if self.max_body_literals < 0:
            raise ValueError("max_body_literals must be nonnegative")
        if self.max_variables < 0:
            raise ValueError("max_variables must be nonnegative")
        if not self.head_modes:
            raise ValueError("bias needs at least one head mode")
        pools = self.pools
        for m in self.head_modes:
            for kind, typ in m.args:
                if kind == "var":
                    raise ValueError(
                        f"head mode {m} has a variable argument; learned heads are "
                        f"ground label atoms")
                if typ not in pools:
                    raise ValueError(f"no constant pool for type {typ!r} in head mode {m}")
        for m in self.body_modes:
            for kind, typ in m.args:
                if kind == "const" and typ not in pools:
                    raise ValueError(f"no constant pool for type {typ!r} in body mode {m}")

    @property
    def pools(self) -> dict[str, tuple[Term, ...]]:
        return dict(self.constant_pools)

    @staticmethod
    def make(head_modes: Iterable[ModeDecl], body_modes: Iterable[ModeDecl],
             max_body_literals: int, max_variables: int,
             pools: Mapping[str, Sequence[Term]] | None = None,
             allow_negation: bool = False,
             allow_inequality: bool = False) -> "LanguageBias":
        pool_items = tuple((t, tuple(vs)) for t, vs in (pools or {}).items())
        return LanguageBias(tuple(head_modes), tuple(body_modes),
                            max_body_literals, max_variables,
                            allow_negation, allow_inequality, pool_items)


def _var_prefixes(types: Sequence[str]) -> dict[str, str]:
    """Stable display prefixes per variable type (first letter, disambiguated)."""
    prefixes: dict[str, str] = {}
    used: set[str] = set()
    for t in sorted(set(types)):
        p = t[0].upper()
        if p in used:
            p = t.capitalize()
        used.add(p)
        prefixes[t] = p
    return prefixes


def _typed_var(prefixes: Mapping[str, str], typ: str, idx: int) -> Var:
    return Var(f"{prefixes[typ]}{idx + 1}")


# ---------------------------------------------------------------------------
# Canonical rules
# ---------------------------------------------------------------------------

def _normalize_comparison(c: Comparison) -> Comparison:
    if c.op in (">", ">="):
        c = Comparison(c.right, {">": "<", ">=": "<="}[c.op], c.left)
    if c.op in ("==", "!="):
        lk = _term_key(c.left)
        rk = _term_key(c.right)
        if rk < lk:
            c = Comparison(c.right, c.op, c.left)
    return c


def _encode_term(t: Term, vid: Mapping[Var, int]):
    if isinstance(t, Var):
        return ("v", vid[t])
    return ("k",) + _term_key(t)


def _rule_encoding(rule: Rule, vid: Mapping[Var, int]):
    head = ("H", rule.head.predicate,
            tuple(_encode_term(t, vid) for t in rule.head.args))
    pos = [("A", a.predicate, tuple(_encode_term(t, vid) for t in a.args))
           for a in rule.body_pos]
    neg = [("N", a.predicate, tuple(_encode_term(t, vid) for t in a.args))
           for a in rule.body_neg]
    cmps = []
    for c in rule.comparisons:
        if c.op in (">", ">="):
            c = Comparison(c.right, {">": "<", ">=": "<="}[c.op], c.left)
        cmps.append(("C", c.op, _encode_term(c.left, vid), _encode_term(c.right, vid)))
    return head, pos, neg, cmps


def _canonical_key(rule: Rule) -> tuple[tuple, tuple[int, ...] | None]:
    """Minimal encoding over variable renamings; also returns the best renaming."""
    vars_ = sorted(rule.variables(), key=lambda v: v.name)
    n = len(vars_)
    vid = {v: i for i, v in enumerate(vars_)}
    head, pos, neg, cmps = _rule_encoding(rule, vid)

    def remap(spec, perm):
        return ("v", perm[spec[1]]) if spec[0] == "v" else spec

    best_key = None
    best_perm = None
    for perm in itertools.permutations(range(n)) if n else ((),):
        h = (head[0], head[1], tuple(remap(s, perm) for s in head[2]))
        p = sorted((l[0], l[1], tuple(remap(s, perm) for s in l[2])) for l in pos)
        ng = sorted((l[0], l[1], tuple(remap(s, perm) for s in l[2])) for l in neg)
        cs = []
        for _, op, ls, rs in cmps:
            l, r = remap(ls, perm), remap(rs, perm)
            if op in ("==", "!=") and r < l:
                l, r = r, l
            cs.append(("C", op, l, r))
        cs.sort()
        key = (h, tuple(p), tuple(ng), tuple(cs))
        if best_key is None or key < best_key:
            best_key = key
            best_perm = perm
    return best_key, best_perm


def canonical_rule(rule: Rule) -> Rule:
    """Canonical variant: variables renamed over all bijections, body sorted,
    symmetric comparisons ordered; the minimum over renamings is taken.

    Two rules equal up to variable renaming and body reordering share their
    canonical form.
    """
    vars_ = sorted(rule.variables(), key=lambda v: v.name)
    _, perm = _canonical_key(rule)
    theta = {v: Var(f"V{perm[i] + 1}") for i, v in enumerate(vars_)}
    head = rule.head.substitute(theta)
    pos = tuple(sorted((a.substitute(theta) for a in rule.body_pos), key=Atom.sort_key))
    neg = tuple(sorted((a.substitute(theta) for a in rule.body_neg), key=Atom.sort_key))
    cmps = tuple(sorted((_normalize_comparison(c.substitute(theta))
                         for c in rule.comparisons), key=Comparison.sort_key))
    return Rule(head, pos, neg, cmps)


@dataclass
class CandidateRule:
    rule: Rule
    length: int
    text: str
    fire_set: int = 0        # bitmask over example indices, set by fire_matrix

    @staticmethod
    def from_rule(rule: Rule) -> "CandidateRule":
        return CandidateRule(rule, rule.literal_count, str(rule))


# ---------------------------------------------------------------------------
# Candidate enumeration
# ---------------------------------------------------------------------------

def _expand_mode(mode: ModeDecl, prefixes: Mapping[str, str], max_vars: int,
                 pools: Mapping[str, tuple[Term, ...]]) -> list[Atom]:
    choices: list[list[Term]] = []
    for kind, typ in mode.args:
        if kind == "var":
            choices.append([_typed_var(prefixes, typ, i) for i in range(max_vars)])
        else:
            choices.append(list(pools[typ]))
    if not choices:
        return [Atom(mode.predicate)]
    return [Atom(mode.predicate, combo) for combo in itertools.product(*choices)]


def _background_satisfiable(atoms: Sequence[Atom], cmps: Sequence[Comparison],
                            bg_index: dict[tuple[str, int], list[Atom]]) -> bool:
    from .logic import _join_substitutions
    gen = _join_substitutions(tuple(atoms), tuple(cmps), bg_index)
    return next(gen, None) is not None


def enumerate_candidates(bias: LanguageBias, background: LogicProgram,
                         cap: int = DEFAULT_CANDIDATE_CAP,
                         prune_background_unsat: bool = True) -> list[CandidateRule]:
    """All safe canonical rules within the bias budgets, sorted by (length, text).

    Rules whose background-relation sub-body is unsatisfiable over a
    facts-only background are dropped (contexts never extend background
    predicates).  Raises :class:`ResourceLimitError` when more than ``cap``
    canonical rules survive.
    """
    pools = bias.pools
    var_types = sorted({typ for m in bias.body_modes for kind, typ in m.args
                        if kind == "var"})
    prefixes = _var_prefixes(var_types)

    heads: list[Atom] = []
    for m in bias.head_modes:
        heads.extend(_expand_mode(m, prefixes, 0, pools))
    body_atoms: list[Atom] = []
    seen_atoms: set[Atom] = set()
    for m in bias.body_modes:
        for a in _expand_mode(m, prefixes, bias.max_variables, pools):
            if a not in seen_atoms:
                seen_atoms.add(a)
                body_atoms.append(a)

    literals: list[tuple[str, object]] = [("pos", a) for a in body_atoms]
    if bias.allow_negation:
        literals.extend(("neg", a) for a in body_atoms)
    if bias.allow_inequality:
        for typ in var_types:
            ids = [_typed_var(prefixes, typ, i) for i in range(bias.max_variables)]
            for v1, v2 in itertools.combinations(ids, 2):
                literals.append(("cmp", Comparison(v1, "!=", v2)))

    all_vars = sorted({v for _, lit in literals for v in lit.variables()},
                      key=lambda v: v.name)
    var_index = {v: i for i, v in enumerate(all_vars)}

    def mask_of(lit) -> int:
        m = 0
        for v in lit.variables():
            m |= 1 << var_index[v]
        return m

    lit_masks = [mask_of(lit) for _, lit in literals]
    pos_flags = [kind == "pos" for kind, _ in literals]

    # A combo whose used variable ids per type are not a prefix (e.g. C2
    # without C1) is a renaming of one that is; skip it before the costly
    # canonicalization.
    prefix_masks: set[int] = set()
    per_type_bits: list[list[int]] = []
    for typ in var_types:
        bits = [var_index[_typed_var(prefixes, typ, i)]
                for i in range(bias.max_variables)
                if _typed_var(prefixes, typ, i) in var_index]
        per_type_bits.append(bits)
    for counts in itertools.product(*(range(len(b) + 1) for b in per_type_bits)):
        m = 0
        for bits, k in zip(per_type_bits, counts):
            for b in bits[:k]:
                m |= 1 << b
        prefix_masks.add(m)

    bg_preds = background.head_predicates() if background.is_facts_only() else set()
    bg_index: dict[tuple[str, int], list[Atom]] = {}
    for a in background.fact_atoms:
        bg_index.setdefault((a.predicate, a.arity), []).append(a)

    canonical: dict[tuple, Rule] = {}
    rejected: set[tuple] = set()
    sat_cache: dict[tuple, bool] = {}
    n_lits = len(literals)
    for head in heads:
        for size in range(0, bias.max_body_literals + 1):
            for combo in itertools.combinations(range(n_lits), size):
                var_mask = 0
                pos_mask = 0
                for i in combo:
                    var_mask |= lit_masks[i]
                    if pos_flags[i]:
                        pos_mask |= lit_masks[i]
                if bin(var_mask).count("1") > bias.max_variables:
                    continue
                if var_mask not in prefix_masks:
                    continue
                if (var_mask & ~pos_mask) != 0:   # safety: all vars in positive body
                    continue
                pos = tuple(literals[i][1] for i in combo if literals[i][0] == "pos")
                neg = tuple(literals[i][1] for i in combo if literals[i][0] == "neg")
                cmps = tuple(literals[i][1] for i in combo if literals[i][0] == "cmp")
                rule = Rule(head, pos, neg, cmps)
                key, _ = _canonical_key(rule)
                if key in canonical or key in rejected:
                    continue
                if prune_background_unsat and bg_preds:
                    bg_atoms = [a for a in pos if a.predicate in bg_preds]
                    if bg_atoms:
                        bg_vars = {v for a in bg_atoms for v in a.variables()}
                        bg_cmps = [c for c in cmps if set(c.variables()) <= bg_vars]
                        subkey, _ = _canonical_key(
                            Rule(Atom("q"), tuple(bg_atoms), (), tuple(bg_cmps)))
                        sat = sat_cache.get(subkey)
                        if sat is None:
                            sat = _background_satisfiable(bg_atoms, bg_cmps, bg_index)
                            sat_cache[subkey] = sat
                        if not sat:
                            rejected.add(key)
                            continue
                canonical[key] = canonical_rule(rule)
                if len(canonical) > cap:
                    raise ResourceLimitError(
                        f"candidate space exceeds cap of {cap} rules "
                        f"(bounds: max_body_literals={bias.max_body_literals}, "
                        f"max_variables={bias.max_variables})")
    out = [CandidateRule.from_rule(r) for r in canonical.values()]
    out.sort(key=lambda c: (c.length, c.text))
    return out


# ---------------------------------------------------------------------------
# Rule evaluation plans
# ---------------------------------------------------------------------------

class ContextIndex:
    """Ground atoms of one evaluation context, indexed by predicate/arity."""

    __slots__ = ("sets", "lists", "atoms")

    def __init__(self, atoms: Iterable[Atom]):
        self.atoms = frozenset(atoms)
        self.sets: dict[tuple[str, int], set[tuple]] = {}
        self.lists: dict[tuple[str, int], list[tuple]] = {}
        for a in sorted(self.atoms, key=Atom.sort_key):
            key = (a.predicate, a.arity)
            s = self.sets.get(key)
            if s is None:
                s = set()
                self.sets[key] = s
                self.lists[key] = []
            if a.args not in s:
                s.add(a.args)
                self.lists[key].append(a.args)


def _arg_spec(term: Term, var_ids: dict[Var, int]):
    if isinstance(term, Var):
        return ("v", var_ids[term])
    return ("c", term)


class RulePlan:
    """Compiled satisfiability check for one rule body over a ContextIndex.

    When a facts-only background is supplied, the sub-body over background
    predicates is joined once at compile time and projected onto the
    variables shared with the rest of the rule; per-context evaluation then
    only joins over context atoms plus a membership test in the projection.
    """

    __slots__ = ("head", "ground_atoms", "steps", "final_checks", "nvars",
                 "overlay", "overlay_sets", "constant_false")

    def _overlay_set(self, key) -> set:
        s = self.overlay_sets.get(key)
        if s is None:
            s = set(self.overlay[key])
            self.overlay_sets[key] = s
        return s

    def __init__(self, rule: Rule, background: LogicProgram | None = None):
        self.head = rule.head
        self.overlay: dict[tuple[str, int], list[tuple]] = {}
        self.overlay_sets: dict[tuple[str, int], set] = {}
        self.constant_false = False
        var_ids: dict[Var, int] = {}
        for v in sorted(rule.variables(), key=lambda v: v.name):
            var_ids[v] = len(var_ids)
        self.nvars = len(var_ids)

        body_pos = list(rule.body_pos)
        comparisons = list(rule.comparisons)

        if background is not None and background.is_facts_only():
            body_pos, comparisons = self._fold_background(
                rule, body_pos, comparisons, background, var_ids)

        ground = [a for a in body_pos if a.is_ground()]
        nonground = [a for a in body_pos if not a.is_ground()]
        self.ground_atoms = [(a.predicate, a.arity, a.args) for a in ground]

        # Order non-ground atoms so each step binds as few new variables as
        # possible given the bindings accumulated so far; the projection
        # pseudo-atom goes last (it is a filter, not a generator).
        ordered: list[Atom] = []
        bound: set[Var] = set()
        remaining = list(nonground)
        while remaining:
            remaining.sort(key=lambda a: (a.predicate == _BG_PROJ,
                                          len(set(a.variables()) - bound),
                                          a.sort_key()))
            nxt = remaining.pop(0)
            ordered.append(nxt)
            bound.update(nxt.variables())

        # Attach each comparison / negative literal to the earliest step
        # after which all its variables are bound.
        checks_at: list[list] = [[] for _ in range(len(ordered) + 1)]

        def attach(needed: set[Var], check) -> None:
            seen: set[Var] = set()
            for i in range(len(ordered) + 1):
                if needed <= seen:
                    checks_at[i].append(check)
                    return
                if i < len(ordered):
                    seen.update(ordered[i].variables())
            checks_at[len(ordered)].append(check)

        for c in comparisons:
            spec = ("cmp", c.op, _arg_spec(c.left, var_ids), _arg_spec(c.right, var_ids))
            attach(set(c.variables()), spec)
        for a in rule.body_neg:
            spec = ("neg", a.predicate, a.arity,
                    tuple(_arg_spec(t, var_ids) for t in a.args))
            attach(set(a.variables()), spec)

        self.steps = []
        for i, a in enumerate(ordered):
            self.steps.append(((a.predicate, a.arity),
                               tuple(_arg_spec(t, var_ids) for t in a.args),
                               tuple(checks_at[i])))
        self.final_checks = tuple(checks_at[len(ordered)])

    def _fold_background(self, rule: Rule, body_pos: list[Atom],
                         comparisons: list[Comparison],
                         background: LogicProgram,
                         var_ids: dict[Var, int]) -> tuple[list[Atom], list[Comparison]]:
        from .logic import _join_substitutions
        bg_preds = background.head_predicates()
        bg_atoms = [a for a in body_pos if a.predicate in bg_preds]
        if not bg_atoms:
            return body_pos, comparisons
        ctx_atoms = [a for a in body_pos if a.predicate not in bg_preds]
        bg_vars = {v for a in bg_atoms for v in a.variables()}
        folded = [c for c in comparisons if set(c.variables()) <= bg_vars]
        kept_cmps = [c for c in comparisons if c not in folded]
        outside: set[Var] = set(rule.head.variables())
        for a in ctx_atoms:
            outside.update(a.variables())
        for a in rule.body_neg:
            outside.update(a.variables())
        for c in kept_cmps:
            outside.update(c.variables())
        shared = sorted(bg_vars & outside, key=lambda v: v.name)

        bg_index: dict[tuple[str, int], list[Atom]] = {}
        for a in background.fact_atoms:
            bg_index.setdefault((a.predicate, a.arity), []).append(a)
        tuples: set[tuple] = set()
        found = False
        for theta in _join_substitutions(tuple(bg_atoms), tuple(folded), bg_index):
            found = True
            if not shared:
                break
            tuples.add(tuple(theta[v] for v in shared))
        if not found:
            self.constant_false = True
            return [], []
        if not shared:
            return ctx_atoms, kept_cmps
        self.overlay[(_BG_PROJ, len(shared))] = sorted(tuples)
        return ctx_atoms + [Atom(_BG_PROJ, tuple(shared))], kept_cmps

    def fires(self, index: ContextIndex) -> bool:
        if self.constant_false:
            return False
        sets = index.sets
        for pred, ar, args in self.ground_atoms:
            s = sets.get((pred, ar))
            if s is None or args not in s:
                return False
        bindings: list = [None] * self.nvars
        return self._search(0, bindings, index)

    def _eval_check(self, check, bindings, index: ContextIndex) -> bool:
        if check[0] == "cmp":
            _, op, lspec, rspec = check
            l = bindings[lspec[1]] if lspec[0] == "v" else lspec[1]
            r = bindings[rspec[1]] if rspec[0] == "v" else rspec[1]
            if op == "==":
                return l == r
            if op == "!=":
                return l != r
            lk, rk = _term_key(l), _term_key(r)
            return {"<": lk < rk, "<=": lk <= rk, ">": lk > rk, ">=": lk >= rk}[op]
        _, pred, ar, specs = check
        tup = tuple(bindings[s[1]] if s[0] == "v" else s[1] for s in specs)
        s = index.sets.get((pred, ar))
        return s is None or tup not in s

    def _search(self, depth: int, bindings: list, index: ContextIndex) -> bool:
        if depth == len(self.steps):
            return all(self._eval_check(c, bindings, index) for c in self.final_checks)
        key, specs, checks = self.steps[depth]
        if key in self.overlay:
            tuples = self.overlay[key]
        else:
            tuples = index.lists.get(key)
        if not tuples:
            return False
        # Fully bound step: a membership test instead of iteration.
        if all(s[0] == "c" or bindings[s[1]] is not None for s in specs):
            tup = tuple(s[1] if s[0] == "c" else bindings[s[1]] for s in specs)
            if key in self.overlay:
                if tup not in self._overlay_set(key):
                    return False
            else:
                if tup not in index.sets[key]:
                    return False
            if all(self._eval_check(c, bindings, index) for c in checks):
                return self._search(depth + 1, bindings, index)
            return False
        for tup in tuples:
            assigned: list[int] = []
            ok = True
            for spec, val in zip(specs, tup):
                if spec[0] == "c":
                    if spec[1] != val:
                        ok = False
                        break
                else:
                    cur = bindings[spec[1]]
                    if cur is None:
                        bindings[spec[1]] = val
                        assigned.append(spec[1])
                    elif cur != val:
                        ok = False
                        break
            if ok and all(self._eval_check(c, bindings, index) for c in checks):
                if self._search(depth + 1, bindings, index):
                    for i in assigned:
                        bindings[i] = None
                    return True
            for i in assigned:
                bindings[i] = None
        return False


# ---------------------------------------------------------------------------
# Learning task / fire matrix
# ---------------------------------------------------------------------------

@dataclass
class LearningTask:
    background: LogicProgram
    bias: LanguageBias
    examples: tuple[WCDPI, ...]
    gamma: float = 1.0
    mode: str = "multiclass"            # multiclass | binary
    positive_label: str | None = None

    def __post_init__(self):
        self.examples = tuple(self.examples)
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.mode not in ("multiclass", "binary"):
            raise ValueError(f"unknown mode {self.mode!r}")
        head_preds = {m.predicate for m in self.bias.head_modes}
        body_preds = {m.predicate for m in self.bias.body_modes}
        clash = head_preds & (body_preds | self.background.body_predicates())
        if clash:
            raise ValueError(
                f"head predicates {sorted(clash)} occur in rule bodies; learned "
                f"predicates must stay out of all bodies")


@dataclass
class Hypothesis:
    rules: tuple[Rule, ...]
    score: float
    penalty_part: float
    length_part: int
    covered: int                         # bitmask over example indices
    optimal: bool = True

    @property
    def text(self) -> str:
        return "\n".join(str(r) for r in self.rules)


@dataclass
class FireTable:
    """Firing behaviour of every candidate over every example, plus the label
    atoms each example derives without any hypothesis."""

    candidates: list[CandidateRule]
    examples: tuple[WCDPI, ...]
    base_labels: list[frozenset[Atom]]

    @property
    def n_examples(self) -> int:
        return len(self.examples)

    def fires(self, cand_idx: int, ex_idx: int) -> bool:
        return bool(self.candidates[cand_idx].fire_set >> ex_idx & 1)


def fire_matrix(candidates: list[CandidateRule], examples: Sequence[WCDPI],
                background: LogicProgram) -> FireTable:
    """Fill each candidate's fire set: bit e is set when the candidate's head
    is derivable from background + context of example e + that single rule."""
    examples = tuple(examples)
    bg_atoms = frozenset(background.fact_atoms) if background.is_facts_only() else None
    plans = [RulePlan(c.rule, background) for c in candidates]
    label_atoms = ({c.rule.head for c in candidates} |
                   {a for e in examples for a in e.pi.inc | e.pi.exc})

    for c in candidates:
        c.fire_set = 0
    base_labels: list[frozenset[Atom]] = [frozenset()] * len(examples)

    by_context: dict[frozenset[Atom], list[int]] = {}
    for i, e in enumerate(examples):
        if bg_atoms is not None:
            atoms = bg_atoms | frozenset(e.context.fact_atoms)
        else:
            atoms = answer_set(background + e.context)
        by_context.setdefault(atoms, []).append(i)

    for atoms, idxs in by_context.items():
        index = ContextIndex(atoms)
        mask = 0
        for i in idxs:
            mask |= 1 << i
        base = frozenset(a for a in label_atoms if a in atoms)
        for i in idxs:
            base_labels[i] = base
        for c, plan in zip(candidates, plans):
            if plan.fires(index):
                c.fire_set |= mask
    return FireTable(candidates, examples, base_labels)


def coverage(hypothesis: Iterable[int], ex_idx: int, table: FireTable) -> bool:
    """Does the hypothesis (a set of candidate indices) cover example ``ex_idx``?

    The derived label set is the base labels plus the heads of included rules
    that fire on the example; covered means the inclusion set is fully derived
    and the exclusion set is untouched.
    """
    e = table.examples[ex_idx]
    derived = set(table.base_labels[ex_idx])
    for r in hypothesis:
        if table.candidates[r].fire_set >> ex_idx & 1:
            derived.add(table.candidates[r].rule.head)
    return e.pi.inc <= derived and not (e.pi.exc & derived)


def score(hypothesis: Iterable[int], task: LearningTask,
          table: FireTable) -> tuple[float, float, int]:
    """(total, penalty_part, length_part) of a hypothesis over the task.

    Uncovered examples contribute their penalties; an uncovered example with
    infinite penalty makes the total infinite.
    """
    hyp = sorted(set(hypothesis))
    length_part = sum(table.candidates[r].length for r in hyp)
    penalty_part: float = 0
    for i, e in enumerate(task.examples):
        if not coverage(hyp, i, table):
            penalty_part += e.penalty
    total = penalty_part + task.gamma * length_part
    return total, penalty_part, length_part


# ---------------------------------------------------------------------------
# Optimal search
# ---------------------------------------------------------------------------

def learn_optimal(task: LearningTask,
                  candidates: list[CandidateRule] | None = None,
                  table: FireTable | None = None,
                  cap: int = DEFAULT_CANDIDATE_CAP,
                  timeout_s: float = DEFAULT_TIMEOUT_S,
                  max_nodes: int | None = None,
                  prune_dominated: bool = True) -> Hypothesis:
    """Globally minimal hypothesis over subsets of the candidate space.

    Exact branch and bound over include/exclude decisions per candidate,
    processing the currently hardest-to-cover example first and trying its
    covering candidates in order of descending penalty coverage per literal.
    Ties between optimal hypotheses break toward smaller total length, then
    lexicographically smaller rule texts.  On hitting the wall-clock timeout
    or the node budget the best hypothesis found so far is returned flagged
    non-optimal; the node budget truncates deterministically, the timeout
    does not.
    """
    if candidates is None:
        candidates = enumerate_candidates(task.bias, task.background, cap=cap)
    if table is None:
        table = fire_matrix(candidates, task.examples, task.background)

    gamma = task.gamma
    examples = task.examples
    n_ex = len(examples)
    deadline = time.monotonic() + timeout_s

    # Demands: per example, the inclusion atoms not already derivable.
    # Constant part: penalties of examples no hypothesis can cover.
    base_penalty: float = 0.0
    demands: list[tuple[int, Atom]] = []       # (example, needed atom)
    forbidden: list[frozenset[Atom]] = []
    doomed = [False] * n_ex
    for i, e in enumerate(examples):
        base = table.base_labels[i]
        forbidden.append(frozenset(e.pi.exc))
        if e.pi.exc & base:
            doomed[i] = True
            base_penalty += e.penalty
            continue
        for a in sorted(e.pi.inc - base, key=Atom.sort_key):
            demands.append((i, a))

    # Helpful/harmful bitmasks per candidate.
    n_c = len(candidates)
    help_masks = [0] * n_c                     # over demand indices
    harm_masks = [0] * n_c                     # over example indices

    for ci, c in enumerate(candidates):
        head = c.rule.head
        fs = c.fire_set
        for j, (i, atom) in enumerate(demands):
            if atom == head and (fs >> i) & 1 and not doomed[i]:
                help_masks[ci] |= 1 << j
        harm = 0
        for i in range(n_ex):
            if doomed[i]:
                continue
            if head in forbidden[i] and (fs >> i) & 1:
                harm |= 1 << i
        harm_masks[ci] = harm

    # Active candidates: those that satisfy at least one demand.
    order = sorted(range(n_c), key=lambda ci: (candidates[ci].length,
                                               candidates[ci].text))
    active: list[int] = [ci for ci in order if help_masks[ci]]

    # Merge candidates with identical behaviour; keep the shortest text-first.
    seen_behaviour: dict[tuple[Atom, int, int], int] = {}
    merged: list[int] = []
    for ci in active:
        key = (candidates[ci].rule.head, help_masks[ci], harm_masks[ci])
        if key not in seen_behaviour:
            seen_behaviour[key] = ci
            merged.append(ci)
    active = merged

    # Sound dominance pruning: r is dominated when some r' with the same head
    # helps a superset of demands, harms a subset of examples, and is no
    # longer; score-optimality is preserved in both task modes because both
    # effects of a rule are accounted for.
    if prune_dominated:
        by_head: dict[Atom, list[int]] = {}
        for ci in active:
            by_head.setdefault(candidates[ci].rule.head, []).append(ci)
        dominated: set[int] = set()
        for group in by_head.values():
            for a, b in itertools.permutations(group, 2):
                if b in dominated or a in dominated:
                    continue
                if (candidates[a].length <= candidates[b].length and
                        help_masks[a] | help_masks[b] == help_masks[a] and
                        harm_masks[a] & harm_masks[b] == harm_masks[a] and
                        (candidates[a].length < candidates[b].length or
                         help_masks[a] != help_masks[b] or
                         harm_masks[a] != harm_masks[b] or
                         candidates[a].text < candidates[b].text)):
                    dominated.add(b)
        active = [ci for ci in active if ci not in dominated]

    pen = [e.penalty for e in examples]
    demand_helpers: list[list[int]] = [[] for _ in demands]
    for ci in active:
        hm = help_masks[ci]
        j = 0
        while hm:
            if hm & 1:
                demand_helpers[j].append(ci)
            hm >>= 1
            j += 1

    def solution_value(hyp: Sequence[int]) -> tuple[float, float, int]:
        return score(hyp, task, table)

    # Greedy warm start for a strong initial incumbent.
    def greedy() -> list[int]:
        chosen: list[int] = []
        best_total, _, _ = solution_value(chosen)
        improved = True
        while improved:
            improved = False
            best_ci = None
            for ci in active:
                if ci in chosen:
                    continue
                total, _, _ = solution_value(chosen + [ci])
                if total < best_total - 1e-12:
                    best_total = total
                    best_ci = ci
            if best_ci is not None:
                chosen.append(best_ci)
                improved = True
        return sorted(chosen)

    incumbent = greedy()
    inc_score, inc_pen, inc_len = solution_value(incumbent)

    def tie_key(hyp: Sequence[int]) -> tuple:
        return (sum(candidates[ci].length for ci in hyp),
                tuple(sorted(candidates[ci].text for ci in hyp)))

    inc_key = tie_key(incumbent)

    # --- branch and bound ---
    lost = [doomed[i] for i in range(n_ex)]
    sat = [False] * len(demands)
    helpers_left = [len(h) for h in demand_helpers]
    removed = [False] * n_c
    included: list[int] = []
    lost_pen_state = [0.0]
    node_budget = [0]
    timed_out = [False]

    def current_lost_penalty() -> float:
        return lost_pen_state[0]

    def check_time() -> bool:
        node_budget[0] += 1
        if max_nodes is not None and node_budget[0] > max_nodes:
            timed_out[0] = True
        elif node_budget[0] % 256 == 0 and time.monotonic() > deadline:
            timed_out[0] = True
        return timed_out[0]

    def mark_lost(i: int, journal: list) -> None:
        if not lost[i]:
            lost[i] = True
            lost_pen_state[0] += pen[i]
            journal.append(("lost", i))

    def include(ci: int, journal: list) -> None:
        included.append(ci)
        journal.append(("inc", ci))
        hm = help_masks[ci]
        j = 0
        while hm:
            if hm & 1 and not sat[j]:
                sat[j] = True
                journal.append(("sat", j))
            hm >>= 1
            j += 1
        harm = harm_masks[ci]
        i = 0
        while harm:
            if harm & 1:
                mark_lost(i, journal)
            harm >>= 1
            i += 1

    def exclude(ci: int, journal: list) -> None:
        removed[ci] = True
        journal.append(("rem", ci))
        hm = help_masks[ci]
        j = 0
        while hm:
            if hm & 1:
                helpers_left[j] -= 1
                journal.append(("hl", j))
                if helpers_left[j] == 0 and not sat[j]:
                    mark_lost(demands[j][0], journal)
            hm >>= 1
            j += 1

    def undo(journal: list) -> None:
        for tag, x in reversed(journal):
            if tag == "lost":
                lost[x] = False
                lost_pen_state[0] -= pen[x]
            elif tag == "inc":
                included.pop()
            elif tag == "sat":
                sat[x] = False
            elif tag == "rem":
                removed[x] = False
            elif tag == "hl":
                helpers_left[x] += 1

    def committed_length() -> int:
        return sum(candidates[ci].length for ci in included)

    def open_demands() -> list[int]:
        return [j for j in range(len(demands))
                if not sat[j] and not lost[demands[j][0]]]

    def lower_bound(open_js: list[int], committed_len: int) -> float:
        bound = gamma * committed_len + current_lost_penalty()
        # Disjoint-coverer relaxation: demands of distinct examples whose
        # remaining helper sets do not overlap need separate payments.
        taken_examples: set[int] = set()
        taken_helpers: set[int] = set()
        extra = 0.0
        for j in sorted(open_js, key=lambda j: (helpers_left[j], j)):
            i = demands[j][0]
            if i in taken_examples:
                continue
            helpers = [ci for ci in demand_helpers[j] if not removed[ci]]
            if any(ci in taken_helpers for ci in helpers):
                continue
            cheapest = min((candidates[ci].length for ci in helpers), default=None)
            cost = pen[i] if cheapest is None else min(pen[i], gamma * cheapest)
            extra += cost
            taken_examples.add(i)
            taken_helpers.update(helpers)
        return bound + extra

    def utility(ci: int) -> tuple:
        helped = 0.0
        hm = help_masks[ci]
        j = 0
        while hm:
            if hm & 1 and not sat[j] and not lost[demands[j][0]]:
                helped += pen[demands[j][0]]
            hm >>= 1
            j += 1
        harmed = 0.0
        harm = harm_masks[ci]
        i = 0
        while harm:
            if harm & 1 and not lost[i]:
                harmed += pen[i]
            harm >>= 1
            i += 1
        net = (helped - harmed) / candidates[ci].length
        return (-net, candidates[ci].length, candidates[ci].text)

    def update_incumbent() -> None:
        nonlocal incumbent, inc_score, inc_key
        hyp = sorted(included)
        total, _, _ = solution_value(hyp)
        key = tie_key(hyp)
        if total < inc_score - 1e-12 or (abs(total - inc_score) <= 1e-12 and key < inc_key):
            incumbent = hyp
            inc_score = total
            inc_key = key

    def dive() -> None:
        if check_time():
            return
        open_js = open_demands()
        committed_len = committed_length()
        bound = lower_bound(open_js, committed_len)
        if bound > inc_score + 1e-12:
            return
        if abs(bound - inc_score) <= 1e-12 and (committed_len, ) > (inc_key[0], ):
            return
        if not open_js:
            update_incumbent()
            return
        j = min(open_js, key=lambda j: (helpers_left[j], j))
        helpers = sorted((ci for ci in demand_helpers[j] if not removed[ci]),
                         key=utility)
        journal_all: list = []
        for ci in helpers:
            journal: list = []
            include(ci, journal)
            dive()
            undo(journal)
            if timed_out[0]:
                undo(journal_all)
                return
            exclude(ci, journal_all)
        # All helpers rejected: the demand's example pays its penalty.
        journal: list = []
        mark_lost(demands[j][0], journal)
        dive()
        undo(journal)
        undo(journal_all)

    dive()

    hyp = sorted(incumbent)
    total, penalty_part, length_part = solution_value(hyp)
    covered_mask = 0
    for i in range(n_ex):
        if coverage(hyp, i, table):
            covered_mask |= 1 << i
    rules = tuple(candidates[ci].rule for ci in
                  sorted(hyp, key=lambda ci: (candidates[ci].length, candidates[ci].text)))
    return Hypothesis(rules, total, penalty_part, length_part, covered_mask,
                      optimal=not timed_out[0])


def interpretability(hypothesis: Hypothesis | Iterable[Rule]) -> int:
    """Total literal occurrences (head plus body) across all rules."""
    rules = hypothesis.rules if isinstance(hypothesis, Hypothesis) else tuple(hypothesis)
    return sum(r.literal_count for r in rules)


# ---------------------------------------------------------------------------
# Task files
# ---------------------------------------------------------------------------

def _parse_mode_decl(tz: Tokenizer) -> ModeDecl:
    name = tz.expect("IDENT", "predicate name")
    args: list[tuple[str, str]] = []
    if tz.peek().kind == "LPAREN":
        tz.next()
        while True:
            kind = tz.expect("IDENT", "'var' or 'const'")
            if kind.text not in ("var", "const"):
                raise ParseError(f"expected var(type) or const(type), found {kind.text!r}",
                                 kind.line, kind.column)
            tz.expect("LPAREN", "'('")
            typ = tz.expect("IDENT", "type name")
            tz.expect("RPAREN", "')'")
            args.append((kind.text, typ.text))
            if tz.peek().kind != "COMMA":
                break
            tz.next()
        tz.expect("RPAREN", "')'")
    return ModeDecl(name.text, tuple(args))


def _parse_number(tz: Tokenizer) -> float:
    tok = tz.expect("INTEGER", "number")
    value = tok.text
    if tz.peek().kind == "DOT" and tz.peek(1).kind == "INTEGER":
        tz.next()
        frac = tz.next()
        return float(f"{value}.{frac.text}")
    return float(value)


def _parse_bias_block(tz: Tokenizer) -> LanguageBias:
    tz.expect("LBRACE", "'{'")
    head_modes: list[ModeDecl] = []
    body_modes: list[ModeDecl] = []
    pools: dict[str, list[Term]] = {}
    maxv = 0
    maxbody = 3
    allow_neg = False
    allow_ineq = False
    while tz.peek().kind != "RBRACE":
        stmt = tz.expect("IDENT", "bias statement")
        if stmt.text == "modeh":
            tz.expect("LPAREN", "'('")
            head_modes.append(_parse_mode_decl(tz))
            tz.expect("RPAREN", "')'")
        elif stmt.text == "modeb":
            tz.expect("LPAREN", "'('")
            body_modes.append(_parse_mode_decl(tz))
            tz.expect("RPAREN", "')'")
        elif stmt.text == "maxv":
            tz.expect("LPAREN", "'('")
            maxv = int(tz.expect("INTEGER", "count").text)
            tz.expect("RPAREN", "')'")
        elif stmt.text == "maxbody":
            tz.expect("LPAREN", "'('")
            maxbody = int(tz.expect("INTEGER", "count").text)
            tz.expect("RPAREN", "')'")
        elif stmt.text == "pool":
            tz.expect("LPAREN", "'('")
            typ = tz.expect("IDENT", "type name").text
            values: list[Term] = []
            while tz.peek().kind == "COMMA":
                tz.next()
                tok = tz.next()
                if tok.kind == "INTEGER":
                    values.append(int(tok.text))
                elif tok.kind == "IDENT":
                    values.append(tok.text)
                else:
                    raise ParseError(f"expected pool constant, found {tok.text!r}",
                                     tok.line, tok.column)
            tz.expect("RPAREN", "')'")
            pools.setdefault(typ, []).extend(values)
        elif stmt.text == "allow_negation":
            allow_neg = True
        elif stmt.text == "allow_inequality":
            allow_ineq = True
        else:
            raise ParseError(f"unknown bias statement {stmt.text!r}", stmt.line, stmt.column)
        tz.expect("DOT", "'.'")
    tz.next()
    return LanguageBias.make(head_modes, body_modes, maxbody, maxv, pools,
                             allow_negation=allow_neg, allow_inequality=allow_ineq)


def _parse_program_block(tz: Tokenizer) -> LogicProgram:
    tz.expect("LBRACE", "'{'")
    rules = []
    while tz.peek().kind != "RBRACE":
        rules.append(parse_rule_tokens(tz))
    tz.next()
    return LogicProgram(tuple(rules))


def parse_task_file(text: str, base_dir: str | Path = ".") -> LearningTask:
    """Parse a learning task file.

    Sections: ``#background { ... }``, ``#bias { ... }``, ``#examples "path"``
    (relative to ``base_dir``), ``#gamma n``, ``#mode multiclass`` or
    ``#mode binary(positive_label)``.
    """
    tz = Tokenizer(text)
    background = LogicProgram()
    bias: LanguageBias | None = None
    examples: tuple[WCDPI, ...] = ()
    gamma = 1.0
    mode = "multiclass"
    positive: str | None = None
    while not tz.at_end():
        tz.expect("HASH", "'#' section")
        section = tz.expect("IDENT", "section name")
        if section.text == "background":
            background = _parse_program_block(tz)
        elif section.text == "bias":
            bias = _parse_bias_block(tz)
        elif section.text == "examples":
            path_tok = tz.expect("STRING", "quoted path")
            path = Path(base_dir) / path_tok.text
            if not path.exists():
                raise ParseError(f"examples file not found: {path}",
                                 path_tok.line, path_tok.column)
            examples = tuple(read_examples(path))
        elif section.text == "gamma":
            gamma = _parse_number(tz)
        elif section.text == "mode":
            kind = tz.expect("IDENT", "'multiclass' or 'binary'")
            if kind.text == "multiclass":
                mode = "multiclass"
            elif kind.text == "binary":
                tz.expect("LPAREN", "'('")
                positive = tz.expect("IDENT", "positive label").text
                tz.expect("RPAREN", "')'")
                mode = "binary"
            else:
                raise ParseError(f"unknown mode {kind.text!r}", kind.line, kind.column)
        else:
            raise ParseError(f"unknown section '#{section.text}'",
                             section.line, section.column)
    if bias is None:
        raise ParseError("task file lacks a #bias section")
    return LearningTask(background, bias, examples, gamma, mode, positive)


def load_task(path: str | Path) -> LearningTask:
    path = Path(path)
    return parse_task_file(path.read_text(encoding="utf-8"), base_dir=path.parent)
