"""Stratified normal logic programs: parsing, grounding, answer sets.

The language is the function-free subset needed for background knowledge,
example contexts, and learned hypotheses: normal rules with negation as
failure and ground comparisons, restricted to stratified programs so that
every program has exactly one answer set.

Concrete syntax ('%' starts a line comment):

    program    := statement*
    statement  := rule "."
    rule       := atom [ ":-" body ]
    body       := literal ("," literal)*
    literal    := atom | "not" atom | term cmp term
    cmp        := "==" | "!=" | "<" | "<=" | ">" | ">="
    atom       := ident [ "(" term ("," term)* ")" ]
    term       := ident | integer | VARIABLE      # VARIABLE = [A-Z][A-Za-z0-9_]*
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Union

from .errors import ParseError, ResourceLimitError, StratificationError, UnsafeRuleError

__all__ = [
    "Var", "Term", "Atom", "Comparison", "Rule", "LogicProgram", "Interpretation",
    "parse_program", "parse_atom", "ground", "answer_set", "verify_answer_set",
    "facts_program", "COMPARISON_OPS",
]

COMPARISON_OPS = ("==", "!=", "<", "<=", ">", ">=")


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


#: A term is a symbolic constant, an integer constant, or a variable.
Term = Union[str, int, Var]


def is_variable(t: Term) -> bool:
    return isinstance(t, Var)


def _term_str(t: Term) -> str:
    return str(t)


def _term_key(t: Term):
    # Total order over ground terms: integers first (numeric), then symbols
    # (lexicographic).  Variables sort last so canonical sorting is stable.
    if isinstance(t, int):
        return (0, "", t)
    if isinstance(t, str):
        return (1, t, 0)
    return (2, t.name, 0)


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[Term, ...] = ()

    def __post_init__(self):
        if not self.predicate:
            raise ValueError("atom predicate must be nonempty")

    @property
    def arity(self) -> int:
        return len(self.args)

    def is_ground(self) -> bool:
        return not any(is_variable(a) for a in self.args)

    def variables(self) -> Iterator[Var]:
        for a in self.args:
            if isinstance(a, Var):
                yield a

    def substitute(self, theta: Mapping[Var, Term]) -> "Atom":
        return Atom(self.predicate, tuple(theta.get(a, a) if isinstance(a, Var) else a
                                          for a in self.args))

    def sort_key(self):
        return (self.predicate, len(self.args), tuple(_term_key(a) for a in self.args))

    def __str__(self) -> str:
        if not self.args:
            return self.predicate
        return f"{self.predicate}({','.join(_term_str(a) for a in self.args)})"


@dataclass(frozen=True)
class Comparison:
    left: Term
    op: str
    right: Term

    def __post_init__(self):
        if self.op not in COMPARISON_OPS:
            raise ValueError(f"unknown comparison operator {self.op!r}")

    def variables(self) -> Iterator[Var]:
        for t in (self.left, self.right):
            if isinstance(t, Var):
                yield t

    def substitute(self, theta: Mapping[Var, Term]) -> "Comparison":
        sub = lambda t: theta.get(t, t) if isinstance(t, Var) else t
        return Comparison(sub(self.left), self.op, sub(self.right))

    def is_ground(self) -> bool:
        return not (isinstance(self.left, Var) or isinstance(self.right, Var))

    def holds(self) -> bool:
        if not self.is_ground():
            raise ValueError(f"comparison {self} is not ground")
        l, r = self.left, self.right
        if self.op == "==":
            return l == r
        if self.op == "!=":
            return l != r
        lk, rk = _term_key(l), _term_key(r)
        return {"<": lk < rk, "<=": lk <= rk, ">": lk > rk, ">=": lk >= rk}[self.op]

    def sort_key(self):
        return (_term_key(self.left), self.op, _term_key(self.right))

    def __str__(self) -> str:
        return f"{_term_str(self.left)} {self.op} {_term_str(self.right)}"


@dataclass(frozen=True)
class Rule:
    head: Atom
    body_pos: tuple[Atom, ...] = ()
    body_neg: tuple[Atom, ...] = ()
    comparisons: tuple[Comparison, ...] = ()

    def __post_init__(self):
        bad = self.unsafe_variable()
        if bad is not None:
            raise UnsafeRuleError(bad.name, rule_text=self._render())

    def unsafe_variable(self) -> Var | None:
        """First variable occurring in head/neg/comparisons but not in the positive body."""
        safe = {v for a in self.body_pos for v in a.variables()}
        for v in itertools.chain(self.head.variables(),
                                 (v for a in self.body_neg for v in a.variables()),
                                 (v for c in self.comparisons for v in c.variables())):
            if v not in safe:
                return v
        return None

    @property
    def is_fact(self) -> bool:
        return not (self.body_pos or self.body_neg or self.comparisons)

    @property
    def literal_count(self) -> int:
        return 1 + len(self.body_pos) + len(self.body_neg) + len(self.comparisons)

    def variables(self) -> set[Var]:
        out = set(self.head.variables())
        for a in self.body_pos:
            out.update(a.variables())
        for a in self.body_neg:
            out.update(a.variables())
        for c in self.comparisons:
            out.update(c.variables())
        return out

    def substitute(self, theta: Mapping[Var, Term]) -> "Rule":
        return Rule(self.head.substitute(theta),
                    tuple(a.substitute(theta) for a in self.body_pos),
                    tuple(a.substitute(theta) for a in self.body_neg),
                    tuple(c.substitute(theta) for c in self.comparisons))

    def _render(self) -> str:
        parts = [str(a) for a in self.body_pos]
        parts += [f"not {a}" for a in self.body_neg]
        parts += [str(c) for c in self.comparisons]
        if not parts:
            return f"{self.head}."
        return f"{self.head} :- {', '.join(parts)}."

    def __str__(self) -> str:
        return self._render()


@dataclass(frozen=True)
class LogicProgram:
    rules: tuple[Rule, ...] = ()

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rules)

    def __add__(self, other: "LogicProgram") -> "LogicProgram":
        return LogicProgram(self.rules + other.rules)

    @property
    def fact_atoms(self) -> tuple[Atom, ...]:
        return tuple(r.head for r in self.rules if r.is_fact)

    def is_facts_only(self) -> bool:
        return all(r.is_fact for r in self.rules)

    def head_predicates(self) -> set[str]:
        return {r.head.predicate for r in self.rules}

    def body_predicates(self) -> set[str]:
        out: set[str] = set()
        for r in self.rules:
            out.update(a.predicate for a in r.body_pos)
            out.update(a.predicate for a in r.body_neg)
        return out


#: An interpretation is a set of ground atoms.
Interpretation = frozenset


def facts_program(atoms: Iterable[Atom]) -> LogicProgram:
    """Wrap ground atoms as a facts-only program (e.g. an example context)."""
    atoms = tuple(atoms)
    for a in atoms:
        if not a.is_ground():
            raise ValueError(f"fact {a} is not ground")
    return LogicProgram(tuple(Rule(a) for a in atoms))


# ---------------------------------------------------------------------------
# Tokenizer / parser
# ---------------------------------------------------------------------------

_PUNCT = {":-": "IMPLIES", "==": "CMP", "!=": "CMP", "<=": "CMP", ">=": "CMP",
          "<": "CMP", ">": "CMP", "(": "LPAREN", ")": "RPAREN", ",": "COMMA",
          ".": "DOT", "{": "LBRACE", "}": "RBRACE", "@": "AT", "#": "HASH"}


@dataclass(frozen=True)
class Token:
    kind: str       # IDENT | VARIABLE | INTEGER | one of _PUNCT values | EOF
    text: str
    line: int
    column: int


class Tokenizer:
    """Shared tokenizer for programs, example files, and task files."""

    def __init__(self, text: str):
        self.tokens = list(self._scan(text))
        self.pos = 0

    @staticmethod
    def _scan(text: str) -> Iterator[Token]:
        line, col = 1, 1
        i, n = 0, len(text)
        while i < n:
            ch = text[i]
            if ch == "\n":
                line += 1
                col = 1
                i += 1
                continue
            if ch in " \t\r":
                i += 1
                col += 1
                continue
            if ch == "%":
                while i < n and text[i] != "\n":
                    i += 1
                continue
            two = text[i:i + 2]
            if two in _PUNCT:
                yield Token(_PUNCT[two], two, line, col)
                i += 2
                col += 2
                continue
            if ch in _PUNCT:
                yield Token(_PUNCT[ch], ch, line, col)
                i += 1
                col += 1
                continue
            if ch == '"':
                j = i + 1
                while j < n and text[j] != '"':
                    if text[j] == "\n":
                        raise ParseError("unterminated string", line, col)
                    j += 1
                if j >= n:
                    raise ParseError("unterminated string", line, col)
                yield Token("STRING", text[i + 1:j], line, col)
                col += j + 1 - i
                i = j + 1
                continue
            if ch.isdigit():
                j = i
                while j < n and text[j].isdigit():
                    j += 1
                yield Token("INTEGER", text[i:j], line, col)
                col += j - i
                i = j
                continue
            if ch.isalpha() or ch == "_":
                j = i
                while j < n and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                word = text[i:j]
                kind = "VARIABLE" if word[0].isupper() else "IDENT"
                yield Token(kind, word, line, col)
                col += j - i
                i = j
                continue
            raise ParseError(f"unexpected character {ch!r}", line, col)
        yield Token("EOF", "", line, col)

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            expected = what or kind
            raise ParseError(f"expected {expected}, found {tok.text!r}", tok.line, tok.column)
        return self.next()

    def at_end(self) -> bool:
        return self.peek().kind == "EOF"


def _parse_term(tz: Tokenizer) -> Term:
    tok = tz.peek()
    if tok.kind == "INTEGER":
        tz.next()
        return int(tok.text)
    if tok.kind == "VARIABLE":
        tz.next()
        return Var(tok.text)
    if tok.kind == "IDENT":
        tz.next()
        return tok.text
    raise ParseError(f"expected term, found {tok.text!r}", tok.line, tok.column)


def parse_atom_tokens(tz: Tokenizer) -> Atom:
    tok = tz.expect("IDENT", "predicate name")
    if tok.text == "not":
        raise ParseError("'not' is reserved", tok.line, tok.column)
    args: list[Term] = []
    if tz.peek().kind == "LPAREN":
        tz.next()
        args.append(_parse_term(tz))
        while tz.peek().kind == "COMMA":
            tz.next()
            args.append(_parse_term(tz))
        tz.expect("RPAREN", "')'")
    return Atom(tok.text, tuple(args))


def parse_atom(text: str) -> Atom:
    """Parse a single atom, e.g. ``digit(c1,2)``."""
    tz = Tokenizer(text)
    atom = parse_atom_tokens(tz)
    if not tz.at_end():
        tok = tz.peek()
        raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.column)
    return atom


def _parse_literal(tz: Tokenizer) -> tuple[str, object]:
    tok = tz.peek()
    if tok.kind == "IDENT" and tok.text == "not":
        tz.next()
        return ("neg", parse_atom_tokens(tz))
    if tok.kind in ("VARIABLE", "INTEGER"):
        left = _parse_term(tz)
        op = tz.expect("CMP", "comparison operator")
        right = _parse_term(tz)
        return ("cmp", Comparison(left, op.text, right))
    if tok.kind == "IDENT":
        # Could be an atom, or a 0-ary symbol used as the left side of a comparison.
        nxt = tz.peek(1)
        if nxt.kind == "CMP":
            left = _parse_term(tz)
            op = tz.next()
            right = _parse_term(tz)
            return ("cmp", Comparison(left, op.text, right))
        return ("pos", parse_atom_tokens(tz))
    raise ParseError(f"expected literal, found {tok.text!r}", tok.line, tok.column)


def parse_rule_tokens(tz: Tokenizer) -> Rule:
    start = tz.peek()
    head = parse_atom_tokens(tz)
    body_pos: list[Atom] = []
    body_neg: list[Atom] = []
    comparisons: list[Comparison] = []
    if tz.peek().kind == "IMPLIES":
        tz.next()
        while True:
            kind, lit = _parse_literal(tz)
            if kind == "pos":
                body_pos.append(lit)
            elif kind == "neg":
                body_neg.append(lit)
            else:
                comparisons.append(lit)
            if tz.peek().kind != "COMMA":
                break
            tz.next()
    tz.expect("DOT", "'.'")
    try:
        return Rule(head, tuple(body_pos), tuple(body_neg), tuple(comparisons))
    except UnsafeRuleError as exc:
        raise UnsafeRuleError(exc.variable, rule_text="", line=start.line,
                              column=start.column) from None


def parse_program(text: str) -> LogicProgram:
    """Parse program text; raises :class:`ParseError` with line/column on bad input."""
    tz = Tokenizer(text)
    rules: list[Rule] = []
    while not tz.at_end():
        rules.append(parse_rule_tokens(tz))
    return LogicProgram(tuple(rules))


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------

def stratify(program: LogicProgram) -> dict[str, int]:
    """Map each predicate to a stratum index, or raise :class:`StratificationError`.

    A program is stratified when no cycle of the predicate dependency graph
    contains a negative edge.
    """
    preds: set[str] = set()
    pos_edges: dict[str, set[str]] = {}
    neg_edges: dict[str, set[str]] = {}
    for r in program.rules:
        h = r.head.predicate
        preds.add(h)
        for a in r.body_pos:
            preds.add(a.predicate)
            pos_edges.setdefault(h, set()).add(a.predicate)
        for a in r.body_neg:
            preds.add(a.predicate)
            neg_edges.setdefault(h, set()).add(a.predicate)

    # Iterative relaxation: stratum(h) >= stratum(b) for positive deps,
    # stratum(h) >= stratum(b) + 1 for negative deps.  Converges within
    # |preds| rounds for stratified programs; a stratum exceeding |preds|
    # witnesses a cycle through negation.
    stratum = {p: 0 for p in preds}
    limit = len(preds) + 1
    for _ in range(limit + 1):
        changed = False
        for h in preds:
            for b in pos_edges.get(h, ()):
                if stratum[h] < stratum[b]:
                    stratum[h] = stratum[b]
                    changed = True
            for b in neg_edges.get(h, ()):
                if stratum[h] < stratum[b] + 1:
                    stratum[h] = stratum[b] + 1
                    changed = True
            if stratum[h] > limit:
                raise StratificationError(
                    f"program recurses through negation at predicate '{h}'")
        if not changed:
            return stratum
    raise StratificationError("program recurses through negation")


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------

DEFAULT_GROUNDING_CAP = 10 ** 6


def _match_atom(pattern: Atom, fact: Atom, theta: dict[Var, Term]) -> dict[Var, Term] | None:
    if pattern.predicate != fact.predicate or pattern.arity != fact.arity:
        return None
    out = dict(theta)
    for p, f in zip(pattern.args, fact.args):
        if isinstance(p, Var):
            bound = out.get(p)
            if bound is None:
                out[p] = f
            elif bound != f:
                return None
        elif p != f:
            return None
    return out


def _join_substitutions(body_pos: tuple[Atom, ...], comparisons: tuple[Comparison, ...],
                        by_pred: dict[tuple[str, int], list[Atom]]) -> Iterator[dict[Var, Term]]:
    """Enumerate substitutions grounding ``body_pos`` against the given facts.

    Atoms are processed most-constrained-first; comparisons fire as soon as
    both sides are bound.
    """
    order = sorted(range(len(body_pos)),
                   key=lambda i: (len(by_pred.get((body_pos[i].predicate,
                                                   body_pos[i].arity), ())),
                                  i))
    pending = list(comparisons)

    def check_cmps(theta: dict[Var, Term], todo: list[Comparison]) -> tuple[bool, list[Comparison]]:
        rest = []
        for c in todo:
            g = c.substitute(theta)
            if g.is_ground():
                if not g.holds():
                    return False, rest
            else:
                rest.append(c)
        return True, rest

    def rec(k: int, theta: dict[Var, Term], todo: list[Comparison]) -> Iterator[dict[Var, Term]]:
        if k == len(order):
            if all(c.substitute(theta).holds() for c in todo):
                yield theta
            return
        pat = body_pos[order[k]]
        for fact in by_pred.get((pat.predicate, pat.arity), ()):
            theta2 = _match_atom(pat, fact, theta)
            if theta2 is None:
                continue
            ok, rest = check_cmps(theta2, todo)
            if ok:
                yield from rec(k + 1, theta2, rest)

    ok, todo = check_cmps({}, pending)
    if ok:
        yield from rec(0, {}, todo)


def ground(program: LogicProgram, extra_facts: Interpretation = frozenset(),
           cap: int = DEFAULT_GROUNDING_CAP) -> LogicProgram:
    """Instantiate all variables, keeping only rules whose positive bodies can
    be satisfied over atoms derivable from ``program`` plus ``extra_facts``.

    Ground comparisons are resolved: rules with a false comparison are
    dropped, true comparisons are removed.  The result includes
    ``extra_facts`` as facts.  Raises :class:`ResourceLimitError` when more
    than ``cap`` ground rules would be produced.
    """
    stratify(program)
    for a in extra_facts:
        if not a.is_ground():
            raise ValueError(f"extra fact {a} is not ground")

    # Overapproximate the derivable atoms by a least fixpoint that ignores
    # negation (comparisons still apply).  Safety guarantees every variable
    # is bound by the positive body.
    possible: set[Atom] = set(extra_facts)
    by_pred: dict[tuple[str, int], list[Atom]] = {}

    def index(atom: Atom):
        by_pred.setdefault((atom.predicate, atom.arity), []).append(atom)

    for a in possible:
        index(a)

    frontier = True
    while frontier:
        frontier = False
        for r in program.rules:
            for theta in _join_substitutions(r.body_pos, r.comparisons, by_pred):
                h = r.head.substitute(theta)
                if h not in possible:
                    possible.add(h)
                    index(h)
                    frontier = True

    ground_rules: list[Rule] = [Rule(a) for a in sorted(extra_facts, key=Atom.sort_key)]
    seen: set[tuple] = set()
    for r in program.rules:
        for theta in _join_substitutions(r.body_pos, r.comparisons, by_pred):
            g = Rule(r.head.substitute(theta),
                     tuple(a.substitute(theta) for a in r.body_pos),
                     tuple(a.substitute(theta) for a in r.body_neg),
                     ())
            key = (g.head, g.body_pos, g.body_neg)
            if key in seen:
                continue
            seen.add(key)
            ground_rules.append(g)
            if len(ground_rules) > cap:
                raise ResourceLimitError(
                    f"grounding exceeds cap of {cap} rules")
    return LogicProgram(tuple(ground_rules))


# ---------------------------------------------------------------------------
# Answer sets
# ---------------------------------------------------------------------------

def answer_set(program: LogicProgram, facts: Interpretation = frozenset(),
               cap: int = DEFAULT_GROUNDING_CAP, verify: bool = False) -> Interpretation:
    """The unique answer set of ``program`` plus ``facts``.

    Computed by stratum-wise least fixpoint over the grounding.  With
    ``verify=True`` the result is additionally checked against the reduct
    definition via :func:`verify_answer_set`.
    """
    g = ground(program, facts, cap=cap)
    strata = stratify(g)
    order = sorted(set(strata.values()))
    result: set[Atom] = set()
    for level in order:
        layer = [r for r in g.rules if strata[r.head.predicate] == level]
        changed = True
        while changed:
            changed = False
            for r in layer:
                if r.head in result:
                    continue
                if all(a in result for a in r.body_pos) and \
                   not any(a in result for a in r.body_neg):
                    result.add(r.head)
                    changed = True
    out = frozenset(result)
    if verify and not verify_answer_set(program, facts, out, cap=cap):
        raise AssertionError("stratified evaluation disagrees with the reduct check")
    return out


def verify_answer_set(program: LogicProgram, facts: Interpretation,
                      candidate: Interpretation,
                      cap: int = DEFAULT_GROUNDING_CAP) -> bool:
    """Check ``candidate`` against the definition: it must equal the minimal
    model of the reduct of the grounding with respect to ``candidate``.

    Serves as the independent oracle for :func:`answer_set`.
    """
    for a in candidate:
        if not a.is_ground():
            raise ValueError(f"candidate atom {a} is not ground")
    g = ground(program, facts, cap=cap)
    # Reduct: drop rules whose negative body intersects the candidate; strip
    # negation from the rest.
    positive: list[tuple[Atom, tuple[Atom, ...]]] = []
    for r in g.rules:
        if any(a in candidate for a in r.body_neg):
            continue
        positive.append((r.head, r.body_pos))
    # Minimal model of the positive program by naive iteration.
    model: set[Atom] = set()
    changed = True
    while changed:
        changed = False
        for head, body in positive:
            if head not in model and all(a in model for a in body):
                model.add(head)
                changed = True
    return frozenset(model) == candidate
