"""Parser, grounding, and answer-set semantics."""
import itertools
import random

import pytest

from nsl.errors import ParseError, ResourceLimitError, StratificationError, UnsafeRuleError
from nsl.logic import (Atom, Comparison, LogicProgram, Rule, Var, answer_set,
                       facts_program, ground, parse_atom, parse_program,
                       stratify, verify_answer_set)


def atoms(*texts):
    return frozenset(parse_atom(t) for t in texts)


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def test_parse_rule_with_comparison():
    p = parse_program(
        "invalid :- digit(C1,V), digit(C2,V), same_row(C1,C2), C1 != C2.")
    assert len(p.rules) == 1
    r = p.rules[0]
    assert r.head == Atom("invalid")
    assert len(r.body_pos) == 3
    assert len(r.comparisons) == 1
    assert r.comparisons[0] == Comparison(Var("C1"), "!=", Var("C2"))


def test_parse_facts():
    p = parse_program("digit(2). object(cat).")
    assert len(p.rules) == 2
    assert all(r.is_fact for r in p.rules)
    assert p.fact_atoms == (Atom("digit", (2,)), Atom("object", ("cat",)))


def test_unsafe_variable_reported():
    with pytest.raises(UnsafeRuleError) as exc:
        parse_program("p :- not q(X).")
    assert "X" in str(exc.value)


def test_unsafe_variable_in_comparison():
    with pytest.raises(UnsafeRuleError):
        parse_program("p :- q(Y), X != Y.")


def test_syntax_error_carries_location():
    with pytest.raises(ParseError) as exc:
        parse_program("p :- q(,).")
    assert exc.value.line == 1
    assert exc.value.column is not None


def test_comments_and_whitespace():
    p = parse_program("% header\n  p(a).  % trailing\n\nq :- p(a).\n")
    assert len(p.rules) == 2


def test_unparse_round_trip_idempotent():
    text = "invalid  :-  digit( C1 ,V ) , digit(C2,V),same_row(C1,C2), C1!=C2.\np(a)."
    once = str(parse_program(text))
    twice = str(parse_program(once))
    assert once == twice
    assert parse_program(once) == parse_program(text)


def test_zero_ary_comparison_operand():
    p = parse_program("p :- q(X), X != a.")
    assert p.rules[0].comparisons[0].right == "a"


# ---------------------------------------------------------------------------
# Stratification
# ---------------------------------------------------------------------------

def test_stratified_levels():
    p = parse_program("a. b :- a. c :- not b.")
    s = stratify(p)
    assert s["c"] > s["b"] >= s["a"]


def test_recursion_through_negation_rejected():
    p = parse_program("p :- not q. q :- not p.")
    with pytest.raises(StratificationError):
        stratify(p)


def test_positive_recursion_allowed():
    p = parse_program("e(a,b). e(b,c). r(X,Y) :- e(X,Y). r(X,Z) :- e(X,Y), r(Y,Z).")
    assert answer_set(p) == atoms("e(a,b)", "e(b,c)", "r(a,b)", "r(b,c)", "r(a,c)")


# ---------------------------------------------------------------------------
# Grounding
# ---------------------------------------------------------------------------

def test_ground_restricts_to_matching_substitutions():
    p = parse_program("invalid :- digit(C1,V), digit(C2,V), same_row(C1,C2).")
    facts = atoms("digit(c1,2)", "digit(c2,2)", "same_row(c1,c2)", "same_row(c2,c1)")
    g = ground(p, facts)
    heads = [r for r in g.rules if r.head.predicate == "invalid"]
    assert len(heads) == 2  # (c1,c2) and (c2,c1); no other instantiation survives
    for r in g.rules:
        assert not r.comparisons  # resolved at grounding time


def test_ground_empty():
    assert ground(LogicProgram(), frozenset()).rules == ()


def test_ground_comparison_resolution():
    p = parse_program("p :- q(X), X != a.")
    g = ground(p, atoms("q(a)", "q(b)"))
    derived = [r for r in g.rules if r.head.predicate == "p"]
    assert len(derived) == 1 and derived[0].body_pos == (Atom("q", ("b",)),)


def test_ground_sudoku_size_within_cap():
    from nsl.datasets import sudoku_background
    bg = sudoku_background()
    rule = parse_program(
        "invalid :- digit(C1,V), digit(C2,V), same_row(C1,C2), C1 != C2.")
    facts = atoms("digit(c1,1)", "digit(c2,1)", "digit(c5,3)", "digit(c16,4)")
    g = ground(bg + rule, facts)
    # Direct enumeration oracle: instantiations with both digits equal-valued
    # and an irreflexive same-row fact between them.
    digit_facts = [("c1", 1), ("c2", 1), ("c5", 3), ("c16", 4)]
    rows = {("c1", "c2"), ("c2", "c1")}
    expected = sum(1 for (a, va), (b, vb) in itertools.product(digit_facts, repeat=2)
                   if va == vb and (a, b) in rows and a != b)
    got = sum(1 for r in g.rules if r.head.predicate == "invalid")
    assert got == expected == 2
    assert len(g.rules) <= 10 ** 6


def test_ground_cap_enforced():
    p = parse_program("t(X,Y,Z) :- n(X), n(Y), n(Z).")
    facts = frozenset(Atom("n", (i,)) for i in range(30))
    with pytest.raises(ResourceLimitError):
        ground(p, facts, cap=1000)


def test_grounding_soundness_positive_bodies():
    p = parse_program("p(X) :- q(X). q(X) :- r(X).")
    facts = atoms("r(a)", "r(b)")
    g = ground(p, facts)
    universe = {"a", "b"}
    for r in g.rules:
        for a in r.body_pos:
            assert all(arg in universe for arg in a.args)


# ---------------------------------------------------------------------------
# Answer sets
# ---------------------------------------------------------------------------

def test_answer_set_negation_on_absent_atom():
    p = parse_program("p :- not r.")
    assert answer_set(p, atoms("q")) == atoms("q", "p")


def test_answer_set_facts_only():
    assert answer_set(LogicProgram(), atoms("a", "b")) == atoms("a", "b")


def test_answer_set_sudoku_duplicate_row():
    from nsl.datasets import sudoku_background
    bg = sudoku_background()
    rule = parse_program(
        "invalid :- digit(X,V), digit(Y,V), same_row(X,Y), X != Y.")
    ctx = atoms("digit(c1,2)", "digit(c2,2)")
    result = answer_set(bg + rule, ctx, verify=True)
    assert Atom("invalid") in result


def test_answer_set_rejects_unstratified():
    p = parse_program("p :- not q. q :- not p.")
    with pytest.raises(StratificationError):
        answer_set(p)


def test_verify_answer_set_basics():
    p = parse_program("p :- not q.")
    assert verify_answer_set(p, frozenset(), atoms("p"))
    assert not verify_answer_set(p, frozenset(), atoms("q"))
    assert not verify_answer_set(p, frozenset(), frozenset())


def test_monotone_fact_extension_negation_free():
    p = parse_program("p(X) :- q(X). r(X) :- p(X), s(X).")
    small = atoms("q(a)")
    big = atoms("q(a)", "q(b)", "s(a)")
    assert answer_set(p, small) <= answer_set(p, big)


# ---------------------------------------------------------------------------
# Generated stratified programs: evaluation agrees with the reduct oracle
# ---------------------------------------------------------------------------

PREDS = ["p", "q", "r", "s", "t", "u", "v", "w"]


def random_stratified_program(rng: random.Random, max_rules: int = 6):
    """Random program over nullary/unary atoms, stratified by construction:
    negation only points at strictly lower-ranked predicates."""
    rank = {pred: i for i, pred in enumerate(PREDS)}
    consts = ["a", "b"]

    def random_atom(pred):
        if rng.random() < 0.5:
            return Atom(pred)
        return Atom(pred, (rng.choice(consts + ["X"]) if rng.random() < 0.4
                           else rng.choice(consts),))

    rules = []
    for _ in range(rng.randint(1, max_rules)):
        head_pred = rng.choice(PREDS)
        head = random_atom(head_pred)
        body_pos, body_neg = [], []
        for _ in range(rng.randint(0, 2)):
            # positive deps: any predicate of rank <= head (keeps levels tidy)
            cand = rng.choice([p for p in PREDS if rank[p] <= rank[head_pred]])
            body_pos.append(random_atom(cand))
        lower = [p for p in PREDS if rank[p] < rank[head_pred]]
        if lower and rng.random() < 0.5:
            body_neg.append(random_atom(rng.choice(lower)))
        pos_vars = {v for a in body_pos for v in a.variables()}
        # repair safety: rebind unsafe variables to a constant
        def close(atom):
            if any(isinstance(t, Var) and t not in pos_vars for t in atom.args):
                return Atom(atom.predicate, tuple(
                    "a" if isinstance(t, Var) and t not in pos_vars else t
                    for t in atom.args))
            return atom
        head = close(head)
        body_neg = [close(a) for a in body_neg]
        rules.append(Rule(head, tuple(body_pos), tuple(body_neg), ()))
    facts = frozenset(random_atom(rng.choice(PREDS[:3]))
                      for _ in range(rng.randint(0, 3)))
    facts = frozenset(a if a.is_ground() else Atom(a.predicate, ("a",))
                      for a in facts)
    return LogicProgram(tuple(rules)), facts


@pytest.mark.parametrize("seed", range(40))
def test_answer_set_matches_reduct_oracle(seed):
    rng = random.Random(seed)
    for _ in range(5):
        program, facts = random_stratified_program(rng)
        result = answer_set(program, facts)
        assert verify_answer_set(program, facts, result)
        # and the oracle rejects a perturbed candidate
        universe = set(result) | {Atom("zz")}
        perturbed = frozenset(universe) ^ {Atom("zz")} | {Atom("yy")}
        assert not verify_answer_set(program, facts, frozenset(perturbed))


def test_facts_program_requires_ground():
    with pytest.raises(ValueError):
        facts_program([Atom("p", (Var("X"),))])


def test_parse_unparse_stable_on_shipped_corpus():
    """Round-trip stability over every program-bearing file shipped in tasks/."""
    from pathlib import Path
    from nsl.learner import load_task
    from nsl.wcdpi import format_example, read_examples
    corpus = sorted(Path(__file__).resolve().parents[1].glob("tasks/*.las"))
    assert corpus, "shipped task corpus missing"
    for path in corpus:
        if "task" in path.name:
            task = load_task(path)
            bg_once = str(task.background)
            assert str(parse_program(bg_once)) == bg_once
        else:
            examples = read_examples(path)
            text = "".join(format_example(e) + "\n" for e in examples)
            assert read_examples(__import__("io").StringIO(text)) == examples
            for e in examples:
                ctx_once = str(e.context)
                assert str(parse_program(ctx_once)) == ctx_once
