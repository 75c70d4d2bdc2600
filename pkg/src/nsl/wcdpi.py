"""Weighted context-dependent examples built from feature predictions.

Each labelled input becomes a WCDPI: the feature predictions form a
facts-only context, the minimum prediction confidence (Gödel t-norm,
scaled and floored) becomes the example penalty, and the label populates
the inclusion/exclusion sets.  Examples serialize to a line-oriented
``#pos(id@penalty, {inc}, {exc}, {ctx}).`` format.
"""
from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, IO, Iterable, Sequence, Union

from .errors import ParseError
from .logic import Atom, LogicProgram, Term, Tokenizer, facts_program, parse_atom_tokens

__all__ = [
    "FeaturePrediction", "PartialInterpretation", "WCDPI", "AggregatorConfig",
    "aggregate", "build_context", "generate_example", "format_example",
    "write_examples", "read_examples",
]

INFINITE_PENALTY = math.inf

_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class FeaturePrediction:
    """One feature extractor output: predicted value, feature name, optional
    metadata terms (e.g. a cell coordinate), and the prediction confidence."""

    y_pred: Term
    feature: str
    alpha: tuple[Term, ...] = ()
    y_conf: float = 1.0

    def __post_init__(self):
        if not self.feature:
            raise ValueError("feature name must be nonempty")
        if not 0.0 <= self.y_conf <= 1.0:
            raise ValueError(f"confidence {self.y_conf} outside [0, 1]")


@dataclass(frozen=True)
class PartialInterpretation:
    inc: frozenset[Atom] = frozenset()
    exc: frozenset[Atom] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "inc", frozenset(self.inc))
        object.__setattr__(self, "exc", frozenset(self.exc))
        overlap = self.inc & self.exc
        if overlap:
            raise ValueError(f"inclusion and exclusion sets overlap: {sorted(map(str, overlap))}")


@dataclass(frozen=True)
class WCDPI:
    """Weighted context-dependent partial interpretation."""

    id: str
    penalty: Union[int, float]          # positive integer or math.inf
    pi: PartialInterpretation
    context: LogicProgram = LogicProgram()

    def __post_init__(self):
        if not _ID_RE.match(self.id):
            raise ValueError(f"example id {self.id!r} is not an identifier")
        if self.penalty != INFINITE_PENALTY:
            if not isinstance(self.penalty, int) or isinstance(self.penalty, bool) \
                    or self.penalty < 1:
                raise ValueError(f"penalty must be a positive integer or infinity, "
                                 f"got {self.penalty!r}")
        if not self.context.is_facts_only():
            raise ValueError("example context must contain only facts")
        for a in self.context.fact_atoms:
            if not a.is_ground():
                raise ValueError(f"context fact {a} is not ground")


@dataclass(frozen=True)
class AggregatorConfig:
    """Scaling applied to the aggregated confidence before flooring."""

    scale: int = 100

    def __post_init__(self):
        if not isinstance(self.scale, int) or self.scale < 1:
            raise ValueError(f"scale must be a positive integer, got {self.scale!r}")


def aggregate(confidences: Sequence[float], cfg: AggregatorConfig = AggregatorConfig()) -> int:
    """Collapse per-feature confidences into one integer penalty.

    Conjunction-compatible aggregation: the minimum confidence, scaled by
    ``cfg.scale`` and floored, clamped to at least 1 so every example keeps
    a positive weight.
    """
    if len(confidences) == 0:
        raise ValueError("cannot aggregate an empty confidence list")
    for c in confidences:
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"confidence {c} outside [0, 1]")
    return max(1, math.floor(cfg.scale * min(confidences)))


def build_context(predictions: Sequence[FeaturePrediction]) -> LogicProgram:
    """One ground fact per prediction: ``t(alpha..., y_pred)``, in input order."""
    seen: set[tuple] = set()
    atoms: list[Atom] = []
    for p in predictions:
        slot = (p.feature, p.alpha)
        if slot in seen:
            raise ValueError(f"duplicate prediction for feature slot {slot}")
        seen.add(slot)
        atoms.append(Atom(p.feature, p.alpha + (p.y_pred,)))
    return facts_program(atoms)


def _nullary(label: str) -> Atom:
    return Atom(label)


def generate_example(example_id: str,
                     predictions: Sequence[FeaturePrediction],
                     label: str,
                     all_labels: Iterable[str],
                     cfg: AggregatorConfig = AggregatorConfig(),
                     mode: str = "multiclass",
                     positive_label: str | None = None,
                     encode_label: Callable[[str], Atom] = _nullary) -> WCDPI:
    """Turn one labelled, feature-extracted input into a WCDPI.

    Multiclass mode includes the example's label atom and excludes every
    other label.  Binary mode keeps only the designated positive label:
    positive examples include it, negative examples exclude it.
    """
    labels = set(all_labels)
    if label not in labels:
        raise ValueError(f"label {label!r} not in label set {sorted(labels)}")
    if not predictions:
        raise ValueError("example needs at least one feature prediction")
    penalty = aggregate([p.y_conf for p in predictions], cfg)
    context = build_context(predictions)
    if mode == "multiclass":
        pi = PartialInterpretation(
            inc=frozenset({encode_label(label)}),
            exc=frozenset(encode_label(l) for l in labels if l != label))
    elif mode == "binary":
        if positive_label is None or positive_label not in labels:
            raise ValueError("binary mode requires a positive_label from the label set")
        pos_atom = encode_label(positive_label)
        if label == positive_label:
            pi = PartialInterpretation(inc=frozenset({pos_atom}))
        else:
            pi = PartialInterpretation(exc=frozenset({pos_atom}))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return WCDPI(example_id, penalty, pi, context)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def format_example(e: WCDPI) -> str:
    inc = ", ".join(str(a) for a in sorted(e.pi.inc, key=Atom.sort_key))
    exc = ", ".join(str(a) for a in sorted(e.pi.exc, key=Atom.sort_key))
    ctx = " ".join(f"{a}." for a in e.context.fact_atoms)
    pen = "" if e.penalty == INFINITE_PENALTY else f"@{e.penalty}"
    return f"#pos({e.id}{pen}, {{{inc}}}, {{{exc}}}, {{{ctx}}})."


_Sink = Union[str, Path, IO[str], IO[bytes]]


def _open_for_write(sink: _Sink):
    if isinstance(sink, (str, Path)):
        return open(sink, "w", encoding="utf-8"), True
    if isinstance(sink, io.TextIOBase):
        return sink, False
    return io.TextIOWrapper(sink, encoding="utf-8", write_through=True), False


def write_examples(examples: Sequence[WCDPI], sink: _Sink) -> None:
    """Write one ``#pos`` statement per line; round-trips via :func:`read_examples`."""
    fh, close = _open_for_write(sink)
    try:
        for e in examples:
            fh.write(format_example(e) + "\n")
    finally:
        if close:
            fh.close()


def _parse_atom_set(tz: Tokenizer) -> frozenset[Atom]:
    tz.expect("LBRACE", "'{'")
    atoms: list[Atom] = []
    if tz.peek().kind != "RBRACE":
        atoms.append(parse_atom_tokens(tz))
        while tz.peek().kind == "COMMA":
            tz.next()
            atoms.append(parse_atom_tokens(tz))
    tz.expect("RBRACE", "'}'")
    return frozenset(atoms)


def _parse_fact_block(tz: Tokenizer) -> LogicProgram:
    tz.expect("LBRACE", "'{'")
    atoms: list[Atom] = []
    while tz.peek().kind != "RBRACE":
        atoms.append(parse_atom_tokens(tz))
        tz.expect("DOT", "'.' after context fact")
    tz.next()
    return facts_program(atoms)


def parse_example_statement(tz: Tokenizer) -> WCDPI:
    tz.expect("HASH", "'#pos'")
    kw = tz.expect("IDENT", "'pos'")
    if kw.text != "pos":
        raise ParseError(f"unsupported statement '#{kw.text}'", kw.line, kw.column)
    tz.expect("LPAREN", "'('")
    id_tok = tz.expect("IDENT", "example id")
    penalty: Union[int, float] = INFINITE_PENALTY
    if tz.peek().kind == "AT":
        tz.next()
        pen_tok = tz.expect("INTEGER", "penalty")
        penalty = int(pen_tok.text)
    tz.expect("COMMA", "','")
    inc = _parse_atom_set(tz)
    tz.expect("COMMA", "','")
    exc = _parse_atom_set(tz)
    tz.expect("COMMA", "','")
    ctx = _parse_fact_block(tz)
    tz.expect("RPAREN", "')'")
    tz.expect("DOT", "'.'")
    try:
        return WCDPI(id_tok.text, penalty, PartialInterpretation(inc, exc), ctx)
    except ValueError as exc_:
        raise ParseError(str(exc_), id_tok.line, id_tok.column) from None


def read_examples(source: _Sink) -> list[WCDPI]:
    """Parse an examples file ('%' comments allowed)."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    tz = Tokenizer(text)
    out: list[WCDPI] = []
    while not tz.at_end():
        out.append(parse_example_statement(tz))
    return out
