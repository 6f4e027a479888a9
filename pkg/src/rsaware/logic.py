"""Propositional programs over boolean concept vectors.

Concepts are tuples of 0/1 ints of length ``k``; bit ``i`` holds variable
``c{i+1}``. Tables are indexed big-endian, so ``c1`` is the most
significant bit of the index.

Grammar (loosest to tightest binding)::

    formula := implies
    implies := or ("->" implies)?        right associative
    or      := xor ("|" xor)*
    xor     := and ("^" and)*
    and     := unary ("&" unary)*
    unary   := "!" unary | atom
    atom    := "c<n>" | "T" | "F" | "(" formula ")"
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

MAX_ARITY = 16

Concept = tuple  # tuple[int, ...]
ConceptSet = frozenset  # frozenset[Concept]


class FormulaSyntaxError(ValueError):
    """Raised for malformed formula text; carries a 1-based position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.line = line
        self.column = column


class ArityError(ValueError):
    pass


def index_to_concept(index: int, k: int) -> Concept:
    return tuple((index >> (k - 1 - i)) & 1 for i in range(k))


def concept_to_index(concept: Sequence[int]) -> int:
    index = 0
    for bit in concept:
        index = (index << 1) | int(bit)
    return index


def all_concepts(k: int) -> list[Concept]:
    return [index_to_concept(i, k) for i in range(2**k)]


def format_concept(concept: Sequence[int]) -> str:
    return "(" + ",".join(str(int(b)) for b in concept) + ")"


def parse_concept(text: str) -> Concept:
    """Inverse of :func:`format_concept`; also accepts bare bitstrings."""
    text = text.strip()
    if text.startswith("("):
        parts = text.strip("()").split(",")
        bits = tuple(int(p) for p in parts)
    else:
        bits = tuple(int(ch) for ch in text)
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"not a boolean concept: {text!r}")
    return bits


def hamming(a: Sequence[int], b: Sequence[int]) -> int:
    return sum(x != y for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# Formula AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    index: int  # 1-based

    def evaluate(self, concept: Sequence[int]) -> bool:
        return bool(concept[self.index - 1])


@dataclass(frozen=True)
class Const:
    value: bool

    def evaluate(self, concept: Sequence[int]) -> bool:
        return self.value


@dataclass(frozen=True)
class Not:
    arg: "Formula"

    def evaluate(self, concept: Sequence[int]) -> bool:
        return not self.arg.evaluate(concept)


_BINARY = {
    "&": lambda a, b: a and b,
    "|": lambda a, b: a or b,
    "^": lambda a, b: a != b,
    "->": lambda a, b: (not a) or b,
}


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Formula"
    right: "Formula"

    def evaluate(self, concept: Sequence[int]) -> bool:
        return _BINARY[self.op](self.left.evaluate(concept), self.right.evaluate(concept))


Formula = Union[Var, Const, Not, BinOp]


@dataclass(frozen=True)
class ParsedFormula:
    root: Formula
    k: int
    text: str = field(compare=False, default="")

    def evaluate(self, concept: Sequence[int]) -> bool:
        return self.root.evaluate(concept)


_TOKEN_RE = re.compile(r"\s*(?:(->)|([&|!^()])|(c\d+)|([TF])(?![A-Za-z0-9_]))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise _syntax_error(text, pos, f"unexpected character {text[pos]!r}")
        tok = next(g for g in m.groups() if g is not None)
        tokens.append((tok, m.start(m.lastindex)))
        pos = m.end()
    return tokens


def _line_col(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def _syntax_error(text: str, pos: int, message: str) -> FormulaSyntaxError:
    return FormulaSyntaxError(message, *_line_col(text, pos))


class _Parser:
    def __init__(self, text: str, k: int):
        self.text = text
        self.k = k
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> Optional[str]:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def pos(self) -> int:
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def take(self) -> str:
        tok = self.tokens[self.i][0]
        self.i += 1
        return tok

    def parse(self) -> Formula:
        if not self.tokens:
            raise _syntax_error(self.text, 0, "empty formula")
        node = self.implies()
        if self.peek() is not None:
            raise _syntax_error(self.text, self.pos(), f"unexpected token {self.peek()!r}")
        return node

    def implies(self) -> Formula:
        left = self.chain("|", self.xor)
        if self.peek() == "->":
            self.take()
            return BinOp("->", left, self.implies())
        return left

    def xor(self) -> Formula:
        return self.chain("^", self.conj)

    def conj(self) -> Formula:
        return self.chain("&", self.unary)

    def chain(self, op, sub) -> Formula:
        node = sub()
        while self.peek() == op:
            self.take()
            node = BinOp(op, node, sub())
        return node

    def unary(self) -> Formula:
        if self.peek() == "!":
            self.take()
            return Not(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok, at = self.peek(), self.pos()
        if tok is None:
            raise _syntax_error(self.text, at, "unexpected end of formula")
        if tok == "(":
            self.take()
            node = self.implies()
            if self.peek() != ")":
                raise _syntax_error(self.text, self.pos(), "expected ')'")
            self.take()
            return node
        if tok in ("T", "F"):
            self.take()
            return Const(tok == "T")
        if tok.startswith("c"):
            self.take()
            index = int(tok[1:])
            if not 1 <= index <= self.k:
                line, col = _line_col(self.text, at)
                raise ArityError(
                    f"variable {tok} out of range for k={self.k} (line {line}, column {col})"
                )
            return Var(index)
        raise _syntax_error(self.text, at, f"unexpected token {tok!r}")


def _check_arity(k: int) -> None:
    if not 1 <= k <= MAX_ARITY:
        raise ArityError(f"arity must be in [1, {MAX_ARITY}], got {k}")


def parse_formula(text: str, k: int) -> ParsedFormula:
    _check_arity(k)
    return ParsedFormula(_Parser(text, k).parse(), k, text)


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Program:
    """A total map from the ``2**k`` concepts to label ids."""

    k: int
    label_count: int
    table: tuple

    def __post_init__(self):
        _check_arity(self.k)
        object.__setattr__(self, "table", tuple(int(v) for v in self.table))
        if len(self.table) != 2**self.k:
            raise ValueError(f"table needs {2**self.k} entries, got {len(self.table)}")
        if any(not 0 <= y < self.label_count for y in self.table):
            raise ValueError("table contains a label outside [0, label_count)")

    def __call__(self, concept: Sequence[int]) -> int:
        return self.table[concept_to_index(concept)]

    def concepts(self) -> list[Concept]:
        return all_concepts(self.k)

    def consistent_set(self, y: int) -> ConceptSet:
        return consistent_set(self, y)

    def to_json(self) -> dict:
        return {"k": self.k, "labels": self.label_count, "table": list(self.table)}


def program_from_formula(formula: ParsedFormula) -> Program:
    table = [int(formula.evaluate(w)) for w in all_concepts(formula.k)]
    return Program(formula.k, 2, tuple(table))


def program_from_text(text: str, k: int) -> Program:
    return program_from_formula(parse_formula(text, k))


def program_from_json(doc: Mapping) -> Program:
    k = int(doc["k"])
    if "formula" in doc:
        return program_from_text(doc["formula"], k)
    table = doc["table"]
    labels = int(doc.get("labels", max(table) + 1))
    return Program(k, labels, tuple(table))


def load_program(path: Union[str, Path]) -> Program:
    with open(path) as fh:
        return program_from_json(json.load(fh))


def _check_label(p: Program, y: int) -> None:
    if not 0 <= y < p.label_count:
        raise ValueError(f"label {y} out of range for {p.label_count} labels")


def consistent_set(p: Program, y: int) -> ConceptSet:
    _check_label(p, y)
    return frozenset(w for w, label in zip(p.concepts(), p.table) if label == y)


# ---------------------------------------------------------------------------
# Incomplete concepts, covers, implicants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IncompleteConcept:
    """Partial assignment; ``None`` marks a variable outside the mask D."""

    values: tuple

    @classmethod
    def from_assignment(cls, k: int, assignment: Mapping[int, int]) -> "IncompleteConcept":
        """Build from a ``{variable (1-based): bit}`` mapping."""
        values = [None] * k
        for var, bit in assignment.items():
            if not 1 <= var <= k:
                raise ArityError(f"variable c{var} out of range for k={k}")
            values[var - 1] = int(bit)
        return cls(tuple(values))

    @property
    def k(self) -> int:
        return len(self.values)

    @property
    def mask(self) -> frozenset:
        return frozenset(i for i, v in enumerate(self.values) if v is not None)

    def covers(self, concept: Sequence[int]) -> bool:
        return all(v is None or v == c for v, c in zip(self.values, concept))

    def __str__(self) -> str:
        return "(" + ",".join("*" if v is None else str(v) for v in self.values) + ")"


def cover(w_d: IncompleteConcept, k: Optional[int] = None) -> ConceptSet:
    k = w_d.k if k is None else k
    if k != w_d.k:
        raise ArityError(f"incomplete concept has arity {w_d.k}, expected {k}")
    choices = [(0, 1) if v is None else (v,) for v in w_d.values]
    return frozenset(itertools.product(*choices))


def is_implicant(p: Program, y: int, w_d: IncompleteConcept) -> bool:
    _check_label(p, y)
    return all(p(w) == y for w in cover(w_d, p.k))


def _sort_covers(covers: Iterable[ConceptSet]) -> list[ConceptSet]:
    return sorted(covers, key=lambda c: (-len(c), sorted(c)))


def enumerate_implicants(p: Program, y: int) -> list[IncompleteConcept]:
    """All implicants of the constraint for label ``y`` (not only prime ones).

    Built bottom-up: an implicant with a free variable ``j`` is exactly the
    merge of two implicants that differ only in the value of ``j``.
    """
    _check_label(p, y)
    level = {tuple(w) for w in consistent_set(p, y)}
    found = set(level)
    while level:
        nxt = set()
        for values in level:
            for j, v in enumerate(values):
                if v != 0:
                    continue
                partner = values[:j] + (1,) + values[j + 1:]
                if partner in level:
                    nxt.add(values[:j] + (None,) + values[j + 1:])
        found |= nxt
        level = nxt
    return [IncompleteConcept(v) for v in sorted(found, key=lambda t: tuple(-1 if x is None else x for x in t))]


def enumerate_implicant_covers(p: Program, y: int) -> list[ConceptSet]:
    return _sort_covers({cover(w_d) for w_d in enumerate_implicants(p, y)})


def iter_incomplete_concepts(k: int) -> Iterator[IncompleteConcept]:
    for values in itertools.product((0, 1, None), repeat=k):
        yield IncompleteConcept(values)


def is_cover_of_some_implicant(p: Program, y: int, concepts: ConceptSet) -> bool:
    """True iff ``concepts`` is a subcube lying inside the consistent set."""
    if not concepts:
        return False
    members = list(concepts)
    first = members[0]
    free = [j for j in range(p.k) if any(w[j] != first[j] for w in members)]
    if len(concepts) != 2 ** len(free):
        return False
    values = tuple(None if j in free else first[j] for j in range(p.k))
    return cover(IncompleteConcept(values)) == concepts and is_implicant(
        p, y, IncompleteConcept(values)
    )
