"""Concept remappings, reasoning shortcuts and their mixtures.

Everything here defaults to exact :class:`fractions.Fraction` arithmetic so
that factorizability is decided by equality rather than a tolerance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Optional, Sequence

from .logic import (
    Concept,
    ConceptSet,
    Program,
    all_concepts,
    concept_to_index,
    consistent_set,
    format_concept,
    index_to_concept,
)

DEFAULT_BUDGET = 10**7
FLOAT_SUM_TOL = 1e-12
FLOAT_FACTOR_TOL = 1e-9

MODES = ("unrestricted", "disentangled")


class MissingSupportError(KeyError):
    pass


class BudgetExceededError(RuntimeError):
    pass


def _is_exact(values: Iterable) -> bool:
    return all(isinstance(v, Rational) for v in values)


def _check_simplex(weights: Sequence, what: str, strict: bool) -> None:
    if any(w < 0 for w in weights) or (strict and any(w == 0 for w in weights)):
        raise ValueError(f"{what} must be {'positive' if strict else 'non-negative'}")
    total = sum(weights)
    if _is_exact(weights):
        if total != 1:
            raise ValueError(f"{what} sums to {total}, not exactly 1")
    elif abs(float(total) - 1.0) > FLOAT_SUM_TOL:
        raise ValueError(f"{what} sums to {float(total)!r}, not 1")


@dataclass(frozen=True)
class Support:
    """Ground-truth support with optional sampling weights."""

    concepts: tuple
    weights: Optional[tuple] = None

    def __post_init__(self):
        concepts = tuple(tuple(int(b) for b in c) for c in self.concepts)
        if not concepts:
            raise ValueError("support must be non-empty")
        if len(set(concepts)) != len(concepts):
            raise ValueError("support has duplicate concepts")
        if len({len(c) for c in concepts}) != 1:
            raise ValueError("support concepts have mixed arity")
        object.__setattr__(self, "concepts", concepts)
        if self.weights is not None:
            weights = tuple(self.weights)
            if len(weights) != len(concepts):
                raise ValueError("one weight per support concept required")
            _check_simplex(weights, "support weights", strict=True)
            object.__setattr__(self, "weights", weights)

    @classmethod
    def full(cls, k: int) -> "Support":
        return cls(tuple(all_concepts(k)))

    @property
    def k(self) -> int:
        return len(self.concepts[0])

    def __iter__(self):
        return iter(self.concepts)

    def __len__(self) -> int:
        return len(self.concepts)

    def __contains__(self, concept) -> bool:
        return tuple(concept) in self.concepts

    def probabilities(self) -> list[float]:
        if self.weights is None:
            return [1.0 / len(self.concepts)] * len(self.concepts)
        return [float(w) for w in self.weights]


def parse_support(text: str, k: int) -> Support:
    """``"full"`` or a comma list of bitstrings like ``"01,10"``."""
    if text == "full":
        return Support.full(k)
    concepts = []
    for part in text.split(","):
        bits = tuple(int(ch) for ch in part.strip())
        if len(bits) != k:
            raise ValueError(f"support concept {part!r} does not have {k} bits")
        concepts.append(bits)
    return Support(tuple(concepts))


def is_remapping(alpha: Mapping, p: Program, s: Support) -> bool:
    for g in s:
        if g not in alpha:
            raise MissingSupportError(f"remapping undefined on support concept {format_concept(g)}")
        if p(alpha[g]) != p(g):
            return False
    return True


class Remapping:
    """A label-preserving map defined on the support only."""

    __slots__ = ("table", "_lookup")

    def __init__(self, table: Mapping, p: Program, s: Support):
        lookup = {tuple(g): tuple(int(b) for b in w) for g, w in table.items()}
        if not is_remapping(lookup, p, s):
            raise ValueError("mapping changes the label of some support concept")
        self._lookup = {g: lookup[g] for g in s}
        self.table = tuple(sorted(self._lookup.items()))

    def __call__(self, g: Sequence[int]) -> Concept:
        try:
            return self._lookup[tuple(g)]
        except KeyError:
            raise MissingSupportError(f"{format_concept(g)} is outside the remapping's support") from None

    def __contains__(self, g) -> bool:
        return tuple(g) in self._lookup

    @property
    def domain(self) -> list[Concept]:
        return [g for g, _ in self.table]

    @property
    def images(self) -> tuple:
        return tuple(w for _, w in self.table)

    @property
    def is_identity(self) -> bool:
        return all(g == w for g, w in self.table)

    def __eq__(self, other) -> bool:
        return isinstance(other, Remapping) and self.table == other.table

    def __hash__(self) -> int:
        return hash(self.table)

    def __lt__(self, other: "Remapping") -> bool:
        return self.table < other.table

    def __repr__(self) -> str:
        inner = ", ".join(f"{format_concept(g)}->{format_concept(w)}" for g, w in self.table)
        return f"Remapping({inner})"

    def to_json(self) -> dict:
        return {format_concept(g): format_concept(w) for g, w in self.table}


def identity_remapping(p: Program, s: Support) -> Remapping:
    return Remapping({g: g for g in s}, p, s)


_BIT_FUNCTIONS = ((0, 1), (1, 0), (0, 0), (1, 1))  # id, negation, const 0, const 1


def enumerate_remappings(
    p: Program,
    s: Support,
    mode: str = "unrestricted",
    budget: int = DEFAULT_BUDGET,
    limit: Optional[int] = None,
) -> list[Remapping]:
    """All concept remappings of ``p`` on ``s``, sorted lexicographically by table.

    ``disentangled`` restricts to maps applying one bit function to every
    position, the reachable set for a weight-shared per-position classifier.
    ``limit`` keeps only the first remappings in that order; the budget is
    then enforced on ``limit`` instead of the full product size.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    support = sorted(s)
    found = set()
    if mode == "disentangled":
        for h in _BIT_FUNCTIONS:
            alpha = {g: tuple(h[b] for b in g) for g in support}
            if is_remapping(alpha, p, s):
                found.add(Remapping(alpha, p, s))
    else:
        choices = [sorted(consistent_set(p, p(g))) for g in support]
        size = math.prod(len(c) for c in choices)
        if limit is not None:
            size = min(size, limit)
        if size > budget:
            raise BudgetExceededError(
                f"{size} candidate remappings exceed the enumeration budget of {budget}"
            )
        # product over sorted choices is already lexicographic in the table
        for images in itertools.islice(itertools.product(*choices), size):
            found.add(Remapping(dict(zip(support, images)), p, s))
    out = sorted(found)
    return out if limit is None else out[:limit]


def confusion_set(remappings: Sequence[Remapping], g: Sequence[int]) -> ConceptSet:
    return frozenset(alpha(g) for alpha in remappings)


@dataclass(frozen=True)
class MixtureSpec:
    remappings: tuple
    pi: tuple

    def __post_init__(self):
        object.__setattr__(self, "remappings", tuple(self.remappings))
        object.__setattr__(self, "pi", tuple(self.pi))
        if len(self.pi) != len(self.remappings) or not self.remappings:
            raise ValueError("need one weight per remapping and at least one remapping")
        _check_simplex(self.pi, "mixture weights", strict=False)

    @classmethod
    def uniform(cls, remappings: Sequence[Remapping]) -> "MixtureSpec":
        m = len(remappings)
        return cls(tuple(remappings), tuple(Fraction(1, m) for _ in range(m)))


class Distribution:
    """Explicit probability table over ``{0,1}^k``, big-endian indexed."""

    __slots__ = ("k", "probs")

    def __init__(self, k: int, probs: Sequence):
        probs = tuple(probs)
        if len(probs) != 2**k:
            raise ValueError(f"expected {2**k} probabilities, got {len(probs)}")
        _check_simplex(probs, "distribution", strict=False)
        self.k = k
        self.probs = probs

    @classmethod
    def point_mass(cls, concept: Sequence[int]) -> "Distribution":
        k = len(concept)
        probs = [Fraction(0)] * 2**k
        probs[concept_to_index(concept)] = Fraction(1)
        return cls(k, probs)

    @classmethod
    def from_mapping(cls, k: int, mass: Mapping, exact: bool = True) -> "Distribution":
        zero = Fraction(0) if exact else 0.0
        probs = [zero] * 2**k
        for w, v in mass.items():
            probs[concept_to_index(w)] += v
        return cls(k, probs)

    @property
    def exact(self) -> bool:
        return _is_exact(self.probs)

    def __getitem__(self, concept) -> object:
        return self.probs[concept_to_index(concept)]

    def __eq__(self, other) -> bool:
        return isinstance(other, Distribution) and self.k == other.k and self.probs == other.probs

    def __hash__(self):
        return hash((self.k, self.probs))

    def support(self) -> ConceptSet:
        return frozenset(index_to_concept(i, self.k) for i, v in enumerate(self.probs) if v != 0)

    def marginals(self) -> tuple:
        zero = Fraction(0) if self.exact else 0.0
        mu = [zero] * self.k
        for i, v in enumerate(self.probs):
            for j, bit in enumerate(index_to_concept(i, self.k)):
                if bit:
                    mu[j] += v
        return tuple(mu)

    def to_json(self) -> list:
        return [str(v) if isinstance(v, Fraction) else float(v) for v in self.probs]

    def __repr__(self) -> str:
        return f"Distribution(k={self.k}, probs={self.to_json()})"


def mixture_remap_distribution(m: MixtureSpec, g: Sequence[int]) -> Distribution:
    g = tuple(g)
    k = len(g)
    mass: dict = {}
    for alpha, weight in zip(m.remappings, m.pi):
        w = alpha(g)
        mass[w] = mass.get(w, 0) + weight
    return Distribution.from_mapping(k, mass, exact=_is_exact(m.pi))


def product_distribution(mu: Sequence) -> Distribution:
    """Factorized table with ``P(c_j = 1) = mu[j]``."""
    k = len(mu)
    probs = []
    for i in range(2**k):
        v = 1
        for bit, m in zip(index_to_concept(i, k), mu):
            v *= m if bit else 1 - m
        probs.append(v)
    if not _is_exact(mu):
        probs = [float(v) for v in probs]
    return Distribution(k, probs)


def is_factorized(d: Distribution) -> tuple[bool, tuple]:
    mu = d.marginals()
    rebuilt = product_distribution(mu)
    if d.exact:
        return rebuilt.probs == d.probs, mu
    deviation = max(abs(float(a) - float(b)) for a, b in zip(rebuilt.probs, d.probs))
    return deviation <= FLOAT_FACTOR_TOL, mu
