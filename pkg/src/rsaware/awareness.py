"""Deciding whether conditionally independent models can mix over shortcuts.

Two checkers work on confusion sets alone:

* ``check_weak_necessary``: every confusion set must equal the cover of an
  implicant of its label's constraint. Failing this proves no factorized
  model represents any interior mixture.
* ``check_complete``: every confusion set must be a singleton or a pair at
  Hamming distance 1. This is necessary and sufficient for representing
  every mixture.

``brute_force_awareness_oracle`` cross-checks both by building mixture
tables for concrete weight vectors and testing factorizability exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .logic import (
    ConceptSet,
    Program,
    enumerate_implicant_covers,
    format_concept,
    hamming,
)
from .shortcuts import (
    MixtureSpec,
    Remapping,
    Support,
    confusion_set,
    is_factorized,
    mixture_remap_distribution,
    product_distribution,
)

INTERIOR_CLAMP = 1e-6


class NotMixableError(ValueError):
    pass


@dataclass(frozen=True)
class AwarenessEntry:
    g: tuple
    confusion_set: ConceptSet
    matched_implicant_cover: Optional[ConceptSet]
    singleton_or_hamming1: bool

    def to_json(self) -> dict:
        match = self.matched_implicant_cover
        return {
            "g": format_concept(self.g),
            "confusion_set": [format_concept(w) for w in sorted(self.confusion_set)],
            "matched_implicant_cover": None
            if match is None
            else [format_concept(w) for w in sorted(match)],
            "singleton_or_hamming1": self.singleton_or_hamming1,
        }


@dataclass(frozen=True)
class AwarenessReport:
    entries: tuple
    verdict_weak_necessary: bool
    verdict_complete: bool
    oracle: Optional["OracleResult"] = field(default=None, compare=False)

    @property
    def exit_code(self) -> int:
        if self.verdict_complete:
            return 0
        return 2 if self.verdict_weak_necessary else 3

    def to_json(self) -> dict:
        doc = {
            "entries": [e.to_json() for e in self.entries],
            "verdict_weak_necessary": self.verdict_weak_necessary,
            "verdict_complete": self.verdict_complete,
        }
        if self.oracle is not None:
            doc["oracle"] = self.oracle.to_json()
        return doc


def _is_singleton_or_hamming1(vg: ConceptSet) -> bool:
    if len(vg) == 1:
        return True
    if len(vg) == 2:
        a, b = sorted(vg)
        return hamming(a, b) == 1
    return False


def _build_report(p: Program, s: Support, remappings: Sequence[Remapping]) -> AwarenessReport:
    covers_by_label: dict = {}
    entries = []
    for g in s:
        vg = confusion_set(remappings, g)
        y = p(g)
        if y not in covers_by_label:
            covers_by_label[y] = set(enumerate_implicant_covers(p, y))
        match = vg if vg in covers_by_label[y] else None
        entries.append(AwarenessEntry(g, vg, match, _is_singleton_or_hamming1(vg)))
    return AwarenessReport(
        tuple(entries),
        verdict_weak_necessary=all(e.matched_implicant_cover is not None for e in entries),
        verdict_complete=all(e.singleton_or_hamming1 for e in entries),
    )


def check_weak_necessary(p: Program, s: Support, remappings: Sequence[Remapping]) -> AwarenessReport:
    """A False verdict proves the independent class is not weakly aware; True is only necessary."""
    return _build_report(p, s, remappings)


def check_complete(p: Program, s: Support, remappings: Sequence[Remapping]) -> AwarenessReport:
    return _build_report(p, s, remappings)


def construct_uci_mixer(m: MixtureSpec, g: Sequence[int]) -> tuple:
    """Marginals of a factorized table equal to the mixture's remap distribution at ``g``.

    Coordinates on which the confusion set agrees copy the shared bit; the one
    disagreeing coordinate (if any) gets the mixture's probability of a 1.
    """
    g = tuple(g)
    vg = confusion_set(m.remappings, g)
    if not _is_singleton_or_hamming1(vg):
        raise NotMixableError(
            f"confusion set of {format_concept(g)} is neither a singleton nor a Hamming-1 pair"
        )
    first = next(iter(vg))
    mu = []
    for j in range(len(g)):
        if all(w[j] == first[j] for w in vg):
            mu.append(Fraction(first[j]))
        else:
            mu.append(sum((pi * alpha(g)[j] for alpha, pi in zip(m.remappings, m.pi)), Fraction(0)))
    return tuple(mu)


def mixer_distribution(m: MixtureSpec, g: Sequence[int]):
    return product_distribution(construct_uci_mixer(m, g))


@dataclass(frozen=True)
class OracleResult:
    weak_witness: Optional[tuple]
    complete_refutation: Optional[tuple]
    trials: int

    def to_json(self) -> dict:
        def enc(pi):
            return None if pi is None else [str(v) for v in pi]

        return {
            "weak_witness": enc(self.weak_witness),
            "complete_refutation": enc(self.complete_refutation),
            "trials": self.trials,
        }


def _all_factorized(m: MixtureSpec, s: Support, exact: bool = True) -> bool:
    if not exact:
        m = MixtureSpec(m.remappings, tuple(float(v) for v in m.pi))
    return all(is_factorized(mixture_remap_distribution(m, g))[0] for g in s)


def sample_interior_pi(m: int, rng: np.random.Generator) -> tuple:
    """Symmetric Dirichlet(1) draw pushed off the boundary, as exact fractions."""
    raw = np.maximum(rng.dirichlet(np.ones(m)), INTERIOR_CLAMP)
    fracs = [Fraction(float(v)) for v in raw]
    total = sum(fracs)
    return tuple(f / total for f in fracs)


def pair_refutation_candidates(s: Support, remappings: Sequence[Remapping]) -> list[tuple]:
    """Half/half weights on two remappings sending some ``g`` two or more bits apart.

    Such a mixture has a support that is not a subcube, so it is never
    factorized. One exists whenever the complete-awareness condition fails.
    """
    m = len(remappings)
    out, seen = [], set()
    for g in s:
        for i in range(m):
            for j in range(i + 1, m):
                if hamming(remappings[i](g), remappings[j](g)) >= 2 and (i, j) not in seen:
                    seen.add((i, j))
                    pi = [Fraction(0)] * m
                    pi[i] = pi[j] = Fraction(1, 2)
                    out.append(tuple(pi))
    return out


def brute_force_awareness_oracle(
    p: Program,
    s: Support,
    remappings: Sequence[Remapping],
    trials: int = 1000,
    seed: int = 0,
    exact: bool = True,
) -> OracleResult:
    """Search weight vectors for a factorizable interior mixture and a non-factorizable one.

    Order is fixed: uniform weights, then (refutations only) deterministic
    half/half pairs, then ``trials`` seeded interior draws. With
    ``exact=False`` the tables are floats and factorizability uses a tolerance.
    """
    remappings = tuple(remappings)
    m = len(remappings)
    if m < 1:
        raise ValueError("need at least one remapping")
    uniform = MixtureSpec.uniform(remappings).pi
    rng = np.random.default_rng(seed)
    interior = [uniform] + [sample_interior_pi(m, rng) for _ in range(trials if m > 1 else 0)]

    weak = None
    for pi in interior:
        if _all_factorized(MixtureSpec(remappings, pi), s, exact):
            weak = pi
            break

    refutation = None
    for pi in [uniform] + pair_refutation_candidates(s, remappings) + interior[1:]:
        if not _all_factorized(MixtureSpec(remappings, pi), s, exact):
            refutation = pi
            break
    return OracleResult(weak, refutation, trials)
