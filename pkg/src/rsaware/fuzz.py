"""Randomized cross-check of the awareness checkers against the factorizability oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .awareness import (
    NotMixableError,
    brute_force_awareness_oracle,
    check_complete,
    construct_uci_mixer,
    sample_interior_pi,
)
from .logic import Program, all_concepts, consistent_set
from .shortcuts import (
    MixtureSpec,
    Remapping,
    Support,
    enumerate_remappings,
    identity_remapping,
    mixture_remap_distribution,
    product_distribution,
)

MAX_REMAPPINGS = 6


@dataclass
class Instance:
    program: Program
    support: Support
    remappings: tuple


@dataclass
class FuzzSummary:
    instances: int = 0
    contradictions: list = field(default_factory=list)
    weak_true: int = 0
    complete_true: int = 0
    weak_true_with_witness: int = 0
    uniform_refutes: int = 0
    pair_refutes: int = 0

    @property
    def ok(self) -> bool:
        return not self.contradictions

    def to_json(self) -> dict:
        return {
            "instances": self.instances,
            "contradictions": self.contradictions,
            "weak_necessary_true": self.weak_true,
            "weak_necessary_true_with_witness": self.weak_true_with_witness,
            "complete_true": self.complete_true,
            "refuted_by_uniform": self.uniform_refutes,
            "refuted_only_by_pair_or_random": self.pair_refutes,
        }


def random_instance(rng: np.random.Generator) -> Instance:
    k = int(rng.choice([2, 3]))
    labels = int(rng.choice([2, 3]))
    p = Program(k, labels, tuple(int(v) for v in rng.integers(0, labels, size=2**k)))
    concepts = all_concepts(k)
    size = int(rng.integers(1, len(concepts) + 1))
    chosen = sorted(rng.choice(len(concepts), size=size, replace=False))
    s = Support(tuple(concepts[i] for i in chosen))

    if rng.random() < 0.5:
        remappings = enumerate_remappings(p, s, "unrestricted", limit=MAX_REMAPPINGS)
    else:
        m = int(rng.integers(1, MAX_REMAPPINGS + 1))
        found = {identity_remapping(p, s)} if rng.random() < 0.5 else set()
        for _ in range(4 * m):
            if len(found) >= m:
                break
            table = {}
            for g in s:
                options = sorted(consistent_set(p, p(g)))
                table[g] = options[int(rng.integers(len(options)))]
            found.add(Remapping(table, p, s))
        remappings = sorted(found)
    return Instance(p, s, tuple(remappings))


def _weight_vectors(m: int, trials: int, seed: int) -> list[tuple]:
    rng = np.random.default_rng(seed)
    pis = [tuple(Fraction(1, m) for _ in range(m))]
    pis += [sample_interior_pi(m, rng) for _ in range(trials if m > 1 else 0)]
    for i in range(m):
        pis.append(tuple(Fraction(int(i == j)) for j in range(m)))
    return pis


def check_instance(inst: Instance, trials: int, seed: int, summary: FuzzSummary) -> None:
    p, s, rems = inst.program, inst.support, inst.remappings
    report = check_complete(p, s, rems)
    weak, complete = report.verdict_weak_necessary, report.verdict_complete
    oracle = brute_force_awareness_oracle(p, s, rems, trials=trials, seed=seed)
    problems = []
    if complete and not weak:
        problems.append("complete verdict without the weak necessary condition")
    if not weak and oracle.weak_witness is not None:
        problems.append("weak condition fails but a factorizable interior mixture exists")
    if complete and oracle.complete_refutation is not None:
        problems.append("complete verdict but a non-factorizable mixture exists")
    if not complete and oracle.complete_refutation is None:
        problems.append("complete verdict is false but every mixture tried factorizes")
    if complete:
        for pi in _weight_vectors(len(rems), trials, seed):
            m = MixtureSpec(rems, pi)
            for g in s:
                try:
                    rebuilt = product_distribution(construct_uci_mixer(m, g))
                except NotMixableError:
                    problems.append(f"no marginals constructible at g={g} despite a complete verdict")
                    break
                if rebuilt != mixture_remap_distribution(m, g):
                    problems.append(f"constructed marginals miss the mixture at g={g}")
                    break
            else:
                continue
            break

    summary.instances += 1
    summary.weak_true += weak
    summary.complete_true += complete
    summary.weak_true_with_witness += weak and oracle.weak_witness is not None
    if oracle.complete_refutation is not None:
        uniform = MixtureSpec.uniform(rems).pi
        if oracle.complete_refutation == uniform:
            summary.uniform_refutes += 1
        else:
            summary.pair_refutes += 1
    for msg in problems:
        summary.contradictions.append(
            {
                "problem": msg,
                "k": p.k,
                "table": list(p.table),
                "support": ["".join(map(str, g)) for g in s],
                "remappings": [r.to_json() for r in rems],
            }
        )


def run_fuzz(n_instances: int = 200, seed: int = 0, trials: int = 25) -> FuzzSummary:
    rng = np.random.default_rng(seed)
    summary = FuzzSummary()
    for i in range(n_instances):
        check_instance(random_instance(rng), trials, seed + i, summary)
    return summary
