from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import flip_second, swap_all
from rsaware.logic import Program, all_concepts, consistent_set
from rsaware.shortcuts import (
    BudgetExceededError,
    Distribution,
    MissingSupportError,
    MixtureSpec,
    Remapping,
    Support,
    confusion_set,
    enumerate_remappings,
    identity_remapping,
    is_factorized,
    is_remapping,
    mixture_remap_distribution,
    parse_support,
    product_distribution,
)

F = Fraction


def test_is_remapping_examples(xor, full2):
    swap = {(0, 0): (1, 1), (1, 1): (0, 0), (0, 1): (1, 0), (1, 0): (0, 1)}
    assert is_remapping(swap, xor, full2)
    assert not is_remapping({g: (0, 0) for g in full2}, xor, full2)
    assert is_remapping({g: g for g in full2}, xor, full2)


def test_is_remapping_requires_total_map(xor, full2):
    with pytest.raises(MissingSupportError):
        is_remapping({(0, 0): (0, 0)}, xor, full2)


def test_remapping_rejects_label_change(xor, full2):
    with pytest.raises(ValueError):
        Remapping({g: (0, 0) for g in full2}, xor, full2)


def test_disentangled_xor(xor, full2):
    found = enumerate_remappings(xor, full2, "disentangled")
    assert set(found) == {identity_remapping(xor, full2), swap_all(xor, full2)}


def test_disentangled_traffic_lights(nand, full2):
    assert enumerate_remappings(nand, full2, "disentangled") == [identity_remapping(nand, full2)]


def test_unrestricted_first_bit(first_bit, full2):
    found = enumerate_remappings(first_bit, full2, "unrestricted")
    # each support concept independently picks either member of its label class
    assert len(found) == 16
    assert flip_second(first_bit, full2) in found
    assert identity_remapping(first_bit, full2) in found


def test_unrestricted_counts(xor, nand, full2):
    assert len(enumerate_remappings(xor, full2)) == 16
    assert len(enumerate_remappings(nand, full2)) == 27


def test_enumeration_is_sorted(xor, full2):
    found = enumerate_remappings(xor, full2)
    assert found == sorted(found)
    assert [r.table for r in found] == sorted(r.table for r in found)


def test_limit_keeps_lexicographic_prefix(nand, full2):
    assert enumerate_remappings(nand, full2, limit=5) == enumerate_remappings(nand, full2)[:5]


def test_budget(nand, full2):
    with pytest.raises(BudgetExceededError):
        enumerate_remappings(nand, full2, budget=26)
    with pytest.raises(ValueError):
        enumerate_remappings(nand, full2, mode="sideways")


def test_partial_support(xor):
    s = parse_support("00,11", 2)
    found = enumerate_remappings(xor, s)
    assert len(found) == 4
    assert all(r.domain == [(0, 0), (1, 1)] for r in found)
    with pytest.raises(MissingSupportError):
        found[0]((0, 1))


def test_confusion_sets(xor_mix, xor):
    assert confusion_set(xor_mix, (0, 0)) == {(0, 0), (1, 1)}
    assert confusion_set(xor_mix, (1, 0)) == {(0, 1), (1, 0)}
    ident = xor_mix[:1]
    assert all(confusion_set(ident, g) == {g} for g in all_concepts(2))


def test_mixture_examples(xor_mix, first_bit_mix):
    d = mixture_remap_distribution(MixtureSpec(xor_mix, (F(1, 2), F(1, 2))), (0, 1))
    assert d[(0, 1)] == d[(1, 0)] == F(1, 2)
    assert mixture_remap_distribution(MixtureSpec(xor_mix, (F(1), F(0))), (0, 1)) == Distribution.point_mass((0, 1))
    d = mixture_remap_distribution(MixtureSpec(first_bit_mix, (F(3, 10), F(7, 10))), (1, 0))
    assert d.probs == (0, 0, F(3, 10), F(7, 10))


def test_mixture_float_backing(first_bit_mix):
    d = mixture_remap_distribution(MixtureSpec(first_bit_mix, (0.3, 0.7)), (1, 0))
    assert not d.exact
    assert d.probs == pytest.approx((0, 0, 0.3, 0.7))


def test_mixture_weight_validation(xor_mix):
    with pytest.raises(ValueError):
        MixtureSpec(xor_mix, (F(1, 2), F(1, 3)))
    with pytest.raises(ValueError):
        MixtureSpec(xor_mix, (0.5, 0.5 + 1e-9))
    with pytest.raises(ValueError):
        MixtureSpec(xor_mix, (F(3, 2), F(-1, 2)))
    MixtureSpec(xor_mix, (0.5, 0.5 + 1e-13))


def test_factorization_examples():
    ok, _ = is_factorized(Distribution(2, (0, F(1, 2), F(1, 2), 0)))
    assert not ok
    for w in all_concepts(2):
        assert is_factorized(Distribution.point_mass(w))[0]
    ok, mu = is_factorized(Distribution(2, (0, 0, F(1, 2), F(1, 2))))
    assert ok and mu == (1, F(1, 2))


def test_factorization_float_tolerance():
    near = (0.25 + 1e-10, 0.25 - 1e-10, 0.25 - 1e-10, 0.25 + 1e-10)
    assert is_factorized(Distribution(2, near))[0]
    far = (0.25 + 1e-6, 0.25 - 1e-6, 0.25 - 1e-6, 0.25 + 1e-6)
    assert not is_factorized(Distribution(2, far))[0]


def test_distribution_validation():
    with pytest.raises(ValueError):
        Distribution(2, (F(1, 2), F(1, 2), F(1, 2), 0))
    with pytest.raises(ValueError):
        Distribution(2, (1, 0, 0))


def test_support_validation():
    with pytest.raises(ValueError):
        Support(())
    with pytest.raises(ValueError):
        Support(((0, 1), (0, 1)))
    with pytest.raises(ValueError):
        Support(((0, 1), (1, 0)), weights=(0.5, 0.6))
    with pytest.raises(ValueError):
        Support(((0, 1), (1, 0)), weights=(1.0, 0.0))
    assert Support(((0, 1), (1, 0)), weights=(0.25, 0.75)).probabilities() == [0.25, 0.75]


@st.composite
def instances(draw):
    k = draw(st.integers(1, 3))
    n = draw(st.integers(1, 3))
    p = Program(k, n, tuple(draw(st.lists(st.integers(0, n - 1), min_size=2**k, max_size=2**k))))
    concepts = draw(st.lists(st.sampled_from(all_concepts(k)), min_size=1, max_size=2**k, unique=True))
    return p, Support(tuple(sorted(concepts)))


@settings(max_examples=80, deadline=None)
@given(instances())
def test_enumeration_invariants(inst):
    p, s = inst
    try:
        full = enumerate_remappings(p, s, budget=5000)
    except BudgetExceededError:
        full = enumerate_remappings(p, s, limit=200)
    disentangled = enumerate_remappings(p, s, "disentangled")
    ident = identity_remapping(p, s)
    assert ident in disentangled
    assert set(disentangled) <= set(full) or len(full) == 200
    for r in full + disentangled:
        assert is_remapping(dict(r.table), p, s)
        for g in s:
            assert r(g) in consistent_set(p, p(g))
    if ident in full:
        assert all(g in confusion_set(full, g) for g in s)


@settings(max_examples=80, deadline=None)
@given(instances(), st.data())
def test_mixtures_sum_to_one_exactly(inst, data):
    p, s = inst
    rems = enumerate_remappings(p, s, limit=6)
    raw = data.draw(st.lists(st.integers(0, 50), min_size=len(rems), max_size=len(rems)).filter(any))
    pi = tuple(F(v, sum(raw)) for v in raw)
    m = MixtureSpec(rems, pi)
    for g in s:
        d = mixture_remap_distribution(m, g)
        assert sum(d.probs) == 1
        if all(v > 0 for v in pi):
            assert d.support() <= confusion_set(rems, g)
    for r in rems:
        single = MixtureSpec([r], (F(1),))
        assert all(is_factorized(mixture_remap_distribution(single, g))[0] for g in s)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.fractions(0, 1), min_size=1, max_size=4))
def test_product_distribution_is_factorized(mu):
    d = product_distribution(mu)
    assert sum(d.probs) == 1
    ok, marg = is_factorized(d)
    assert ok and marg == tuple(mu)
