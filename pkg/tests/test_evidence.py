"""Tests for frames, focal sets, belief assignments, and their measures."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evifuse.evidence import (
    Bba,
    BoeSet,
    FocalSet,
    Frame,
    average_bba,
    bjs_divergence,
    combine_dempster,
    conflict_k,
    deng_entropy,
    disagreement_degree,
    jousselme_distance,
)
from evifuse.exceptions import FrameMismatchError, TotalConflictError

from _oracles import dempster_dict, random_mass_dict

ABC = Frame(("a", "b", "c"))


def bba_from_dict(frame, mass_dict):
    return Bba(frame, {FocalSet.of(*sorted(s)): v for s, v in mass_dict.items()})


def bba_to_dict(bba):
    return {frozenset(f.indices()): v for f, v in bba.items()}


class TestFrame:
    def test_basic_accessors(self):
        assert ABC.size == 3
        assert ABC.full_mask == 0b111
        assert ABC.index("b") == 1

    def test_generic_labels(self):
        assert Frame.generic(2).labels == ("class_0", "class_1")

    def test_rejects_duplicates_and_empty(self):
        with pytest.raises(ValueError):
            Frame(("a", "a"))
        with pytest.raises(ValueError):
            Frame(())


class TestFocalSet:
    def test_construction_and_indices(self):
        f = FocalSet.of(0, 2)
        assert f.mask == 0b101
        assert f.indices() == (0, 2)
        assert f.cardinality == 2
        assert f.labels(ABC) == ("a", "c")
        assert 0 in f and 1 not in f

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            FocalSet(0)

    def test_set_algebra(self):
        a = FocalSet.of(0, 1)
        b = FocalSet.of(1, 2)
        assert a.intersect(b) == FocalSet.of(1)
        assert a.union(b) == FocalSet.full(ABC)
        assert a.intersect(FocalSet.of(2)) is None
        assert a.jaccard(b) == pytest.approx(1.0 / 3.0)
        assert a.jaccard(a) == 1.0


class TestBba:
    def test_sum_must_be_one(self):
        with pytest.raises(ValueError):
            Bba(ABC, {FocalSet.of(0): 0.6, FocalSet.of(1): 0.3})

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            Bba(ABC, {FocalSet.of(0): 1.2, FocalSet.of(1): -0.2})

    def test_zero_masses_dropped_and_keys_coerced(self):
        # int keys are singleton indices, tuple keys list member indices
        m = Bba(ABC, {0: 0.7, (1, 2): 0.3, 2: 0.0})
        assert m.focal_sets() == (FocalSet.of(0), FocalSet.of(1, 2))
        assert m.mass((0,)) == 0.7
        assert m.mass(FocalSet.of(2)) == 0.0

    def test_bayesian_and_singleton_masses(self):
        m = Bba.bayesian(ABC, [0.2, 0.5, 0.3])
        assert np.allclose(m.singleton_masses(), [0.2, 0.5, 0.3])
        assert m.ignorance() == 0.0

    def test_from_scores_puts_residual_on_full_frame(self):
        m = Bba.from_scores(ABC, [0.5, 0.2, 0.1])
        assert m.mass(FocalSet.full(ABC)) == pytest.approx(0.2)
        assert np.allclose(m.singleton_masses(), [0.5, 0.2, 0.1])

    def test_from_scores_weight_discounting(self):
        m = Bba.from_scores(ABC, [0.5, 0.2, 0.3], weights=[0.8, 1.0, 0.5])
        assert np.allclose(m.singleton_masses(), [0.4, 0.2, 0.15])
        assert m.ignorance() == pytest.approx(0.25)

    def test_from_scores_rejects_sum_above_one(self):
        with pytest.raises(ValueError):
            Bba.from_scores(ABC, [0.8, 0.3, 0.2])

    def test_from_scores_renormalizes_tiny_overshoot(self):
        m = Bba.from_scores(ABC, [0.5, 0.3, 0.2 + 5e-7])
        assert sum(v for _, v in m.items()) == pytest.approx(1.0, abs=1e-12)
        assert m.ignorance() <= 1e-12

    def test_str_format(self):
        m = Bba(ABC, {(0,): 0.25, (1, 2): 0.75})
        assert str(m) == "{a}=0.250000 {b,c}=0.750000"


class TestDempster:
    def test_hand_example(self):
        # m1 x m2 products: a gets 0.2 + 0.1 + 0.08 = 0.38, b gets 0.06,
        # c gets 0.08, the frame keeps 0.04, and K = 0.2 + 0.12 + 0.12 = 0.44.
        m1 = Bba(ABC, {(0,): 0.5, (1,): 0.3, (0, 1, 2): 0.2})
        m2 = Bba(ABC, {(0,): 0.4, (2,): 0.4, (0, 1, 2): 0.2})
        assert conflict_k(m1, m2) == pytest.approx(0.44)
        fused = combine_dempster(m1, m2)
        assert fused.mass((0,)) == pytest.approx(0.38 / 0.56)
        assert fused.mass((1,)) == pytest.approx(0.06 / 0.56)
        assert fused.mass((2,)) == pytest.approx(0.08 / 0.56)
        assert fused.ignorance() == pytest.approx(0.04 / 0.56)

    def test_vacuous_is_neutral(self):
        m = Bba(ABC, {(0,): 0.6, (1, 2): 0.4})
        assert combine_dempster(m, Bba.vacuous(ABC)) == m
        assert combine_dempster(Bba.vacuous(ABC), m) == m

    def test_total_conflict_raises(self):
        two = Frame(("a", "b"))
        m1 = Bba(two, {(0,): 1.0})
        m2 = Bba(two, {(1,): 1.0})
        with pytest.raises(TotalConflictError) as err:
            combine_dempster(m1, m2)
        assert err.value.conflict == pytest.approx(1.0)

    def test_frame_mismatch_raises(self):
        m1 = Bba(ABC, {(0,): 1.0})
        m2 = Bba(Frame(("x", "y")), {(0,): 1.0})
        with pytest.raises(FrameMismatchError):
            combine_dempster(m1, m2)

    def test_matches_enumeration_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            k = int(rng.integers(2, 4))
            frame = Frame.generic(k)
            d1 = random_mass_dict(rng, k)
            d2 = random_mass_dict(rng, k)
            expected = dempster_dict(d1, d2)
            m1 = bba_from_dict(frame, d1)
            m2 = bba_from_dict(frame, d2)
            if expected is None:
                with pytest.raises(TotalConflictError):
                    combine_dempster(m1, m2)
                continue
            got = bba_to_dict(combine_dempster(m1, m2))
            assert set(got) == set(expected)
            for key, value in expected.items():
                assert got[key] == pytest.approx(value, abs=1e-9)


def bba_strategy(frame_size=3):
    universe = list(range(1, 2 ** frame_size))
    weights = st.lists(
        st.floats(min_value=1e-3, max_value=1.0, allow_nan=False),
        min_size=1,
        max_size=len(universe),
    )
    masks = st.lists(
        st.sampled_from(universe), min_size=1, max_size=len(universe), unique=True
    )

    def build(pair):
        picked, raw = pair
        raw = raw[: len(picked)] or [1.0]
        picked = picked[: len(raw)]
        total = sum(raw)
        frame = Frame.generic(frame_size)
        return Bba(frame, {FocalSet(m): w / total for m, w in zip(picked, raw)})

    return st.tuples(masks, weights).map(build)


class TestProperties:
    @given(bba_strategy(), bba_strategy())
    @settings(max_examples=150, deadline=None)
    def test_combination_is_a_bba_and_commutes(self, m1, m2):
        try:
            left = combine_dempster(m1, m2)
        except TotalConflictError:
            with pytest.raises(TotalConflictError):
                combine_dempster(m2, m1)
            return
        right = combine_dempster(m2, m1)
        assert sum(v for _, v in left.items()) == pytest.approx(1.0, abs=1e-9)
        for focal, value in left.items():
            assert right.mass(focal) == pytest.approx(value, abs=1e-9)

    @given(bba_strategy())
    @settings(max_examples=100, deadline=None)
    def test_measures_are_finite_and_non_negative(self, m):
        assert deng_entropy(m) >= -1e-12
        assert bjs_divergence(m, m) == pytest.approx(0.0, abs=1e-12)
        assert jousselme_distance(m, m) == pytest.approx(0.0, abs=1e-9)

    @given(bba_strategy(), bba_strategy())
    @settings(max_examples=100, deadline=None)
    def test_divergence_and_distance_are_symmetric(self, m1, m2):
        assert bjs_divergence(m1, m2) == pytest.approx(bjs_divergence(m2, m1), abs=1e-12)
        assert jousselme_distance(m1, m2) == pytest.approx(
            jousselme_distance(m2, m1), abs=1e-12
        )
        assert 0.0 <= bjs_divergence(m1, m2) <= 1.0 + 1e-12


class TestDengEntropy:
    def test_vacuous_three_labels(self):
        # a single mass of one on the full frame scores log10(2^3 - 1)
        assert deng_entropy(Bba.vacuous(ABC)) == pytest.approx(math.log10(7.0))

    def test_bayesian_reduces_to_shannon(self):
        m = Bba.bayesian(ABC, [0.5, 0.25, 0.25])
        expected = -(0.5 * math.log10(0.5) + 2 * 0.25 * math.log10(0.25))
        assert deng_entropy(m) == pytest.approx(expected)

    def test_certain_singleton_is_zero(self):
        assert deng_entropy(Bba(ABC, {(1,): 1.0})) == pytest.approx(0.0)


class TestBjsDivergence:
    def test_hand_example(self):
        two = Frame(("a", "b"))
        m1 = Bba(two, {(0,): 1.0})
        m2 = Bba(two, {(0,): 0.5, (1,): 0.5})
        expected = 0.5 * math.log2(4.0 / 3.0) + 0.5 * (0.5 * math.log2(2.0 / 3.0) + 0.5)
        assert bjs_divergence(m1, m2) == pytest.approx(expected, abs=1e-12)

    def test_disjoint_certainty_is_one(self):
        two = Frame(("a", "b"))
        m1 = Bba(two, {(0,): 1.0})
        m2 = Bba(two, {(1,): 1.0})
        assert bjs_divergence(m1, m2) == pytest.approx(1.0)


class TestJousselme:
    def test_singleton_versus_vacuous(self):
        # difference vector +1 on {a}, -1 on the frame; the jaccard matrix
        # gives 1 - 2/3 + 1 = 4/3 under the quadratic form
        m1 = Bba(ABC, {(0,): 1.0})
        assert jousselme_distance(m1, Bba.vacuous(ABC)) == pytest.approx(
            math.sqrt(4.0 / 3.0)
        )

    def test_bayesian_reduces_to_euclidean(self):
        two = Frame(("a", "b"))
        m1 = Bba(two, {(0,): 1.0})
        m2 = Bba(two, {(1,): 1.0})
        assert jousselme_distance(m1, m2) == pytest.approx(math.sqrt(2.0))


class TestAggregates:
    def test_average_bba(self):
        m1 = Bba(ABC, {(0,): 0.8, (0, 1, 2): 0.2})
        m2 = Bba(ABC, {(1,): 0.4, (0, 1, 2): 0.6})
        avg = average_bba([m1, m2])
        assert avg.mass((0,)) == pytest.approx(0.4)
        assert avg.mass((1,)) == pytest.approx(0.2)
        assert avg.ignorance() == pytest.approx(0.4)

    def test_boe_set_requires_shared_frame(self):
        with pytest.raises(FrameMismatchError):
            BoeSet.of([Bba.vacuous(ABC), Bba.vacuous(Frame(("x", "y")))])

    def test_disagreement_is_half_when_bodies_agree(self):
        boes = [Bba.bayesian(ABC, [0.6, 0.3, 0.1]) for _ in range(4)]
        for q in range(4):
            assert disagreement_degree(boes, q) == pytest.approx(0.5)

    def test_disagreement_flags_the_outlier(self):
        boes = [
            Bba.bayesian(ABC, [0.8, 0.1, 0.1]),
            Bba.bayesian(ABC, [0.7, 0.2, 0.1]),
            Bba.bayesian(ABC, [0.1, 0.1, 0.8]),
        ]
        values = [disagreement_degree(boes, q) for q in range(3)]
        assert values[2] == max(values)
        assert all(0.0 < v < 1.0 for v in values)
