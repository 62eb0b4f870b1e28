"""Tests for the probinfo module."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qgc_mac.errors import DomainError, ResourceCapError
from qgc_mac.probinfo import (
    ConditionalPmf,
    JointPmf,
    Pmf,
    TypicalSetSpec,
    UQPair,
    component_typical_size,
    conditional_entropy,
    entropy,
    enumerate_product_typical,
    is_jointly_typical,
    is_typical,
    mutual_information,
    mutual_information_direct,
    product_typical_log2_size,
    sample_categorical,
    typical_rows,
)


def random_joint(rng, sizes=(2, 3, 4), names=("A", "B", "C")) -> JointPmf:
    w = rng.random(sizes)
    return JointPmf(tuple(zip(names, sizes)), w / w.sum())


class TestPmf:
    """Tests for Pmf construction."""

    def test_normalizes_within_tolerance(self):
        p = Pmf([0.5, 0.5 + 1e-8])
        assert abs(p.weights.sum() - 1.0) < 1e-15

    def test_rejects_bad_mass(self):
        with pytest.raises(DomainError):
            Pmf([0.5, 0.6])

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            Pmf([1.5, -0.5])

    def test_on_support(self):
        p = Pmf.on_support(4, (0, 2))
        np.testing.assert_allclose(p.weights, [0.5, 0, 0.5, 0])
        assert p.support() == (0, 2)

    def test_weights_read_only(self):
        p = Pmf.uniform(4)
        with pytest.raises(ValueError):
            p.weights[0] = 1.0


class TestEntropy:
    """Tests for entropy and conditional entropy."""

    def test_fair_coin(self):
        assert entropy([0.5, 0.5]) == pytest.approx(1.0, abs=1e-12)

    def test_sum_law_of_example(self):
        assert entropy([0.25, 0.5, 0.25, 0]) == pytest.approx(1.5, abs=1e-12)

    def test_uniform_z4(self):
        assert entropy(Pmf.uniform(4)) == pytest.approx(2.0, abs=1e-12)

    def test_independent_conditioning(self):
        w = np.outer([0.2, 0.8], [0.3, 0.3, 0.4])
        j = JointPmf((("X", 2), ("Y", 3)), w)
        assert conditional_entropy(j, "X", "Y") == pytest.approx(entropy([0.2, 0.8]), abs=1e-12)

    def test_copy_has_zero_conditional_entropy(self):
        j = JointPmf((("X", 3), ("Y", 3)), np.diag([0.2, 0.3, 0.5]))
        assert conditional_entropy(j, "X", "Y") == pytest.approx(0.0, abs=1e-12)

    def test_unknown_axis(self, rng):
        with pytest.raises(DomainError):
            conditional_entropy(random_joint(rng), "Z", "A")

    def test_overlapping_axes(self, rng):
        with pytest.raises(DomainError):
            conditional_entropy(random_joint(rng), "A", "A")

    def test_chain_rule(self, rng):
        for _ in range(20):
            j = random_joint(rng)
            assert j.entropy(("A", "B")) == pytest.approx(
                j.entropy("A") + conditional_entropy(j, "B", "A"), abs=1e-12
            )

    @given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=8).filter(lambda w: sum(w) > 0.01))
    def test_bounds(self, w):
        p = np.array(w) / sum(w)
        h = entropy(p)
        assert -1e-12 <= h <= math.log2(len(p)) + 1e-12

    def test_marginal_monotone(self, rng):
        for _ in range(20):
            j = random_joint(rng)
            assert j.entropy("B") <= j.entropy() + 1e-12


class TestJointPmf:
    """Tests for marginals and derived axes."""

    def test_marginal_reorders(self, rng):
        j = random_joint(rng)
        m = j.marginal(("C", "A"))
        assert m.names == ("C", "A")
        np.testing.assert_allclose(m.weights, j.weights.sum(axis=1).T)

    def test_derive_sum_axis(self):
        j = JointPmf((("V1", 4), ("V2", 4)), np.full((4, 4), 1 / 16))
        d = j.derive("V1+V2", ("V1", "V2"), lambda a, b: (a + b) % 4, 4)
        np.testing.assert_allclose(d.marginal("V1+V2").weights, np.full(4, 0.25))
        assert conditional_entropy(d, "V1+V2", ("V1", "V2")) == pytest.approx(0.0, abs=1e-12)

    def test_derive_respects_argument_order(self):
        w = np.zeros((2, 3))
        w[1, 2] = 1.0
        j = JointPmf((("A", 2), ("B", 3)), w)
        d = j.derive("D", ("B", "A"), lambda b, a: (b - a) % 3, 3)
        assert d.marginal("D").weights[1] == pytest.approx(1.0)

    def test_derive_rejects_out_of_range(self):
        j = JointPmf((("A", 2),), [0.5, 0.5])
        with pytest.raises(DomainError):
            j.derive("D", "A", lambda a: a + 5, 2)

    def test_duplicate_axis_names(self):
        with pytest.raises(DomainError):
            JointPmf((("A", 2), ("A", 2)), np.full((2, 2), 0.25))


class TestMutualInformation:
    """Tests for I(A;B|C)."""

    def test_independent(self):
        j = JointPmf((("A", 2), ("B", 2)), np.outer([0.3, 0.7], [0.6, 0.4]))
        assert mutual_information(j, "A", "B") == pytest.approx(0.0, abs=1e-12)

    def test_copy_uniform_z4(self):
        j = JointPmf((("A", 4), ("B", 4)), np.eye(4) / 4)
        assert mutual_information(j, "A", "B") == pytest.approx(2.0, abs=1e-12)

    def test_matches_direct_sum(self, rng):
        for _ in range(20):
            j = random_joint(rng)
            assert mutual_information(j, "A", "B", "C") == pytest.approx(
                mutual_information_direct(j, "A", "B", "C"), abs=1e-10
            )
            assert mutual_information(j, ("A", "C"), "B") == pytest.approx(
                mutual_information_direct(j, ("A", "C"), "B"), abs=1e-10
            )

    def test_non_negative(self, rng):
        for _ in range(20):
            assert mutual_information(random_joint(rng), "A", "C", "B") >= -1e-12


class TestConditionalPmf:
    """Tests for source-plus-kernel laws."""

    def test_joint(self):
        c = ConditionalPmf(Pmf([0.25, 0.75]), np.array([[1.0, 0.0], [0.5, 0.5]]))
        np.testing.assert_allclose(c.joint(("S", "V")).weights, [[0.25, 0.0], [0.375, 0.375]])
        assert c.output_size == 2

    def test_row_count(self):
        with pytest.raises(DomainError):
            ConditionalPmf(Pmf.uniform(3), np.eye(2))


class TestTypicality:
    """Tests for robust typicality."""

    def test_exact_type(self):
        assert is_typical([0, 1, 1, 2], Pmf([0.25, 0.5, 0.25]), 1e-6)

    def test_zero_probability_symbol(self):
        assert not is_typical([0, 1, 2, 1], Pmf([0.5, 0.5, 0.0]), 10.0)

    def test_hand_evaluation(self):
        assert is_typical([0, 0, 0, 1, 1, 1, 1, 1], Pmf([0.5, 0.5]), 0.3)

    def test_just_outside(self):
        assert not is_typical([0, 0, 0, 1, 1, 1, 1, 1], Pmf([0.5, 0.5]), 0.2)

    def test_boundary_inclusive(self):
        # |3/8 - 1/2| = 0.125 = 0.25 * 0.5
        assert is_typical([0, 0, 0, 1, 1, 1, 1, 1], Pmf([0.5, 0.5]), 0.25)

    def test_rejects_non_positive_epsilon(self):
        with pytest.raises(DomainError):
            typical_rows(np.zeros((1, 4), dtype=int), [1.0], 0.0)

    def test_rows_vectorized(self):
        symbols = np.array([[0, 1, 0, 1], [0, 0, 0, 0], [1, 1, 0, 0]])
        np.testing.assert_array_equal(typical_rows(symbols, [0.5, 0.5], 0.1), [True, False, True])

    def test_joint_typicality(self):
        j = JointPmf((("X", 2), ("Y", 2)), np.eye(2) / 2)
        assert is_jointly_typical([[0, 1, 0, 1], [0, 1, 0, 1]], j, 0.1)
        assert not is_jointly_typical([[0, 1, 0, 1], [1, 1, 0, 1]], j, 0.1)


class TestProductTypicalSet:
    """Tests for Cartesian-product typical sets."""

    def test_all_binary_sequences_at_epsilon_one(self):
        spec = TypicalSetSpec.single(Pmf([0.5, 0.5]), 3, 1.0)
        assert len(enumerate_product_typical(spec)) == 8

    def test_mixed_sequences_at_epsilon_one_third(self):
        spec = TypicalSetSpec.single(Pmf([0.5, 0.5]), 3, 1 / 3)
        typical = enumerate_product_typical(spec)
        assert len(typical) == 6
        assert all(0 < row.sum() < 3 for row in typical.vectors)

    def test_deterministic_component(self):
        spec = TypicalSetSpec.single(Pmf.point(4, 2), 5, 0.1)
        typical = enumerate_product_typical(spec)
        np.testing.assert_array_equal(typical.vectors, [[2, 2, 2, 2, 2]])

    def test_two_components_multiply(self):
        p1 = Pmf([0.5, 0.5, 0, 0])
        p2 = Pmf([0.25, 0.25, 0.25, 0.25])
        spec = TypicalSetSpec(((p1, 4), (p2, 4)), 0.5)
        expected = component_typical_size(p1, 4, 0.5) * component_typical_size(p2, 4, 0.5)
        assert expected == 14 * 24
        typical = enumerate_product_typical(spec)
        assert len(typical) == expected
        assert typical.log2_size == pytest.approx(math.log2(expected))
        assert typical.vectors.shape == (expected, 8)

    def test_lexicographic_order(self):
        spec = TypicalSetSpec.single(Pmf([0.5, 0.5]), 4, 0.5)
        rows = [tuple(r) for r in enumerate_product_typical(spec).vectors]
        assert rows == sorted(rows)

    def test_cap(self):
        spec = TypicalSetSpec.single(Pmf.uniform(4), 12, 1.0)
        with pytest.raises(ResourceCapError):
            enumerate_product_typical(spec, cap=1000)

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            TypicalSetSpec.single(Pmf.uniform(2), 0, 0.1)
        with pytest.raises(DomainError):
            TypicalSetSpec.single(Pmf.uniform(2), 3, 0.0)

    def test_rate_near_entropy(self):
        p1 = Pmf([0.5, 0.5, 0, 0])
        p2 = Pmf([0.25, 0.25, 0.25, 0.25])
        spec = TypicalSetSpec(((p1, 64), (p2, 128)), 0.2)
        rate = product_typical_log2_size(spec) / spec.length
        h = spec.uq_pair().entropy_u_given_q()
        assert h - 0.25 <= rate <= h + 0.05


class TestUQPair:
    """Tests for the (U, Q) summary pair."""

    def test_from_components(self):
        uq = UQPair.from_components([(Pmf.uniform(4), 1), (Pmf([0.5, 0.5, 0, 0]), 3)])
        np.testing.assert_allclose(uq.q.weights, [0.25, 0.75])
        assert uq.entropy_u_given_q() == pytest.approx(0.25 * 2 + 0.75 * 1)

    def test_conditional_count(self):
        with pytest.raises(DomainError):
            UQPair(Pmf.uniform(2), (Pmf.uniform(4),))


class TestSampleCategorical:
    """Tests for row-wise sampling."""

    def test_point_masses(self, rng):
        probs = np.eye(4)[[3, 0, 2, 1]]
        np.testing.assert_array_equal(sample_categorical(probs, rng), [3, 0, 2, 1])

    def test_frequencies(self, rng):
        probs = np.tile([0.2, 0.8], (20000, 1))
        draws = sample_categorical(probs, rng)
        assert abs(draws.mean() - 0.8) < 0.02
