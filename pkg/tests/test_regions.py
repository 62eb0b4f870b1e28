"""Tests for the regions module."""

import math

import numpy as np
import pytest

from qgc_mac.channels import (
    ChannelSpec,
    builtin_binary_adder,
    builtin_binary_dirty,
    builtin_modular_adder,
)
from qgc_mac.errors import (
    AssignmentLoadError,
    DomainError,
    InfeasibleAssignmentError,
    UnsupportedChannelError,
)
from qgc_mac.modrings import Z4
from qgc_mac.probinfo import ConditionalPmf, Pmf, UQPair
from qgc_mac.regions import (
    INNER_APPROXIMATION,
    CombinedAssignment,
    GpAssignment,
    GpSearchConfig,
    QgcAssignment,
    RateBounds,
    assignment_to_document,
    combined_rates,
    covering_threshold,
    gamma_qgc,
    gp_rates,
    gp_rates_audit,
    gp_region_search,
    gp_search,
    group_code_sum_rate,
    load_assignment,
    packing_threshold,
    qgc_sum_rate,
    region_hull,
    resolve_assignment,
    sum_output_law,
    validate_assignment,
)


def random_gp_assignment(rng, q_size=2, s_size=2, u_size=3, x_size=2):
    """Random p(u|s,q) with a random deterministic input map."""
    aux = []
    for _ in range(2):
        pu = rng.dirichlet(np.ones(u_size), size=(q_size, s_size))
        maps = rng.integers(x_size, size=(q_size, u_size, s_size))
        onehot = np.eye(x_size)[maps]
        aux.append(np.einsum("qsu,qusx->qsux", pu, onehot))
    return GpAssignment(Pmf(rng.dirichlet(np.ones(q_size))), aux[0], aux[1])


def degenerate_combined(gp: GpAssignment) -> CombinedAssignment:
    """Embed a GP assignment with V constant and W uniform on Z4."""
    q = gp.q.size
    joints = []
    for aux in (gp.aux1, gp.aux2):
        qs, s, u, x = aux.shape
        joint = np.zeros((qs, s, u, 4, x))
        joint[:, :, :, 0, :] = aux
        joints.append(joint)
    w = np.full((q, 4), 0.25)
    return CombinedAssignment(Z4, gp.q, w, w, joints[0], joints[1])


def constant_v_assignment(w_support=(0, 1, 2, 3)) -> QgcAssignment:
    w = Pmf.on_support(4, w_support).weights[None, :]
    v = np.zeros((1, 4, 4))
    v[:, :, 0] = 1.0
    x = np.zeros((1, 4, 4, 4))
    x[..., 0] = 1.0
    return QgcAssignment(Z4, Pmf([1.0]), w, w, v, v, x, x)


def uniform_v_assignment(s_size: int) -> QgcAssignment:
    """V uniform on Z4 independent of S, X = V."""
    w = np.full((1, 4), 0.25)
    v = np.full((1, s_size, 4), 0.25)
    x = np.zeros((1, 4, s_size, 4))
    for value in range(4):
        x[0, value, :, value] = 1.0
    return QgcAssignment(Z4, Pmf([1.0]), w, w, v, v, x, x)


def independent_output_channel() -> ChannelSpec:
    return ChannelSpec(
        kernel=np.full((4, 4, 4, 4, 4), 0.25),
        state1=Pmf.uniform(4),
        state2=Pmf.uniform(4),
        cost1=np.zeros((4, 4)),
        cost2=np.zeros((4, 4)),
        tau1=0.0,
        tau2=0.0,
        name="independent-output",
    )


class TestAssignments:
    """Tests for assignment construction and validation."""

    def test_lemma4_meets_budgets(self, example1, lemma4):
        assert lemma4.as_combined().expected_costs(example1) == pytest.approx((0.0, 0.0))

    def test_non_stochastic_table_rejected(self):
        aux = np.full((1, 1, 2, 2), 0.2)
        with pytest.raises(DomainError):
            GpAssignment(Pmf([1.0]), aux, aux)

    def test_q_size_mismatch_rejected(self, rng):
        a = random_gp_assignment(rng, q_size=2)
        with pytest.raises(DomainError):
            GpAssignment(Pmf([1.0]), a.aux1, a.aux2)

    def test_alphabet_mismatch_with_channel(self, example1, rng):
        with pytest.raises(DomainError, match="S1"):
            gp_rates(example1, random_gp_assignment(rng))

    def test_v_marginal_uniform(self, example1, lemma4):
        for i, state in ((1, example1.state1), (2, example1.state2)):
            np.testing.assert_allclose(lemma4.v_marginal(i, state), [[0.25] * 4])


class TestGpRates:
    """Tests for the Gel'fand-Pinsker extension bounds."""

    def test_binary_adder_uniform_inputs(self):
        ch = builtin_binary_adder()
        aux = np.zeros((1, 1, 2, 2))
        aux[0, 0] = 0.5 * np.eye(2)
        bounds = gp_rates(ch, GpAssignment(Pmf([1.0]), aux, aux))
        assert bounds.r1 == pytest.approx(1.0)
        assert bounds.r2 == pytest.approx(1.0)
        assert bounds.sum_rate == pytest.approx(1.5)
        assert bounds.max_sum() == pytest.approx(1.5)

    def test_auxiliaries_independent_of_everything(self):
        ch = builtin_binary_dirty(0.5, 0.5)
        aux = np.zeros((1, 2, 2, 2))
        aux[0, :, :, 0] = 0.5
        bounds = gp_rates(ch, GpAssignment(Pmf([1.0]), aux, aux))
        assert bounds.r1 <= 1e-12
        assert bounds.r2 <= 1e-12
        assert bounds.sum_rate <= 1e-12

    def test_state_cost_terms_reported(self, rng):
        ch = builtin_binary_dirty(1.0, 1.0)
        bounds = gp_rates(ch, random_gp_assignment(rng))
        assert "I(U1;S1|Q)" in bounds.terms
        assert "E[c1]" in bounds.terms
        assert bounds.to_dict()["R1+R2"] == bounds.sum_rate

    def test_budget_violation(self):
        ch = builtin_binary_dirty(0.1, 0.1)
        aux = np.zeros((1, 2, 1, 2))
        aux[0, :, 0, 1] = 1.0
        with pytest.raises(InfeasibleAssignmentError, match="encoder 1"):
            gp_rates(ch, GpAssignment(Pmf([1.0]), aux, aux))

    def test_correlated_states_unsupported(self):
        ch = builtin_binary_dirty(1.0, 1.0)
        correlated = ChannelSpec(
            kernel=ch.kernel,
            state1=ch.state1,
            state2=ch.state2,
            cost1=ch.cost1,
            cost2=ch.cost2,
            tau1=1.0,
            tau2=1.0,
            state_joint=np.array([[0.5, 0.0], [0.0, 0.5]]),
        )
        aux = np.zeros((1, 2, 1, 2))
        aux[0, :, 0, 0] = 1.0
        with pytest.raises(UnsupportedChannelError):
            gp_rates(correlated, GpAssignment(Pmf([1.0]), aux, aux))

    def test_chain_rule_matches_direct_sum(self, rng):
        ch = builtin_binary_dirty(1.0, 1.0)
        for _ in range(5):
            audit = gp_rates_audit(ch, random_gp_assignment(rng))
            for chain, direct in audit.values():
                assert chain == pytest.approx(direct, abs=1e-10)

    def test_swapping_encoders_swaps_bounds(self, rng):
        ch = builtin_binary_dirty(1.0, 1.0)
        a = random_gp_assignment(rng)
        forward = gp_rates(ch, a)
        backward = gp_rates(ch.swapped(), a.swapped())
        assert backward.r1 == pytest.approx(forward.r2, abs=1e-12)
        assert backward.r2 == pytest.approx(forward.r1, abs=1e-12)
        assert backward.sum_rate == pytest.approx(forward.sum_rate, abs=1e-12)


class TestValidateAssignment:
    """Tests for the non-raising assignment check."""

    def test_lemma4_is_valid(self, example1, lemma4):
        assert validate_assignment(example1, lemma4) == []

    def test_budget_message(self):
        ch = builtin_binary_dirty(0.1, 0.1)
        aux = np.zeros((1, 2, 1, 2))
        aux[0, :, 0, 1] = 1.0
        errors = validate_assignment(ch, GpAssignment(Pmf([1.0]), aux, aux))
        assert len(errors) == 2
        assert errors[0].startswith("encoder 1 average cost")

    def test_alphabet_mismatch_skips_costs(self, rng, example1):
        errors = validate_assignment(example1, random_gp_assignment(rng))
        assert errors
        assert all("symbols" in e for e in errors)


class TestRateBounds:
    """Tests for the pentagon vertices of a bound triple."""

    def test_vertices_clamped(self):
        bounds = RateBounds(1.0, -0.5, 0.8)
        assert all(x >= 0 and y >= 0 for x, y in bounds.vertices())
        assert bounds.max_sum() == pytest.approx(0.8)

    def test_sum_bound_binds(self):
        assert RateBounds(1.0, 1.0, 1.5).max_sum() == pytest.approx(1.5)

    def test_individual_bounds_bind(self):
        assert RateBounds(0.25, 0.5, 2.0).max_sum() == pytest.approx(0.75)


class TestCoveringThreshold:
    """Tests for the covering threshold."""

    @pytest.fixture
    def binary_w(self):
        return UQPair(Pmf([1.0]), (Pmf.on_support(4, (0, 1)),))

    def test_lemma4_encoder1(self, example1, lemma4, binary_w):
        target = ConditionalPmf(example1.state1, lemma4.v1[0])
        report = covering_threshold(binary_w, target, Z4)
        assert report.value == pytest.approx(1.0)
        assert report.feasible
        assert [row["term"] for row in report.terms] == pytest.approx([1.0, 1.0])

    def test_lemma4_encoder2(self, example1, lemma4, binary_w):
        target = ConditionalPmf(example1.state2, lemma4.v2[0])
        report = covering_threshold(binary_w, target, Z4)
        assert report.value == pytest.approx(1.0)
        assert [row["term"] for row in report.terms] == pytest.approx([0.0, 1.0])

    def test_zero_denominator_with_positive_factor_is_infeasible(self):
        uq = UQPair(Pmf([1.0]), (Pmf.on_support(4, (0, 2)),))
        target = ConditionalPmf(Pmf.uniform(4), np.eye(4))
        report = covering_threshold(uq, target, Z4)
        assert math.isinf(report.value)
        assert not report.feasible

    def test_alphabet_must_match_ring(self):
        uq = UQPair(Pmf([1.0]), (Pmf.uniform(2),))
        target = ConditionalPmf(Pmf.uniform(4), np.eye(4))
        with pytest.raises(DomainError):
            covering_threshold(uq, target, Z4)


class TestPackingThreshold:
    """Tests for the packing threshold."""

    @pytest.fixture
    def binary_u(self):
        return UQPair(Pmf([1.0]), (Pmf.on_support(4, (0, 1)),))

    def test_noiseless(self, binary_u):
        report = packing_threshold(binary_u, ConditionalPmf(Pmf.uniform(4), np.eye(4)), Z4)
        assert report.value == pytest.approx(2.0)

    def test_binary_u_only_level_zero_binds(self, binary_u):
        noisy = np.zeros((4, 4))
        for x in range(4):
            noisy[x, x] = noisy[x, (x + 1) % 4] = 0.5
        report = packing_threshold(binary_u, ConditionalPmf(Pmf.uniform(4), noisy), Z4)
        # H(X|Y) = 1
        assert report.value == pytest.approx(1.0)
        assert [row["dropped"] for row in report.terms] == [False, True]

    def test_independent_output(self):
        uq = UQPair(Pmf([1.0]), (Pmf.uniform(4),))
        report = packing_threshold(uq, ConditionalPmf(Pmf.uniform(4), np.full((4, 4), 0.25)), Z4)
        assert report.value == pytest.approx(0.0, abs=1e-12)

    def test_all_levels_dropped(self):
        uq = UQPair(Pmf([1.0]), (Pmf.point(4, 0),))
        report = packing_threshold(uq, ConditionalPmf(Pmf.uniform(4), np.eye(4)), Z4)
        assert math.isinf(report.value)
        assert not report.feasible


class TestQgcSumRate:
    """Tests for the nested-QGC sum rate."""

    def test_lemma4_simplified_value(self, example1, lemma4):
        rate = qgc_sum_rate(example1, lemma4)
        assert rate.simplified_value == pytest.approx(1.0)

    def test_lemma4_general_value_and_discrepancy(self, example1, lemma4):
        rate = qgc_sum_rate(example1, lemma4)
        assert rate.value == pytest.approx(0.5)
        assert rate.discrepancy == pytest.approx(0.5)
        assert rate.feasible

    def test_lemma4_entropies(self, example1, lemma4):
        entropies = qgc_sum_rate(example1, lemma4).entropies
        assert entropies["H(W1+W2|Q)"] == pytest.approx(1.5)
        assert entropies["H(V1+V2|Q)"] == pytest.approx(2.0)
        assert entropies["H(V1+V2|Y,U1,U2,Q)"] == pytest.approx(0.0, abs=1e-12)
        assert entropies["H(V1|U1,Q,S1)"] == pytest.approx(1.0)

    def test_lemma4_term_table(self, example1, lemma4):
        frame = qgc_sum_rate(example1, lemma4).terms_frame()
        assert len(frame) == 4
        terms = {(row.encoder, row.t): row.term for row in frame.itertuples()}
        assert terms[(1, 1)] == pytest.approx(1.5)
        assert terms[(1, 2)] == pytest.approx(1.5)
        assert terms[(2, 1)] == pytest.approx(0.0)
        assert terms[(2, 2)] == pytest.approx(1.5)

    def test_discrepancy_is_logged(self, example1, lemma4, caplog):
        with caplog.at_level("WARNING", logger="qgc_mac.regions"):
            qgc_sum_rate(example1, lemma4)
        assert "differs from the simplified expression" in caplog.text

    def test_constant_v_gives_zero(self, example1):
        rate = qgc_sum_rate(example1, constant_v_assignment())
        assert rate.value == pytest.approx(0.0, abs=1e-12)
        assert rate.simplified_value == pytest.approx(0.0, abs=1e-12)

    def test_report_serializes(self, example1, lemma4):
        report = qgc_sum_rate(example1, lemma4).to_dict()
        assert set(report) >= {"value", "simplified_value", "discrepancy", "v_reading_value", "terms"}

    def test_sum_output_law_is_noiseless(self, example1, lemma4):
        law = sum_output_law(example1, lemma4)
        assert law.names == ("V1+V2", "Y")
        # V1 + V2 = Y - S1 - S2 + S1 + S2 = Y
        np.testing.assert_allclose(law.weights, np.diag(law.weights.sum(axis=1)), atol=1e-12)


class TestGroupCodeSumRate:
    """Tests for the group-code sum-rate bound."""

    def test_lemma4(self, example1, lemma4):
        rate = group_code_sum_rate(example1, lemma4)
        assert rate.terms["H([V1]_1|Q,S1)"] == pytest.approx(0.0, abs=1e-12)
        assert rate.value == pytest.approx(0.0, abs=1e-12)

    def test_noiseless_modular_adder(self):
        rate = group_code_sum_rate(builtin_modular_adder(4), uniform_v_assignment(1))
        assert rate.value == pytest.approx(1.0)

    def test_output_independent_of_inputs(self):
        rate = group_code_sum_rate(independent_output_channel(), uniform_v_assignment(4))
        assert rate.value == pytest.approx(-1.0)

    def test_non_uniform_v_rejected(self, example1):
        with pytest.raises(DomainError, match="uniform"):
            group_code_sum_rate(example1, constant_v_assignment())


class TestCombinedRates:
    """Tests for the combined GP + nested-QGC region."""

    def test_degenerate_gamma_is_zero(self, rng):
        ch = builtin_binary_dirty(1.0, 1.0)
        gamma = gamma_qgc(ch, degenerate_combined(random_gp_assignment(rng)))
        assert abs(gamma.value) <= 1e-9

    def test_degenerate_reduces_to_gp(self, rng):
        ch = builtin_binary_dirty(1.0, 1.0)
        for _ in range(25):
            gp = random_gp_assignment(rng)
            combined = combined_rates(ch, degenerate_combined(gp))
            plain = gp_rates(ch, gp)
            assert combined.r1 == pytest.approx(plain.r1, abs=1e-9)
            assert combined.r2 == pytest.approx(plain.r2, abs=1e-9)
            assert combined.sum_rate == pytest.approx(plain.sum_rate, abs=1e-9)

    @pytest.mark.slow
    def test_thousand_degenerate_assignments(self, rng):
        ch = builtin_binary_dirty(1.0, 1.0)
        for _ in range(1000):
            gp = random_gp_assignment(rng)
            degenerate = degenerate_combined(gp)
            assert abs(gamma_qgc(ch, degenerate).value) <= 1e-9
            combined = combined_rates(ch, degenerate)
            plain = gp_rates(ch, gp)
            assert combined.r1 == pytest.approx(plain.r1, abs=1e-9)
            assert combined.r2 == pytest.approx(plain.r2, abs=1e-9)
            assert combined.sum_rate == pytest.approx(plain.sum_rate, abs=1e-9)

    def test_trivial_u_matches_qgc_rate(self, example1, lemma4):
        combined = combined_rates(example1, lemma4.as_combined())
        assert combined.sum_rate == pytest.approx(qgc_sum_rate(example1, lemma4).value)
        assert combined.terms["Gamma_QGC"] == pytest.approx(0.5)

    def test_r2_label_noted(self, example1, lemma4):
        combined = combined_rates(example1, lemma4.as_combined())
        assert combined.notes
        assert "R2" in combined.to_dict()["notes"][0]


class TestRegionHull:
    """Tests for the convex-hull frontier."""

    def test_time_sharing(self):
        region = region_hull([(1.0, 0.0), (0.0, 1.0)])
        assert region.frontier == ((0.0, 1.0), (1.0, 0.0))
        assert region.contains((0.5, 0.5))
        assert not region.contains((0.6, 0.6))

    def test_single_point(self):
        region = region_hull([(0.4, 0.3)])
        assert region.frontier == ((0.4, 0.3),)
        assert region.contains((0.0, 0.3))
        assert region.contains((0.4, 0.0))

    def test_dominated_point_removed(self):
        region = region_hull([(1.0, 1.0), (0.5, 0.5)])
        assert region.frontier == ((1.0, 1.0),)

    def test_negative_points_clamped(self):
        region = region_hull([(-0.2, 0.5)])
        assert region.frontier == ((0.0, 0.5),)

    def test_empty_input(self):
        region = region_hull([])
        assert region.frontier == ((0.0, 0.0),)
        assert region.max_sum_rate() == 0.0

    def test_to_frame(self):
        frame = region_hull([(1.0, 0.0), (0.0, 1.0)]).to_frame()
        assert list(frame.columns) == ["R1", "R2"]


class TestGpSearch:
    """Tests for the seeded region search."""

    def test_zero_iterations(self):
        result = gp_search(builtin_binary_adder(), GpSearchConfig(iterations=0, restarts=2))
        assert result.region.frontier == ((0.0, 0.0),)
        assert result.evaluations == 0
        assert result.best_assignment is None

    def test_binary_adder_recovers_sum_capacity(self):
        result = gp_search(builtin_binary_adder(), GpSearchConfig(restarts=2, iterations=50))
        assert result.best_sum_rate >= 1.49
        assert result.region.label == INNER_APPROXIMATION

    def test_deterministic_for_seed(self):
        cfg = GpSearchConfig(restarts=2, iterations=40, seed=7)
        first = gp_search(builtin_binary_dirty(0.25, 0.25), cfg)
        second = gp_search(builtin_binary_dirty(0.25, 0.25), cfg)
        assert first.region.frontier == second.region.frontier

    def test_region_search_matches_search(self):
        cfg = GpSearchConfig(restarts=2, iterations=20, seed=3)
        region = gp_region_search(builtin_binary_adder(), cfg)
        assert region == gp_search(builtin_binary_adder(), cfg).region

    def test_config_validation(self):
        with pytest.raises(DomainError):
            GpSearchConfig(restarts=0)
        with pytest.raises(DomainError):
            GpSearchConfig(iterations=-1)

    @pytest.mark.slow
    def test_example1_below_outer_bound(self, example1):
        result = gp_search(example1, GpSearchConfig(restarts=4, iterations=200))
        assert result.best_sum_rate <= 0.321


class TestAssignmentDocuments:
    """Tests for assignment loading."""

    def test_resolve_builtin_lemma4(self, lemma4):
        loaded = resolve_assignment("lemma4")
        assert isinstance(loaded, QgcAssignment)
        for name in ("w1", "w2", "v1", "v2", "x1", "x2"):
            np.testing.assert_allclose(getattr(loaded, name), getattr(lemma4, name))

    def test_resolve_degenerate(self, example1):
        loaded = resolve_assignment("degenerate-qgc")
        assert isinstance(loaded, CombinedAssignment)
        assert abs(gamma_qgc(example1, loaded).value) <= 1e-9

    def test_document_round_trip(self, lemma4):
        loaded = load_assignment(assignment_to_document(lemma4))
        np.testing.assert_allclose(loaded.x2, lemma4.x2)

    def test_resolve_from_file(self, tmp_path, lemma4):
        import yaml

        path = tmp_path / "a.yaml"
        path.write_text(yaml.safe_dump(assignment_to_document(lemma4)))
        loaded = resolve_assignment(path)
        np.testing.assert_allclose(loaded.v1, lemma4.v1)

    def test_missing_field_named(self):
        with pytest.raises(AssignmentLoadError) as excinfo:
            load_assignment({"kind": "gp", "q": [1.0]})
        assert excinfo.value.path == "u1"

    def test_unknown_kind(self):
        document = {
            "kind": "mystery",
            "q": [1.0],
            "ring": {"p": 2, "r": 2},
            "w1": [[0.25, 0.25, 0.25, 0.25]],
            "w2": [[0.25, 0.25, 0.25, 0.25]],
        }
        with pytest.raises(AssignmentLoadError) as excinfo:
            load_assignment(document)
        assert excinfo.value.path == "kind"

    def test_map_out_of_range(self):
        document = {
            "kind": "gp",
            "q": [1.0],
            "x_sizes": [2, 2],
            "u1": [[[1.0]]],
            "x1_map": [[[5]]],
        }
        with pytest.raises(AssignmentLoadError) as excinfo:
            load_assignment(document)
        assert excinfo.value.path == "x1_map"
