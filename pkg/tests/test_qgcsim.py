"""Tests for the qgcsim module."""

import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from qgc_mac.channels import ChannelSpec
from qgc_mac.errors import DocumentError, DomainError, ResourceCapError, UnsupportedChannelError
from qgc_mac.modrings import Z4
from qgc_mac.probinfo import ConditionalPmf, Pmf, TypicalSetSpec
from qgc_mac.qgcsim import (
    DECODER_CAP,
    MAX_BLOCK_LENGTH,
    ExperimentConfig,
    NestedQgc,
    QgcSimulator,
    RateConfig,
    TrialStats,
    bin_of,
    build_nested_qgc,
    channel_input,
    decode,
    e1_trend_batches,
    encode,
    epsilon_for,
    load_experiment,
    run_example1,
    uniform_bin_set,
)
from qgc_mac.regions import sum_output_law

LOOSE = 10.0


def small_code(generator, shift_generator, messages=((0,), (1,)), bin_set=((0,), (1,))):
    n = len(generator[0])
    return NestedQgc(Z4, generator, shift_generator, [0] * n, messages, bin_set)


@pytest.fixture
def target1(example1, lemma4):
    return ConditionalPmf(example1.state1, lemma4.v1[0])


@pytest.fixture
def sum_law(example1, lemma4):
    return sum_output_law(example1, lemma4)


@pytest.fixture
def quick_config():
    return ExperimentConfig(n_list=(6,), rates=RateConfig(l=(4,), epsilon_c=3.0), trials=12, seed=3)


class TestBinSets:
    """Tests for typical bin index sets."""

    def test_epsilon_scaling(self):
        assert epsilon_for(16, 3.0) == pytest.approx(0.75)

    def test_wide_slack_keeps_every_index(self):
        assert uniform_bin_set(3, 1.0, 4).shape == (8, 3)

    def test_narrow_slack_drops_extremes(self):
        bins = uniform_bin_set(3, 1 / 3, 4)
        assert len(bins) == 6
        assert not (bins == 0).all(axis=1).any()

    def test_empty_index(self):
        assert uniform_bin_set(0, 1.0, 4).shape == (1, 0)

    def test_read_only(self):
        with pytest.raises(ValueError):
            uniform_bin_set(2, 1.0, 4)[0, 0] = 1


class TestBuildNestedQgc:
    """Tests for random nested-code construction."""

    def test_shapes(self):
        code = build_nested_qgc(8, 2, 3, seed=1)
        assert code.generator.shape == (2, 8)
        assert code.shift_generator.shape == (3, 8)
        assert code.translation.shape == (8,)
        assert code.messages.shape == (4, 2)
        assert code.bin_set.shape == (8, 3)
        assert code.generator.max() < 4

    def test_deterministic_for_seed(self):
        first = build_nested_qgc(8, 1, 2, seed=[5, 1])
        second = build_nested_qgc(8, 1, 2, seed=[5, 1])
        np.testing.assert_array_equal(first.generator, second.generator)
        np.testing.assert_array_equal(first.translation, second.translation)

    def test_shared_shift_generator(self):
        first = build_nested_qgc(6, 1, 2, seed=1)
        second = build_nested_qgc(6, 1, 2, seed=2, shift_generator=first.shift_generator)
        np.testing.assert_array_equal(first.shift_generator, second.shift_generator)

    def test_shared_shift_generator_shape(self):
        with pytest.raises(DomainError):
            build_nested_qgc(6, 1, 2, seed=1, shift_generator=np.zeros((3, 6), dtype=int))

    def test_typical_bin_spec(self):
        spec = TypicalSetSpec.single(Pmf.on_support(4, (0, 1)), 3, 1 / 3)
        assert len(build_nested_qgc(6, 1, 3, bin_spec=spec, seed=0).bin_set) == 6

    def test_bin_spec_length_mismatch(self):
        spec = TypicalSetSpec.single(Pmf.on_support(4, (0, 1)), 3, 1.0)
        with pytest.raises(DomainError):
            build_nested_qgc(6, 1, 4, bin_spec=spec)

    def test_block_length_cap(self):
        with pytest.raises(ResourceCapError):
            build_nested_qgc(MAX_BLOCK_LENGTH + 1, 1, 1)

    def test_codeword_cap(self):
        # 2^10 messages x 2^11 bin indices
        with pytest.raises(ResourceCapError):
            build_nested_qgc(8, 10, 11)

    def test_invalid_lengths(self):
        with pytest.raises(DomainError):
            build_nested_qgc(0, 1, 1)


class TestNestedQgc:
    """Tests for codebook structure."""

    @pytest.fixture
    def code(self):
        return small_code([[1, 0]], [[0, 2]])

    def test_bin_of_message(self, code):
        np.testing.assert_array_equal(bin_of(code, [1]), [[1, 0], [1, 2]])

    def test_outer_codewords(self, code):
        words = {tuple(w) for w in code.outer_codewords()}
        assert words == {(0, 0), (0, 2), (1, 0), (1, 2)}

    def test_unknown_message(self, code):
        with pytest.raises(DomainError):
            code.message_index([2])

    def test_zero_generator_collides(self):
        assert small_code([[0, 0]], [[0, 1]]).has_message_collision()

    def test_distinct_codewords(self, code):
        assert not code.has_message_collision()

    def test_entries_outside_ring(self):
        with pytest.raises(DomainError):
            small_code([[4, 0]], [[0, 1]])

    def test_shape_mismatch(self):
        with pytest.raises(DomainError):
            small_code([[1, 0, 0]], [[0, 1]])


class TestEncode:
    """Tests for typicality encoding and channel inputs."""

    @pytest.fixture
    def code(self):
        return NestedQgc(Z4, [[0, 0, 0, 0]], [[0, 1, 0, 1]], [0, 0, 0, 0], [[0]], [[0], [1]])

    def test_first_typical_codeword(self, code, target1):
        result = encode(code, [0], [0, 1, 2, 3], target1, LOOSE)
        assert result.success
        assert result.bin_index == 1
        np.testing.assert_array_equal(result.codeword, [0, 1, 0, 1])

    def test_covering_failure(self, code, target1):
        result = encode(code, [0], [1, 1, 1, 1], target1, LOOSE)
        assert not result.success
        assert result.bin_index is None

    def test_bad_epsilon(self, code, target1):
        with pytest.raises(DomainError):
            encode(code, [0], [0, 1, 2, 3], target1, 0.0)

    def test_bad_state_length(self, code, target1):
        with pytest.raises(DomainError):
            encode(code, [0], [0, 1, 2], target1, LOOSE)

    def test_channel_input_is_zero_cost(self, lemma4, rng):
        x = channel_input([0, 1, 0, 1], [0, 1, 2, 3], lemma4.x1[0], rng)
        np.testing.assert_array_equal(x, [0, 0, 2, 2])

    def test_channel_input_length_mismatch(self, lemma4, rng):
        with pytest.raises(DomainError):
            channel_input([0, 1], [0, 1, 2], lemma4.x1[0], rng)


class TestDecode:
    """Tests for sum-code decoding."""

    @pytest.fixture
    def codes(self):
        shift = [[0, 0, 1, 0]]
        return small_code([[1, 0, 0, 0]], shift), small_code([[0, 1, 0, 0]], shift)

    def test_unique_pair(self, codes, sum_law):
        result = decode(*codes, [1, 1, 2, 0], LOOSE, sum_law)
        assert result.success
        assert result.message_indices == (1, 1)
        assert result.survivors == 1
        assert result.candidates == 12

    def test_no_survivor(self, codes, sum_law):
        result = decode(*codes, [3, 3, 3, 3], LOOSE, sum_law)
        assert result.message_indices is None
        assert result.survivor_pairs == 0

    def test_ambiguous_codes(self, sum_law):
        shift = [[0, 0, 1, 0]]
        zero = small_code([[0, 0, 0, 0]], shift)
        result = decode(zero, zero, [0, 0, 1, 0], LOOSE, sum_law)
        assert result.message_indices is None
        assert result.survivor_pairs == 4

    def test_precomputed_sumset(self, codes, sum_law):
        sums = np.array([[0], [1], [2]])
        result = decode(*codes, [1, 0, 1, 0], LOOSE, sum_law, sum_bins=sums)
        assert result.message_indices == (1, 0)

    def test_shift_generators_must_match(self, sum_law):
        first = small_code([[1, 0]], [[0, 1]])
        second = small_code([[1, 0]], [[0, 2]])
        with pytest.raises(DomainError, match="shift generator"):
            decode(first, second, [0, 0], LOOSE, sum_law)

    def test_output_length_checked(self, codes, sum_law):
        with pytest.raises(DomainError):
            decode(*codes, [0, 0], LOOSE, sum_law)


class TestConfigs:
    """Tests for rate and experiment configs."""

    def test_int_l_coerced(self):
        rates = RateConfig(l=7)
        assert rates.l == (7,)
        assert rates.l_for(2) == 7

    def test_per_length_l(self):
        assert RateConfig(l=(9, 11, 11)).l_for(1) == 11

    def test_l_count_must_match(self):
        with pytest.raises(DomainError):
            ExperimentConfig(n_list=(8, 12, 16), rates=RateConfig(l=(9, 11)))

    def test_bundled_experiment(self):
        config = load_experiment("example1")
        assert config.n_list == (8, 12, 16)
        assert config.rates.l == (9, 11, 11)
        assert config.rates.epsilon_c == 3.0
        assert config.trials == 200
        assert config.seed == 2024

    def test_document_round_trip(self):
        config = load_experiment()
        assert ExperimentConfig.from_document(config.to_document()) == config

    def test_negative_trials(self):
        document = load_experiment().to_document()
        document["trials"] = -1
        with pytest.raises(DocumentError) as excinfo:
            ExperimentConfig.from_document(document)
        assert excinfo.value.path == "trials"

    def test_bad_block_length_entry(self):
        document = load_experiment().to_document()
        document["n_list"] = [8, "twelve"]
        with pytest.raises(DocumentError) as excinfo:
            ExperimentConfig.from_document(document)
        assert excinfo.value.path == "n_list[1]"

    def test_missing_field(self):
        document = load_experiment().to_document()
        del document["epsilon_c"]
        with pytest.raises(DocumentError) as excinfo:
            ExperimentConfig.from_document(document)
        assert excinfo.value.path == "epsilon_c"

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "exp.yaml"
        path.write_text("n_list: [6]\nk1: 1\nk2: 1\nl: 4\nepsilon_c: 2.0\ntrials: 5\nseed: 1\n")
        config = load_experiment(path)
        assert config.rates.l == (4,)
        assert config.rates.epsilon_c == 2.0


class TestTrialStats:
    """Tests for error-event bookkeeping."""

    def test_rates(self):
        stats = TrialStats(8, 9, 1.0, 10, e1=2, e2=1, ed=3, decoded=4, correct=3)
        assert stats.e1_rate == pytest.approx(0.2)
        assert stats.ed_rate == pytest.approx(0.3)
        assert stats.conditional_decode_accuracy == pytest.approx(0.75)

    def test_accuracy_undefined_without_decisions(self):
        assert math.isnan(TrialStats(8, 9, 1.0, 10, e1=10).conditional_decode_accuracy)

    def test_zero_trials(self):
        assert TrialStats(8, 9, 1.0, 0).e1_rate == 0.0

    def test_merge(self):
        merged = TrialStats.merge(
            [TrialStats(8, 9, 1.0, 5, e1=1, max_cost=0.0), TrialStats(8, 9, 1.0, 7, e1=2, max_cost=0.5)]
        )
        assert merged.trials == 12
        assert merged.e1 == 3
        assert merged.max_cost == 0.5

    def test_frame_columns(self):
        frame = TrialStats.to_frame([TrialStats(8, 9, 1.0, 5)])
        assert list(frame.columns)[:4] == ["n", "l", "epsilon", "trials"]
        assert "conditional_decode_accuracy" in frame.columns

    def test_e1_trend(self):
        falling = [TrialStats(8, 9, 1.0, 10, e1=5), TrialStats(12, 9, 1.0, 10, e1=2)]
        rising = [TrialStats(8, 9, 1.0, 10, e1=1), TrialStats(12, 9, 1.0, 10, e1=4)]
        assert e1_trend_batches([falling, rising, falling]) == 2


class TestQgcSimulator:
    """Tests for the Example-1 simulation."""

    def test_covering_thresholds(self):
        sim = QgcSimulator()
        assert sim.covering_threshold(1).value == pytest.approx(1.0)
        assert sim.covering_threshold(2).value == pytest.approx(1.0)

    def test_correlated_states_rejected(self, example1):
        correlated = ChannelSpec(
            kernel=example1.kernel,
            state1=example1.state1,
            state2=example1.state2,
            cost1=example1.cost1,
            cost2=example1.cost2,
            tau1=0.0,
            tau2=0.0,
            state_joint=np.eye(4) / 4,
        )
        with pytest.raises(UnsupportedChannelError):
            QgcSimulator(correlated)

    def test_workers_checked(self):
        with pytest.raises(DomainError):
            QgcSimulator(workers=0)

    def test_run_counts(self, quick_config):
        (stats,) = QgcSimulator().run(quick_config)
        assert stats.n == 6
        assert stats.l == 4
        assert stats.trials == 12
        assert stats.epsilon == pytest.approx(3.0 / math.sqrt(6))
        assert stats.e1 <= 12 and stats.e2 <= 12
        assert stats.decoded + stats.ed <= 12
        assert stats.correct <= stats.decoded

    def test_inputs_never_cost(self, quick_config):
        (stats,) = QgcSimulator().run(quick_config)
        assert stats.max_cost == 0.0

    def test_deterministic_for_seed(self, quick_config):
        first = TrialStats.to_frame(QgcSimulator().run(quick_config))
        second = TrialStats.to_frame(QgcSimulator().run(quick_config))
        pd.testing.assert_frame_equal(first, second)

    def test_worker_count_does_not_change_results(self, quick_config):
        serial = TrialStats.to_frame(QgcSimulator().run(quick_config))
        parallel = TrialStats.to_frame(QgcSimulator(workers=2).run(quick_config))
        pd.testing.assert_frame_equal(serial, parallel)

    def test_zero_trials(self):
        config = ExperimentConfig(n_list=(6,), rates=RateConfig(l=(4,)), trials=0)
        assert QgcSimulator().run(config) == []

    def test_decoder_cap(self):
        # 2^9 x 2^9 message pairs x 27 bin sums
        config = ExperimentConfig(n_list=(8,), rates=RateConfig(k1=9, k2=9, l=(3,), epsilon_c=3.0), trials=1)
        with pytest.raises(ResourceCapError):
            QgcSimulator().run(config)
        assert 2**18 * 27 > DECODER_CAP

    def test_run_example1(self):
        stats = run_example1((6, 8), RateConfig(l=4, epsilon_c=3.0), trials=4, seed=1)
        assert [s.n for s in stats] == [6, 8]
        assert all(s.trials == 4 for s in stats)

    def test_covering_offset_checked(self):
        with pytest.raises(DomainError):
            QgcSimulator().covering_experiment((8,), offset=1.5, trials=1)

    @pytest.mark.slow
    @pytest.mark.parametrize("n, l_above, l_below", [(8, 9, 7), (12, 13, 11), (16, 18, 14)])
    def test_covering_above_threshold_beats_below(self, n, l_above, l_below):
        frame = QgcSimulator(workers=4).covering_experiment((n,), offset=0.1, trials=2000, seed=2024)
        row = frame.iloc[0]
        assert row["l_above"] == l_above
        assert row["l_below"] == l_below
        assert row["success_above"] > row["success_below"]

    @pytest.mark.slow
    def test_covering_wide_offset(self):
        frame = QgcSimulator().covering_experiment((8,), offset=0.5, trials=150, seed=11)
        row = frame.iloc[0]
        assert row["l_above"] == 12
        assert row["l_below"] == 4
        assert row["success_above"] > row["success_below"]

    @pytest.mark.slow
    def test_e1_trend_over_seed_batches(self):
        sim = QgcSimulator(workers=2)
        batches = [sim.run(replace(load_experiment(), trials=40, seed=seed)) for seed in (1, 2, 3)]
        for stats in batches:
            assert [s.n for s in stats] == [8, 12, 16]
            assert all(s.trials == 40 for s in stats)
        # count is recorded, not pinned: 40 trials per block length
        assert 0 <= e1_trend_batches(batches) <= 3
