"""Measure families: construction, marginals, conditionals, sampling."""

import math

import numpy as np
import pytest

from mdlpredict.errors import InvalidSpecError, UndefinedConditionalError
from mdlpredict.measures import (
    BranchingMeasure,
    DeterministicSequence,
    IIDCategorical,
    MarkovChain,
    MixtureMeasure,
    OscillatingBernoulli,
    bernoulli,
    build_family,
    sample_symbol,
)


@pytest.fixture(name="rng")
def rng_fixture():
    return np.random.default_rng(42)


# --- deterministic ----------------------------------------------------------

class TestDeterministicSequence:
    def test_symbol_at_follows_pattern_then_tail(self):
        q = DeterministicSequence([1, 0, 1], tail_symbol=0)
        assert [q.symbol_at(t) for t in range(6)] == [1, 0, 1, 0, 0, 0]

    def test_log_marginal_is_zero_on_path_and_neg_inf_off_path(self):
        q = DeterministicSequence([1, 1], tail_symbol=0)
        assert q.log_marginal([1, 1, 0, 0]) == 0.0
        assert q.log_marginal([1, 0]) == float("-inf")
        assert q.log_marginal([]) == 0.0

    def test_predictive_is_one_hot(self):
        q = DeterministicSequence([1], tail_symbol=0)
        assert q.predictive_distribution([]).tolist() == [0.0, 1.0]
        assert q.predictive_distribution([1]).tolist() == [1.0, 0.0]

    def test_predictive_after_impossible_prefix_raises(self):
        q = DeterministicSequence([1], tail_symbol=0)
        with pytest.raises(UndefinedConditionalError):
            q.predictive_distribution([0])

    def test_is_deterministic_flag(self):
        assert DeterministicSequence([0], tail_symbol=0).is_deterministic
        assert not bernoulli(0.5).is_deterministic

    @pytest.mark.parametrize("kwargs,field", [
        ({"pattern": [2], "tail_symbol": 0}, "pattern"),
        ({"pattern": [0], "tail_symbol": 5}, "tail_symbol"),
        ({"pattern": [0], "tail_symbol": 0, "alphabet_size": 1}, "alphabet_size"),
    ])
    def test_rejects_out_of_range_symbols(self, kwargs, field):
        with pytest.raises(InvalidSpecError, match=field):
            DeterministicSequence(**kwargs)


# --- iid ----------------------------------------------------------------------

class TestIIDCategorical:
    def test_log_marginal_counts_symbols(self):
        q = IIDCategorical([0.25, 0.75])
        # three ones and one zero
        expected = 3 * math.log2(0.75) + math.log2(0.25)
        assert q.log_marginal([1, 1, 0, 1]) == pytest.approx(expected, rel=1e-15)

    def test_cumulative_log_marginal_steps(self):
        q = bernoulli(0.5)
        got = q.cumulative_log_marginal([0, 1, 1])
        assert got.tolist() == [0.0, -1.0, -2.0, -3.0]

    def test_predictive_ignores_history(self):
        q = IIDCategorical([0.1, 0.2, 0.7])
        np.testing.assert_array_equal(q.predictive_distribution([2, 0, 1]), q.probs)

    def test_bernoulli_helper_orders_failure_then_success(self):
        q = bernoulli(0.75)
        assert q.probs.tolist() == [0.25, 0.75]

    @pytest.mark.parametrize("theta", [-0.1, 1.1])
    def test_bernoulli_rejects_out_of_range(self, theta):
        with pytest.raises(InvalidSpecError, match="theta"):
            bernoulli(theta)

    @pytest.mark.parametrize("probs", [[0.5, 0.6], [0.5, -0.5, 1.0], [1.0]])
    def test_rejects_non_distributions(self, probs):
        with pytest.raises(InvalidSpecError, match="probs"):
            IIDCategorical(probs)


# --- markov -------------------------------------------------------------------

class TestMarkovChain:
    @pytest.fixture(name="chain")
    def chain_fixture(self):
        return MarkovChain(1, [0.6, 0.4], [[0.8, 0.2], [0.3, 0.7]])

    def test_log_marginal_chains_transitions(self, chain):
        # P(0) * P(1|0) * P(1|1) = 0.6 * 0.2 * 0.7
        expected = math.log2(0.6) + math.log2(0.2) + math.log2(0.7)
        assert chain.log_marginal([0, 1, 1]) == pytest.approx(expected, rel=1e-15)

    def test_predictive_uses_last_context(self, chain):
        np.testing.assert_array_equal(chain.predictive_distribution([]), [0.6, 0.4])
        np.testing.assert_array_equal(chain.predictive_distribution([1, 0]), [0.8, 0.2])

    def test_order_two_context(self):
        rows = np.tile([0.5, 0.5], (4, 1))
        rows[0b11] = [0.9, 0.1]
        chain = MarkovChain(2, [0.5, 0.5], rows)
        np.testing.assert_array_equal(
            chain.predictive_distribution([0, 1, 1]), [0.9, 0.1]
        )
        # fewer symbols than the order: fall back to the initial law
        np.testing.assert_array_equal(chain.predictive_distribution([1]), [0.5, 0.5])

    def test_rejects_wrong_transition_shape(self):
        with pytest.raises(InvalidSpecError, match="transition"):
            MarkovChain(2, [0.5, 0.5], [[0.8, 0.2], [0.3, 0.7]])

    def test_rejects_order_zero(self):
        with pytest.raises(InvalidSpecError, match="order"):
            MarkovChain(0, [0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]])


# --- oscillating bernoulli ------------------------------------------------------

class TestOscillatingBernoulli:
    def test_theta_alternates_below_then_above(self):
        q = OscillatingBernoulli(0.5, 0.1, clip_eps=0.01, decay=0.5)
        assert q.theta_at(1) == 0.5 - 0.1
        assert q.theta_at(2) == 0.5 + 0.1 / math.sqrt(2)
        assert q.theta_at(9) == 0.5 - 0.1 / 3.0

    def test_decay_zero_never_shrinks(self):
        q = OscillatingBernoulli(0.5, 0.05, decay=0.0)
        assert q.theta_at(1) == 0.45
        assert q.theta_at(10 ** 6) == 0.55

    def test_generic_decay_uses_power_law(self):
        q = OscillatingBernoulli(0.5, 0.2, decay=0.25)
        assert q.theta_at(16) == 0.5 + 0.2 * 16 ** -0.25

    def test_clipping_bounds_theta(self):
        q = OscillatingBernoulli(0.5, 0.9, clip_eps=0.05, decay=0.5)
        assert q.theta_at(1) == 0.05
        assert q.theta_at(2) == 0.95

    def test_rows_match_theta_at(self):
        q = OscillatingBernoulli(0.5, 0.02, decay=0.1)
        x = [1, 0, 1]
        for t in range(1, 4):
            row = q.predictive_distribution(x[:t - 1])
            assert row[1] == q.theta_at(t)
            assert row[0] == 1.0 - q.theta_at(t)

    def test_theta_at_is_one_based(self):
        with pytest.raises(ValueError, match="1-based"):
            OscillatingBernoulli(0.5, 0.1).theta_at(0)

    @pytest.mark.parametrize("kwargs,field", [
        ({"theta0": 0.0, "amplitude": 0.1}, "theta0"),
        ({"theta0": 0.5, "amplitude": -0.1}, "amplitude"),
        ({"theta0": 0.5, "amplitude": 0.1, "clip_eps": 0.5}, "clip_eps"),
        ({"theta0": 0.5, "amplitude": 0.1, "decay": -1.0}, "decay"),
    ])
    def test_rejects_bad_parameters(self, kwargs, field):
        with pytest.raises(InvalidSpecError, match=field):
            OscillatingBernoulli(**kwargs)


# --- branching -------------------------------------------------------------------

class TestBranchingMeasure:
    @pytest.fixture(name="proc")
    def proc_fixture(self):
        return BranchingMeasure([0.4, 0.6], [bernoulli(0.2), bernoulli(0.9)])

    def test_first_step_distribution(self, proc):
        np.testing.assert_array_equal(proc.predictive_distribution([]), [0.4, 0.6])

    def test_conditional_comes_from_committed_branch(self, proc):
        np.testing.assert_array_equal(
            proc.predictive_distribution([0, 1, 0]), bernoulli(0.2).probs
        )
        np.testing.assert_array_equal(
            proc.predictive_distribution([1]), bernoulli(0.9).probs
        )

    def test_log_marginal_factorizes(self, proc):
        expected = math.log2(0.6) + math.log2(0.9) + math.log2(0.1)
        assert proc.log_marginal([1, 1, 0]) == pytest.approx(expected, rel=1e-15)

    def test_block_probs_sum_to_one(self, proc):
        probs = proc.block_probs([], 3)
        assert probs.shape == (8,)
        assert math.fsum(probs) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_nested_branching(self, proc):
        with pytest.raises(InvalidSpecError, match="non-branching"):
            BranchingMeasure([0.5, 0.5], [proc, bernoulli(0.5)])


# --- mixture ------------------------------------------------------------------

class TestMixtureMeasure:
    @pytest.fixture(name="mix")
    def mix_fixture(self):
        return MixtureMeasure([bernoulli(0.5), bernoulli(0.75)], [0.5, 0.5])

    def test_log_marginal_averages_components(self, mix):
        # 0.5 * 0.5 + 0.5 * 0.75 on the single symbol 1
        assert mix.log_marginal([1]) == pytest.approx(math.log2(0.625), rel=1e-15)

    def test_cumulative_log_marginal_matches_pointwise(self, mix):
        x = [1, 0, 1, 1]
        cum = mix.cumulative_log_marginal(x)
        for ell in range(len(x) + 1):
            assert cum[ell] == pytest.approx(mix.log_marginal(x[:ell]), rel=1e-14)

    def test_posterior_tilts_toward_better_component(self, mix):
        post = mix.posterior([1] * 20)
        assert post.sum() == pytest.approx(1.0, rel=1e-14)
        assert post[1] > 0.99

    def test_predictive_is_posterior_average(self, mix):
        x = [1, 1, 0]
        post = mix.posterior(x)
        expected = post[0] * 0.5 + post[1] * 0.75
        row = mix.predictive_distribution(x)
        assert row[1] == pytest.approx(expected, rel=1e-14)
        assert row.sum() == pytest.approx(1.0, rel=1e-14)

    def test_posterior_drops_impossible_components(self):
        mix = MixtureMeasure(
            [DeterministicSequence([0, 0], 0), bernoulli(0.5)], [0.9, 0.1]
        )
        post = mix.posterior([1])
        assert post.tolist() == [0.0, 1.0]
        with pytest.raises(UndefinedConditionalError):
            MixtureMeasure([DeterministicSequence([0], 0)], [1.0]).posterior([1])

    def test_block_probs_mix_components(self, mix):
        direct = 0.5 * bernoulli(0.5).block_probs([], 2) + 0.5 * bernoulli(0.75).block_probs([], 2)
        np.testing.assert_allclose(mix.block_probs([], 2), direct, rtol=1e-14)

    def test_encode_is_unsupported(self, mix):
        with pytest.raises(NotImplementedError):
            mix.encode()

    @pytest.mark.parametrize("weights,message", [
        ([0.5, 0.6], "sum to 1"),
        ([1.0, 0.0], "positive"),
        ([1.0], "one weight"),
    ])
    def test_rejects_bad_weights(self, weights, message):
        with pytest.raises(InvalidSpecError, match=message):
            MixtureMeasure([bernoulli(0.5), bernoulli(0.75)], weights)


# --- sampling -------------------------------------------------------------------

def test_sample_symbol_boundary_is_strict():
    row = np.array([0.25, 0.75])
    assert sample_symbol(row, 0.25) == 1
    assert sample_symbol(row, np.nextafter(0.25, 0.0)) == 0
    assert sample_symbol(row, 0.0) == 0


def test_sample_path_is_reproducible():
    q = bernoulli(0.3)
    a = q.sample_path(200, np.random.default_rng(9))
    b = q.sample_path(200, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_sample_path_hits_target_frequency(rng):
    q = bernoulli(0.75)
    path = q.sample_path(4000, rng)
    assert abs(path.mean() - 0.75) < 4 * math.sqrt(0.75 * 0.25 / 4000)


def test_sample_path_of_deterministic_ignores_uniforms(rng):
    q = DeterministicSequence([1, 0, 1], tail_symbol=1)
    np.testing.assert_array_equal(q.sample_path(5, rng), [1, 0, 1, 1, 1])


def test_mixture_sampling_commits_to_one_component(rng):
    mix = MixtureMeasure(
        [DeterministicSequence([0] * 6, 0), DeterministicSequence([1] * 6, 1)],
        [0.5, 0.5],
    )
    for _ in range(20):
        path = mix.sample_path(6, rng)
        assert path.min() == path.max()


def test_symbol_range_is_checked():
    with pytest.raises(ValueError, match="out of range"):
        bernoulli(0.5).log_marginal([0, 2])


# --- declarative construction -----------------------------------------------------

class TestBuildFamily:
    def test_builds_each_family(self):
        specs = [
            {"family": "deterministic", "pattern": [1, 0], "tail_symbol": 0},
            {"family": "iid", "probs": [0.2, 0.8]},
            {"family": "bernoulli", "theta": 0.75},
            {"family": "markov", "order": 1, "initial": [0.5, 0.5],
             "transition": [[0.8, 0.2], [0.3, 0.7]]},
            {"family": "osc_bernoulli", "theta0": 0.5, "amplitude": 0.01},
            {"family": "branching", "first_step": [0.5, 0.5],
             "branches": [{"family": "bernoulli", "theta": 0.2},
                          {"family": "bernoulli", "theta": 0.9}]},
            {"family": "mixture", "weights": [0.5, 0.5],
             "components": [{"family": "bernoulli", "theta": 0.5},
                            {"family": "bernoulli", "theta": 0.75}]},
        ]
        types = [DeterministicSequence, IIDCategorical, IIDCategorical, MarkovChain,
                 OscillatingBernoulli, BranchingMeasure, MixtureMeasure]
        for spec, tp in zip(specs, types):
            assert isinstance(build_family(spec), tp)

    def test_osc_decay_defaults_to_half(self):
        q = build_family({"family": "osc_bernoulli", "theta0": 0.5, "amplitude": 0.1})
        assert q.decay == 0.5

    @pytest.mark.parametrize("spec,message", [
        ({"probs": [0.5, 0.5]}, "missing 'family'"),
        ({"family": "gamma"}, "unknown family"),
        ({"family": "bernoulli", "theta": 0.5, "mode": 3}, "unknown fields"),
        ({"family": "bernoulli"}, "missing field"),
    ])
    def test_rejects_malformed_specs(self, spec, message):
        with pytest.raises(InvalidSpecError, match=message):
            build_family(spec)
