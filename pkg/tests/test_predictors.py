"""Predictors: two-part selection, mixtures, online selection, deterministic learners."""

import math

import numpy as np
import pytest

from mdlpredict.errors import (
    AllExcludedError,
    ClassNotDeterministicError,
)
from mdlpredict.measures import DeterministicSequence, MixtureMeasure, bernoulli
from mdlpredict.model_class import ModelClass
from mdlpredict.predictors import (
    bayes_log_marginal,
    bayes_mixture,
    bayes_posterior,
    bayes_predict,
    cumulative_log_marginals,
    elimination_init,
    elimination_predict,
    eliminate_step,
    majority_init,
    majority_predict,
    majority_step,
    map_select,
    mdl_predict,
    mdl_select,
    mdli_init,
    mdli_log_marginal,
    mdli_step,
    mdli_trace,
    two_part_scores,
)


@pytest.fixture(name="pair")
def pair_fixture():
    return ModelClass([bernoulli(0.5), bernoulli(0.75)],
                      complexity=[1.0, 1.0], truth_index=1)


def _random_class(rng):
    n = int(rng.integers(2, 7))
    thetas = rng.uniform(0.05, 0.95, size=n)
    codes = -np.log2(rng.dirichlet(np.ones(n)))
    return ModelClass([bernoulli(t) for t in thetas], complexity=codes.tolist())


# --- two-part scores and selection ----------------------------------------------

class TestMdlSelect:
    def test_scores_are_code_plus_surprisal(self, pair):
        scores = two_part_scores(pair, [1, 1])
        assert scores[0] == pytest.approx(1.0 + 2.0, rel=1e-15)
        assert scores[1] == pytest.approx(1.0 - 2.0 * math.log2(0.75), rel=1e-15)

    def test_selection_minimizes_the_score(self, pair):
        assert mdl_select(pair, [1] * 12).index == 2
        assert mdl_select(pair, [0] * 12).index == 1

    def test_ties_pick_the_lowest_index(self):
        mc = ModelClass([bernoulli(0.5), bernoulli(0.5)], complexity=[1.0, 1.0])
        sel = mdl_select(mc, [0, 1, 0])
        assert sel.index == 1
        assert sel.scores[0] == sel.scores[1]

    def test_empty_prefix_selects_the_cheapest_code(self):
        mc = ModelClass([bernoulli(0.3), bernoulli(0.6)], complexity=[2.0, 1.0])
        assert mdl_select(mc, []).index == 2

    def test_excluded_models_raise_when_nothing_is_left(self):
        mc = ModelClass([DeterministicSequence([0], 0), DeterministicSequence([0, 0], 0)],
                        complexity="uniform")
        with pytest.raises(AllExcludedError):
            mdl_select(mc, [1])

    def test_predict_uses_the_selected_model(self, pair):
        row = mdl_predict(pair, [1] * 12)
        np.testing.assert_array_equal(row, bernoulli(0.75).probs)

    def test_cumulative_log_marginals_shape(self, pair):
        cum = cumulative_log_marginals(pair, [0, 1, 1])
        assert cum.shape == (2, 4)
        np.testing.assert_array_equal(cum[:, 0], [0.0, 0.0])


class TestMapEqualsMdl:
    def test_agreement_on_randomized_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            mc = _random_class(rng)
            x = (rng.random(int(rng.integers(0, 30))) < 0.5).astype(np.int64)
            assert map_select(mc, x) == mdl_select(mc, x).index

    def test_agreement_includes_tie_breaking(self):
        mc = ModelClass([bernoulli(0.5), bernoulli(0.5)], complexity=[1.0, 1.0])
        x = [0, 1]
        assert map_select(mc, x) == mdl_select(mc, x).index == 1


# --- mixture ---------------------------------------------------------------------

class TestBayes:
    def test_posterior_weights_by_marginal(self, pair):
        post = bayes_posterior(pair, [1])
        np.testing.assert_allclose(post, [0.4, 0.6], rtol=1e-14)

    def test_predictive_averages_component_rows(self, pair):
        row = bayes_predict(pair, [1])
        expected = 0.4 * np.array([0.5, 0.5]) + 0.6 * np.array([0.25, 0.75])
        np.testing.assert_allclose(row, expected, rtol=1e-14)

    def test_log_marginal_matches_the_mixture_measure(self, pair):
        mix = bayes_mixture(pair)
        assert isinstance(mix, MixtureMeasure)
        for x in ([], [1], [1, 0, 1, 1], [0] * 9):
            assert bayes_log_marginal(pair, x) == pytest.approx(
                mix.log_marginal(x), rel=1e-12
            )

    def test_posterior_needs_one_live_model(self):
        mc = ModelClass([DeterministicSequence([0], 0)], complexity=[0.0])
        with pytest.raises(AllExcludedError):
            bayes_posterior(mc, [1])

    def test_unnormalized_priors_only_shift_the_mixture(self):
        # explicit codelengths with mass != 1: the posterior must be invariant
        mc1 = ModelClass([bernoulli(0.5), bernoulli(0.75)], complexity=[1.0, 1.0])
        mc2 = ModelClass([bernoulli(0.5), bernoulli(0.75)], complexity=[3.0, 3.0])
        x = [1, 1, 0]
        np.testing.assert_allclose(
            bayes_posterior(mc1, x), bayes_posterior(mc2, x), rtol=1e-14
        )


# --- online two-part selection ------------------------------------------------------

class TestMdli:
    def test_incremental_steps_match_the_batch_trace(self):
        rng = np.random.default_rng(5)
        mc = _random_class(rng)
        x = (rng.random(40) < 0.6).astype(np.int64)
        indices, log_conds = mdli_trace(mc, x)

        state = mdli_init(mc)
        for t, sym in enumerate(x):
            assert state.selected == indices[t]
            state = mdli_step(mc, state, int(sym))
        assert state.log_prob_bits == pytest.approx(float(log_conds.sum()), rel=1e-12)
        assert mdli_log_marginal(mc, x) == pytest.approx(
            state.log_prob_bits, rel=1e-12
        )

    def test_constant_selection_recovers_that_model(self, pair):
        # all-ones keeps the 0.75 model selected from step 1 on; the product
        # of its conditionals then telescopes to its marginal shifted by one
        x = [1] * 10
        indices, log_conds = mdli_trace(pair, x)
        assert set(indices[1:].tolist()) == {2}
        expected = math.log2(0.5) + 9 * math.log2(0.75)
        assert float(log_conds.sum()) == pytest.approx(expected, rel=1e-13)

    def test_dead_prefix_raises(self):
        mc = ModelClass([DeterministicSequence([0], 0)], complexity=[0.0])
        with pytest.raises(AllExcludedError):
            mdli_trace(mc, [1, 0])


# --- elimination ------------------------------------------------------------------

def _nested_class(m, h):
    models = [DeterministicSequence([1] * (i * h), 0) for i in range(1, m + 1)]
    return ModelClass(models, complexity="uniform", truth_index=m)


class TestElimination:
    @pytest.mark.parametrize("h", [1, 3])
    def test_worst_case_attains_h_times_m_minus_one(self, h):
        m = 4
        mc = _nested_class(m, h)
        path = mc.truth.sample_path(h * (m + 1), np.random.default_rng(0))
        state = elimination_init(mc, h)
        for sym in path:
            state = eliminate_step(mc, state, int(sym))
        assert state.errors == h * (m - 1)

    def test_truth_is_never_eliminated(self):
        mc = _nested_class(4, 2)
        path = mc.truth.sample_path(12, np.random.default_rng(0))
        state = elimination_init(mc, 2)
        for sym in path:
            state = eliminate_step(mc, state, int(sym))
            assert state.alive[mc.truth_index - 1]
        assert state.alive == (False, False, False, True)

    def test_error_bound_on_random_classes(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            m = int(rng.integers(2, 6))
            h = int(rng.integers(1, 4))
            models = [
                DeterministicSequence(rng.integers(0, 2, rng.integers(0, 10)).tolist(),
                                      int(rng.integers(0, 2)))
                for _ in range(m)
            ]
            mc = ModelClass(models, complexity="uniform",
                            truth_index=int(rng.integers(1, m + 1)))
            state = elimination_init(mc, h)
            for t in range(25):
                state = eliminate_step(mc, state, mc.truth.symbol_at(t))
            assert state.errors <= h * (m - 1)

    def test_prediction_is_the_simplest_alive_block(self):
        mc = _nested_class(4, 3)
        state = elimination_init(mc, 3)
        assert elimination_predict(mc, state) == (1, 1, 1)
        # symbol 0 contradicts every model except the longest three
        state = eliminate_step(mc, state, 1)
        assert elimination_predict(mc, state) == (1, 1, 0)

    def test_rejects_stochastic_classes_and_bad_horizons(self, pair):
        with pytest.raises(ClassNotDeterministicError):
            elimination_init(pair, 1)
        mc = _nested_class(2, 1)
        with pytest.raises(ValueError):
            elimination_init(mc, 0)

    def test_contradicting_every_model_raises(self):
        mc = ModelClass([DeterministicSequence([0], 0), DeterministicSequence([0, 0], 0)],
                        complexity="uniform")
        state = elimination_init(mc, 1)
        with pytest.raises(AllExcludedError):
            eliminate_step(mc, state, 1)


# --- weighted majority ----------------------------------------------------------------

def _expansion_class(n_bits):
    models = []
    for i in range(1, 2 ** n_bits):
        pattern = [(i - 1) >> (n_bits - 1 - j) & 1 for j in range(n_bits)]
        models.append(DeterministicSequence(pattern, 0))
    return ModelClass(models, complexity="uniform", truth_index=len(models))


class TestMajority:
    def test_errors_stay_under_log2_inverse_weight(self):
        mc = _expansion_class(4)
        state = majority_init(mc)
        bound = math.ceil(math.log2(len(state.weights)))
        for t in range(6):
            state = majority_step(mc, state, mc.truth.symbol_at(t))
        assert state.errors <= bound

    def test_wrong_majorities_lose_half_the_weight(self):
        mc = _expansion_class(3)
        state = majority_init(mc)
        total = sum(state.weights)
        for t in range(5):
            predicted = majority_predict(mc, state)
            truth_sym = mc.truth.symbol_at(t)
            state = majority_step(mc, state, truth_sym)
            remaining = sum(state.weights)
            if predicted != truth_sym:
                assert remaining <= total / 2.0 * (1 + 1e-12)
            total = remaining

    def test_prediction_ties_pick_the_lowest_symbol(self):
        mc = ModelClass([DeterministicSequence([1], 0), DeterministicSequence([0], 0)],
                        complexity="uniform")
        assert majority_predict(mc, majority_init(mc)) == 0

    def test_explicit_weights_steer_the_vote(self):
        mc = ModelClass([DeterministicSequence([1], 0), DeterministicSequence([0], 0)],
                        complexity="uniform")
        state = majority_init(mc, weights=[0.9, 0.1])
        assert majority_predict(mc, state) == 1

    def test_weight_validation(self, pair):
        mc = _expansion_class(2)
        with pytest.raises(ValueError, match="weights"):
            majority_init(mc, weights=[1.0])
        with pytest.raises(ValueError, match="weights"):
            majority_init(mc, weights=[0.0, 0.0, 0.0])
        with pytest.raises(ClassNotDeterministicError):
            majority_init(pair)

    def test_exhausted_weights_raise(self):
        mc = ModelClass([DeterministicSequence([0], 0), DeterministicSequence([0, 0], 0)],
                        complexity="uniform")
        state = majority_init(mc)
        state = majority_step(mc, state, 0)
        state = majority_step(mc, state, 1)  # kills both survivors
        with pytest.raises(AllExcludedError):
            majority_step(mc, state, 0)
