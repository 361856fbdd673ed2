import numpy as np
import pytest

from rasch.model import GroundTruth, ResponseData, sample_responses
from rasch.pairing import (
    SplitAssignment,
    btl_win_prob,
    compile_comparisons,
    disagreement_prob,
    enumerate_weighted_pairs,
    random_split,
)


def _one_user_data(responses):
    m = len(responses)
    return ResponseData(1, m, np.zeros(m, int), np.arange(m), np.asarray(responses))


def _iid_users_data(n_users, responses):
    """Many users with identical responses: one split = n_users i.i.d. splits."""
    m = len(responses)
    users = np.repeat(np.arange(n_users), m)
    items = np.tile(np.arange(m), n_users)
    resp = np.tile(np.asarray(responses), n_users)
    return ResponseData(n_users, m, users, items, resp)


class TestRandomSplit:
    def test_pair_count_odd(self):
        split = random_split(_one_user_data([0, 1, 0, 1, 1]), seed=0)
        assert split.n_pairs == 2

    def test_single_response_no_pairs(self):
        assert random_split(_one_user_data([1]), seed=0).n_pairs == 0

    def test_disjointness(self):
        data = _iid_users_data(500, [0, 1, 0, 1, 1, 0, 1])
        split = random_split(data, seed=3)
        for t in range(500):
            items = np.concatenate([split.items_hi[split.users == t],
                                    split.items_lo[split.users == t]])
            assert len(items) == len(set(items.tolist()))

    def test_matching_frequencies_uniform(self):
        # 1e5 users with 4 identical responses = 1e5 i.i.d. matching draws
        data = _iid_users_data(100_000, [0, 0, 0, 0])
        split = random_split(data, seed=5)
        assert split.n_pairs == 200_000
        # classify each user's matching by the partner of item 0
        order = np.argsort(split.users, kind="stable")
        hi = split.items_hi[order].reshape(-1, 2)
        lo = split.items_lo[order].reshape(-1, 2)
        partner_of_0 = np.where(lo[:, 0] == 0, hi[:, 0], 0)
        partner_of_0 = np.where(lo[:, 1] == 0, hi[:, 1], partner_of_0)
        freqs = np.bincount(partner_of_0, minlength=4)[1:] / 100_000
        np.testing.assert_allclose(freqs, 1 / 3, atol=0.01)

    def test_matching_uniform_across_split_indices(self):
        data = _one_user_data([0, 0, 0, 0])
        counts = {1: 0, 2: 0, 3: 0}
        n = 3000
        for k in range(n):
            split = random_split(data, seed=7, split_index=k)
            pairs = set(zip(split.items_hi.tolist(), split.items_lo.tolist()))
            partner = next(hi for hi, lo in pairs if lo == 0)
            counts[partner] += 1
        for c in counts.values():
            assert abs(c / n - 1 / 3) < 0.03

    def test_deterministic_in_seed_and_index(self):
        data = _iid_users_data(50, [0, 1, 1, 0, 1])
        a = random_split(data, seed=1, split_index=4)
        b = random_split(data, seed=1, split_index=4)
        assert np.array_equal(a.items_hi, b.items_hi) and np.array_equal(a.items_lo, b.items_lo)
        c = random_split(data, seed=1, split_index=5)
        assert not (np.array_equal(a.items_hi, c.items_hi)
                    and np.array_equal(a.items_lo, c.items_lo))


class TestCompile:
    def test_record_orientation(self):
        # X_t0 = 0, X_t1 = 1: the harder-looking item 1 "won" the comparison
        data = _one_user_data([0, 1])
        pc = compile_comparisons(data, random_split(data, seed=0))
        assert pc.n_records == 1
        assert pc.rec_i[0] == 1 and pc.rec_j[0] == 0
        assert pc.rec_y[0] == 0  # Y_ij = 1{X_ti < X_tj} with i=1, j=0
        assert pc.edge_wins_hi[0] == 1.0
        assert pc.mean_outcome(0, 1) == 1.0  # Y_01 = 1{X_t0 < X_t1} = 1
        assert pc.mean_outcome(1, 0) == 0.0

    def test_tie_dropped(self):
        data = _one_user_data([1, 1])
        pc = compile_comparisons(data, random_split(data, seed=0))
        assert pc.n_records == 0 and pc.n_edges == 0

    def test_record_fraction_half_at_zero_parameters(self):
        gt = GroundTruth(np.zeros(6), np.zeros(40_000))
        data = sample_responses(gt, 1.0, seed=2)
        split = random_split(data, seed=2)
        pc = compile_comparisons(data, split)
        frac = pc.n_records / split.n_pairs
        assert abs(frac - 0.5) <= 0.01

    def test_complement_convention(self):
        data = _iid_users_data(200, [0, 1])
        pc = compile_comparisons(data, random_split(data, seed=1))
        assert pc.mean_outcome(1, 0) + pc.mean_outcome(0, 1) == 1.0

    def test_foreign_split_rejected(self):
        data = _one_user_data([0, 1, 1, 0])
        split = SplitAssignment(users=[0], items_hi=[9], items_lo=[0])
        with pytest.raises(ValueError, match="absent"):
            compile_comparisons(ResponseData(1, 10, [0, 0], [0, 1], [0, 1]), split)

    def test_mismatched_edge_indices_rejected(self):
        data = _one_user_data([0, 1])
        split = SplitAssignment(users=[0], items_hi=[1], items_lo=[0],
                                edge_hi=[0], edge_lo=[1])  # swapped on purpose
        with pytest.raises(ValueError, match="edge indices"):
            compile_comparisons(data, split)

    def test_selection_rate_matches_overlap_weight(self):
        # with 5 responses each pair is selected with prob 4/(5*4) = 0.2;
        # 1e5 identical users give 1e5 i.i.d. splits of that user
        responses = [0, 1, 0, 1, 1]
        data = _iid_users_data(100_000, responses)
        pc = compile_comparisons(data, random_split(data, seed=11))
        resp = np.asarray(responses)
        for i in range(5):
            for j in range(i):
                expected = 0.2 if resp[i] != resp[j] else 0.0
                assert abs(pc.count(i, j) / 100_000 - expected) <= 0.01

    def test_outcomes_conditionally_independent(self):
        # users whose split realizes the matching {(1,0), (3,2)} provide
        # independent outcome pairs; correlation across the two records ~ 0
        gt = GroundTruth(np.zeros(4), np.zeros(400_000))
        data = sample_responses(gt, 1.0, seed=13)
        pc = compile_comparisons(data, random_split(data, seed=13))
        y = {}
        for (i, j) in ((1, 0), (3, 2)):
            sel = (pc.rec_i == i) & (pc.rec_j == j)
            y[(i, j)] = dict(zip(pc.rec_t[sel].tolist(), pc.rec_y[sel].tolist()))
        common = sorted(set(y[(1, 0)]) & set(y[(3, 2)]))
        assert len(common) > 30_000
        a = np.asarray([y[(1, 0)][t] for t in common], float)
        b = np.asarray([y[(3, 2)][t] for t in common], float)
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 0.01


class TestBtlWinProb:
    def test_equal_parameters(self):
        assert btl_win_prob(0.3, 0.3) == 0.5

    def test_log_three(self):
        assert btl_win_prob(0.0, np.log(3.0)) == pytest.approx(0.75, abs=1e-12)

    def test_complement_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a, b = rng.uniform(-5, 5, 2)
            assert abs(btl_win_prob(a, b) + btl_win_prob(b, a) - 1.0) <= 1e-15

    def test_monte_carlo_conditional_law(self):
        # conditioned on disagreement the outcome follows the two-item
        # comparison law regardless of the user parameter
        theta_i, theta_j, zeta = 0.8, -0.4, 1.7
        rng = np.random.default_rng(21)
        n = 2_000_000  # enough conditioned samples > 1e5
        xi = rng.random(n) < 1 / (1 + np.exp(zeta - theta_i))
        xj = rng.random(n) < 1 / (1 + np.exp(zeta - theta_j))
        disagree = xi != xj
        assert disagree.sum() > 100_000
        emp = (xi[disagree] < xj[disagree]).mean()
        assert abs(emp - btl_win_prob(theta_i, theta_j)) <= 0.01


class TestDisagreementProb:
    def test_symmetric_zero(self):
        assert disagreement_prob(0.0, 0.0, 0.0) == 0.5

    def test_closed_form_value(self):
        # (e^-1 + e^1) / ((1 + e^1)(1 + e^-1))
        want = (np.exp(-1) + np.exp(1)) / ((1 + np.exp(1)) * (1 + np.exp(-1)))
        assert disagreement_prob(1.0, -1.0, 0.0) == pytest.approx(want, abs=1e-12)
        assert disagreement_prob(1.0, -1.0, 0.0) == pytest.approx(0.6067762, abs=1e-6)

    def test_matches_direct_probability(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            ti, tj, z = rng.uniform(-3, 3, 3)
            pi = 1 / (1 + np.exp(z - ti))
            pj = 1 / (1 + np.exp(z - tj))
            want = pi * (1 - pj) + (1 - pi) * pj
            assert disagreement_prob(ti, tj, z) == pytest.approx(want, rel=1e-12)

    def test_lower_bound_on_grid(self):
        log_k2 = 2.0
        bound = 2 * np.exp(log_k2) / (1 + np.exp(log_k2)) ** 2
        for a in np.linspace(-log_k2, log_k2, 21):
            for b in np.linspace(-log_k2, log_k2, 21):
                assert disagreement_prob(a, b, 0.0) >= bound - 1e-12


class TestWeightedPairs:
    def test_wp_weight_five_responses(self):
        data = _one_user_data([0, 1, 0, 1, 1])
        wp = enumerate_weighted_pairs(data, "wp")
        assert wp.n_records == 6  # disagreeing pairs of (2 zeros, 3 ones)
        np.testing.assert_allclose(wp.weights, 0.2)

    def test_wp_weight_two_responses(self):
        data = _one_user_data([0, 1])
        wp = enumerate_weighted_pairs(data, "wp")
        np.testing.assert_allclose(wp.weights, 1.0)

    def test_pmle_unit_weights(self):
        data = _one_user_data([0, 1, 1])
        wp = enumerate_weighted_pairs(data, "pmle")
        assert wp.n_records == 2
        np.testing.assert_allclose(wp.weights, 1.0)

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            enumerate_weighted_pairs(_one_user_data([0, 1]), "mle")

    def test_agreeing_pairs_excluded(self):
        data = _one_user_data([1, 1, 0])
        wp = enumerate_weighted_pairs(data, "pmle")
        pairs = set(zip(wp.items_hi.tolist(), wp.items_lo.tolist()))
        assert pairs == {(2, 0), (2, 1)}
