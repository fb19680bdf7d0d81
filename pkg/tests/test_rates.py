import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dcache.core import SystemParams, empty_placement, shifted_zipf, zipf_popularity
from d2dcache.experiments.config import baseline_params
from d2dcache.placement import cpf_placement
from d2dcache.rates import (
    ClusterRates,
    ServiceModel,
    cluster_rates,
    cpf_arrival_rates_closed_form,
    mean_sharing_counts,
    mode_arrival_rates,
    mode_fractions,
    service_rates,
    traffic_intensity,
)
from oracles import mode_rates_literal

# frozen from the loop oracle: cluster 1 and cluster 3, CPF, beta 0.5, N 20
CLUSTER1 = (0.19603359011491533, 0.14214855035494073, 0.16181785953014408)
CLUSTER3 = (0.19603359011491533, 0.12561128838233462, 0.1783551215027503)


def small(K, m, N, beta=0.0, m0=0, lam=1.0):
    return SystemParams(n=K * N, K=K, m=m, m0=m0, M=1, beta=beta, mean_file_size=4e6,
                        lambda_per_cluster=lam, r_d2d=120e6, r_cell=50e6, r_bh_avg=5e6, N=N)


class TestModeRates:
    def test_full_local(self):
        p = small(2, 3, 3, beta=0.7)
        c = np.ones((2, 3), dtype=int)
        assert mode_arrival_rates(c, zipf_popularity(p), p, 1) == pytest.approx((1.0, 0, 0))

    def test_empty(self):
        p = baseline_params()
        r = mode_arrival_rates(empty_placement(5, 108), zipf_popularity(p), p, 2)
        assert r == pytest.approx((0, 0, 0.5))

    def test_split_two_files(self):
        p = small(2, 2, 1)
        c = np.array([[1, 0], [0, 1]])
        assert mode_arrival_rates(c, zipf_popularity(p), p, 1) == pytest.approx((0.5, 0.5, 0))

    def test_baseline_frozen(self, baseline):
        c = cpf_placement(baseline)
        pop = zipf_popularity(baseline)
        np.testing.assert_allclose(mode_arrival_rates(c, pop, baseline, 1), CLUSTER1, rtol=1e-12)
        np.testing.assert_allclose(mode_arrival_rates(c, pop, baseline, 3), CLUSTER3, rtol=1e-12)

    @given(st.integers(1, 4), st.integers(1, 9), st.floats(0, 2), st.data())
    def test_matches_loop_oracle_and_conserves(self, K, m, beta, data):
        c = np.array(data.draw(st.lists(st.lists(st.integers(0, 1), min_size=m, max_size=m),
                                        min_size=K, max_size=K)))
        P = shifted_zipf(K, m, m // 2, beta)
        frac = mode_fractions(c, P)
        np.testing.assert_allclose(frac.sum(axis=1), 1.0, atol=1e-9)
        for k in range(1, K + 1):
            np.testing.assert_allclose(frac[k - 1], mode_rates_literal(c.tolist(), P.tolist(), 1.0, k),
                                       atol=1e-12)

    @given(st.integers(1, 4), st.integers(1, 9), st.floats(0, 2), st.data())
    def test_adding_a_file_is_monotone(self, K, m, beta, data):
        c = np.array(data.draw(st.lists(st.lists(st.integers(0, 1), min_size=m, max_size=m),
                                        min_size=K, max_size=K)))
        zeros = np.argwhere(c == 0)
        if len(zeros) == 0:
            return
        k, f = zeros[data.draw(st.integers(0, len(zeros) - 1))]
        P = shifted_zipf(K, m, m // 3, beta)
        before = mode_fractions(c, P)
        c2 = c.copy()
        c2[k, f] = 1
        after = mode_fractions(c2, P)
        assert np.all(after[:, 0] + after[:, 1] >= before[:, 0] + before[:, 1] - 1e-12)
        assert np.all(after[:, 2] <= before[:, 2] + 1e-12)

    @given(st.integers(1, 5), st.integers(1, 8), st.data())
    def test_min_product_identity(self, K, m, data):
        c = np.array(data.draw(st.lists(st.lists(st.integers(0, 1), min_size=m, max_size=m),
                                        min_size=K, max_size=K)))
        for k in range(K):
            others = np.delete(c, k, axis=0)
            np.testing.assert_array_equal(np.minimum(others.sum(0), 1),
                                          1 - np.prod(1 - others, axis=0))


class TestClosedForm:
    def test_first_cluster_local_sum(self, baseline):
        pop = zipf_popularity(baseline)
        lc = cpf_arrival_rates_closed_form(baseline, 1).lc
        assert lc == pytest.approx(0.5 * pop[0, :20].sum(), rel=1e-12)

    def test_single_cluster_has_no_remote(self):
        p = small(1, 30, 10, beta=0.8, m0=5)
        assert cpf_arrival_rates_closed_form(p, 1).rc == 0.0

    @pytest.mark.parametrize("beta", [0.0, 0.25, 0.5, 1.0, 1.5])
    def test_matches_generic_baseline(self, baseline, beta):
        p = baseline.evolve(beta=beta)
        c, pop = cpf_placement(p), zipf_popularity(p)
        for k in range(1, 6):
            np.testing.assert_allclose(cpf_arrival_rates_closed_form(p, k, pop),
                                       mode_arrival_rates(c, pop, p, k), atol=1e-9)

    @pytest.mark.parametrize("K", [1, 2, 3, 5, 8])
    @pytest.mark.parametrize("m", [8, 30, 108, 200])
    def test_matches_generic_grid(self, K, m):
        for m0 in (0, m // 4, m // 2, m):
            for N in sorted({1, m // 10 + 1, m // 3, m}):
                p = small(K, m, N, beta=0.6, m0=m0)
                c, pop = cpf_placement(p), zipf_popularity(p)
                for k in range(1, K + 1):
                    np.testing.assert_allclose(cpf_arrival_rates_closed_form(p, k, pop),
                                               mode_arrival_rates(c, pop, p, k), atol=1e-9)

    def test_literal_form_agrees_for_first_cluster(self, baseline):
        c, pop = cpf_placement(baseline), zipf_popularity(baseline)
        lit = cpf_arrival_rates_closed_form(baseline, 1, pop, literal=True)
        np.testing.assert_allclose(lit, mode_arrival_rates(c, pop, baseline, 1), atol=1e-9)


class TestSharingAndLoad:
    def test_counts(self):
        p = baseline_params()
        arr = np.zeros((5, 3))
        arr[:, 1] = 0.3 * 0.5
        arr[:, 0] = 0.7 * 0.5
        assert mean_sharing_counts(p, arr).n_a_mean == pytest.approx(1.5)
        arr[:, 1], arr[:, 0] = 0.5, 0.0
        assert mean_sharing_counts(p, arr).n_a_mean == pytest.approx(5.0)
        assert mean_sharing_counts(p, np.zeros((5, 3))).n_a_mean == 0.0

    def test_zero_rate_rejected(self):
        p = baseline_params(**{"lambda": 0.0})
        with pytest.raises(ValueError):
            mean_sharing_counts(p, np.zeros((5, 3)))

    def test_shared_rates_divide(self, baseline):
        from d2dcache.rates import SharingCounts
        mu = service_rates(baseline, ServiceModel.SHARED_BY_MEAN, SharingCounts(2.0, 4.0))
        np.testing.assert_allclose(mu, [30.0, 50 / 4 / 2, 5 / 4 / 4])

    def test_intensity_examples(self, baseline):
        assert traffic_intensity(ClusterRates(0, 0, 0, 1, 2, 3)) == 0.0
        assert traffic_intensity(ClusterRates(0, 0, 1.0, 1, 1, 2.0)) == 0.5
        for r in cluster_rates(cpf_placement(baseline), zipf_popularity(baseline), baseline):
            assert r.stable

    def test_noncoop_moves_remote_to_backhaul(self, baseline):
        c, pop = cpf_placement(baseline), zipf_popularity(baseline)
        co = cluster_rates(c, pop, baseline)[0]
        nc = cluster_rates(c, pop, baseline, cooperative=False)[0]
        assert nc.lambda_rc == 0 and nc.lambda_bh == pytest.approx(co.lambda_rc + co.lambda_bh)
