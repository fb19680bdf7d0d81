import numpy as np
import pytest
from hypothesis import given, strategies as st

from d2dcache.core import empty_placement, zipf_popularity
from d2dcache.delay import (
    UnstableQueueError,
    avg_download_time,
    cluster_delay,
    cooperation_gain,
    delay_gain,
    energy_per_cluster,
    network_delay,
    noncoop_network_delay,
    pollaczek_khinchine_delay,
)
from d2dcache.placement import cpf_placement
from d2dcache.rates import ClusterRates, cluster_rates
from oracles import delay_literal, download_time_literal, mg1_sojourn, network_delay_literal

D_COOP = 0.45339233989797245
D_NONCOOP = 0.7589890459145983

rate = st.floats(0.1, 50.0)


@st.composite
def stable_rates(draw):
    mu = [draw(rate) for _ in range(3)]
    frac = np.array([draw(st.floats(0, 1)) for _ in range(3)]) + 1e-3
    frac /= frac.sum()
    rho = draw(st.floats(0.01, 0.98))
    lam = rho / float(np.sum(frac / mu))
    return ClusterRates(*(lam * frac), *mu)


class TestClusterDelay:
    def test_mm1(self):
        assert cluster_delay(ClusterRates(2.0, 0, 0, 5.0, 1, 1)) == pytest.approx(1 / 3, rel=1e-14)

    def test_light_backhaul_load(self):
        assert cluster_delay(ClusterRates(0, 0, 1e-9, 1, 1, 4.0)) == pytest.approx(0.25, rel=1e-6)

    def test_unstable(self):
        with pytest.raises(UnstableQueueError):
            cluster_delay(ClusterRates(0, 0, 3.0, 1, 1, 2.0))

    @given(stable_rates())
    def test_pk_identity(self, r):
        d = cluster_delay(r)
        assert d == pytest.approx(pollaczek_khinchine_delay(r), rel=1e-12)
        assert d == pytest.approx(mg1_sojourn(r.arrivals, r.services), rel=1e-12)
        assert d == pytest.approx(delay_literal(r.arrivals, r.services), rel=1e-12)


class TestNetworkDelay:
    def test_frozen_baseline(self, baseline):
        c, pop = cpf_placement(baseline), zipf_popularity(baseline)
        assert network_delay(c, pop, baseline).network_delay == pytest.approx(D_COOP, rel=1e-12)
        assert noncoop_network_delay(c, pop, baseline).network_delay == pytest.approx(D_NONCOOP, rel=1e-12)

    def test_loop_oracle(self, comparison):
        c, pop = cpf_placement(comparison), zipf_popularity(comparison)
        ref = network_delay_literal(c.tolist(), pop.tolist(), list(comparison.lam), list(comparison.tau))
        assert network_delay(c, pop, comparison).network_delay == pytest.approx(ref, rel=1e-12)

    def test_homogeneous_equals_cluster(self):
        from d2dcache.experiments.config import baseline_params
        p = baseline_params(beta=0.0)
        rep = network_delay(cpf_placement(p), zipf_popularity(p), p)
        assert rep.network_delay == pytest.approx(rep.per_cluster_delay[0], rel=1e-12)

    def test_everything_cached(self, baseline):
        p = baseline.evolve(N=108)
        c = np.ones((5, 108), dtype=int)
        rep = network_delay(c, zipf_popularity(p), p)
        assert rep.network_delay == pytest.approx(1 / (30.0 - 0.5), rel=1e-12)
        assert noncoop_network_delay(c, zipf_popularity(p), p).network_delay == pytest.approx(rep.network_delay)

    def test_empty_same_either_way(self, comparison):
        c, pop = empty_placement(5, 108), zipf_popularity(comparison)
        assert (network_delay(c, pop, comparison).network_delay
                == pytest.approx(noncoop_network_delay(c, pop, comparison).network_delay))

    def test_unstable_names_cluster(self, baseline):
        c = empty_placement(5, 108)
        with pytest.raises(UnstableQueueError) as err:
            network_delay(c, zipf_popularity(baseline), baseline.evolve(**{"lambda_per_cluster": 2.0}))
        assert err.value.cluster == 1
        rep = network_delay(c, zipf_popularity(baseline), baseline.evolve(lambda_per_cluster=2.0),
                            strict=False)
        assert not rep.stable and rep.unstable_clusters == [1, 2, 3, 4, 5]

    def test_weighted_average(self, baseline):
        p = baseline.evolve(lambda_per_cluster=(0.1, 0.2, 0.3, 0.4, 0.5))
        rep = network_delay(cpf_placement(p), zipf_popularity(p), p)
        lam = np.array(p.lambda_per_cluster)
        assert rep.network_delay == pytest.approx(np.dot(lam, rep.per_cluster_delay) / lam.sum())


class TestGain:
    def test_arithmetic(self):
        assert delay_gain(1.0, 1.0) == 0.0
        assert delay_gain(0.2, 1.0) == pytest.approx(0.8)
        with pytest.raises(ValueError):
            delay_gain(0.0, 1.0)

    def test_baseline_gain(self, baseline):
        g, flag, _, _ = cooperation_gain(cpf_placement(baseline), zipf_popularity(baseline), baseline)
        assert g == pytest.approx(1 - D_COOP / D_NONCOOP) and not flag

    def test_unstable_baseline_flagged(self, baseline):
        p = baseline.evolve(N=60)
        g, flag, co, nc = cooperation_gain(cpf_placement(p), zipf_popularity(p),
                                           p.evolve(lambda_per_cluster=1.05))
        if not nc.stable and co.stable:
            assert g == 1.0 and flag


class TestDownloadTime:
    def test_extremes(self, baseline):
        pop = zipf_popularity(baseline)
        assert avg_download_time(empty_placement(5, 108), pop, baseline) == pytest.approx(0.8)
        assert avg_download_time(np.ones((5, 108)), pop, baseline) == pytest.approx(4 / 120)

    def test_loop_oracle(self, baseline):
        c, pop = cpf_placement(baseline), zipf_popularity(baseline)
        ref = download_time_literal(c.tolist(), pop.tolist(), list(baseline.lam), list(baseline.tau))
        assert avg_download_time(c, pop, baseline) == pytest.approx(ref, rel=1e-12)

    def test_backhaul_to_remote_marginal(self, baseline):
        pop = zipf_popularity(baseline)
        c = empty_placement(5, 108)
        before = avg_download_time(c, pop, baseline)
        c[1, 7] = 1
        after = avg_download_time(c, pop, baseline)
        tau = baseline.tau
        expected = sum(pop[k, 7] * (tau[2] - (tau[0] if k == 1 else tau[1])) for k in range(5)) / 5
        assert before - after == pytest.approx(expected, rel=1e-12)


class TestEnergy:
    def test_local_request(self, baseline):
        r = cluster_rates(cpf_placement(baseline), zipf_popularity(baseline), baseline)[0]
        e = energy_per_cluster(r, baseline)
        assert e.e_lc_per_request == pytest.approx(0.1 * 4 / 120, rel=1e-9)
        assert e.e_rc_per_request == pytest.approx(10 ** (-0.7) * 4 / 50, rel=1e-9)
        assert e.e_lc == pytest.approx(r.lambda_lc * e.e_lc_per_request)

    def test_no_remote_no_energy(self, baseline):
        e = energy_per_cluster(ClusterRates(0.1, 0.0, 0.2, 30, 12.5, 1.25), baseline)
        assert e.e_rc == 0.0

    def test_cache_sweep_shape(self, baseline):
        lc, rc = [], []
        for N in range(4, 101, 4):
            p = baseline.evolve(N=N)
            r = cluster_rates(cpf_placement(p), zipf_popularity(p), p)[0]
            e = energy_per_cluster(r, p)
            lc.append(e.e_lc)
            rc.append(e.e_rc)
        assert np.all(np.diff(lc) > 0)
        peak = int(np.argmax(rc))
        assert 0 < peak < len(rc) - 1
        assert rc[-1] < rc[peak]
