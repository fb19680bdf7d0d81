import numpy as np
import pytest

from d2dcache.core import zipf_popularity
from d2dcache.delay import UnstableQueueError, cluster_delay
from d2dcache.experiments.verify import load_point
from d2dcache.placement import cpf_placement
from d2dcache.queuesim import SimConfig, geometric_fit, simulate_cluster, simulate_network
from d2dcache.rates import ClusterRates, cluster_rates
from d2dcache.throughput import throughput_report

CFG = SimConfig(200_000, seed=1)


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(warmup_fraction=0.6), dict(batch_count=1),
                                    dict(num_requests=50)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)

    def test_unstable(self):
        with pytest.raises(UnstableQueueError):
            simulate_cluster(ClusterRates(0, 0, 2.0, 1, 1, 1.0))

    def test_unknown_discipline(self):
        with pytest.raises(ValueError):
            simulate_cluster(ClusterRates(0.5, 0, 0, 1, 1, 1), discipline="lifo")


class TestFifo:
    def test_mm1_mean_sojourn(self):
        st = simulate_cluster(ClusterRates(0.5, 0, 0, 1.0, 1, 1), CFG)
        assert st.mean_delay == pytest.approx(2.0, rel=0.03)
        assert abs(st.mean_delay - 2.0) <= 2.5 * st.ci_half_width

    def test_same_seed_same_result(self):
        r = ClusterRates(0.2, 0.1, 0.1, 3.0, 1.0, 0.5)
        a = simulate_cluster(r, SimConfig(5000, seed=9))
        b = simulate_cluster(r, SimConfig(5000, seed=9))
        assert a.mean_delay == b.mean_delay
        np.testing.assert_array_equal(a.queue_length_histogram, b.queue_length_histogram)

    def test_little_law_and_load(self, baseline):
        r = cluster_rates(cpf_placement(baseline), zipf_popularity(baseline), baseline)[0]
        st = simulate_cluster(r, CFG)
        assert st.mean_in_system == pytest.approx(st.arrival_rate * st.mean_delay, rel=0.02)
        assert st.empirical_rho == pytest.approx(r.rho, rel=0.03)
        frac = np.array(st.per_mode_counts) / sum(st.per_mode_counts)
        np.testing.assert_allclose(frac, r.arrivals / r.total, atol=0.01)

    @pytest.mark.parametrize("rho", [0.3, 0.6, 0.85])
    def test_matches_closed_form(self, rho):
        r = load_point(rho)
        st = simulate_cluster(r, SimConfig(400_000, seed=int(rho * 100)))
        assert st.mean_delay == pytest.approx(cluster_delay(r), rel=0.03)

    def test_network(self, baseline):
        res = simulate_network(cpf_placement(baseline), zipf_popularity(baseline), baseline,
                               config=SimConfig(100_000, seed=4))
        assert res.relative_error <= 0.03
        assert len(res.cluster_stats) == 5


class TestProcessorSharing:
    def test_occupancy_is_geometric(self, baseline):
        r = load_point(0.5, baseline)
        rep = throughput_report(r, baseline)
        st = simulate_cluster(r, SimConfig(300_000, seed=2), discipline="ps")
        fit = geometric_fit(st, rep.zeta, rep.zeta_c)
        assert fit.predicted_mean == pytest.approx(1.0, rel=1e-9)
        assert fit.relative_error <= 0.05
        assert fit.total_variation < 0.02

    def test_ps_busy_fraction(self):
        r = load_point(0.4)
        st = simulate_cluster(r, SimConfig(200_000, seed=3), discipline="ps")
        assert st.empirical_rho == pytest.approx(0.4, abs=0.01)
