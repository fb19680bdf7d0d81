import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from d2dcache.experiments import cli
from d2dcache.experiments.config import (
    KINDS,
    ConfigError,
    baseline_params,
    dbm_to_watts,
    load_scenario,
    parse_grid,
    parse_scenario,
)
from d2dcache.experiments.runner import HEADERS, OUTPUT_ENV, output_dir_for, run_scenario
from d2dcache.experiments.verify import (
    check_greedy_ratio,
    check_pk_identity,
    golden_instances,
)
from d2dcache.rates import ClusterRates

SCENARIOS = sorted(cli.SCENARIO_DIR.glob("*.scenario"))

SPEC_HEADERS = {
    "delay_vs_beta.csv": "scheme,beta,n_cache,analytic_delay_s,sim_delay_s,sim_ci95_s,stable",
    "gain_vs_cache.csv": "n_cache,delay_coop_s,delay_noncoop_s,gain,baseline_unstable",
    "energy_vs_cache.csv": "n_cache,e_lc_j_per_s,e_rc_j_per_s,gain",
    "throughput_vs_beta.csv": "scheme,x,per_request_throughput_bps",
    "throughput_vs_cache.csv": "scheme,x,per_request_throughput_bps",
    "outage_vs_y.csv": "y,p_outage_coop,p_outage_noncoop,p_outage_noncoop_approx",
    "scaling_vs_m.csv": "m,gamma,t_sum_bound_bps,loglog_slope",
}

SMALL = """
[scenario]
name = small
kind = delay
schemes = cpf, gca, rc
sweep = beta
grid = 0, 0.5, 1.0
rc_replications = 4
seed = 3

[params]
n = 10
K = 5
m = 30
m0 = 10
M = 1
beta = 0.5
lambda = 0.5
mean_file_size_mbit = 4
r_d2d_mbps = 50
r_cell_mbps = 15
r_bh_avg_mbps = 10
"""


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestConfig:
    def test_units(self):
        assert dbm_to_watts(20) == pytest.approx(0.1)
        assert dbm_to_watts(30) == pytest.approx(1.0)
        p = parse_scenario(SMALL).params
        assert p.r_d2d == 50e6 and p.mean_file_size == 4e6

    def test_grids(self):
        assert parse_grid("0:1.5:0.25") == (0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
        assert parse_grid("4, 8,16") == (4, 8, 16)
        with pytest.raises(ValueError):
            parse_grid("1:0:-1")

    @pytest.mark.parametrize("edit,needle", [
        (("beta = 0.5", "beta = -1"), "[params] beta"),
        (("m0 = 10", "m0 = 99"), "[params] m0"),
        (("r_d2d_mbps = 50", "r_d2d_mbpss = 50"), "r_d2d_mbpss"),
        (("kind = delay", "kind = nonsense"), "[scenario] kind"),
        (("grid = 0, 0.5, 1.0", "grid = 0, 1.0, 0.5"), "[scenario] grid"),
        (("schemes = cpf, gca, rc", "schemes = cpf, best"), "[scenario] schemes"),
        (("sweep = beta", "sweep = y"), "[scenario] sweep"),
    ])
    def test_errors_name_line_and_key(self, edit, needle):
        with pytest.raises(ConfigError) as err:
            parse_scenario(SMALL.replace(*edit), source="bad.scenario")
        msg = str(err.value)
        assert needle in msg and "bad.scenario:line " in msg and "line ?" not in msg

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="extra"):
            parse_scenario(SMALL + "\n[extra]\nx = 1\n")

    @pytest.mark.parametrize("path", SCENARIOS, ids=lambda p: p.stem)
    def test_bundled_parse(self, path):
        sc = load_scenario(path)
        assert sc.sweep in KINDS[sc.kind]

    def test_baseline_overrides(self):
        p = baseline_params(True, beta=1.0)
        assert p.r_bh_avg == 10e6 and p.beta == 1.0


class TestRunner:
    def test_headers_exact(self):
        for name, header in SPEC_HEADERS.items():
            assert HEADERS[name] == header

    def test_small_run(self, tmp_path):
        res = run_scenario(parse_scenario(SMALL), tmp_path)
        rows = read_rows(tmp_path / "small" / "delay_vs_beta.csv")
        assert ",".join(rows[0]) == SPEC_HEADERS["delay_vs_beta.csv"]
        assert len(rows) == 1 + 9
        assert sorted({r[0] for r in rows[1:]}) == ["cpf", "gca", "rc"]
        side = json.loads((tmp_path / "small" / "delay_vs_beta.csv.params.json").read_text())
        assert side["base_params_si"]["m"] == 30 and side["seed"] == 3
        assert res.summary

    def test_worker_count_does_not_change_output(self, tmp_path):
        sc = parse_scenario(SMALL)
        run_scenario(sc, tmp_path / "a", workers=1)
        run_scenario(sc, tmp_path / "b", workers=2)
        for f in (tmp_path / "a" / "small").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / "small" / f.name).read_bytes()

    def test_output_dir_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
        assert output_dir_for(parse_scenario(SMALL)) == tmp_path / "small"
        monkeypatch.delenv(OUTPUT_ENV)
        assert output_dir_for(parse_scenario(SMALL)) == Path("results") / "small"

    @pytest.mark.parametrize("stem,name", [("fig5", "gain_vs_cache.csv"), ("fig7", "energy_vs_cache.csv"),
                                           ("fig3", "outage_vs_y.csv"), ("fig9b", "throughput_vs_cache.csv")])
    def test_bundled_headers(self, tmp_path, stem, name):
        res = run_scenario(load_scenario(cli.SCENARIO_DIR / f"{stem}.scenario"), tmp_path)
        path = next(p for p in res.files if p.name == name)
        assert read_rows(path)[0] == SPEC_HEADERS[name].split(",")

    def test_scaling_files(self, tmp_path):
        res = run_scenario(load_scenario(cli.SCENARIO_DIR / "scaling.scenario"), tmp_path)
        for p in res.files:
            assert read_rows(p)[0] == SPEC_HEADERS["scaling_vs_m.csv"].split(",")


class TestVerify:
    def test_negative_control(self):
        from d2dcache.delay import cluster_delay

        def tampered(r: ClusterRates):
            return cluster_delay(r) * (1 + 1e-6)

        assert check_pk_identity(200).passed
        assert not check_pk_identity(200, delay_fn=tampered).passed

    def test_golden_set(self):
        inst = golden_instances()
        assert len(inst) >= 20
        assert {p.beta for p in inst} == {0.0, 0.5, 1.2}
        assert all(p.K <= 3 and p.m <= 8 and p.capacity <= 3 for p in inst)

    def test_golden_pair(self):
        p = baseline_params(True, K=2, n=4, M=1, m=6, m0=3, n_cache=2, beta=0.5)
        rep = check_greedy_ratio([p])
        assert rep.passed and rep.measured["min_ratio"] >= 0.63


class TestCli:
    def test_list(self, capsys):
        assert cli.main(["list"]) == 0
        assert "fig4" in capsys.readouterr().out

    def test_config_error_exit(self, tmp_path, capsys):
        bad = tmp_path / "bad.scenario"
        bad.write_text(SMALL.replace("m0 = 10", "m0 = 99"))
        assert cli.main(["run", str(bad), "-o", str(tmp_path)]) == 1
        assert "bad.scenario:line" in capsys.readouterr().err

    def test_run_ok(self, tmp_path, capsys):
        good = tmp_path / "good.scenario"
        good.write_text(SMALL)
        assert cli.main(["run", str(good), "-o", str(tmp_path)]) == 0
        assert (tmp_path / "small" / "delay_vs_beta.csv").exists()

    def test_greedy_trace(self, tmp_path):
        good = tmp_path / "good.scenario"
        good.write_text(SMALL)
        out = tmp_path / "trace.csv"
        assert cli.main(["greedy-trace", str(good), "-o", str(out)]) == 0
        rows = read_rows(out)
        assert rows[0] == ["step", "cluster", "file", "marginal_s"]
        assert len(rows) == 1 + 5 * 2

    def test_verify_failure_exit(self, monkeypatch):
        from d2dcache.experiments import verify
        failing = verify.SuiteReport([verify.CheckResult("x", False)])
        monkeypatch.setattr(cli, "verify_suite", lambda quick: failing)
        assert cli.main(["verify", "--quick"]) == 2

    def test_module_entry(self):
        out = subprocess.run([sys.executable, "-m", "d2dcache", "list"], capture_output=True, text=True)
        assert out.returncode == 0 and "fig8b" in out.stdout
