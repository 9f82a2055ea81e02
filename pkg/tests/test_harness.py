import json
import os

import numpy as np
import pytest

import upliftsim as u
from upliftsim import cli
from upliftsim import harness as H


def base_doc(**over):
    doc = {
        "instance": {"kind": "gaussian_preset"},
        "horizon": 50,
        "seeds": {"base": 100, "count": 3},
        "mode": "TUNED",
        "policies": [{"tag": "UPUCB_BL", "lambda": 2}],
    }
    doc.update(over)
    return doc


class TestConfigParsing:
    def test_minimal_valid(self):
        cfg = H.parse_config(base_doc())
        assert cfg.seeds == (100, 101, 102)
        assert cfg.policies[0].tag == "UPUCB_BL"

    def test_error_paths_reported(self):
        doc = base_doc(horizon=-1, seeds=[], policies=[{"tag": "NOPE"}, {"lambda": 1}])
        with pytest.raises(H.ConfigError) as exc:
            H.parse_config(doc)
        msg = "\n".join(exc.value.errors)
        assert "horizon" in msg
        assert "seeds" in msg
        assert "policies[0].tag" in msg
        assert "policies[1]" in msg

    def test_lambda_grid_validation(self):
        with pytest.raises(H.ConfigError, match="lambda"):
            H.parse_config(base_doc(policies=[{"tag": "UPUCB_BL", "lambda": [1, -2]}]))

    def test_blcb_alias(self):
        cfg = H.parse_config(base_doc(policies=[{"tag": "UPUCB_WB_BLCB", "lambda": 1}]))
        assert cfg.policies[0].tag == "UPUCB_WB"
        assert cfg.policies[0].baseline_bound == "lcb"
        assert cfg.policies[0].label == "UPUCB_WB_BLCB"

    def test_mode_and_delta(self):
        with pytest.raises(H.ConfigError, match="mode"):
            H.parse_config(base_doc(mode="WHATEVER"))
        with pytest.raises(H.ConfigError, match="delta"):
            H.parse_config(base_doc(delta=1.5))

    def test_contextual_requires_section(self):
        doc = base_doc(instance={"kind": "contextual"}, policies=[])
        with pytest.raises(H.ConfigError, match="contextual"):
            H.parse_config(doc)


class TestResolution:
    def test_theory_mode_lambda_from_table(self, gaussian_preset):
        cfg = H.parse_config(base_doc(mode="THEORY", delta=0.05,
                                      policies=[{"tag": "UPUCB_BL"}]))
        resolved = H.resolve_policies(cfg, gaussian_preset)
        assert len(resolved) == 1
        want = np.log(2 * 10 * 50 / 0.05)
        assert resolved[0].lam == pytest.approx(want)
        assert resolved[0].delta_tilde == pytest.approx(0.05 / (2 * 10 * 50))

    def test_tuned_default_grids(self, gaussian_preset):
        cfg = H.parse_config(base_doc(policies=[{"tag": "UPUCB_BL"},
                                                {"tag": "THOMPSON_GAUSSIAN"}]))
        resolved = H.resolve_policies(cfg, gaussian_preset)
        lams = [r.lam for r in resolved if r.tag == "UPUCB_BL"]
        sigmas = [r.sigma2 for r in resolved if r.tag == "THOMPSON_GAUSSIAN"]
        assert lams == [float(k) for k in range(1, 11)]
        assert len(sigmas) == 30

    def test_knowledge_defaults(self, gaussian_preset):
        cfg = H.parse_config(base_doc(policies=[{"tag": "UPUCB_L_BL", "lambda": 1},
                                                {"tag": "UPUCB_ILIFT_BL", "lambda": 1}]))
        resolved = H.resolve_policies(cfg, gaussian_preset)
        assert resolved[0].L_bound == 10
        assert resolved[1].epsilon == pytest.approx(0.03)

    def test_min_uplift_requires_affected(self):
        spec = u.UpliftingBanditSpec(
            num_actions=1, num_variables=1, baseline_means=np.zeros(1),
            action_means=np.zeros((1, 1)), affected_sets=(frozenset(),),
            noise_model=u.BernoulliIndependent())
        with pytest.raises(ValueError):
            H.true_min_individual_uplift(spec)


class TestRunExperiment:
    def test_horizon_equal_k_is_round_robin(self, gaussian_preset):
        gaps, _ = u.suboptimality_gaps(gaussian_preset)
        cfg = H.parse_config(base_doc(horizon=10, seeds=[7],
                                      policies=[{"tag": "UPUCB_BL", "lambda": 1}],
                                      full_traces=True))
        result = H.run_experiment(cfg, engine="reference")
        rec = result.records[0]
        np.testing.assert_array_equal(rec.actions, np.arange(1, 11))
        assert rec.final_regret == pytest.approx(gaps.sum())

    def test_fast_and_reference_agree(self, gaussian_preset):
        cfg = H.parse_config(base_doc(horizon=600, seeds=[1, 2],
                                      policies=[{"tag": "UPUCB_WB", "lambda": 2}]))
        fast = H.run_experiment(cfg, engine="fast")
        ref = H.run_experiment(cfg, engine="reference")
        for rf, rr in zip(fast.records, ref.records):
            np.testing.assert_array_equal(rf.actions, rr.actions)
            np.testing.assert_allclose(rf.cum_regret, rr.cum_regret, atol=1e-9)

    def test_overlapping_seeds_identical(self):
        # runs sharing (instance, policy, params, seed) coincide even when the
        # configs differ otherwise
        cfg_a = H.parse_config(base_doc(horizon=200, seeds=[5, 6],
                                        policies=[{"tag": "UPUCB_BL", "lambda": 2},
                                                  {"tag": "UCB_BASELINE", "lambda": 1}]))
        cfg_b = H.parse_config(base_doc(horizon=200, seeds=[6, 9],
                                        policies=[{"tag": "UPUCB_BL", "lambda": [2, 3]}]))
        res_a = H.run_experiment(cfg_a)
        res_b = H.run_experiment(cfg_b)

        def pick(res, label, params, seed):
            for r in res.records:
                if (r.label, r.params_id, r.seed) == (label, params, seed):
                    return r
            raise KeyError

        ra = pick(res_a, "UPUCB_BL", "lambda=2.0", 6)
        rb = pick(res_b, "UPUCB_BL", "lambda=2.0", 6)
        np.testing.assert_array_equal(ra.actions, rb.actions)

    def test_parallel_matches_serial(self):
        cfg_ser = H.parse_config(base_doc(horizon=300, seeds=[1, 2, 3, 4],
                                          policies=[{"tag": "UPUCB_BL", "lambda": 1},
                                                    {"tag": "UPUCB_ILIFT_WB", "lambda": 1,
                                                     "epsilon": 0.03}]))
        cfg_par = H.parse_config({**base_doc(horizon=300, seeds=[1, 2, 3, 4],
                                             policies=[{"tag": "UPUCB_BL", "lambda": 1},
                                                       {"tag": "UPUCB_ILIFT_WB", "lambda": 1,
                                                        "epsilon": 0.03}]), "threads": 2})
        ser = H.run_experiment(cfg_ser)
        par = H.run_experiment(cfg_par)
        assert len(ser.records) == len(par.records) == 8
        for a, b in zip(ser.records, par.records):
            assert (a.label, a.params_id, a.seed) == (b.label, b.params_id, b.seed)
            np.testing.assert_array_equal(a.actions, b.actions)

    def test_validation_catches_short_horizon(self):
        cfg = H.parse_config(base_doc(horizon=5))
        with pytest.raises(H.ConfigError, match="horizon"):
            H.run_experiment(cfg)


class TestSummaries:
    def test_single_trace_degenerate(self):
        rec = H.RunRecord(label="X", params_id="lambda=1", seed=0,
                          grid=np.array([1, 2]), cum_regret=np.array([0.5, 1.5]),
                          actions=np.array([1, 2]))
        rows = H.summarize([rec])
        final = [r for r in rows if r["t"] == 2][0]
        assert final["mean"] == 1.5
        assert final["stderr"] == 0.0
        assert final["p95"] == 1.5

    def test_nearest_rank_p95(self):
        values = np.arange(1.0, 101.0)
        assert H.nearest_rank_percentile(values, 0.95) == 95.0
        assert H.nearest_rank_percentile(np.array([3.0]), 0.95) == 3.0

    def test_population_std_convention(self):
        recs = [H.RunRecord(label="X", params_id="p", seed=s, grid=np.array([1]),
                            cum_regret=np.array([float(v)]), actions=np.array([1]))
                for s, v in enumerate([1.0, 3.0])]
        row = H.summarize(recs)[0]
        assert row["std"] == pytest.approx(1.0)  # population, not sample
        assert row["stderr"] == pytest.approx(1.0 / np.sqrt(2))

    def test_csv_round_trip(self, tmp_path):
        cfg = H.parse_config(base_doc(horizon=40, seeds=[1, 2, 3]))
        result = H.run_experiment(cfg)
        paths = H.export_csv(result, tmp_path)
        rows = {}
        with open(paths["traces"], encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            assert header == ["policy", "params_id", "seed", "t", "action", "cum_regret"]
            for line in fh:
                policy, pid, seed, t, action, cum = line.strip().split(",")
                rows.setdefault((policy, pid, int(t)), []).append(float(cum))
        with open(paths["summary"], encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            assert header == ["policy", "params_id", "t", "mean", "stderr", "std", "p95"]
            for line in fh:
                policy, pid, t, mean, stderr, std, p95 = line.strip().split(",")
                vals = np.array(rows[(policy, pid, int(t))])
                assert float(mean) == pytest.approx(vals.mean(), rel=1e-12)
                assert float(std) == pytest.approx(vals.std(), rel=1e-12, abs=1e-12)
                assert float(p95) == pytest.approx(H.nearest_rank_percentile(vals, 0.95))


class TestSweep:
    def test_single_point_selected(self, tmp_path):
        cfg = H.parse_config(base_doc(horizon=30, seeds=[1, 2]))
        selection, _ = H.sweep_and_select(cfg)
        assert selection["UPUCB_BL"]["params_id"] == "lambda=2.0"

    def test_mean_plus_std_criterion(self):
        assert H.tuning_score(np.array([10.0, 10.0, 12.0, 8.0])) == \
            pytest.approx(10.0 + np.array([10.0, 10.0, 12.0, 8.0]).std())
        # (mean 10, std 1) beats (mean 9, std 3)
        a = H.tuning_score(np.array([9.0, 11.0]))
        b = H.tuning_score(np.array([6.0, 12.0]))
        assert a < b

    def test_theory_mode_rejected(self):
        cfg = H.parse_config(base_doc(mode="THEORY", policies=[{"tag": "UPUCB_BL"}]))
        with pytest.raises(H.ConfigError, match="TUNED"):
            H.sweep_and_select(cfg)


class TestAblationConfig:
    def test_roster_contents(self):
        cfg = H.parse_config(base_doc())
        ab = H.ablation_config(cfg)
        labels = [p.label for p in ab.policies]
        assert labels == ["UPUCB_L_BL[L=5]", "UPUCB_L_BL[L=8]", "UPUCB_L_BL[L=10]",
                          "UPUCB_L_BL[L=15]", "UPUCB_WB", "UPUCB_WB_BLCB"]
        assert ab.policies[0].L_bound == 5
        assert ab.policies[-1].baseline_bound == "lcb"

    def test_requires_gaussian_preset(self):
        cfg = H.parse_config(base_doc(instance={"kind": "bernoulli_cluster"}))
        with pytest.raises(H.ConfigError):
            H.ablation_config(cfg)


class TestLogGrid:
    def test_contains_anchors(self):
        grid = H.log_grid(1000, points=50)
        for anchor in (250, 500, 750, 1000):
            assert anchor in grid
        assert grid[0] >= 1
        assert np.all(np.diff(grid) > 0)

    def test_small_horizon(self):
        grid = H.log_grid(5, points=200)
        np.testing.assert_array_equal(grid, [1, 2, 3, 4, 5])


class TestContextualConfig:
    def test_end_to_end(self, tmp_path):
        doc = {
            "instance": {"kind": "contextual"},
            "horizon": 30,
            "seeds": [1, 2],
            "policies": [],
            "contextual": {"num_individuals": 8, "dim": 2, "num_treatments": 1,
                           "budget": 2, "lambda_reg": 2.0},
        }
        cfg = H.parse_config(doc)
        result = H.run_experiment(cfg)
        assert {r.label for r in result.records} == {"C2UPUCB"}
        paths = H.export_csv(result, tmp_path)
        assert os.path.exists(paths["summary"])


class TestCli:
    def write_config(self, tmp_path, doc):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(doc), encoding="utf-8")
        return str(path)

    def test_run_success(self, tmp_path, capsys):
        path = self.write_config(tmp_path, base_doc(horizon=30, seeds=[1]))
        code = cli.main(["run", path, "--out", str(tmp_path / "out")])
        assert code == 0
        assert (tmp_path / "out" / "traces.csv").exists()
        assert (tmp_path / "out" / "summary.csv").exists()
        assert (tmp_path / "out" / "config.resolved.json").exists()

    def test_config_error_exit_code(self, tmp_path):
        path = self.write_config(tmp_path, base_doc(horizon=-3))
        assert cli.main(["run", path]) == 2

    def test_missing_file_exit_code(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nothing.json")]) == 2

    def test_runtime_error_exit_code(self, tmp_path, monkeypatch):
        path = self.write_config(tmp_path, base_doc(horizon=30, seeds=[1]))

        def boom(cfg, engine="auto"):
            raise RuntimeError("synthetic failure")

        monkeypatch.setattr(H, "run_experiment", boom)
        assert cli.main(["run", path, "--out", str(tmp_path / "o")]) == 3

    def test_validate_config(self, tmp_path, capsys):
        path = self.write_config(tmp_path, base_doc())
        assert cli.main(["validate", path]) == 0
        assert "config ok" in capsys.readouterr().out

    def test_validate_spec_file(self, tmp_path, tiny_spec, capsys):
        path = tmp_path / "spec.json"
        u.save_spec(tiny_spec, path)
        assert cli.main(["validate", str(path)]) == 0
        assert "spec ok" in capsys.readouterr().out

    def test_validate_bad_spec(self, tmp_path, capsys):
        spec_doc = u.spec_to_dict(u.make_gaussian_preset())
        spec_doc["action_means"][0][50] = 9.0  # not affected by action 1
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(spec_doc), encoding="utf-8")
        assert cli.main(["validate", str(path)]) == 2

    def test_output_dir_env_var(self, tmp_path, monkeypatch):
        out = tmp_path / "envout"
        monkeypatch.setenv(H.OUTPUT_DIR_ENV, str(out))
        path = self.write_config(tmp_path, base_doc(horizon=30, seeds=[1]))
        assert cli.main(["run", path]) == 0
        assert (out / "traces.csv").exists()

    def test_overrides(self, tmp_path):
        path = self.write_config(tmp_path, base_doc(horizon=30, seeds=[1]))
        out = tmp_path / "o2"
        code = cli.main(["run", path, "--horizon", "40", "--seeds", "2",
                         "--out", str(out), "--log-grid", "10"])
        assert code == 0
        resolved = json.loads((out / "config.resolved.json").read_text())
        assert resolved["horizon"] == 40
        assert resolved["seeds"] == [1, 2]  # --seeds keeps the configured base

    def test_sweep_command(self, tmp_path):
        path = self.write_config(tmp_path, base_doc(
            horizon=30, seeds=[1, 2], policies=[{"tag": "UPUCB_BL", "lambda": [1, 2]}]))
        out = tmp_path / "sw"
        assert cli.main(["sweep", path, "--out", str(out)]) == 0
        sel = json.loads((out / "selection.json").read_text())
        assert "UPUCB_BL" in sel


GOLDEN = """policy,params_id,seed,t,action,cum_regret
UPUCB_BL,lambda=2.0,11,1,1,0.0
UPUCB_BL,lambda=2.0,11,2,2,0.19999999999998863
UPUCB_BL,lambda=2.0,11,3,3,0.39999999999997726
UPUCB_BL,lambda=2.0,11,4,4,0.5999999999999659
UPUCB_BL,lambda=2.0,11,5,5,0.7999999999999545
"""


class TestGoldenSchema:
    def test_tiny_trace_bytes_stable(self, tmp_path):
        doc = base_doc(horizon=5, seeds=[11],
                       policies=[{"tag": "UPUCB_BL", "lambda": 2}], full_traces=True)
        doc["instance"] = {"kind": "gaussian_preset"}
        cfg = H.parse_config(doc)
        # horizon 5 < K is rejected; use a small custom spec instead
        spec = u.make_lower_bound_instance(3, 4, [0.0, 0.2, 0.4], [1, 2, 4], "FULLY_SHARED")
        path = tmp_path / "spec.json"
        u.save_spec(spec, path)
        doc = base_doc(horizon=5, seeds=[11], full_traces=True,
                       instance={"kind": "custom", "path": str(path)},
                       policies=[{"tag": "UPUCB_WB", "lambda": 2}])
        cfg = H.parse_config(doc)
        result = H.run_experiment(cfg)
        out = H.export_csv(result, tmp_path / "golden")
        text = open(out["traces"], encoding="utf-8").read()
        lines = text.splitlines()
        assert lines[0] == "policy,params_id,seed,t,action,cum_regret"
        assert len(lines) == 6
        for line in lines[1:]:
            parts = line.split(",")
            assert parts[0] == "UPUCB_WB"
            assert parts[1] == "lambda=2.0"
            int(parts[2]); int(parts[3]); int(parts[4]); float(parts[5])

    def test_gaussian_header_example(self):
        # frozen header format used by the plotting component
        assert GOLDEN.splitlines()[0] == "policy,params_id,seed,t,action,cum_regret"
