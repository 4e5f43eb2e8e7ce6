import json
import math

import numpy as np
import pytest

from delab.errors import ConfigError
from delab.experiment import (
    SCHEMA,
    ExperimentConfig,
    Report,
    build_data,
    build_domain,
    export,
    load_report,
    run,
)


def interval_config(**overrides):
    config = {
        "name": "interval",
        "domain": {"geometry": "interval", "L": 10.0, "m": 64},
        "data": {"u0": {"kind": "bump", "support": [3.0, 7.0]}, "u1": {"kind": "zero"}},
        "orders": [1],
        "schedule": {"t0": 1.0, "t1": 5.0, "count": 5},
        "metrics": ["l2", "energy", "sharp"],
    }
    config.update(overrides)
    return config


class TestRun:
    def test_rows_per_metric(self):
        report = run(interval_config())
        lines = report.to_csv().splitlines()
        assert lines[0] == "metric,t,value"
        assert len(lines) - 1 == 3 * 5
        for name in report.columns:
            assert len(report.tables[name]) == 5

    def test_deterministic(self):
        config = interval_config(data={"u0": {"kind": "random_energy"}, "u1": {"kind": "zero"}, "seed": 9})
        assert run(config).to_csv() == run(config, threads=3).to_csv()

    def test_seed_changes_data(self):
        a = run(interval_config(data={"u0": {"kind": "random_energy"}, "seed": 1}))
        b = run(interval_config(data={"u0": {"kind": "random_energy"}, "seed": 2}))
        assert a.to_csv() != b.to_csv()

    def test_line_gaussian_verdict(self):
        config = {
            "name": "line",
            "domain": {"geometry": "line", "xi_min": 1e-3, "xi_max": 50.0, "m": 4000},
            "data": {"u0": {"kind": "gaussian", "width": 1.0}, "u1": {"kind": "gaussian", "width": 1.0}},
            "orders": [0],
            "schedule": {"t0": 10.0, "t1": 1e4, "count": 25},
            "metrics": ["l2"],
            "expectations": [{"metric": "l2[n=0]", "slope": -0.25, "tol": 0.15}],
        }
        report = run(config)
        verdict = report.verdicts[0]
        assert verdict["passed"] and verdict["measured"] == pytest.approx(-0.25, abs=0.02)
        assert verdict["config_hash"] == report.config_hash

    def test_verdict_kinds(self):
        config = interval_config(
            metrics=["heat_l2"],
            schedule={"t0": 2.0, "t1": 20.0, "count": 8},
            expectations=[
                {"metric": "heat_l2", "log_corrected": [0.0, 0.0], "max_ratio": 1e9},
                {"metric": "heat_l2", "plateau": {"power": 0.0}, "max_ratio": 1.0},
            ],
        )
        report = run(config)
        assert [v["kind"] for v in report.verdicts] == ["log_corrected", "plateau"]
        assert report.verdicts[0]["passed"] and not report.verdicts[1]["passed"]

    def test_local_energy_metric(self):
        report = run(interval_config(metrics=[{"local_energy": 5.0}, "local_energy(R=10)"]))
        assert report.columns == ["local_energy(R=5)[n=1]", "local_energy(R=10)[n=1]"]
        small = np.array(report.tables["local_energy(R=5)[n=1]"])[:, 1]
        full = np.array(report.tables["local_energy(R=10)[n=1]"])[:, 1]
        assert np.all(small <= full)

    def test_radial_metrics(self):
        config = {
            "name": "shell",
            "domain": {"geometry": "radial", "N": 2, "r_in": 1.0, "r_out": 40.0, "m": 200},
            "data": {"u0": {"kind": "gaussian", "center": 4.0, "width": 0.5}},
            "orders": [0],
            "schedule": {"t0": 1.0, "t1": 10.0, "count": 4},
            "metrics": ["weighted_l1_log", "l2"],
        }
        report = run(config)
        assert all(v > 0 for _, v in report.tables["weighted_l1_log[n=0]"])


class TestGenerators:
    def test_line_bump_transform(self):
        config = ExperimentConfig.from_dict({
            "domain": {"geometry": "line", "xi_min": 1e-2, "xi_max": 30.0, "m": 600},
            "data": {"u0": {"kind": "bump", "support": [-1.0, 1.0]}},
            "schedule": {"t0": 1.0, "t1": 2.0, "count": 4},
            "metrics": ["l2"],
        })
        line = build_domain(config)
        data = build_data(line, config.data)
        x = np.linspace(-1, 1, 20001)
        y = np.where(np.abs(x) < 1, np.exp(1 - 1 / np.maximum(1 - x * x, 1e-300)), 0.0)
        l2 = math.sqrt(np.trapezoid(y * y, x))
        # the bump spectrum decays like exp(-sqrt(xi)), so the xi_max cutoff dominates the error
        assert line.operator.norm(data.u0) == pytest.approx(l2, rel=1e-4)

    def test_random_energy_scale(self):
        config = ExperimentConfig.from_dict(interval_config(data={"u1": {"kind": "random_energy", "seed": 3}}))
        dom = build_domain(config)
        data = build_data(dom, config.data)
        weighted = dom.operator.weight * (1 + dom.operator.lam) * data.u1**2
        assert 0.5 <= weighted.sum() <= 1.5

    def test_heavy_tail_modes(self):
        config = ExperimentConfig.from_dict({
            "domain": {"geometry": "line", "xi_min": 1e-3, "xi_max": 50.0, "m": 100},
            "data": {"u1": {"kind": "heavy_tail", "delta": 0.02}},
            "schedule": {"t0": 1.0, "t1": 2.0, "count": 4},
            "metrics": ["l2"],
        })
        line = build_domain(config)
        u1 = build_data(line, config.data).u1
        np.testing.assert_allclose(u1, line.xi**-0.48 * np.exp(-line.xi**2))


class TestValidation:
    def test_lists_every_problem(self):
        bad = interval_config(
            data={"u0": {"kind": "random_energy"}, "u1": {"kind": "mystery"}},
            metrics=["l2", "bogus", "weighted_l1_log"],
            schedule={"t0": 3.0, "t1": 1.0, "count": 2},
            orders=[-1],
            expectations=[{"metric": "nothing", "slope": 1, "tol": 1}],
        )
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict(bad)
        text = " | ".join(info.value.problems)
        for fragment in ("seed", "mystery", "bogus", "weighted_l1_log", "t0 < t1", "count", "order", "nothing"):
            assert fragment in text
        assert len(info.value.problems) >= 8

    def test_finite_propagation_guard(self):
        config = {
            "domain": {"geometry": "radial", "N": 3, "r_in": 1.0, "r_out": 50.0, "m": 200},
            "data": {"u0": {"kind": "bump", "support": [1.0, 3.0]}},
            "schedule": {"t0": 1.0, "t1": 46.0, "count": 5},
            "metrics": ["l2"],
        }
        with pytest.raises(ConfigError, match="finite propagation"):
            ExperimentConfig.from_dict(config)
        config["schedule"]["t1"] = 45.0
        ExperimentConfig.from_dict(config)

    def test_frequency_window_guard(self, monkeypatch):
        from delab import experiment

        def forbidden(*args, **kwargs):
            raise AssertionError("domain built before validation")

        monkeypatch.setattr(experiment, "domain_from_dict", forbidden)
        config = {
            "domain": {"geometry": "line", "xi_min": 1e-2, "xi_max": 50.0, "m": 400},
            "data": {"u0": {"kind": "gaussian"}},
            "schedule": {"t0": 1.0, "t1": 101.0, "count": 5},
            "metrics": ["l2"],
        }
        with pytest.raises(ConfigError, match="xi_min"):
            run(config)

    def test_line_restrictions(self):
        config = {
            "domain": {"geometry": "line", "xi_min": 1e-2, "xi_max": 50.0, "m": 400, "parity": "odd"},
            "data": {"u0": {"kind": "gaussian", "center": 1.0}, "u1": {"kind": "bump", "support": [0.0, 1.0]}},
            "schedule": {"t0": 1.0, "t1": 10.0, "count": 5},
            "metrics": ["local_energy(R=1)"],
        }
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict(config)
        assert len(info.value.problems) >= 4

    def test_heavy_tail_off_line(self):
        with pytest.raises(ConfigError, match="heavy_tail"):
            ExperimentConfig.from_dict(interval_config(data={"u0": {"kind": "heavy_tail"}}))

    def test_missing_sections(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict({"name": "x"})
        assert len(info.value.problems) == 4


class TestReport:
    def test_json_roundtrip(self, tmp_path):
        report = run(interval_config(expectations=[{"metric": "l2[n=1]", "slope": -1.0, "tol": 5.0}]))
        path = export(report, "json", tmp_path)
        again = load_report(path)
        assert again == report
        assert json.loads(path.read_text())["schema"] == SCHEMA

    def test_csv_format(self, tmp_path):
        path = export(run(interval_config()), "csv", tmp_path)
        raw = path.read_bytes()
        assert b"\r" not in raw and raw.startswith(b"metric,t,value\n")
        for line in raw.decode().splitlines()[1:]:
            name, t, value = line.split(",")
            float(t), float(value)

    def test_empty_metrics(self, tmp_path):
        path = export(run(interval_config(metrics=[])), "csv", tmp_path)
        assert path.read_text() == "metric,t,value\n"

    def test_schema_check(self):
        with pytest.raises(ValueError):
            Report.from_dict({"schema": "other"})

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError):
            export(run(interval_config()), "xml", tmp_path)

    def test_config_hash_stable(self):
        a = ExperimentConfig.from_dict(interval_config())
        b = ExperimentConfig.from_dict(json.loads(json.dumps(interval_config())))
        assert a.hash() == b.hash()
        assert a.hash() != ExperimentConfig.from_dict(interval_config(orders=[2])).hash()
