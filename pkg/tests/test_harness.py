import math
from dataclasses import replace

import numpy as np
import pytest

from dpptrack.cli import main as cli_main
from dpptrack.errors import ConfigError, UnknownPreset
from dpptrack.harness import (
    ExperimentConfig,
    TruthSpec,
    config_from_ini,
    config_to_ini,
    preset,
    run_experiment,
)
from dpptrack.scenario import (
    DynamicsConfig,
    EventSchedule,
    Region,
    SensorConfig,
    Window,
)
from dpptrack.smc import SmcConfig


def tiny_config(filter_name="ppp", runs=2, steps=3, seed=99):
    dom = Region(-40.0, 40.0, -40.0, 40.0)
    window = Window(Region(-60.0, 60.0, -60.0, 60.0), -2.0, 2.0, -math.pi, math.pi)
    return ExperimentConfig(
        name="tiny",
        steps=steps,
        mc_runs=runs,
        seed=seed,
        filter=filter_name,
        dynamics=DynamicsConfig(),
        filter_dynamics=DynamicsConfig(),
        sensor=SensorConfig(p_d=0.9, clutter_mean=1.0, window=window),
        truth=TruthSpec(groups=((dom, 2),), placement="uniform", speed=0.5),
        schedule=EventSchedule(),
        smc=SmcConfig(
            n_init=60, resample_per_target=10, birth_per_target=5, cap=120,
            roughening_scale=0.01, alpha=4.0 if filter_name != "ppp" else 0.0,
            gamma0=1.0,
        ),
        domains=(Region(-40.0, 0.0, -40.0, 40.0), Region(0.0, 40.0, -40.0, 40.0)),
    )


class TestConfigRoundtrip:
    def test_ini_roundtrip_preserves_everything(self):
        cfg = preset("spooky")
        text = config_to_ini(cfg)
        back = config_from_ini(text)
        assert back == cfg

    def test_roundtrip_with_schedule_dicts(self):
        cfg = preset("death")
        back = config_from_ini(config_to_ini(cfg))
        assert back.schedule.deaths == {9: 10}
        assert back.schedule.clutter_changes == {10: 0.3}
        assert back == cfg

    def test_bad_config_raises(self):
        with pytest.raises(ConfigError):
            config_from_ini("[experiment]\nname = broken\n")

    def test_validation(self):
        with pytest.raises(ConfigError):
            tiny_config(runs=0)
        with pytest.raises(ConfigError):
            replace(tiny_config(), filter="bogus")


class TestPresets:
    def test_all_presets_construct(self):
        for name in ("spooky", "death", "birth", "repulsion-bias", "good-ratio"):
            cfg = preset(name)
            assert cfg.mc_runs >= 1

    def test_unknown_preset(self):
        with pytest.raises(UnknownPreset):
            preset("nope")

    def test_full_flag_restores_budgets(self):
        desk = preset("spooky")
        full = preset("spooky", full=True)
        assert full.mc_runs > desk.mc_runs
        assert full.smc.n_init > desk.smc.n_init

    def test_expected_parameters(self):
        death = preset("death")
        assert death.schedule.deaths == {9: 10}
        assert death.sensor.p_d == 0.95
        birth = preset("birth")
        assert birth.schedule.births == {10: 9}
        assert birth.steps == 45
        good = preset("good-ratio")
        assert good.sensor.p_d == 1.0
        assert good.sensor.clutter_mean == 0.0


class TestRunExperiment:
    def test_rows_and_summary_consistent(self, tmp_path):
        cfg = tiny_config()
        res = run_experiment(cfg, out_dir=tmp_path / "out")
        assert len(res.rows) == cfg.mc_runs * cfg.steps
        steps_csv = (tmp_path / "out" / "steps.csv").read_text().strip().split("\n")
        assert len(steps_csv) == 1 + len(res.rows)
        summary = (tmp_path / "out" / "summary.csv").read_text().strip().split("\n")
        header = summary[0].split(",")
        i_mean = header.index("count_estimate_mean")
        first = summary[1].split(",")
        t = int(first[1])
        vals = [r["count_estimate"] for r in res.rows if r["t"] == t]
        assert float(first[i_mean]) == pytest.approx(float(np.mean(vals)), rel=1e-12)
        meta = (tmp_path / "out" / "meta.txt").read_text()
        assert "build id" in meta and "seed = 99" in meta

    def test_determinism_across_invocations_and_threads(self, tmp_path):
        cfg = tiny_config(runs=3)
        run_experiment(cfg, out_dir=tmp_path / "a", threads=1)
        run_experiment(cfg, out_dir=tmp_path / "b", threads=1)
        run_experiment(cfg, out_dir=tmp_path / "c", threads=2)
        a = (tmp_path / "a" / "steps.csv").read_bytes()
        b = (tmp_path / "b" / "steps.csv").read_bytes()
        c = (tmp_path / "c" / "steps.csv").read_bytes()
        assert a == b == c

    def test_both_filters_report_rows(self, tmp_path):
        cfg = tiny_config(filter_name="both", runs=1, steps=2)
        cfg = replace(cfg, smc=replace(cfg.smc, alpha=4.0))
        res = run_experiment(cfg)
        filters = {r["filter"] for r in res.rows}
        assert filters == {"dpp", "ppp"}
        # dpp rows carry correlation where defined, ppp rows never do
        assert all(r["corr_AB"] is None for r in res.rows if r["filter"] == "ppp")


class TestCli:
    def test_version(self, capsys):
        assert cli_main(["version"]) == 0
        assert capsys.readouterr().out.strip()

    def test_oracle_check(self, capsys):
        assert cli_main(["oracle-check"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_run_with_config_file(self, tmp_path, capsys):
        cfg = tiny_config()
        path = tmp_path / "exp.ini"
        path.write_text(config_to_ini(cfg))
        rc = cli_main(
            ["run", "--config", str(path), "--out", str(tmp_path / "out"), "--runs", "1"]
        )
        assert rc == 0
        assert (tmp_path / "out" / "steps.csv").exists()
        assert (tmp_path / "out" / "summary.csv").exists()
        assert (tmp_path / "out" / "meta.txt").exists()

    def test_run_requires_source(self, capsys):
        assert cli_main(["run", "--out", "/tmp/nowhere"]) == 2


def test_state_snapshot_exports(tmp_path):
    import numpy as np

    from dpptrack.dpp_filter import export_dpp_state_csv, FilterState
    from dpptrack.kernels import CORRELATION, DiscretizedKernel
    from dpptrack.ppp_filter import WeightedParticles, export_ppp_state_csv
    from dpptrack.smc import ParticleSet

    states = np.arange(10, dtype=float).reshape(2, 5)
    particles = ParticleSet(states, np.zeros(2, dtype=np.int8))
    kernel = DiscretizedKernel(particles.grid(), np.diag([0.2, 0.3]), CORRELATION)
    st = FilterState(particles, kernel, 0.5)
    p1 = tmp_path / "dpp.csv"
    export_dpp_state_csv(p1, 0, 3, st)
    lines = p1.read_text().strip().split("\n")
    assert lines[0] == "run,t,particle,x,xdot,y,ydot,theta,intensity,gamma"
    assert len(lines) == 3
    assert float(lines[1].split(",")[8]) == 0.2

    wp = WeightedParticles(states, np.array([0.4, 0.6]))
    p2 = tmp_path / "ppp.csv"
    export_ppp_state_csv(p2, 1, 4, wp, 1.0)
    lines = p2.read_text().strip().split("\n")
    assert lines[0] == "run,t,particle,x,xdot,y,ydot,theta,weight,gamma"
    assert float(lines[2].split(",")[8]) == 0.6


def test_truth_and_scan_exports(tmp_path):
    import numpy as np

    from dpptrack.scenario import Scan, export_scans_csv, export_truth_csv

    rows = [(0, 1, 7, 1.0, 0.1, 2.0, -0.1, 0.0)]
    p = tmp_path / "truth.csv"
    export_truth_csv(p, rows)
    text = p.read_text().strip().split("\n")
    assert text[0] == "run,t,target_id,x,xdot,y,ydot,theta"
    assert text[1].startswith("0,1,7,")

    scan = Scan(2, np.array([[5.0, 0.5]]), np.array([3]))
    p2 = tmp_path / "scans.csv"
    export_scans_csv(p2, [(0, scan)])
    text = p2.read_text().strip().split("\n")
    assert text[0] == "run,t,det_index,range,bearing,truth_link"
    assert text[1] == "0,2,0,5.0,0.5,3"
