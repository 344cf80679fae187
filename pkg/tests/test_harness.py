from dataclasses import replace

import numpy as np
import pytest

from vibroforce.cli import main
from vibroforce.config import ForceSpec, SineTerm, load_config
from vibroforce.plots import emit_line_plot, emit_plots
from vibroforce.scenario import (TIMING_ARTIFACTS, ScenarioError, run_akf_comparison, run_l_curve,
                                 run_noise_sweep, run_scenario, validate_model)
from vibroforce.series_io import read_metadata

from conftest import CONFIG_DIR


def short(cfg, duration=0.2, **kw):
    return replace(cfg, duration=duration, **kw)


class TestRunScenario:
    def test_noisy_run_scores_every_channel(self, noisy_config, tmp_path):
        rep = run_scenario(short(noisy_config, 1.0), tmp_path)
        g = rep.geers["proposed"]
        assert set(g) == {"f1", "f2", "f3", "f4", "d10", "d30", "d50", "d70"}
        assert all(e is not None and np.isfinite(e.comp) and e.comp < 1 for e in g.values())
        assert rep.real_time_factor["proposed"] > 0 and not rep.trivial
        names = {p.name for p in rep.artifacts}
        assert {"reference_forces.csv", "measurements.csv", "proposed_forces.csv", "errors.csv", "timing.csv",
                "report.yaml", "force_f1.svg", "force_f1.csv"} <= names
        meta = read_metadata(tmp_path / "report.yaml")
        assert meta["geers"]["proposed"]["f1"]["eps_comp"] == pytest.approx(g["f1"].comp)
        assert "PCG64" in meta["noise"]["rng"]

    def test_report_numbers_trace_to_csv(self, noisy_config, tmp_path):
        rep = run_scenario(short(noisy_config), tmp_path, plots=False)
        rows = (tmp_path / "errors.csv").read_text().splitlines()[1:]
        comps = {r.split(",")[1]: float(r.split(",")[5]) for r in rows}
        for ch, e in rep.geers["proposed"].items():
            assert comps[ch] == e.comp

    def test_zero_forces_flagged_trivial(self, noisy_config, tmp_path):
        zero = tuple(ForceSpec(f.name, f.dof, (SineTerm(0.0, 10.0),)) for f in noisy_config.forces)
        rep = run_scenario(short(noisy_config, forces=zero), tmp_path, plots=False)
        assert rep.trivial and rep.notes
        assert all(rep.geers["proposed"][n] is None for n in ("f1", "f2", "f3", "f4"))
        assert read_metadata(tmp_path / "report.yaml")["trivial"] is True

    def test_method_both_writes_comparison(self, noisy_config, tmp_path):
        rep = run_scenario(short(noisy_config, 0.1, method="both"), tmp_path, plots=False)
        lines = (tmp_path / "comparison.csv").read_text().splitlines()
        assert lines[0] == "method,dt,eps_comp,wall_time_s"
        assert [l.split(",")[0] for l in lines[1:]] == ["proposed", "akf"]
        assert set(rep.geers) == {"proposed", "akf"}

    def test_l_curve_alpha(self, tmp_path):
        cfg = load_config(CONFIG_DIR / "random_excitation.yaml")
        rep = run_scenario(replace(cfg, duration=0.5, method="proposed"), tmp_path, plots=False)
        assert rep.alpha > 0
        assert (tmp_path / "l_curve.csv").exists()

    def test_stage_named_on_failure(self, noisy_config, tmp_path):
        bad = replace(noisy_config, sensors=replace(noisy_config.sensors, disp_idx=(10_000,)))
        with pytest.raises(ScenarioError, match="model"):
            run_scenario(short(bad), tmp_path)

    def test_reproducible_csvs(self, noisy_config, tmp_path):
        cfg = short(noisy_config, 0.3, method="both")
        a = run_scenario(cfg, tmp_path / "a")
        b = run_scenario(cfg, tmp_path / "b")
        csvs = sorted(p.name for p in a.artifacts if p.suffix == ".csv" and p.name not in TIMING_ARTIFACTS)
        assert csvs
        for name in csvs:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
        for name in (p.name for p in a.artifacts if p.suffix == ".svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


class TestSweepAndComparison:
    def test_noise_free_sweep_is_exact(self, noisy_config, tmp_path):
        rep = run_noise_sweep(short(noisy_config, 1.0), [0.0], 2, tmp_path, plots=False)
        assert rep.comp[0] <= 1e-8 and rep.stderr[0] == 0.0

    def test_sweep_tables(self, noisy_config, tmp_path):
        rep = run_noise_sweep(short(noisy_config, 0.5), [0.0, 0.02], 3, tmp_path)
        lines = (tmp_path / "noise_sweep.csv").read_text().splitlines()
        assert lines[0] == "tau,eps_mag,eps_phase,eps_comp,stderr_comp,max_measure" and len(lines) == 3
        assert rep.comp[1] > rep.comp[0] and rep.non_decreasing()
        assert (tmp_path / "noise_sweep_plot.svg").exists()

    def test_single_akf_dt_skips_trends(self, noisy_config, tmp_path):
        rep = run_akf_comparison(replace(noisy_config, comparison=replace(noisy_config.comparison, window=0.05)),
                                 1e-3, [1e-3], tmp_path, plots=False)
        assert rep.akf_monotone is None and rep.proposed_faster is None
        assert any("skipped" in n for n in rep.notices)
        assert len(rep.cases) == 2

    def test_akf_dt_larger_than_proposed_rejected(self, noisy_config, tmp_path):
        with pytest.raises(ScenarioError):
            run_akf_comparison(noisy_config, 1e-4, [1e-3], tmp_path)


class TestValidateAndLCurve:
    def test_validate_model(self, paper_layout_config, tmp_path):
        rep = validate_model(paper_layout_config, 10, tmp_path)
        assert rep["max_error"] <= 1e-3
        assert len((tmp_path / "eigenvalue_error.csv").read_text().splitlines()) == 11

    def test_l_curve_command(self, noisy_config, tmp_path):
        lc = run_l_curve(replace(noisy_config, duration=0.5), tmp_path, plots=False)
        assert lc.alpha in lc.alphas
        assert read_metadata(tmp_path / "l_curve.yaml")["alpha"] == lc.alpha


class TestPlots:
    def test_one_series_one_svg_one_csv(self, tmp_path):
        files = emit_line_plot(tmp_path / "p", np.arange(5.0), {"y": np.arange(5.0) ** 2})
        assert sorted(p.suffix for p in files) == [".csv", ".svg"]
        assert (tmp_path / "p.csv").read_text().splitlines()[0] == "t,y"

    def test_deterministic_svg(self, tmp_path):
        x = np.linspace(0, 1, 50)
        a = emit_line_plot(tmp_path / "a", x, {"s": np.sin(x)})[0].read_bytes()
        b = emit_line_plot(tmp_path / "b", x, {"s": np.sin(x)})[0].read_bytes()
        assert a == b

    def test_legend_names(self, noisy_config, tmp_path):
        run_scenario(short(noisy_config, 0.1), tmp_path)
        svg = (tmp_path / "force_f2.svg").read_text()
        # text is rendered as paths; the legend labels survive as element ids/comments
        assert "f2 reference" in svg and "f2 proposed" in svg

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            emit_line_plot(tmp_path / "e", np.arange(3.0), {})

    def test_bundles(self, tmp_path):
        files = emit_plots([{"name": "one", "x": [0.0, 1.0], "series": {"a": [1.0, 2.0]}},
                            {"name": "two", "x": [0.0, 1.0], "series": {"b": [3.0, 4.0]}, "logy": True}], tmp_path)
        assert {p.name for p in files} == {"one.svg", "one.csv", "two.svg", "two.csv"}


class TestCli:
    def test_run(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        text = (CONFIG_DIR / "noisy_displacement.yaml").read_text().replace("duration: 10.0", "duration: 0.2")
        cfg.write_text(text)
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "3"]) == 0
        out = capsys.readouterr().out
        assert "comp=" in out and "rtf=" in out
        assert read_metadata(tmp_path / "o" / "report.yaml")["noise"]["seed"] == 3

    def test_quiet(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text((CONFIG_DIR / "paper_layout.yaml").read_text())
        assert main(["validate-model", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet", "-k", "5"]) == 0
        assert capsys.readouterr().out == ""

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("forces: []\n")
        assert main(["run", "--config", str(cfg)]) == 1
        assert "error" in capsys.readouterr().err

    def test_negative_seed(self, tmp_path):
        assert main(["run", "--config", str(CONFIG_DIR / "paper_layout.yaml"), "--seed", "-1"]) == 2

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit):
            main([])
