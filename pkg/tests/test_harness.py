import csv
import warnings
from pathlib import Path

import numpy as np
import pytest

from helmpinn import cli
from helmpinn.harness import (ConfigError, GridSpec, RunConfig, ResultRow, auto_omega0,
                              cached_reference, compute_reference, config_hash, expand_seeds,
                              format_table, preset, read_results, run_grid, run_single)
from helmpinn.plots import emit_plots

GOLDEN = Path(__file__).parent / "golden" / "grid_preset.sha256"


def tiny_config(tmp_path, **over) -> RunConfig:
    base = {
        "problem.k": 1.0, "problem.L": 1.0, "pml.width_in_lambdas": 0.25,
        "architecture.hidden_layers": 1, "architecture.hidden_width": 6,
        "sampling.n_points": 60, "optimizer.total_epochs": 8,
        "oracle.minimum_points": 41, "oracle.points_per_wavelength": 20.0,
        "oracle.eval_points": 21, "oracle.field_points": 11,
        "output_dir": str(tmp_path),
    }
    base.update(over)
    return RunConfig().with_overrides(**base)


def test_defaults_resolve():
    cfg = RunConfig().resolved()
    assert (cfg.architecture.hidden_layers, cfg.architecture.hidden_width) == (3, 32)
    assert cfg.optimizer.total_epochs == 5000
    assert cfg.sampling.n_points == 5000
    fb = RunConfig(method="fbpinn").with_overrides(**{"optimizer.kind": "engd"}).resolved()
    assert (fb.architecture.hidden_layers, fb.architecture.hidden_width) == (3, 16)
    assert fb.optimizer.total_epochs == 500


def test_auto_omega0_is_k_times_input_scale():
    cfg = RunConfig()
    assert auto_omega0(cfg) == pytest.approx(0.57 * cfg.pml_config.half_width)
    fixed = cfg.with_overrides(**{"architecture.omega0": 3.0}).resolved()
    assert fixed.architecture.omega0 == 3.0


def test_yaml_round_trip():
    cfg = RunConfig(method="fbpinn").with_overrides(**{"problem.k": 1.59, "seed": 7})
    again = RunConfig.from_yaml(cfg.to_yaml())
    assert again == cfg
    resolved = cfg.resolved()
    assert RunConfig.from_yaml(resolved.to_yaml()) == resolved


@pytest.mark.parametrize("text", [
    "method: pinnn",
    "problem: {k: -1}",
    "problem: {wavenumber: 2}",
    "bogus: 1",
    "sampling: {sampler: sobol}",
    "optimizer: {kind: sgd}",
    "optimizer: {switch_ratio: 1.5}",
    "decomposition: {overlap: 0.5}",
    "[1, 2]",
    "problem: [",
])
def test_invalid_configs_raise(text):
    with pytest.raises(ConfigError):
        RunConfig.from_yaml(text)


def test_unknown_override_key():
    with pytest.raises(ConfigError):
        RunConfig().with_overrides(**{"problem.kk": 1.0})


def test_seed_expansion_is_deterministic_and_distinct():
    a, b = expand_seeds(0), expand_seeds(0)
    assert a == b
    assert a["init"] != a["sampler"]
    assert expand_seeds(1) != a


def test_full_grid_preset_has_36_runs():
    configs = preset("paper-tables").configs()
    assert len(configs) == 36
    keys = {(c.method, c.optimizer.kind, c.problem.k, c.pml.width_in_lambdas) for c in configs}
    assert len(keys) == 36
    assert {c.problem.k for c in configs} == {0.57, 1.59, 4.51}
    assert {c.pml.width_in_lambdas for c in configs} == {0.25, 0.5, 1.0}


def test_full_grid_hash_matches_golden_file():
    assert config_hash(preset("paper-tables").configs()) == GOLDEN.read_text().strip()


def test_smoke_preset_shape():
    configs = preset("smoke").configs()
    assert {c.problem.k for c in configs} == {0.57}
    assert all(c.sampling.n_points == 1000 for c in configs)
    assert all(c.resolved().optimizer.total_epochs < 500 for c in configs)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("nope")


def test_grid_spec_from_dict():
    spec = GridSpec.from_dict({"preset": "smoke", "methods": ["pinn"]})
    assert len(spec.configs()) == 2
    with pytest.raises(ConfigError):
        GridSpec.from_dict({"colours": ["red"]})


def test_empty_grid(tmp_path):
    rows = run_grid([], tmp_path)
    assert rows == []
    assert (tmp_path / "results.csv").read_text().count("\n") == 1
    assert "no runs" in (tmp_path / "table.md").read_text()


def test_oracle_cache_is_transparent(tmp_path):
    cfg = tiny_config(tmp_path)
    fresh = compute_reference(cfg)
    first = cached_reference(cfg, tmp_path / "cache")
    second = cached_reference(cfg, tmp_path / "cache")
    assert len(list((tmp_path / "cache").glob("*.npz"))) == 1
    assert not list((tmp_path / "cache").glob("*.tmp"))
    for f in (first, second):
        np.testing.assert_array_equal(f.re, fresh.re)
        np.testing.assert_array_equal(f.im, fresh.im)
        assert f.grid == fresh.grid


def test_run_single_writes_files_and_is_deterministic(tmp_path):
    cfg = tiny_config(tmp_path)
    row = run_single(cfg, tmp_path / "a")
    again = run_single(cfg, tmp_path / "b")
    for name in ("config.yaml", "trace.csv", "field_approx.csv", "field_ref.csv", "result.csv"):
        assert (tmp_path / "a" / name).exists()
    assert row.status == "ok" and row.epochs == 8
    assert row.rel_l2_real == again.rel_l2_real and row.rel_l2_imag == again.rel_l2_imag
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    with (tmp_path / "a" / "trace.csv").open() as fh:
        assert next(csv.reader(fh)) == ["epoch", "loss", "phase"]
    assert read_results(tmp_path / "a" / "result.csv") == [row]
    echoed = RunConfig.load(tmp_path / "a" / "config.yaml")
    assert echoed == cfg.resolved()


def test_cached_and_fresh_reference_give_same_report(tmp_path):
    cfg = tiny_config(tmp_path)
    run_single(cfg, tmp_path / "a", cache_dir=tmp_path / "c1")
    row = run_single(cfg, tmp_path / "b", cache_dir=tmp_path / "c1")
    row2 = run_single(cfg, tmp_path / "d", cache_dir=tmp_path / "c2")
    assert (row.rel_l2_real, row.rel_l2_imag) == (row2.rel_l2_real, row2.rel_l2_imag)


def test_divergence_is_flagged(tmp_path):
    cfg = tiny_config(tmp_path, **{"optimizer.kind": "adam", "optimizer.learning_rate": 1e100,
                                  "optimizer.total_epochs": 30})
    row = run_single(cfg, tmp_path / "div")
    assert row.diverged and row.status == "diverged"
    assert (tmp_path / "div" / "trace.csv").exists()
    assert (tmp_path / "div" / "result.csv").exists()


def test_grid_runs_parallel_and_sequential_identically(tmp_path):
    base = tiny_config(tmp_path)
    spec = GridSpec(base=base, methods=("pinn", "fbpinn"), optimizers=("adam_then_lbfgs",),
                    ks=(1.0,), widths=(0.25,), epochs={"adam_then_lbfgs": 6})
    seq = run_grid(spec, tmp_path / "seq", workers=1)
    par = run_grid(spec, tmp_path / "par", workers=2)
    assert len(seq) == 2
    strip = lambda rows: [(r.name, r.rel_l2_real, r.rel_l2_imag, r.final_loss) for r in rows]
    assert strip(seq) == strip(par)
    assert read_results(tmp_path / "seq" / "results.csv")[0].name == seq[0].name
    table = (tmp_path / "seq" / "table.md").read_text()
    assert "pinn" in table and "fbpinn" in table


def test_grid_continues_after_failure(tmp_path, monkeypatch):
    import helmpinn.harness as h

    calls = []
    real = h.run_single

    def flaky(cfg, out_dir, cache_dir):
        calls.append(cfg.method)
        if cfg.method == "pinn":
            raise RuntimeError("boom")
        return real(cfg, out_dir, cache_dir)

    monkeypatch.setattr(h, "run_single", flaky)
    spec = GridSpec(base=tiny_config(tmp_path), optimizers=("adam",), ks=(1.0,), widths=(0.25,),
                    epochs={"adam": 3})
    rows = run_grid(spec, tmp_path / "g")
    assert [r.status for r in rows] == ["failed", "ok"]
    assert "boom" in rows[0].message


def test_format_table_layout():
    row = ResultRow("a", "pinn", "engd", 0.57, 1.0, 11.0, 2.0, 0, 10, 1.0, 5, 0.01, 0.02,
                    1e-3, 1.0, 0.0, 0.0, 1.0, False, "ok")
    text = format_table([row])
    assert "### engd" in text
    assert "| 0.57 | 1 | 1.0e-02 / 2.0e-02 |" in text


def test_plots_one_run_and_determinism(tmp_path):
    cfg = tiny_config(tmp_path)
    run_single(cfg, tmp_path / "res" / "one")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        first = emit_plots(tmp_path / "res")
    names = sorted(p.name for p in first)
    assert len(names) == 2
    assert sum(n.startswith("loss_") for n in names) == 1
    assert sum(n.startswith("field_") for n in names) == 1
    blobs = {p: p.read_bytes() for p in first}
    second = emit_plots(tmp_path / "res")
    assert second == first
    assert all(p.read_bytes() == blobs[p] for p in second)
    for p in first:
        assert p.with_suffix(".csv").exists()


def test_loss_panel_count_follows_k_and_optimizer(tmp_path):
    spec = GridSpec(base=tiny_config(tmp_path), methods=("pinn", "fbpinn"),
                    optimizers=("adam", "engd"), ks=(1.0, 1.5), widths=(0.25,),
                    epochs={"adam": 2, "engd": 1})
    run_grid(spec, tmp_path / "g")
    written = emit_plots(tmp_path / "g")
    assert sum(p.name.startswith("loss_") for p in written) == 4
    assert sum(p.name.startswith("field_") for p in written) == 8


def test_plots_skip_missing_inputs(tmp_path):
    cfg = tiny_config(tmp_path)
    run_single(cfg, tmp_path / "res" / "one")
    (tmp_path / "res" / "one" / "field_ref.csv").unlink()
    with pytest.warns(UserWarning, match="missing field"):
        written = emit_plots(tmp_path / "res")
    assert [p.name.startswith("loss_") for p in written] == [True]
    with pytest.warns(UserWarning, match="no runs"):
        assert emit_plots(tmp_path / "empty") == []


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("method: nope\n")
    assert cli.main(["run", str(bad)]) == 1
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 3
    assert cli.main(["grid", "--preset", "nope"]) == 1
    assert cli.main(["plot", str(tmp_path / "nowhere")]) == 3
    assert cli.main(["check", "--only", "nothing"]) == 1
    assert cli.main(["grid", "--preset", "paper-tables", "--list"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 36


def test_cli_run_and_plot(tmp_path, capsys):
    cfg = tiny_config(tmp_path / "out")
    path = tmp_path / "cfg.yaml"
    path.write_text(cfg.to_yaml())
    assert cli.main(["run", str(path), "--set", "seed=3"]) == 0
    run_dir = tmp_path / "out" / "pinn-adam_then_lbfgs-k1-w0.25-s3"
    assert (run_dir / "result.csv").exists()
    assert cli.main(["plot", str(tmp_path / "out")]) == 0
    assert cli.main(["run", str(path), "--print-config"]) == 0
    assert "omega0" in capsys.readouterr().out


def test_cli_divergence_exit_code(tmp_path):
    cfg = tiny_config(tmp_path, **{"optimizer.kind": "adam", "optimizer.learning_rate": 1e100,
                                  "optimizer.total_epochs": 30})
    path = tmp_path / "cfg.yaml"
    path.write_text(cfg.to_yaml())
    assert cli.main(["run", str(path)]) == 2


def test_cli_oracle_and_check(tmp_path, capsys):
    cfg = tiny_config(tmp_path)
    path = tmp_path / "cfg.yaml"
    path.write_text(cfg.to_yaml())
    export = tmp_path / "ref.csv"
    assert cli.main(["oracle", str(path), "--export", str(export)]) == 0
    assert export.read_text().startswith("x,y,re,im")
    assert cli.main(["check", "--only", "pml", "engd"]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "[FAIL]" not in out

