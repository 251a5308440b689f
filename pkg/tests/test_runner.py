import json
from pathlib import Path

import numpy as np
import pytest

from worklattice import SimConfig, Variant, ConfigError
from worklattice.runner import (SweepSpec, parse_config, execute,
                                figure_preset, execute_figure,
                                effective_seed)
from worklattice.cli import main as cli_main


def test_parse_minimal_flags():
    cfg = parse_config(None, {"d": 1, "L": 30, "Lz": 60, "Q": 60,
                              "beta": 0.1, "gamma": 0.3, "iters": 10000,
                              "seed": 1})
    assert isinstance(cfg, SimConfig)
    assert cfg.L_z == 60 and cfg.Q == 60 and cfg.iterations == 10000


def test_parse_gamma_out_of_range_names_field():
    with pytest.raises(ConfigError) as err:
        parse_config(None, {"gamma": 1.5})
    assert "gamma" in err.value.fields


def test_parse_unknown_key_rejected(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("bogus = 1\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_parse_unknown_variant_rejected(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("variant = sideways\n")
    with pytest.raises(ConfigError) as err:
        parse_config(path)
    assert "variant" in err.value.fields


def test_parse_config_file_with_overrides(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("d = 2\nL = 8\nQ = 10\nbeta = 0.2\n# comment\n")
    cfg = parse_config(path, {"beta": 0.5})
    assert cfg.d == 2 and cfg.L == 8
    assert cfg.beta == 0.5  # flag wins over file


def test_parse_sweep_spec(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("d = 1\nL = 6\nsweep_beta = 0.1, 0.2, 0.3\n"
                    "seeds = 1, 2\noutputs = depth\n")
    spec = parse_config(path)
    assert isinstance(spec, SweepSpec)
    assert spec.grid_size == 3
    assert spec.seeds == [1, 2]


def test_sweep_grid_arithmetic():
    spec = SweepSpec(base=SimConfig(),
                     axes=[("beta", list(np.geomspace(0.01, 1.0, 20)))],
                     seeds=list(range(1, 11)))
    assert spec.grid_size == 20
    assert spec.grid_size * len(spec.seeds) == 200


def test_effective_seed_depends_on_grid_index():
    assert effective_seed(1, 0) != effective_seed(1, 1)
    assert effective_seed(1, 0) == effective_seed(1, 0)


def test_figure_preset_out_of_range():
    with pytest.raises(ValueError):
        figure_preset(9)
    with pytest.raises(ValueError):
        figure_preset(0)


def test_figure_preset_fig1_parameters():
    spec = figure_preset(1)
    assert spec.base.iterations == 10000
    assert spec.base.beta == 0.1
    assert spec.base.gamma == 0.3
    assert spec.base.Q == 60
    assert "timeseries" in spec.emit


def test_figure_preset_fig7_shape():
    spec = figure_preset(7)
    assert spec.base.variant is Variant.NON_WORKING_MANAGERS
    assert spec.grid_size == 4 * 20
    assert "failure_fraction" in spec.outputs


def test_execute_empty_sweep_manifest_only(tmp_path):
    spec = SweepSpec(base=SimConfig(d=1, L=6, L_z=4, Q=4, iterations=3),
                     axes=[("beta", [])], seeds=[1], outputs=["depth"])
    written, rows = execute(spec, tmp_path)
    names = {Path(p).name for p in written}
    assert "manifest.json" in names
    assert rows == []


def test_execute_writes_schema_and_is_deterministic(tmp_path):
    spec = SweepSpec(base=SimConfig(d=1, L=6, L_z=6, Q=6, iterations=40,
                                    gamma=0.3, beta=0.2),
                     axes=[("beta", [0.1, 0.5])], seeds=[1, 2],
                     outputs=["depth", "flow"])
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    execute(spec, out_a)
    execute(spec, out_b)
    sweep_a = (out_a / "sweep.csv").read_text()
    sweep_b = (out_b / "sweep.csv").read_text()
    assert sweep_a == sweep_b
    header = sweep_a.splitlines()[0]
    assert header == "beta,observable,mean,sd,n_seeds"
    # one row per grid point per observable
    assert len(sweep_a.splitlines()) == 1 + 2 * 2


def test_execute_emits_timeseries_profile_snapshot(tmp_path):
    spec = SweepSpec(base=SimConfig(d=1, L=6, L_z=6, Q=6, iterations=30),
                     seeds=[1], outputs=[],
                     emit=["timeseries", "profile", "snapshot"])
    written, _ = execute(spec, tmp_path)
    names = {Path(p).name for p in written}
    assert "timeseries_base.csv" in names
    assert "profile_base.csv" in names
    assert "snapshot_base.csv" in names
    ts = (tmp_path / "timeseries_base.csv").read_text().splitlines()
    assert ts[0] == "iter,flow,depth,n_active,n_flux,failed"
    assert len(ts) == 31
    prof = (tmp_path / "profile_base.csv").read_text().splitlines()
    assert prof[0] == "level,mean_sq_width,max_J,mean_charge,active_fraction"
    snap = (tmp_path / "snapshot_base.csv").read_text().splitlines()
    assert snap[0] == "level,site,q,J_slot0,J_slot1,J_slot2"


def test_execute_errored_point_does_not_abort(tmp_path, monkeypatch):
    import worklattice.runner as runner_mod

    real_run = runner_mod.run

    def flaky(config, **kw):
        if config.beta > 0.4:
            raise RuntimeError("boom")
        return real_run(config, **kw)

    monkeypatch.setattr(runner_mod, "run", flaky)
    spec = SweepSpec(base=SimConfig(d=1, L=6, L_z=4, Q=4, iterations=10),
                     axes=[("beta", [0.1, 0.9])], seeds=[1],
                     outputs=["depth"])
    written, rows = execute(spec, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert len(manifest["errors"]) == 1
    assert "boom" in manifest["errors"][0]["error"]
    good = [r for r in rows if not np.isnan(r["mean"])]
    assert len(good) == 1  # surviving grid point
    assert len(rows) == 2  # errored point still gets its (NaN) row


def test_manifest_reproduces_grid_point(tmp_path):
    spec = SweepSpec(base=SimConfig(d=1, L=6, L_z=6, Q=6, iterations=25),
                     axes=[("beta", [0.1, 0.3])], seeds=[5],
                     outputs=["depth"])
    _, rows = execute(spec, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    job = manifest["jobs"][1]
    from worklattice.runner import _apply_overrides
    from worklattice import run
    from dataclasses import replace
    cfg = _apply_overrides(spec.base, job["overrides"])
    cfg = replace(cfg, seed=job["effective_seed"])
    summary = run(cfg)
    w = max(1, summary.window)
    assert float(summary.depth[-w:].mean()) == rows[1]["mean"]


def test_execute_figure_8_collapse(tmp_path):
    written = execute_figure(8, tmp_path, iterations=30, seeds=[1])
    names = {Path(p).name for p in written}
    assert "collapse.csv" in names
    lines = (tmp_path / "collapse.csv").read_text().splitlines()
    assert lines[0] == "Q,Lz,x,y"
    qs = {line.split(",")[0] for line in lines[1:]}
    assert qs == {"40", "100", "200", "400"}


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_run_writes_outputs(tmp_path, capsys):
    rc = cli_main(["run", "--d", "1", "--L", "6", "--Lz", "6", "--Q", "6",
                   "--beta", "0.2", "--gamma", "0.3", "--iters", "20",
                   "--seed", "3", "--out-dir", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "timeseries.csv").exists()
    assert (tmp_path / "profile.csv").exists()
    assert (tmp_path / "snapshot.csv").exists()
    assert (tmp_path / "manifest.json").exists()


def test_cli_validation_error_exit_code(tmp_path, capsys):
    rc = cli_main(["run", "--gamma", "1.5", "--out-dir", str(tmp_path)])
    assert rc == 1
    assert "gamma" in capsys.readouterr().err


def test_cli_unknown_variant_exit_code(tmp_path, capsys):
    rc = cli_main(["run", "--variant", "sideways", "--out-dir", str(tmp_path)])
    assert rc == 1


def test_cli_sweep(tmp_path):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("d = 1\nL = 6\nLz = 6\nQ = 6\niters = 15\n"
                   "sweep_beta = 0.1, 0.4\nseeds = 1\noutputs = depth\n")
    out = tmp_path / "out"
    rc = cli_main(["sweep", "--config", str(cfg), "--out-dir", str(out)])
    assert rc == 0
    assert (out / "sweep.csv").exists()


def test_cli_figure_bad_number(tmp_path, capsys):
    rc = cli_main(["figure", "9", "--out-dir", str(tmp_path)])
    assert rc == 1
