import shutil
from pathlib import Path

import pytest

from figplots import PlotJob, SchemaError, render
from figplots.cli import main as cli_main

from worklattice.runner import execute_figure

# small iteration counts keep the data generation quick; the renderers
# only care about schemas, not statistics
_PRESET_SCALE = {1: 60, 2: 200, 3: 60, 4: 60, 5: 40, 6: 40, 7: 40, 8: 40}


@pytest.fixture(scope="session")
def data_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("figdata")
    dirs = {}
    for n, iters in _PRESET_SCALE.items():
        out = root / f"fig{n}"
        execute_figure(n, out, iterations=iters, seeds=[1])
        dirs[n] = out
    return dirs


@pytest.mark.parametrize("n", list(range(1, 9)))
def test_every_figure_renders(data_dirs, tmp_path, n):
    out = tmp_path / f"fig{n}.png"
    render(PlotJob(figure=n, in_dir=data_dirs[n], out_path=out))
    assert out.exists() and out.stat().st_size > 0


@pytest.mark.parametrize("n", list(range(1, 9)))
def test_rerender_is_pixel_identical(data_dirs, tmp_path, n):
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    render(PlotJob(figure=n, in_dir=data_dirs[n], out_path=a))
    render(PlotJob(figure=n, in_dir=data_dirs[n], out_path=b))
    assert a.read_bytes() == b.read_bytes()


def test_fig8_honors_rescale_exponents(data_dirs, tmp_path):
    plain = tmp_path / "plain.png"
    scaled = tmp_path / "scaled.png"
    render(PlotJob(figure=8, in_dir=data_dirs[8], out_path=plain,
                   rescale=(0.0, 0.0, 1.0)))
    render(PlotJob(figure=8, in_dir=data_dirs[8], out_path=scaled,
                   rescale=(1.0, 0.0, 1.0)))
    assert plain.read_bytes() != scaled.read_bytes()


def test_rendering_does_not_mutate_inputs(data_dirs, tmp_path):
    src = data_dirs[5] / "sweep.csv"
    before = src.read_bytes()
    render(PlotJob(figure=5, in_dir=data_dirs[5], out_path=tmp_path / "x.png"))
    assert src.read_bytes() == before


def test_empty_csv_rejected(tmp_path):
    (tmp_path / "timeseries_base.csv").write_text(
        "iter,flow,depth,n_active,n_flux,failed\n")
    with pytest.raises(SchemaError, match="no data rows"):
        render(PlotJob(figure=1, in_dir=tmp_path, out_path=tmp_path / "x.png"))
    assert not (tmp_path / "x.png").exists()  # no blank image


def test_missing_column_named(tmp_path):
    (tmp_path / "timeseries_base.csv").write_text("iter,flow\n0,1.0\n")
    with pytest.raises(SchemaError, match="depth"):
        render(PlotJob(figure=1, in_dir=tmp_path, out_path=tmp_path / "x.png"))


def test_missing_directory_rejected(tmp_path):
    with pytest.raises(SchemaError):
        render(PlotJob(figure=5, in_dir=tmp_path / "nope",
                       out_path=tmp_path / "x.png"))


def test_bad_figure_id_rejected(tmp_path):
    with pytest.raises(ValueError):
        PlotJob(figure=9, in_dir=tmp_path, out_path=tmp_path / "x.png")


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_renders(data_dirs, tmp_path):
    out = tmp_path / "fig7.png"
    rc = cli_main(["--figure", "7", "--in", str(data_dirs[7]),
                   "--out", str(out)])
    assert rc == 0
    assert out.exists()


def test_cli_rescale_flag(data_dirs, tmp_path):
    rc = cli_main(["--figure", "8", "--in", str(data_dirs[8]),
                   "--out", str(tmp_path / "c.png"),
                   "--rescale", "1,0,1"])
    assert rc == 0


def test_cli_schema_error_exit_code(tmp_path, capsys):
    rc = cli_main(["--figure", "3", "--in", str(tmp_path),
                   "--out", str(tmp_path / "x.png")])
    assert rc == 1
    assert "profile" in capsys.readouterr().err
