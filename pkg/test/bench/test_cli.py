import json

import pytest

from dopawp.cli import DOPAWP_VERSION, main, parse_args
from dopawp.config import preset_names


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    assert capsys.readouterr().out.splitlines() == preset_names()


def test_version(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    assert capsys.readouterr().out.strip() == DOPAWP_VERSION


def test_gen_data(tmp_path):
    out = tmp_path / "rossler.csv"
    assert main(["gen-data", "--system", "rossler", "--steps", "50", "--out", str(out)]) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "t,x,y,z"
    assert len(lines) == 51
    assert lines[1] == "0.0,1.0,0.0,0.0"
    metadata = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
    assert "normalization" not in metadata


def test_gen_data_normalized(tmp_path):
    out = tmp_path / "lorenz.csv"
    assert main(["gen-data", "--steps", "20", "--integrator", "rk4", "--normalize", "--out", str(out)]) == 0
    metadata = json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))
    assert len(metadata["normalization"]["low"]) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--preset", "xor-wp", "--set", "epochs=many"],
        ["train", "--preset", "xor-wp", "--set", "sigma_sq=none"],
        ["train", "--preset", "no-such-preset"],
    ],
)
def test_invalid_configuration_exits_with_2(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert not list(tmp_path.iterdir())


def test_missing_config_file_exits_with_2(tmp_path):
    assert main(["train", "--config", str(tmp_path / "missing.ini")]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit) as error:
        main(["fly"])
    assert error.value.code == 2


def test_train_landscape_and_compare(tmp_path, capsys):
    argv = [
        "train",
        "--preset",
        "xor-dopamine2",
        "--seeds",
        "2",
        "--out",
        str(tmp_path),
        "--set",
        "epochs=5",
        "--set",
        "n_per_cluster=5",
    ]
    assert main(argv) == 0
    output = capsys.readouterr().out.splitlines()
    assert output[0].startswith("seed 0: final loss ")
    assert output[1].startswith("seed 1: final loss ")
    run_dir = tmp_path / "xor-dopamine2" / "seed-0"
    assert (run_dir / "metadata.json").is_file()

    landscape_out = tmp_path / "landscape.csv"
    landscape_argv = ["landscape", "--model", str(run_dir), "--steps", "3", "--split", "test"]
    assert main(landscape_argv + ["--out", str(landscape_out)]) == 0
    assert len(landscape_out.read_text(encoding="utf-8").splitlines()) == 10

    summary_out = tmp_path / "summary.csv"
    assert main(["compare", str(tmp_path / "xor-dopamine2"), "--out", str(summary_out)]) == 0
    lines = summary_out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "optimizer,task,mean,ci_low,ci_high,n,degenerate"
    assert lines[1].endswith(",2,0")
    assert lines[1].startswith("dopamine2,xor,")
    assert "dopamine2: " in capsys.readouterr().out


def test_train_from_a_config_file(tmp_path):
    config_path = tmp_path / "experiments.ini"
    config_path.write_text(
        "[tiny]\ntask = xor\noptimizer = adam\neta = 0.01\nepochs = 3\nn_per_cluster = 2\n",
        encoding="utf-8",
    )
    assert main(["train", "--config", str(config_path), "--out", str(tmp_path / "runs")]) == 0
    assert (tmp_path / "runs" / "tiny" / "seed-0" / "loss_curve.csv").is_file()


def test_timing(tmp_path):
    out = tmp_path / "timing.csv"
    argv = [
        "timing",
        "--optimizers",
        "dopamine2,sgd",
        "--seq-lens",
        "4..8",
        "--hidden-dim",
        "4",
        "--trials",
        "1",
        "--warmup",
        "0",
        "--out",
        str(out),
    ]
    assert main(argv) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "optimizer,seq_len,phase,mean_s,sem_s,median_s,n,failed"
    assert [line.split(",")[:2] for line in lines[1:]] == [
        ["dopamine2", "4"],
        ["dopamine2", "8"],
        ["sgd", "4"],
        ["sgd", "8"],
    ]


def test_timing_defaults_to_a_long_rossler_series():
    args = parse_args(["timing"])
    assert args.system == "rossler"
    assert args.series_length == 50000


def test_timing_on_lorenz(tmp_path):
    out = tmp_path / "timing.csv"
    argv = ["timing", "--system", "lorenz", "--series-length", "10", "--optimizers", "wp"]
    argv += ["--seq-lens", "4", "--hidden-dim", "4", "--trials", "1", "--out", str(out)]
    assert main(argv) == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("wp,4,update,")
    assert lines[1].endswith(",1,0")


def test_sweep(tmp_path, capsys):
    summary = tmp_path / "sweep.csv"
    argv = [
        "sweep",
        "--preset",
        "xor-dopamine2",
        "--grid",
        "eta=0.1,0.05",
        "--seeds",
        "2",
        "--set",
        "epochs=3",
        "--set",
        "n_per_cluster=3",
        "--out",
        str(tmp_path / "runs"),
        "--summary",
        str(summary),
    ]
    assert main(argv) == 0
    assert capsys.readouterr().out.strip() == str(summary)
    lines = summary.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "eta,mean,ci_low,ci_high,n,n_diverged"
    assert [line.split(",")[0] for line in lines[1:]] == ["0.1", "0.05"]
    assert all(line.endswith(",2,0") for line in lines[1:])
    assert (tmp_path / "runs" / "xor-dopamine2-eta_0.05" / "seed-1" / "metadata.json").is_file()


def test_sweep_needs_a_grid(tmp_path):
    argv = ["sweep", "--preset", "xor-wp", "--set", "epochs=1", "--out", str(tmp_path)]
    assert main(argv) == 2
