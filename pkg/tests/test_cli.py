"""Command line interface: exit codes, stage-tagged errors, flag overrides."""

import json
import os
import subprocess
import sys

import pytest

from cscad import pipeline
from cscad.cli import main
from cscad.disc import COMBINE_D_ONLY, load_disc_checkpoint
from cscad.generators import write_static_fixture
from cscad.recon import load_recon_checkpoint


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    write_static_fixture(str(root), n_samples=300, seed=5)
    return root


def write_config(root, out_name, **extra):
    payload = {
        "dataset": str(root / "tabular.csv"),
        "schema": str(root / "tabular.schema"),
        "out_dir": str(root / out_name),
        "seed": 2,
        "emi": {"fit_cap": 200, "eval_cap": 300},
        "recon": {"epochs": 3, "batch_size": 64},
        "disc": {"epochs": 6, "batch_size": 64},
    }
    payload.update(extra)
    path = root / f"{out_name}.json"
    path.write_text(json.dumps(payload))
    return str(path)


def test_missing_config_file_exits_nonzero(capsys, tmp_path):
    code = main(["mine", "--config", str(tmp_path / "absent.json")])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("[config]")


def test_unknown_command_rejected(workspace):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate", "--config", write_config(workspace, "noop")])
    assert exc.value.code != 0


def test_disc_before_recon_is_stage_tagged(capsys, workspace):
    cfg = write_config(workspace, "ordered")
    code = main(["train-disc", "--config", cfg])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("[train-disc]")
    assert "train-recon" in err


def test_stage_sequence_and_output_lines(capsys, workspace):
    cfg = write_config(workspace, "seq")
    for command in ("mine", "train-recon", "train-disc", "detect"):
        assert main([command, "--config", cfg]) == 0
        out = capsys.readouterr().out
        assert out.startswith(f"[{command}] done")
    assert main(["evaluate", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "precision=" in out and "recall=" in out and "f1=" in out


def test_run_all_exit_zero_and_summary(capsys, workspace):
    cfg = write_config(workspace, "all")
    assert main(["run-all", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "f1=" in out
    out_dir = json.loads(open(cfg).read())["out_dir"]
    assert os.path.isfile(os.path.join(out_dir, "report.json"))


def test_seed_override_changes_stage_hash(workspace):
    cfg = write_config(workspace, "seedover")
    config = pipeline.load_config(cfg)
    base_hash = pipeline.stage_hash(config, "mine")
    assert main(["mine", "--config", cfg, "--seed", "31"]) == 0
    manifest = pipeline.load_manifest(config)
    assert manifest["stages"]["mine"]["hash"] != base_hash


def test_no_gcn_flag_reaches_checkpoint(workspace):
    cfg = write_config(workspace, "nogcn")
    assert main(["train-recon", "--config", cfg, "--no-gcn"]) == 0
    out_dir = json.loads(open(cfg).read())["out_dir"]
    model = load_recon_checkpoint(os.path.join(out_dir, "recon.ckpt"))
    assert model.config.use_gcn is False
    # the plain variant ends in a linear read-out layer
    assert model.decoder[-1].activation == "none"


def test_no_sigma_flag_reaches_checkpoint_and_selection(workspace):
    cfg = write_config(workspace, "nosigma")
    assert main(["train-recon", "--config", cfg]) == 0
    assert main(["train-disc", "--config", cfg, "--no-sigma"]) == 0
    out_dir = json.loads(open(cfg).read())["out_dir"]
    model = load_disc_checkpoint(os.path.join(out_dir, "disc.ckpt"))
    assert model.config.use_sigma is False


def test_no_sigma_forces_d_only_labeling(workspace):
    cfg = write_config(workspace, "dsel")
    config = pipeline.load_config(cfg)
    from cscad.cli import apply_overrides, build_parser

    args = build_parser().parse_args(["run-all", "--config", cfg, "--no-sigma"])
    config = apply_overrides(config, args)
    assert config.use_sigma is False
    assert config.combine_rule == COMBINE_D_ONLY


def test_negatives_override_validated(capsys, workspace):
    cfg = write_config(workspace, "negbad")
    code = main(["run-all", "--config", cfg, "--negatives", "1.5"])
    assert code == 1
    assert capsys.readouterr().err.startswith("[config]")


def test_negatives_override_applied(workspace):
    cfg = write_config(workspace, "negok")
    from cscad.cli import apply_overrides, build_parser

    args = build_parser().parse_args(["run-all", "--config", cfg, "--negatives", "0.2"])
    config = apply_overrides(pipeline.load_config(cfg), args)
    assert config.negative_fraction == 0.2


def test_labels_flag_missing_file_rejected(capsys, workspace):
    cfg = write_config(workspace, "lblmiss")
    code = main(["run-all", "--config", cfg, "--labels", str(workspace / "nope.txt")])
    assert code == 1
    assert capsys.readouterr().err.startswith("[config]")


def test_labels_flag_with_unknown_id_fails_in_disc_stage(capsys, workspace):
    labels = workspace / "badid.txt"
    labels.write_text("999999\n")
    cfg = write_config(workspace, "lblbad")
    assert main(["train-recon", "--config", cfg]) == 0
    capsys.readouterr()
    code = main(["train-disc", "--config", cfg, "--labels", str(labels)])
    assert code == 1
    assert capsys.readouterr().err.startswith("[train-disc]")


def test_run_all_stage_error_is_tagged(capsys, workspace, tmp_path):
    # a dataset too small to self-label fails inside train-disc
    tiny = tmp_path / "tiny"
    tiny.mkdir()
    write_static_fixture(str(tiny), n_samples=8, seed=1)
    payload = {
        "dataset": str(tiny / "tabular.csv"),
        "schema": str(tiny / "tabular.schema"),
        "out_dir": str(tiny / "out"),
        "emi": {"fit_cap": 50, "eval_cap": 60},
        "recon": {"epochs": 1, "batch_size": 8},
        "disc": {"epochs": 1, "batch_size": 8},
        "labeling": {"negative_fraction": 0.05},
    }
    cfg = tiny / "cfg.json"
    cfg.write_text(json.dumps(payload))
    code = main(["run-all", "--config", str(cfg)])
    assert code == 1
    assert capsys.readouterr().err.startswith("[train-disc]")


def test_console_script_installed(workspace):
    cfg = write_config(workspace, "script")
    result = subprocess.run(
        ["cscad", "mine", "--config", cfg], capture_output=True, text=True
    )
    assert result.returncode == 0, result.stderr
    assert "[mine] done" in result.stdout


def test_module_entry_matches_script(workspace):
    cfg = write_config(workspace, "module")
    result = subprocess.run(
        [sys.executable, "-m", "cscad.cli", "mine", "--config", cfg],
        capture_output=True,
        text=True,
    )
    assert result.returncode == 0, result.stderr
