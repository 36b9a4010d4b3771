import json

import pytest

from palletbench.cli import main


def run_cli(args):
    return main(args)


def test_gen_scene_writes_snapshot_and_header(tmp_path, capsys):
    out = tmp_path / "scene"
    code = run_cli(["gen-scene", "--seed", "3", "--num-boxes", "4", "--num-pallets", "1", "--out", str(out)])
    assert code == 0
    snap = json.loads((out / "scene.json").read_text())
    assert len(snap["boxes"]) == 4
    header = json.loads((out / "run.json").read_text())
    assert header["command"] == "gen-scene" and header["seed"] == 3
    assert "config_digest" in header


def test_gen_scene_deterministic_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run_cli(["gen-scene", "--seed", "9", "--num-boxes", "6", "--out", str(out)]) == 0
    assert (a / "scene.json").read_bytes() == (b / "scene.json").read_bytes()


def test_gen_scene_capacity_error_exit_65(tmp_path, capsys):
    code = run_cli(
        [
            "gen-scene",
            "--seed",
            "0",
            "--num-boxes",
            "30",
            "--num-pallets",
            "1",
            "--num-shelves",
            "0",
            "--weight-pallet-large",
            "0",
            "--out",
            str(tmp_path / "x"),
        ]
    )
    assert code == 65


def test_gen_scene_region_and_color_flags(tmp_path):
    out = tmp_path / "scene"
    code = run_cli(
        [
            "gen-scene",
            "--seed",
            "5",
            "--num-boxes",
            "4",
            "--num-pallets",
            "1",
            "--object-region",
            "1.0",
            "5.0",
            "-2.0",
            "2.0",
            "--color-counts",
            "4",
            "0",
            "0",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    snap = json.loads((out / "scene.json").read_text())
    for box in snap["boxes"]:
        assert box["color"] == "red"
        assert 1.0 <= box["pose"]["x"] <= 5.0
        assert -2.0 <= box["pose"]["y"] <= 2.0


def test_unknown_flag_exits_64():
    with pytest.raises(SystemExit) as exc:
        run_cli(["gen-scene", "--does-not-exist", "1", "--out", "x"])
    assert exc.value.code == 64


def test_unknown_command_exits_64():
    with pytest.raises(SystemExit) as exc:
        run_cli(["frobnicate"])
    assert exc.value.code == 64


def test_oracle_rollout_prints_plan(tmp_path, capsys):
    code = run_cli(["oracle-rollout", "--variant", "basic-placement", "--seed", "2", "--num-boxes", "3", "--json"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n_steps"] == 3


def test_evaluate_replay_report_cycle(tmp_path, capsys):
    out = tmp_path / "eval"
    code = run_cli(
        [
            "evaluate",
            "--policy",
            "oracle",
            "--mode",
            "both",
            "-n",
            "2",
            "--variants",
            "basic-placement",
            "--max-boxes",
            "4",
            "--seed",
            "7",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["plan_success"]["snap-to-target"]["aggregate"]["pct"] == 100.0
    assert (out / "report.txt").exists() and (out / "episodes.json").exists()

    capsys.readouterr()
    assert run_cli(["replay", "--records", str(out / "episodes.json"), "--episode", "0"]) == 0
    assert "verified" in capsys.readouterr().out

    rep_out = tmp_path / "rendered"
    assert run_cli(["report", "--report", str(out / "report.json"), "--out", str(rep_out)]) == 0
    figures = sorted(p.name for p in (rep_out / "figures").glob("*.png"))
    assert "plan_success_by_bucket.png" in figures
    assert "plan_success_by_variant.png" in figures
    assert "one_step_validity.png" in figures
    assert (rep_out / "report.csv").read_text().startswith("metric,value,count")


def test_report_compare_prints_deltas(tmp_path, capsys):
    out = tmp_path / "eval"
    run_cli(
        [
            "evaluate",
            "--policy",
            "oracle",
            "--mode",
            "snap",
            "-n",
            "1",
            "--variants",
            "basic-placement",
            "--max-boxes",
            "3",
            "--seed",
            "1",
            "--out",
            str(out),
        ]
    )
    capsys.readouterr()
    rep_out = tmp_path / "cmp"
    code = run_cli(
        [
            "report",
            "--report",
            str(out / "report.json"),
            "--compare",
            str(out / "report.json"),
            "--out",
            str(rep_out),
        ]
    )
    assert code == 0
    delta = json.loads((rep_out / "delta.json").read_text())
    assert all(v == 0.0 for v in delta.values())


def test_gen_dataset_cli(tmp_path):
    out = tmp_path / "ds"
    code = run_cli(
        [
            "gen-dataset",
            "--episodes",
            "2",
            "--seed",
            "4",
            "--variants",
            "basic-placement",
            "--resolution",
            "0.2",
            "--min-boxes",
            "2",
            "--max-boxes",
            "3",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["counts"]["terminal"] == 2
