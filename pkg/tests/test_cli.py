"""End-to-end runs of the console entry point against temp scenes."""

import hashlib
import json

import numpy as np
import pytest

from risplan import __version__
from risplan.cli import main
from risplan.influence import read_field_csv, sweep
from risplan.scene import parse_scene

SCENE = {
    "spec_version": 1,
    "carrier_hz": 3.5e9,
    "bs": [{"position_m": [0, 0, 3], "antenna_count": 2}],
    "ris": {"position_m": [6, 2, 3], "element_count": 8},
    "ue_grid": {
        "x_min": 1, "x_max": 3, "y_min": 1, "y_max": 2,
        "resolution_m": 1, "fixed_height_m": 1.5,
    },
}

COEX_SCENE = {
    "spec_version": 1,
    "carrier_hz": 3.5e9,
    "bs": [{"position_m": [0, 0, 10], "antenna_count": 4}],
    "ris": {"position_m": [10, 20, 5], "element_count": 64},
    "ue_grid": {
        "x_min": 0, "x_max": 20, "y_min": 0, "y_max": 30,
        "resolution_m": 1, "fixed_height_m": 1.5,
    },
}


def write_scene(tmp_path, doc, name="scene.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def scene_without(doc, *keys):
    trimmed = {k: v for k, v in doc.items() if k not in keys}
    return trimmed


def write_cells(tmp_path, names=("split", "weak")):
    """Synthetic one-port cells: 'split' opens a 2..4 GHz band, 'weak' never does."""
    rows_on, rows_off = [], []
    for f_ghz in (1.0, 2.0, 3.0, 4.0, 5.0):
        inside = 2.0 <= f_ghz <= 4.0
        rows_on.append(f"{f_ghz} {0.9 if inside else 0.1} 0")
        rows_off.append(f"{f_ghz} {-0.9 if inside else 0.1} 0")
    (tmp_path / "split_on.s1p").write_text("# GHZ S RI R 50\n" + "\n".join(rows_on) + "\n")
    (tmp_path / "split_off.s1p").write_text("# GHZ S RI R 50\n" + "\n".join(rows_off) + "\n")
    (tmp_path / "weak_on.s1p").write_text("# GHZ S RI R 50\n1 0.2 0\n5 0.2 0\n")
    (tmp_path / "weak_off.s1p").write_text("# GHZ S RI R 50\n1 -0.2 0\n5 -0.2 0\n")
    cells = []
    for name in names:
        cells.append({"name": name, "states": {"on": f"{name}_on.s1p", "off": f"{name}_off.s1p"}})
    path = tmp_path / "cells.json"
    path.write_text(json.dumps({"cells": cells}))
    return str(path)


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


class TestBoi:
    def test_two_cell_run(self, tmp_path, capsys):
        manifest = write_cells(tmp_path)
        out = tmp_path / "out"
        assert main(["boi", manifest, "--out", str(out)]) == 0
        for name in ("split_contrast.csv", "weak_contrast.csv",
                     "boi_summary.csv", "normalized_contrast.csv", "manifest.json"):
            assert (out / name).exists()
        summary = (out / "boi_summary.csv").read_text().splitlines()
        assert summary[0] == "name,f1_hz,f2_hz,f0_hz,width_hz"
        split = dict(zip(summary[0].split(","), summary[1].split(",")))
        assert split["name"] == "split"
        # edges interpolate between the 1.8-contrast plateau and the 0 floor
        assert float(split["f0_hz"]) == pytest.approx(3.0e9)
        assert float(split["width_hz"]) == pytest.approx((26 / 9) * 1e9)
        # contrast 0.4 everywhere: below the default threshold, so blank fields
        assert summary[2] == "weak,,,,"
        err = capsys.readouterr().err
        assert "weak" in err and "normalized" in err
        # 'weak' has no centre frequency, so only 'split' is in the normalized table
        norm = (out / "normalized_contrast.csv").read_text().splitlines()
        assert all(line.startswith("split,") for line in norm[1:])

    def test_manifest_digests_match_files(self, tmp_path):
        manifest = write_cells(tmp_path)
        out = tmp_path / "out"
        main(["boi", manifest, "--out", str(out)])
        doc = load_manifest(out)
        assert doc["command"] == "boi"
        assert doc["version"] == __version__
        assert doc["seed"] is None
        assert doc["config"] == {"cmin": 1.0, "kind": "manifest"}
        names = [entry["path"] for entry in doc["outputs"]]
        assert names == sorted(names)
        assert "manifest.json" not in names
        for entry in doc["outputs"]:
            assert entry["sha256"] == sha(out / entry["path"])

    def test_single_cell_skips_normalized(self, tmp_path):
        manifest = write_cells(tmp_path, names=("split",))
        out = tmp_path / "out"
        assert main(["boi", manifest, "--out", str(out)]) == 0
        assert not (out / "normalized_contrast.csv").exists()

    def test_kind_override_changes_curve(self, tmp_path):
        manifest = write_cells(tmp_path, names=("split",))
        a, b = tmp_path / "a", tmp_path / "b"
        main(["boi", manifest, "--out", str(a)])
        main(["boi", manifest, "--kind", "effective", "--out", str(b)])
        # states share |s11| inside the band, so the effective-loss contrast collapses
        assert (a / "split_contrast.csv").read_text() != (b / "split_contrast.csv").read_text()

    def test_cmin_out_of_range_exits_2(self, tmp_path, capsys):
        manifest = write_cells(tmp_path)
        assert main(["boi", manifest, "--cmin", "2.5", "--out", str(tmp_path / "o")]) == 2
        assert "cmin" in capsys.readouterr().err

    def test_missing_manifest_exits_2(self, tmp_path, capsys):
        assert main(["boi", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
        assert "cell manifest" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, tmp_path):
        manifest = write_cells(tmp_path)
        out = tmp_path / "out"
        main(["boi", manifest, "--out", str(out)])
        first = {p.name: sha(p) for p in out.iterdir()}
        main(["boi", manifest, "--out", str(out), "--force"])
        assert {p.name: sha(p) for p in out.iterdir()} == first


class TestAoi:
    def test_gain_emits_nine_files(self, tmp_path):
        scene_path = write_scene(tmp_path, SCENE)
        out = tmp_path / "out"
        assert main(["aoi", scene_path, "--metric", "gain_db",
                     "--out-dir", str(out), "--jobs", "1"]) == 0
        expected = {
            f"scene_gain_db_{kind}.{ext}"
            for kind in ("without", "with", "delta", "labels")
            for ext in ("csv", "ppm")
        } | {"manifest.json"}
        assert {p.name for p in out.iterdir()} == expected

    def test_fields_match_library_sweep(self, tmp_path):
        scene_path = write_scene(tmp_path, SCENE)
        out = tmp_path / "out"
        main(["aoi", scene_path, "--metric", "gain_db", "--out-dir", str(out), "--jobs", "1"])
        scene = parse_scene(json.dumps(SCENE))
        without, with_ = sweep(scene, "gain_db")
        got = read_field_csv(out / "scene_gain_db_without.csv", "gain_db", "without",
                             fixed_height_m=scene.grid.fixed_height_m)
        np.testing.assert_array_equal(got.values, without.values)
        got = read_field_csv(out / "scene_gain_db_with.csv", "gain_db", "with",
                             fixed_height_m=scene.grid.fixed_height_m)
        np.testing.assert_array_equal(got.values, with_.values)

    def test_manifest_records_run(self, tmp_path):
        scene_path = write_scene(tmp_path, SCENE)
        out = tmp_path / "out"
        main(["aoi", scene_path, "--metric", "gain_db", "--out-dir", str(out), "--jobs", "1"])
        doc = load_manifest(out)
        assert doc["command"] == "aoi"
        assert doc["scene"] == scene_path
        assert doc["seed"] == 1
        assert doc["config"] == {"metric": "gain_db", "jobs": 1}
        assert len(doc["outputs"]) == 8
        for entry in doc["outputs"]:
            assert entry["sha256"] == sha(out / entry["path"])

    def test_seed_flag_overrides_scene(self, tmp_path):
        scene_path = write_scene(tmp_path, SCENE)
        out = tmp_path / "out"
        main(["aoi", scene_path, "--metric", "gain_db", "--out-dir", str(out),
              "--seed", "7", "--jobs", "1"])
        assert load_manifest(out)["seed"] == 7

    def test_default_jobs_recorded_as_auto(self, tmp_path):
        scene_path = write_scene(tmp_path, SCENE)
        out = tmp_path / "out"
        main(["aoi", scene_path, "--metric", "gain_db", "--out-dir", str(out)])
        assert load_manifest(out)["config"]["jobs"] == "auto"

    def test_rerun_is_byte_identical(self, tmp_path):
        scene_path = write_scene(tmp_path, SCENE)
        out = tmp_path / "out"
        main(["aoi", scene_path, "--metric", "gain_db", "--out-dir", str(out), "--jobs", "1"])
        first = {p.name: sha(p) for p in out.iterdir()}
        assert main(["aoi", scene_path, "--metric", "gain_db",
                     "--out-dir", str(out), "--jobs", "1", "--force"]) == 0
        assert {p.name: sha(p) for p in out.iterdir()} == first

    def test_overwrite_needs_force(self, tmp_path, capsys):
        scene_path = write_scene(tmp_path, SCENE)
        out = tmp_path / "out"
        main(["aoi", scene_path, "--metric", "gain_db", "--out-dir", str(out), "--jobs", "1"])
        capsys.readouterr()
        assert main(["aoi", scene_path, "--metric", "gain_db",
                     "--out-dir", str(out), "--jobs", "1"]) == 2
        assert "--force" in capsys.readouterr().err

    def test_unknown_metric_exits_2_listing_choices(self, tmp_path, capsys):
        scene_path = write_scene(tmp_path, SCENE)
        with pytest.raises(SystemExit) as exc:
            main(["aoi", scene_path, "--metric", "bogus"])
        assert exc.value.code == 2
        err = capsys.readouterr().err
        assert "invalid choice" in err and "gain_db" in err

    def test_no_surface_delta_is_zero(self, tmp_path):
        scene_path = write_scene(tmp_path, scene_without(SCENE, "ris"), "bare.json")
        out = tmp_path / "out"
        with pytest.warns(UserWarning, match="flat"):
            assert main(["aoi", scene_path, "--metric", "gain_db",
                         "--out-dir", str(out), "--jobs", "1"]) == 0
        delta = read_field_csv(out / "bare_gain_db_delta.csv", "gain_db", "delta",
                               fixed_height_m=1.5)
        np.testing.assert_array_equal(delta.values, np.zeros(6))
        labels = (out / "bare_gain_db_labels.csv").read_text().splitlines()[1:]
        assert all(line.endswith(",unchanged") for line in labels)

    def test_sse_without_eve_exits_3(self, tmp_path, capsys):
        scene_path = write_scene(tmp_path, SCENE)
        assert main(["aoi", scene_path, "--metric", "sse_bps_hz",
                     "--out-dir", str(tmp_path / "o")]) == 3
        assert "eavesdropper" in capsys.readouterr().err

    def test_missing_scene_exits_2(self, tmp_path, capsys):
        assert main(["aoi", str(tmp_path / "gone.json"), "--metric", "gain_db"]) == 2
        assert "scene" in capsys.readouterr().err

    def test_malformed_scene_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["aoi", str(bad), "--metric", "gain_db"]) == 2
        assert capsys.readouterr().err.startswith("error:")


class TestCoexist:
    def test_run_emits_trace_summary_manifest(self, tmp_path):
        scene_path = write_scene(tmp_path, COEX_SCENE)
        out = tmp_path / "out"
        assert main(["coexist", scene_path, "--switch-prob", "0.5", "--slots", "400",
                     "--ue", "11,19", "--out", str(out)]) == 0
        trace = (out / "scene_coexist_trace.csv").read_text().splitlines()
        assert trace[0] == "slot,snr_db,selected_rate,actual_capacity,error"
        assert len(trace) == 401
        summary = (out / "scene_coexist_summary.csv").read_text().splitlines()
        assert summary[0] == "slots,transmitting_slots,error_count,bler,ris_direct_ratio_db"
        slots, tx, errors, bler, ratio = summary[1].split(",")
        assert int(slots) == 400
        assert int(tx) == 399
        assert float(bler) == pytest.approx(int(errors) / int(tx))
        assert np.isfinite(float(ratio))
        doc = load_manifest(out)
        assert doc["command"] == "coexist"
        assert doc["config"]["slots"] == 400
        assert doc["config"]["ue"] == [11.0, 19.0, 1.5]
        for entry in doc["outputs"]:
            assert entry["sha256"] == sha(out / entry["path"])

    def test_trace_error_column_consistent_with_summary(self, tmp_path):
        scene_path = write_scene(tmp_path, COEX_SCENE)
        out = tmp_path / "out"
        main(["coexist", scene_path, "--switch-prob", "0.8", "--slots", "600",
              "--ue", "11,19,1.5", "--out", str(out)])
        trace = (out / "scene_coexist_trace.csv").read_text().splitlines()[1:]
        flagged = sum(line.endswith(",1") for line in trace)
        errors = int((out / "scene_coexist_summary.csv").read_text().splitlines()[1].split(",")[2])
        assert flagged == errors

    def test_static_surface_has_zero_bler(self, tmp_path):
        scene_path = write_scene(tmp_path, COEX_SCENE)
        out = tmp_path / "out"
        main(["coexist", scene_path, "--switch-prob", "0", "--slots", "500",
              "--ue", "11,19", "--out", str(out)])
        bler = float((out / "scene_coexist_summary.csv").read_text().splitlines()[1].split(",")[3])
        assert bler == 0.0

    def test_zero_slots_exits_2(self, tmp_path, capsys):
        scene_path = write_scene(tmp_path, COEX_SCENE)
        assert main(["coexist", scene_path, "--switch-prob", "0.5", "--slots", "0",
                     "--ue", "11,19", "--out", str(tmp_path / "o")]) == 2
        assert "slots" in capsys.readouterr().err

    def test_bad_ue_exits_2(self, tmp_path, capsys):
        scene_path = write_scene(tmp_path, COEX_SCENE)
        assert main(["coexist", scene_path, "--switch-prob", "0.5", "--slots", "10",
                     "--ue", "11", "--out", str(tmp_path / "o")]) == 2
        assert "--ue" in capsys.readouterr().err

    def test_rerun_is_byte_identical(self, tmp_path):
        scene_path = write_scene(tmp_path, COEX_SCENE)
        out = tmp_path / "out"
        args = ["coexist", scene_path, "--switch-prob", "0.5", "--slots", "300",
                "--ue", "11,19", "--out", str(out)]
        main(args)
        first = {p.name: sha(p) for p in out.iterdir()}
        assert main(args + ["--force"]) == 0
        assert {p.name: sha(p) for p in out.iterdir()} == first

    def test_seed_changes_trace(self, tmp_path):
        scene_path = write_scene(tmp_path, COEX_SCENE)
        a, b = tmp_path / "a", tmp_path / "b"
        base = ["coexist", scene_path, "--switch-prob", "0.5", "--slots", "300",
                "--ue", "11,19"]
        main(base + ["--out", str(a), "--seed", "1"])
        main(base + ["--out", str(b), "--seed", "2"])
        assert (a / "scene_coexist_trace.csv").read_text() != (b / "scene_coexist_trace.csv").read_text()


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_no_command_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
