import csv
import json
from pathlib import Path

import numpy as np
import pytest

from revex.cli import main
from revex.predictors import EchoPredictor
from revex.segmentation import read_segmentation
from revex.tensor import read_tensor, read_volume, write_tensor

from wire_stub import WireStub


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scene")
    code = run_cli("synth", "--out", out, "--seed", "5", "--frames", "6",
                   "--size", "20", "--box-frac", "0.15")
    assert code == 0
    return out


class TestSynth:

    def test_outputs_exist_and_load(self, scene_dir):
        video = read_tensor(scene_dir / "video.rvx")
        assert video.shape == (6, 20, 20, 3)
        gt = json.loads((scene_dir / "gt.json").read_text())
        assert len(gt["frames"]) == 6
        sal = read_volume(scene_dir / "gt_saliency.rvx")
        assert sal.shape == (6, 20, 20)
        spec = json.loads((scene_dir / "predictor.json").read_text())
        assert spec["kind"] == "hf_box"
        assert (scene_dir / "provenance.json").exists()

    def test_track_seed_separates_noise_from_track(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out, seed in ((a, "1"), (b, "2")):
            assert run_cli("synth", "--out", out, "--seed", seed,
                           "--track-seed", "9", "--frames", "4",
                           "--size", "16", "--box-frac", "0.2") == 0
        gt_a = json.loads((a / "gt.json").read_text())
        gt_b = json.loads((b / "gt.json").read_text())
        assert gt_a == gt_b  # same track
        va = read_tensor(a / "video.rvx")
        vb = read_tensor(b / "video.rvx")
        assert not np.array_equal(va.data, vb.data)  # different noise

    def test_region_linear_kind(self, tmp_path):
        out = tmp_path / "rl"
        assert run_cli("synth", "--out", out, "--seed", "3", "--frames", "4",
                       "--size", "16", "--box-frac", "0.2",
                       "--predictor-kind", "region_linear") == 0
        spec = json.loads((out / "predictor.json").read_text())
        assert spec["kind"] == "region_linear"
        seg = read_segmentation(out / "segmentation.rvx")
        assert seg.r == len(spec["weights"])


class TestSegment:

    def test_grid_segmentation(self, scene_dir, tmp_path):
        out = tmp_path / "seg"
        code = run_cli("segment", scene_dir / "video.rvx", "--seg", "grid:2,2,2",
                       "--out", out)
        assert code == 0
        seg = read_segmentation(out / "segmentation.rvx")
        assert seg.r == 8
        assert (out / "boundaries" / "frame_00000.png").exists()
        assert (out / "provenance.json").exists()

    def test_slic_segmentation_logs_count(self, scene_dir, tmp_path, capsys):
        out = tmp_path / "seg"
        code = run_cli("segment", scene_dir / "video.rvx", "--seg", "slic:8",
                       "--out", out)
        assert code == 0
        assert "regions:" in capsys.readouterr().out

    def test_missing_input_exits_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.rvx"
        code = run_cli("segment", missing, "--seg", "grid:1,1,1",
                       "--out", tmp_path / "o")
        assert code == 2
        assert str(missing) in capsys.readouterr().err


class TestExplain:

    def test_two_methods_round_trip(self, scene_dir, tmp_path):
        out = tmp_path / "exp"
        code = run_cli("explain", scene_dir / "video.rvx",
                       "--method", "video-rise", "--method", "video-lime",
                       "--predictor", scene_dir / "predictor.json",
                       "--class", "0", "--seed", "3", "--samples", "40",
                       "--regions", "8", "--out", out)
        assert code == 0
        for stem in ("video_rise", "video_lime"):
            sal = read_volume(out / f"saliency_{stem}.rvx")
            assert sal.shape == (6, 20, 20)
            prov = json.loads((out / f"provenance_{stem}.json").read_text())
            assert prov["seed"] == 3
            assert "timings" in prov
            assert (out / f"overlay_{stem}_sheet.png").exists()

    def test_deterministic_across_runs(self, scene_dir, tmp_path):
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            code = run_cli("explain", scene_dir / "video.rvx",
                           "--method", "video-kernel-shap",
                           "--predictor", scene_dir / "predictor.json",
                           "--class", "0", "--seed", "11", "--samples", "40",
                           "--regions", "8", "--out", out)
            assert code == 0
            outs.append((out / "saliency_video_kernel_shap.rvx").read_bytes())
        assert outs[0] == outs[1]

    def test_unreachable_remote_exits_3_no_outputs(self, scene_dir, tmp_path,
                                                   capsys):
        out = tmp_path / "exp"
        code = run_cli("explain", scene_dir / "video.rvx",
                       "--method", "video-rise",
                       "--predictor", "http://127.0.0.1:1",
                       "--class", "0", "--out", out)
        assert code == 3
        assert not out.exists()

    def test_dump_perturbed_flag(self, scene_dir, tmp_path):
        out = tmp_path / "exp"
        code = run_cli("explain", scene_dir / "video.rvx",
                       "--method", "video-up",
                       "--predictor", scene_dir / "predictor.json",
                       "--class", "0", "--regions", "8", "--out", out,
                       "--dump-perturbed")
        assert code == 0
        dumped = read_tensor(out / "perturbed_video_up.rvx")
        assert dumped.shape == (6, 20, 20, 3)


class TestEvaluate:

    def test_ground_truth_saliency_scores(self, scene_dir, tmp_path, capsys):
        out_csv = tmp_path / "metrics.csv"
        code = run_cli("evaluate", scene_dir / "video.rvx",
                       "--saliency", scene_dir / "gt_saliency.rvx",
                       "--predictor", scene_dir / "predictor.json",
                       "--class", "0", "--gt", scene_dir / "gt.json",
                       "--steps", "10", "--out", out_csv)
        assert code == 0
        rows = list(csv.DictReader(out_csv.open()))
        assert len(rows) == 1
        row = rows[0]
        assert row["pointing_hit"] == "True"
        assert float(row["best_iou"]) == 1.0
        assert float(row["deletion_auc"]) < float(row["insertion_auc"])

    def test_iou_without_gt_exits_2(self, scene_dir, tmp_path):
        code = run_cli("evaluate", scene_dir / "video.rvx",
                       "--saliency", scene_dir / "gt_saliency.rvx",
                       "--predictor", scene_dir / "predictor.json",
                       "--metrics", "iou",
                       "--out", tmp_path / "m.csv")
        assert code == 2

    def test_directory_of_saliencies(self, scene_dir, tmp_path):
        exp = tmp_path / "exp"
        assert run_cli("explain", scene_dir / "video.rvx",
                       "--method", "video-rise", "--method", "video-up",
                       "--predictor", scene_dir / "predictor.json",
                       "--class", "0", "--samples", "30", "--regions", "8",
                       "--out", exp) == 0
        out_csv = tmp_path / "metrics.csv"
        code = run_cli("evaluate", scene_dir / "video.rvx",
                       "--saliency", exp,
                       "--predictor", scene_dir / "predictor.json",
                       "--class", "0", "--metrics", "deletion",
                       "--steps", "5", "--out", out_csv)
        assert code == 0
        rows = list(csv.DictReader(out_csv.open()))
        assert sorted(r["method"] for r in rows) == ["video-rise", "video-up"]


class TestModelCheck:

    def test_conformant_endpoint_exits_0(self, capsys):
        with WireStub(EchoPredictor()) as stub:
            code = run_cli("model-check", stub.url, "--shape", "2,4,4,1")
        assert code == 0
        assert "conformant" in capsys.readouterr().out

    def test_false_normalization_exits_3(self):
        class Unnormalized(EchoPredictor):
            def predict(self, batch):
                return super().predict(batch) * 0.5

        with WireStub(Unnormalized(), declare_normalized=True) as stub:
            code = run_cli("model-check", stub.url, "--shape", "2,4,4,1")
        assert code == 3

    def test_unreachable_exits_3(self):
        assert run_cli("model-check", "http://127.0.0.1:1") == 3


class TestConfigFile:

    def test_toml_defaults_with_flag_override(self, scene_dir, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text(
            "[explain]\n"
            "methods = [\"video-up\"]\n"
            "seed = 4\n"
            "regions = 8\n"
            f"predictor = \"{scene_dir / 'predictor.json'}\"\n"
            "class = \"0\"\n"
        )
        out = tmp_path / "exp"
        code = run_cli("explain", scene_dir / "video.rvx", "--config", cfg,
                       "--out", out)
        assert code == 0
        prov = json.loads((out / "provenance_video_up.json").read_text())
        assert prov["seed"] == 4

    def test_bad_usage_exits_2(self):
        assert run_cli("explain") == 2
        assert run_cli("bogus-command") == 2
