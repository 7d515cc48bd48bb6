import json

import numpy as np
import pytest
import torch
from PIL import Image

from wastesight_trainer import assemble_classifier, export_model
from wastesight_trainer.cli import main
from wastesight_trainer.data import CLASS_NAMES, load_batch

from conftest import SMOKE, write_dataset


@pytest.fixture(scope="module")
def exported(tmp_path_factory, backbone, smoke_run):
    out = tmp_path_factory.mktemp("export")
    classifier = assemble_classifier(backbone, smoke_run["head"])
    dataset = smoke_run["dataset"]
    export_model(classifier, dataset.image_w, dataset.image_h,
                 out / "model.onnx", out / "meta.json")
    return dict(dir=out, classifier=classifier)


class TestExportArtifacts:
    def test_metadata_contents(self, exported, smoke_run):
        meta = json.loads((exported["dir"] / "meta.json").read_text())
        assert meta["format_version"] == 1
        assert meta["class_order"] == list(CLASS_NAMES)
        assert (meta["input_w"], meta["input_h"]) == (96, 72)
        assert len(meta["channel_means"]) == len(meta["channel_stds"]) == 3
        assert all(s > 0 for s in meta["channel_stds"])

    def test_reexport_is_byte_stable(self, exported, smoke_run, tmp_path):
        export_model(exported["classifier"], 96, 72,
                     tmp_path / "model.onnx", tmp_path / "meta.json")
        assert (tmp_path / "meta.json").read_bytes() == \
            (exported["dir"] / "meta.json").read_bytes()
        assert (tmp_path / "model.onnx").read_bytes() == \
            (exported["dir"] / "model.onnx").read_bytes()

    def test_model_file_is_substantial(self, exported):
        # a serialized 25M-parameter float32 network
        assert (exported["dir"] / "model.onnx").stat().st_size > 50_000_000


class TestCrossComponentParity:
    def test_detection_side_agrees_on_argmax(self, exported, smoke_run):
        wastesight = pytest.importorskip("wastesight")
        loaded = wastesight.load_exported_model(
            exported["dir"] / "model.onnx", exported["dir"] / "meta.json")

        dataset = smoke_run["dataset"]
        samples = [s for code in range(6)
                   for s in dataset.samples if s.class_code == code][:24]
        assert len(samples) >= 20

        torch_model = exported["classifier"]
        agreements = 0
        for sample in samples:
            batch, _ = load_batch([sample], dataset.image_w, dataset.image_h)
            with torch.no_grad():
                torch_code = int(torch_model(batch).argmax())
            with Image.open(sample.path) as im:
                tile = wastesight.RasterImage(
                    np.asarray(im.convert("RGB"), dtype=np.uint8))
            scores = loaded.classify(tile)
            if int(scores.top()[0]) == torch_code:
                agreements += 1
        assert agreements / len(samples) >= 0.95

    def test_scores_are_distributions(self, exported):
        wastesight = pytest.importorskip("wastesight")
        loaded = wastesight.load_exported_model(
            exported["dir"] / "model.onnx", exported["dir"] / "meta.json")
        tile = wastesight.RasterImage.filled(96, 72, (200, 30, 30))
        scores = loaded.classify(tile)
        assert abs(sum(scores.probs) - 1.0) < 1e-9
        assert scores.probs == loaded.classify(tile).probs  # bitwise repeatable


class TestCli:
    def test_train_command_end_to_end(self, tmp_path):
        root = tmp_path / "data"
        root.mkdir()
        manifest = write_dataset(root, per_class=10)
        out = tmp_path / "run"
        out.mkdir()
        code = main(["--manifest", str(manifest),
                     "--out-model", str(out / "model.onnx"),
                     "--out-meta", str(out / "meta.json"),
                     "--out-curve", str(out / "traincurve.csv"),
                     "--seed", "0", "--epochs", "1",
                     "--lr", str(SMOKE["learning_rate"]),
                     "--batch-size", str(SMOKE["batch_size"])])
        assert code == 0
        assert (out / "model.onnx").exists()
        assert json.loads((out / "meta.json").read_text())["class_order"][0] == "cardboard"
        curve = (out / "traincurve.csv").read_text().strip().split("\n")
        assert curve[0] == "iteration,train_accuracy,val_accuracy,train_loss"
        assert len(curve) > 2

    def test_missing_manifest_fails_cleanly(self, tmp_path):
        assert main(["--manifest", str(tmp_path / "none.json")]) == 1
