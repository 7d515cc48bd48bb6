import json

import numpy as np
import pytest

from wastesight import onnxlite
from wastesight.classify import load_exported_model
from wastesight.core import ClassLabel, ClassOrderError, MetadataError, ModelLoadError

import onnx_builder as ob
from conftest import solid


@pytest.fixture
def tiny_model_file(tmp_path):
    data, params = ob.tiny_classifier(seed=7)
    path = tmp_path / "tiny.onnx"
    path.write_bytes(data)
    return path, params


class TestParser:
    def test_loads_graph_structure(self, tiny_model_file):
        path, _ = tiny_model_file
        model = onnxlite.load_model(path)
        assert model.input_name == "x"
        assert model.output_name == "logits"
        assert model.input_shape == (1, 3, 8, 8)
        assert [n.op_type for n in model.nodes] == [
            "Conv", "BatchNormalization", "Relu", "MaxPool", "Conv",
            "Add", "Relu", "GlobalAveragePool", "Flatten", "Gemm"]
        assert model.initializers["conv1_w"].shape == (4, 3, 3, 3)

    def test_float_data_encoding_equivalent_to_raw(self, tmp_path):
        raw_bytes, _ = ob.tiny_classifier(seed=3, use_raw=True)
        fd_bytes, _ = ob.tiny_classifier(seed=3, use_raw=False)
        a = onnxlite.parse_model(raw_bytes)
        b = onnxlite.parse_model(fd_bytes)
        for name in a.initializers:
            assert np.array_equal(a.initializers[name], b.initializers[name])

    def test_text_file_rejected(self, tmp_path):
        path = tmp_path / "not_a_model.onnx"
        path.write_text("definitely not a protobuf model\n" * 10)
        with pytest.raises(ModelLoadError):
            onnxlite.load_model(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ModelLoadError):
            onnxlite.load_model(tmp_path / "absent.onnx")

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.onnx"
        path.write_bytes(b"")
        with pytest.raises(ModelLoadError):
            onnxlite.load_model(path)

    def test_unsupported_op_rejected(self):
        data = ob.model(
            [ob.node("Tanh", ["x"], ["y"])], [],
            ob.value_info("x", [1, 4]), ob.value_info("y", [1, 4]))
        with pytest.raises(ModelLoadError, match="Tanh"):
            onnxlite.parse_model(data)

    def test_two_inputs_rejected(self):
        data = ob.model(
            [ob.node("Add", ["x", "x2"], ["y"])], [],
            ob.value_info("x", [1, 4]), ob.value_info("y", [1, 4]),
            extra_inputs=[ob.value_info("x2", [1, 4])])
        with pytest.raises(ModelLoadError, match="one input"):
            onnxlite.parse_model(data)


class TestExecutor:
    def test_matches_straight_line_forward(self, tiny_model_file):
        path, params = tiny_model_file
        model = onnxlite.load_model(path)
        gen = np.random.default_rng(42)
        for _ in range(3):
            x = gen.normal(0, 1, size=(1, 3, 8, 8)).astype(np.float32)
            got = onnxlite.run(model, x)
            expected = ob.tiny_forward(params, x)
            assert got.shape == (1, 6)
            assert np.allclose(got, expected, atol=1e-4)

    def test_deterministic(self, tiny_model_file):
        path, _ = tiny_model_file
        model = onnxlite.load_model(path)
        x = np.random.default_rng(0).normal(size=(1, 3, 8, 8)).astype(np.float32)
        first = onnxlite.run(model, x)
        second = onnxlite.run(model, x)
        assert first.tobytes() == second.tobytes()

    def test_strided_conv(self):
        gen = np.random.default_rng(5)
        w = gen.normal(size=(2, 3, 3, 3)).astype(np.float32)
        data = ob.model(
            [ob.node("Conv", ["x", "w"], ["y"], attrs=[
                ob.attr_ints("kernel_shape", [3, 3]),
                ob.attr_ints("strides", [2, 2]),
                ob.attr_ints("pads", [1, 1, 1, 1])])],
            [ob.tensor("w", w)],
            ob.value_info("x", [1, 3, 6, 6]), ob.value_info("y", [1, 2, 3, 3]))
        model = onnxlite.parse_model(data)
        x = gen.normal(size=(1, 3, 6, 6)).astype(np.float32)
        got = onnxlite.run(model, x)
        assert got.shape == (1, 2, 3, 3)
        padded = np.zeros((1, 3, 8, 8), dtype=np.float32)
        padded[:, :, 1:-1, 1:-1] = x
        for oc in range(2):
            for oy in range(3):
                for ox in range(3):
                    patch = padded[0, :, 2 * oy:2 * oy + 3, 2 * ox:2 * ox + 3]
                    assert got[0, oc, oy, ox] == pytest.approx(
                        float((patch * w[oc]).sum()), abs=1e-4)


class TestExportedModelClassifier:
    def canonical_meta(self, order=None):
        return {
            "format_version": 1,
            "input_w": 8,
            "input_h": 8,
            "channel_means": [0.0, 0.0, 0.0],
            "channel_stds": [1.0, 1.0, 1.0],
            "class_order": order or [label.text for label in ClassLabel],
        }

    def test_valid_model_yields_distribution(self, tiny_model_file, tmp_path):
        path, _ = tiny_model_file
        meta_path = tmp_path / "meta.json"
        meta_path.write_text(json.dumps(self.canonical_meta()))
        classifier = load_exported_model(path, meta_path)
        scores = classifier.classify(solid(12, 9, (37, 200, 90)))
        assert abs(sum(scores.probs) - 1.0) < 1e-9
        assert all(0.0 <= p <= 1.0 for p in scores.probs)

    def test_bitwise_deterministic(self, tiny_model_file, tmp_path):
        path, _ = tiny_model_file
        meta_path = tmp_path / "meta.json"
        meta_path.write_text(json.dumps(self.canonical_meta()))
        classifier = load_exported_model(path, meta_path)
        tile = solid(8, 8, (120, 10, 240))
        assert classifier.classify(tile).probs == classifier.classify(tile).probs

    def test_class_order_reindexing(self, tmp_path):
        # bias pins the model argmax to logit 0; class_order says logit 0
        # is glass, so the canonical argmax must be glass
        gen = np.random.default_rng(1)
        w = np.zeros((6, 3), dtype=np.float32)
        b = np.arange(6, 0, -1).astype(np.float32)
        data = ob.model(
            [ob.node("GlobalAveragePool", ["x"], ["gap"]),
             ob.node("Flatten", ["gap"], ["flat"], attrs=[ob.attr_int("axis", 1)]),
             ob.node("Gemm", ["flat", "w", "b"], ["logits"],
                     attrs=[ob.attr_int("transB", 1)])],
            [ob.tensor("w", w), ob.tensor("b", b)],
            ob.value_info("x", [1, 3, 4, 4]), ob.value_info("logits", [1, 6]))
        model_path = tmp_path / "biased.onnx"
        model_path.write_bytes(data)
        order = ["glass", "metal", "paper", "plastic", "trash", "cardboard"]
        meta_path = tmp_path / "meta.json"
        meta_path.write_text(json.dumps(self.canonical_meta(order)))
        classifier = load_exported_model(model_path, meta_path)
        scores = classifier.classify(solid(4, 4, (128, 128, 128)))
        assert scores.top()[0] is ClassLabel.GLASS

    def test_five_class_metadata_rejected(self, tiny_model_file, tmp_path):
        path, _ = tiny_model_file
        doc = self.canonical_meta()
        doc["class_order"] = doc["class_order"][:5]
        meta_path = tmp_path / "meta.json"
        meta_path.write_text(json.dumps(doc))
        with pytest.raises(ClassOrderError):
            load_exported_model(path, meta_path)

    def test_malformed_metadata_rejected(self, tiny_model_file, tmp_path):
        path, _ = tiny_model_file
        meta_path = tmp_path / "meta.json"
        meta_path.write_text("{not json")
        with pytest.raises(MetadataError):
            load_exported_model(path, meta_path)

    def test_model_as_text_file_rejected(self, tmp_path):
        model_path = tmp_path / "model.onnx"
        model_path.write_text("hello world")
        meta_path = tmp_path / "meta.json"
        meta_path.write_text(json.dumps(self.canonical_meta()))
        with pytest.raises(ModelLoadError):
            load_exported_model(model_path, meta_path)
