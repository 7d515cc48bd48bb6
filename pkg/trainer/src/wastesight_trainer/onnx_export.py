"""Serialize the trained classifier to an ONNX file plus metadata JSON.

The network is lowered from a torch.fx trace to the small op set the
detection side executes (Conv, BatchNormalization, Relu, MaxPool, Add,
GlobalAveragePool, Flatten, Gemm), and the protobuf container is written
directly, so export needs no onnx package.
"""

from __future__ import annotations

import json
import operator
import struct
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import CHANNEL_MEANS, CHANNEL_STDS, CLASS_NAMES


class ExportError(RuntimeError):
    """The model contains something the exporter cannot lower."""


# --------------------------------------------------------------------------
# Protobuf wire encoding
# --------------------------------------------------------------------------

def _varint(value: int) -> bytes:
    out = bytearray()
    value &= (1 << 64) - 1
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _key(field: int, wire: int) -> bytes:
    return _varint((field << 3) | wire)


def _enc_varint(field: int, value: int) -> bytes:
    return _key(field, 0) + _varint(value)


def _enc_bytes(field: int, payload: bytes) -> bytes:
    return _key(field, 2) + _varint(len(payload)) + payload


def _enc_string(field: int, text: str) -> bytes:
    return _enc_bytes(field, text.encode("utf-8"))


def _enc_float32(field: int, value: float) -> bytes:
    return _key(field, 5) + struct.pack("<f", value)


_ATTR_FLOAT, _ATTR_INT, _ATTR_INTS = 1, 2, 7
_FLOAT32 = 1


def _attr_int(name: str, value: int) -> bytes:
    body = _enc_string(1, name) + _enc_varint(3, value) + _enc_varint(20, _ATTR_INT)
    return _enc_bytes(5, body)


def _attr_ints(name: str, values) -> bytes:
    packed = b"".join(_varint(int(v)) for v in values)
    body = _enc_string(1, name) + _enc_bytes(8, packed) + _enc_varint(20, _ATTR_INTS)
    return _enc_bytes(5, body)


def _attr_float(name: str, value: float) -> bytes:
    body = _enc_string(1, name) + _enc_float32(2, value) + _enc_varint(20, _ATTR_FLOAT)
    return _enc_bytes(5, body)


def _enc_node(op_type: str, inputs, outputs, attrs: bytes = b"") -> bytes:
    body = b"".join(_enc_string(1, s) for s in inputs)
    body += b"".join(_enc_string(2, s) for s in outputs)
    body += _enc_string(3, f"{op_type}_{outputs[0]}")
    body += _enc_string(4, op_type)
    body += attrs
    return _enc_bytes(1, body)


def _enc_tensor(name: str, arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    body = b"".join(_enc_varint(1, d) for d in arr.shape)
    body += _enc_varint(2, _FLOAT32)
    body += _enc_bytes(9, arr.astype("<f4").tobytes())
    body += _enc_string(8, name)
    return _enc_bytes(5, body)


def _enc_value_info(name: str, shape) -> bytes:
    dims = b"".join(_enc_bytes(1, _enc_varint(1, d)) for d in shape)
    tensor_type = _enc_varint(1, _FLOAT32) + _enc_bytes(2, dims)
    return _enc_string(1, name) + _enc_bytes(2, _enc_bytes(1, tensor_type))


# --------------------------------------------------------------------------
# FX graph lowering
# --------------------------------------------------------------------------

def _pair(value) -> list[int]:
    if isinstance(value, (tuple, list)):
        return [int(value[0]), int(value[1])]
    return [int(value), int(value)]


def export_onnx_bytes(model: nn.Module, input_h: int, input_w: int) -> bytes:
    """Lower an eval-mode module to ONNX bytes (single input, single output)."""
    model = model.eval()
    try:
        traced = torch.fx.symbolic_trace(model)
    except Exception as exc:
        raise ExportError(f"model is not traceable: {exc}") from exc
    modules = dict(traced.named_modules())

    node_chunks: list[bytes] = []
    tensor_chunks: list[bytes] = []
    names: dict = {}
    output_name = None

    def param(qualified: str, tensor: torch.Tensor) -> str:
        tensor_chunks.append(_enc_tensor(qualified, tensor.detach().cpu().numpy()))
        return qualified

    for node in traced.graph.nodes:
        if node.op == "placeholder":
            if names:
                raise ExportError("multiple model inputs are not supported")
            names[node] = "input"
        elif node.op == "call_module":
            mod = modules[node.target]
            src = names[node.args[0]]
            out = node.name
            if isinstance(mod, nn.Conv2d):
                if mod.dilation not in ((1, 1), 1):
                    raise ExportError(f"{node.target}: dilated conv unsupported")
                inputs = [src, param(f"{node.target}.weight", mod.weight)]
                if mod.bias is not None:
                    inputs.append(param(f"{node.target}.bias", mod.bias))
                pad = _pair(mod.padding)
                attrs = (_attr_ints("kernel_shape", _pair(mod.kernel_size))
                         + _attr_ints("strides", _pair(mod.stride))
                         + _attr_ints("pads", [pad[0], pad[1], pad[0], pad[1]])
                         + _attr_ints("dilations", [1, 1])
                         + _attr_int("group", int(mod.groups)))
                node_chunks.append(_enc_node("Conv", inputs, [out], attrs))
            elif isinstance(mod, nn.BatchNorm2d):
                inputs = [src,
                          param(f"{node.target}.weight", mod.weight),
                          param(f"{node.target}.bias", mod.bias),
                          param(f"{node.target}.running_mean", mod.running_mean),
                          param(f"{node.target}.running_var", mod.running_var)]
                node_chunks.append(_enc_node("BatchNormalization", inputs, [out],
                                             _attr_float("epsilon", float(mod.eps))))
            elif isinstance(mod, nn.ReLU):
                node_chunks.append(_enc_node("Relu", [src], [out]))
            elif isinstance(mod, nn.MaxPool2d):
                if _pair(mod.dilation) != [1, 1] or mod.ceil_mode:
                    raise ExportError(f"{node.target}: unsupported pooling variant")
                pad = _pair(mod.padding)
                attrs = (_attr_ints("kernel_shape", _pair(mod.kernel_size))
                         + _attr_ints("strides", _pair(mod.stride))
                         + _attr_ints("pads", [pad[0], pad[1], pad[0], pad[1]]))
                node_chunks.append(_enc_node("MaxPool", [src], [out], attrs))
            elif isinstance(mod, nn.AdaptiveAvgPool2d):
                if _pair(mod.output_size) != [1, 1]:
                    raise ExportError(f"{node.target}: only global pooling exports")
                node_chunks.append(_enc_node("GlobalAveragePool", [src], [out]))
            elif isinstance(mod, nn.Linear):
                inputs = [src, param(f"{node.target}.weight", mod.weight)]
                if mod.bias is not None:
                    inputs.append(param(f"{node.target}.bias", mod.bias))
                attrs = (_attr_float("alpha", 1.0) + _attr_float("beta", 1.0)
                         + _attr_int("transB", 1))
                node_chunks.append(_enc_node("Gemm", inputs, [out], attrs))
            elif isinstance(mod, nn.Identity):
                names[node] = src
                continue
            else:
                raise ExportError(f"{node.target}: cannot lower {type(mod).__name__}")
            names[node] = out
        elif node.op == "call_function":
            out = node.name
            if node.target in (operator.add, operator.iadd, torch.add):
                node_chunks.append(_enc_node(
                    "Add", [names[node.args[0]], names[node.args[1]]], [out]))
            elif node.target is torch.flatten:
                axis = int(node.args[1]) if len(node.args) > 1 else 1
                node_chunks.append(_enc_node("Flatten", [names[node.args[0]]], [out],
                                             _attr_int("axis", axis)))
            else:
                raise ExportError(f"cannot lower function {node.target}")
            names[node] = out
        elif node.op == "output":
            output_name = names[node.args[0]]
        else:
            raise ExportError(f"cannot lower node kind {node.op}")

    if output_name is None:
        raise ExportError("traced graph has no output")

    graph = b"".join(node_chunks)
    graph += _enc_string(2, "classifier")
    graph += b"".join(tensor_chunks)
    graph += _enc_bytes(11, _enc_value_info("input", [1, 3, input_h, input_w]))
    graph += _enc_bytes(12, _enc_value_info(output_name, [1, len(CLASS_NAMES)]))

    msg = _enc_varint(1, 8)  # ir_version
    msg += _enc_string(2, "wastesight-trainer")
    msg += _enc_bytes(7, graph)
    msg += _enc_bytes(8, _enc_string(1, "") + _enc_varint(2, 13))  # opset 13
    return msg


def export_model(classifier: nn.Module, input_w: int, input_h: int,
                 out_model: str | Path, out_meta: str | Path) -> None:
    """Write the ONNX model file and its metadata sidecar.

    The metadata records the exact input size, the normalization constants
    used in training, and the class order of the logits, so the consumer
    never has to assume any of them.
    """
    Path(out_model).write_bytes(export_onnx_bytes(classifier, input_h, input_w))
    meta = {
        "format_version": 1,
        "input_w": input_w,
        "input_h": input_h,
        "channel_means": list(CHANNEL_MEANS),
        "channel_stds": list(CHANNEL_STDS),
        "class_order": list(CLASS_NAMES),
    }
    Path(out_meta).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
