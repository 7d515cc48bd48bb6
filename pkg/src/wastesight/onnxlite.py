"""Self-contained ONNX model reader and numpy executor.

Covers the opset subset produced by exporting a frozen-backbone residual
classifier: Conv, BatchNormalization, Relu, MaxPool, Add, GlobalAveragePool,
Flatten, Gemm. Models are parsed directly from the protobuf wire format, so
no ONNX runtime dependency is required.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import ModelLoadError

# protobuf wire types
_VARINT, _FIXED64, _LENGTH, _FIXED32 = 0, 1, 2, 5

_TENSOR_DTYPES = {1: np.float32, 6: np.int32, 7: np.int64, 11: np.float64}


class _Malformed(Exception):
    pass


def _read_varint(buf: bytes, i: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if i >= len(buf):
            raise _Malformed("truncated varint")
        byte = buf[i]
        i += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, i
        shift += 7
        if shift > 70:
            raise _Malformed("varint too long")


def _signed64(value: int) -> int:
    return value - (1 << 64) if value >= (1 << 63) else value


def _iter_fields(buf: bytes):
    """Yield (field_number, wire_type, payload) triples from a message."""
    i = 0
    n = len(buf)
    while i < n:
        key, i = _read_varint(buf, i)
        fieldno, wire = key >> 3, key & 7
        if fieldno == 0:
            raise _Malformed("field number 0")
        if wire == _VARINT:
            value, i = _read_varint(buf, i)
        elif wire == _FIXED64:
            if i + 8 > n:
                raise _Malformed("truncated fixed64")
            value = buf[i:i + 8]
            i += 8
        elif wire == _LENGTH:
            length, i = _read_varint(buf, i)
            if i + length > n:
                raise _Malformed("truncated length-delimited field")
            value = buf[i:i + length]
            i += length
        elif wire == _FIXED32:
            if i + 4 > n:
                raise _Malformed("truncated fixed32")
            value = buf[i:i + 4]
            i += 4
        else:
            raise _Malformed(f"unsupported wire type {wire}")
        yield fieldno, wire, value


def _varint_list(chunk: bytes) -> list[int]:
    out = []
    i = 0
    while i < len(chunk):
        v, i = _read_varint(chunk, i)
        out.append(_signed64(v))
    return out


def _parse_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    data_type = 1
    name = ""
    raw = None
    float_data: list[float] = []
    int64_data: list[int] = []
    for fieldno, wire, value in _iter_fields(buf):
        if fieldno == 1:
            dims.extend(_varint_list(value) if wire == _LENGTH else [_signed64(value)])
        elif fieldno == 2:
            data_type = value
        elif fieldno == 4:
            if wire == _LENGTH:
                float_data.extend(np.frombuffer(value, dtype="<f4").tolist())
            else:
                float_data.append(np.frombuffer(value, dtype="<f4")[0])
        elif fieldno == 7:
            int64_data.extend(_varint_list(value) if wire == _LENGTH else [_signed64(value)])
        elif fieldno == 8:
            name = value.decode("utf-8")
        elif fieldno == 9:
            raw = value
    if data_type not in _TENSOR_DTYPES:
        raise _Malformed(f"unsupported tensor element type {data_type}")
    dtype = _TENSOR_DTYPES[data_type]
    if raw is not None:
        arr = np.frombuffer(raw, dtype=np.dtype(dtype).newbyteorder("<")).astype(dtype)
    elif float_data:
        arr = np.asarray(float_data, dtype=dtype)
    elif int64_data:
        arr = np.asarray(int64_data, dtype=dtype)
    else:
        arr = np.zeros(0, dtype=dtype)
    expected = int(np.prod(dims)) if dims else arr.size
    if arr.size != expected:
        raise _Malformed(f"tensor {name!r}: {arr.size} values for dims {dims}")
    return name, arr.reshape(dims) if dims else arr.reshape(())


def _parse_attribute(buf: bytes) -> tuple[str, Any]:
    name = ""
    value: Any = None
    ints: list[int] = []
    floats: list[float] = []
    for fieldno, wire, payload in _iter_fields(buf):
        if fieldno == 1:
            name = payload.decode("utf-8")
        elif fieldno == 2:
            value = float(np.frombuffer(payload, dtype="<f4")[0])
        elif fieldno == 3:
            value = _signed64(payload)
        elif fieldno == 4:
            value = payload.decode("utf-8", errors="replace")
        elif fieldno == 5:
            value = _parse_tensor(payload)[1]
        elif fieldno == 7:
            if wire == _LENGTH:
                floats.extend(np.frombuffer(payload, dtype="<f4").tolist())
            else:
                floats.append(float(np.frombuffer(payload, dtype="<f4")[0]))
        elif fieldno == 8:
            ints.extend(_varint_list(payload) if wire == _LENGTH else [_signed64(payload)])
    if ints:
        value = ints
    elif floats:
        value = floats
    return name, value


@dataclass(frozen=True)
class OnnxNode:
    op_type: str
    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    attrs: dict[str, Any] = field(default_factory=dict)


def _parse_node(buf: bytes) -> OnnxNode:
    inputs: list[str] = []
    outputs: list[str] = []
    op_type = ""
    name = ""
    attrs: dict[str, Any] = {}
    for fieldno, _wire, value in _iter_fields(buf):
        if fieldno == 1:
            inputs.append(value.decode("utf-8"))
        elif fieldno == 2:
            outputs.append(value.decode("utf-8"))
        elif fieldno == 3:
            name = value.decode("utf-8")
        elif fieldno == 4:
            op_type = value.decode("utf-8")
        elif fieldno == 5:
            key, attr_value = _parse_attribute(value)
            attrs[key] = attr_value
    return OnnxNode(op_type, name, tuple(inputs), tuple(outputs), attrs)


def _parse_value_info(buf: bytes) -> tuple[str, list[int | None] | None]:
    name = ""
    shape: list[int | None] | None = None
    for fieldno, _wire, value in _iter_fields(buf):
        if fieldno == 1:
            name = value.decode("utf-8")
        elif fieldno == 2:
            for tfield, _tw, tval in _iter_fields(value):
                if tfield != 1:  # tensor_type
                    continue
                for sfield, _sw, sval in _iter_fields(tval):
                    if sfield != 2:  # shape
                        continue
                    shape = []
                    for dfield, _dw, dval in _iter_fields(sval):
                        if dfield != 1:  # dim
                            continue
                        dim: int | None = None
                        for ifield, _iw, ival in _iter_fields(dval):
                            if ifield == 1:
                                dim = _signed64(ival)
                        shape.append(dim)
    return name, shape


@dataclass(frozen=True)
class OnnxModel:
    """A parsed single-input/single-output inference graph."""

    nodes: tuple[OnnxNode, ...]
    initializers: dict[str, np.ndarray]
    input_name: str
    input_shape: tuple[int | None, ...] | None
    output_name: str


def load_model(path: str | Path) -> OnnxModel:
    """Parse an ONNX file and validate it against the supported op set."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ModelLoadError(f"{path}: {exc}") from exc
    return parse_model(data, source=str(path))


def parse_model(data: bytes, source: str = "<bytes>") -> OnnxModel:
    try:
        graph_buf = None
        for fieldno, _wire, value in _iter_fields(data):
            if fieldno == 7:
                graph_buf = value
        if graph_buf is None:
            raise _Malformed("no graph")

        nodes: list[OnnxNode] = []
        initializers: dict[str, np.ndarray] = {}
        graph_inputs: list[tuple[str, list[int | None] | None]] = []
        graph_outputs: list[str] = []
        for fieldno, _wire, value in _iter_fields(graph_buf):
            if fieldno == 1:
                nodes.append(_parse_node(value))
            elif fieldno == 5:
                name, arr = _parse_tensor(value)
                initializers[name] = arr
            elif fieldno == 11:
                graph_inputs.append(_parse_value_info(value))
            elif fieldno == 12:
                graph_outputs.append(_parse_value_info(value)[0])
    except _Malformed as exc:
        raise ModelLoadError(f"{source}: not a readable model file ({exc})") from exc

    real_inputs = [(n, s) for n, s in graph_inputs if n not in initializers]
    if len(real_inputs) != 1:
        raise ModelLoadError(f"{source}: expected exactly one input, found {len(real_inputs)}")
    if len(graph_outputs) != 1:
        raise ModelLoadError(f"{source}: expected exactly one output, found {len(graph_outputs)}")
    unsupported = sorted({n.op_type for n in nodes} - set(_OPS))
    if unsupported:
        raise ModelLoadError(f"{source}: unsupported ops {unsupported}")
    if not nodes:
        raise ModelLoadError(f"{source}: graph has no nodes")

    input_name, input_shape = real_inputs[0]
    return OnnxModel(
        nodes=tuple(nodes),
        initializers=initializers,
        input_name=input_name,
        input_shape=tuple(input_shape) if input_shape is not None else None,
        output_name=graph_outputs[0],
    )


# --------------------------------------------------------------------------
# Operators
# --------------------------------------------------------------------------

def _pair(attr, default):
    if attr is None:
        return [default, default]
    return list(attr)


def _op_conv(node: OnnxNode, x: np.ndarray, w: np.ndarray,
             b: np.ndarray | None) -> np.ndarray:
    group = node.attrs.get("group", 1)
    dilations = _pair(node.attrs.get("dilations"), 1)
    if group != 1 or dilations != [1, 1]:
        raise ModelLoadError(f"Conv {node.name!r}: only group=1, dilation=1 supported")
    sh, sw = _pair(node.attrs.get("strides"), 1)
    pads = node.attrs.get("pads") or [0, 0, 0, 0]
    pt, pl, pb, pr = pads
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    m, _c, kh, kw = w.shape
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    n, c, oh, ow = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * oh * ow, c * kh * kw)
    out = cols @ w.reshape(m, -1).T
    if b is not None:
        out = out + b
    return out.reshape(n, oh, ow, m).transpose(0, 3, 1, 2)


def _op_maxpool(node: OnnxNode, x: np.ndarray) -> np.ndarray:
    kh, kw = node.attrs["kernel_shape"]
    sh, sw = _pair(node.attrs.get("strides"), 1)
    pt, pl, pb, pr = node.attrs.get("pads") or [0, 0, 0, 0]
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)),
                constant_values=np.float32(-np.inf))
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    return win.max(axis=(4, 5))


def _op_batchnorm(node: OnnxNode, x, scale, bias, mean, var) -> np.ndarray:
    eps = np.float32(node.attrs.get("epsilon", 1e-5))
    inv = (scale / np.sqrt(var + eps)).astype(np.float32)
    shift = (bias - mean * inv).astype(np.float32)
    return x * inv[:, None, None] + shift[:, None, None]


def _op_gemm(node: OnnxNode, a, b, c=None) -> np.ndarray:
    alpha = np.float32(node.attrs.get("alpha", 1.0))
    beta = np.float32(node.attrs.get("beta", 1.0))
    if node.attrs.get("transA", 0):
        a = a.T
    if node.attrs.get("transB", 0):
        b = b.T
    out = alpha * (a @ b)
    if c is not None:
        out = out + beta * c
    return out


_OPS: dict[str, Callable] = {
    "Conv": lambda node, ins: _op_conv(node, ins[0], ins[1], ins[2] if len(ins) > 2 else None),
    "BatchNormalization": lambda node, ins: _op_batchnorm(node, *ins[:5]),
    "Relu": lambda node, ins: np.maximum(ins[0], 0),
    "MaxPool": lambda node, ins: _op_maxpool(node, ins[0]),
    "Add": lambda node, ins: ins[0] + ins[1],
    "GlobalAveragePool": lambda node, ins: ins[0].mean(axis=(2, 3), keepdims=True,
                                                       dtype=np.float32),
    "Flatten": lambda node, ins: _op_flatten(node, ins[0]),
    "Gemm": lambda node, ins: _op_gemm(node, *ins),
    "Identity": lambda node, ins: ins[0],
}


def _op_flatten(node: OnnxNode, x: np.ndarray) -> np.ndarray:
    axis = node.attrs.get("axis", 1)
    lead = int(np.prod(x.shape[:axis])) if axis > 0 else 1
    return x.reshape(lead, -1)


def run(model: OnnxModel, x: np.ndarray) -> np.ndarray:
    """Execute the graph on one input tensor; returns the sole output."""
    env: dict[str, np.ndarray] = dict(model.initializers)
    env[model.input_name] = np.asarray(x, dtype=np.float32)
    for node in model.nodes:
        ins = [env[name] for name in node.inputs if name]
        try:
            result = _OPS[node.op_type](node, ins)
        except ModelLoadError:
            raise
        except Exception as exc:  # malformed graph wiring, bad shapes
            raise ModelLoadError(f"{node.op_type} {node.name!r} failed: {exc}") from exc
        env[node.outputs[0]] = result
    return env[model.output_name]
