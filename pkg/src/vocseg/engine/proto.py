"""Minimal ONNX protobuf reader/writer.

Covers the subset of ModelProto needed by the bundled graphs: nodes with
scalar/ints attributes, float32/int64 initializers (raw_data or typed
fields), and tensor-valued graph inputs/outputs with symbolic dims. No
dependency on the `onnx` or `protobuf` packages.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

# TensorProto.DataType values we understand
DT_FLOAT = 1
DT_INT32 = 6
DT_INT64 = 7

_NUMPY_DTYPE = {DT_FLOAT: np.float32, DT_INT32: np.int32, DT_INT64: np.int64}
_DTYPE_CODE = {np.dtype(np.float32): DT_FLOAT, np.dtype(np.int32): DT_INT32,
               np.dtype(np.int64): DT_INT64}


class OnnxFormatError(ValueError):
    pass


@dataclass
class Node:
    op_type: str
    inputs: list[str]
    outputs: list[str]
    name: str = ""
    attrs: dict = field(default_factory=dict)


@dataclass
class TensorInfo:
    name: str
    elem_type: int
    # each dim is an int, a string (symbolic), or None (unknown)
    dims: list = field(default_factory=list)


@dataclass
class Graph:
    nodes: list[Node]
    initializers: dict[str, np.ndarray]
    inputs: list[TensorInfo]
    outputs: list[TensorInfo]
    name: str = "graph"


# ---------------------------------------------------------------- decoding

def _read_varint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(buf):
            raise OnnxFormatError("truncated varint")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise OnnxFormatError("varint too long")


def _iter_fields(buf: bytes):
    """Yield (field_number, wire_type, value) triples from a message."""
    pos = 0
    while pos < len(buf):
        key, pos = _read_varint(buf, pos)
        fnum, wtype = key >> 3, key & 7
        if wtype == 0:
            val, pos = _read_varint(buf, pos)
        elif wtype == 1:
            val, pos = buf[pos:pos + 8], pos + 8
        elif wtype == 2:
            ln, pos = _read_varint(buf, pos)
            val, pos = buf[pos:pos + ln], pos + ln
        elif wtype == 5:
            val, pos = buf[pos:pos + 4], pos + 4
        else:
            raise OnnxFormatError(f"unsupported wire type {wtype}")
        yield fnum, wtype, val


def _signed(v: int) -> int:
    # protobuf int64 varints are two's complement
    return v - (1 << 64) if v >= (1 << 63) else v


def _packed_varints(buf: bytes) -> list[int]:
    out, pos = [], 0
    while pos < len(buf):
        v, pos = _read_varint(buf, pos)
        out.append(_signed(v))
    return out


def _parse_tensor(buf: bytes) -> tuple[str, np.ndarray]:
    dims: list[int] = []
    dtype = None
    raw = None
    float_data: list[float] = []
    int64_data: list[int] = []
    int32_data: list[int] = []
    name = ""
    for fnum, wtype, val in _iter_fields(buf):
        if fnum == 1:
            dims.extend(_packed_varints(val) if wtype == 2 else [_signed(val)])
        elif fnum == 2:
            dtype = val
        elif fnum == 4:
            if wtype == 2:
                float_data.extend(struct.unpack(f"<{len(val) // 4}f", val))
            else:
                float_data.append(struct.unpack("<f", val)[0])
        elif fnum == 5:
            int32_data.extend(_packed_varints(val) if wtype == 2 else [_signed(val)])
        elif fnum == 7:
            int64_data.extend(_packed_varints(val) if wtype == 2 else [_signed(val)])
        elif fnum == 8:
            name = val.decode("utf-8")
        elif fnum == 9:
            raw = val
    if dtype not in _NUMPY_DTYPE:
        raise OnnxFormatError(f"initializer '{name}': unsupported data type {dtype}")
    np_dtype = _NUMPY_DTYPE[dtype]
    if raw is not None:
        arr = np.frombuffer(raw, dtype=np.dtype(np_dtype).newbyteorder("<")).astype(np_dtype)
    elif float_data:
        arr = np.asarray(float_data, dtype=np_dtype)
    elif int64_data:
        arr = np.asarray(int64_data, dtype=np_dtype)
    elif int32_data:
        arr = np.asarray(int32_data, dtype=np_dtype)
    else:
        arr = np.zeros(0, dtype=np_dtype)
    return name, arr.reshape(dims)


def _parse_attribute(buf: bytes) -> tuple[str, object]:
    name = ""
    value = None
    ints: list[int] = []
    floats: list[float] = []
    for fnum, wtype, val in _iter_fields(buf):
        if fnum == 1:
            name = val.decode("utf-8")
        elif fnum == 2:
            value = struct.unpack("<f", val)[0]
        elif fnum == 3:
            value = _signed(val)
        elif fnum == 4:
            value = val.decode("utf-8")
        elif fnum == 5:
            value = _parse_tensor(val)[1]
        elif fnum == 7:
            floats.extend(struct.unpack(f"<{len(val) // 4}f", val) if wtype == 2
                          else [struct.unpack("<f", val)[0]])
        elif fnum == 8:
            ints.extend(_packed_varints(val) if wtype == 2 else [_signed(val)])
    if ints:
        value = ints
    elif floats:
        value = floats
    return name, value


def _parse_dim(buf: bytes):
    for fnum, _, val in _iter_fields(buf):
        if fnum == 1:
            return _signed(val)
        if fnum == 2:
            return val.decode("utf-8")
    return None


def _parse_value_info(buf: bytes) -> TensorInfo:
    name = ""
    elem_type = 0
    dims: list = []
    for fnum, _, val in _iter_fields(buf):
        if fnum == 1:
            name = val.decode("utf-8")
        elif fnum == 2:  # TypeProto
            for f2, _, v2 in _iter_fields(val):
                if f2 != 1:  # tensor_type
                    continue
                for f3, _, v3 in _iter_fields(v2):
                    if f3 == 1:
                        elem_type = v3
                    elif f3 == 2:  # shape
                        for f4, _, v4 in _iter_fields(v3):
                            if f4 == 1:
                                dims.append(_parse_dim(v4))
    return TensorInfo(name, elem_type, dims)


def _parse_node(buf: bytes) -> Node:
    node = Node(op_type="", inputs=[], outputs=[])
    for fnum, _, val in _iter_fields(buf):
        if fnum == 1:
            node.inputs.append(val.decode("utf-8"))
        elif fnum == 2:
            node.outputs.append(val.decode("utf-8"))
        elif fnum == 3:
            node.name = val.decode("utf-8")
        elif fnum == 4:
            node.op_type = val.decode("utf-8")
        elif fnum == 5:
            k, v = _parse_attribute(val)
            node.attrs[k] = v
    return node


def _parse_graph(buf: bytes) -> Graph:
    g = Graph(nodes=[], initializers={}, inputs=[], outputs=[])
    for fnum, _, val in _iter_fields(buf):
        if fnum == 1:
            g.nodes.append(_parse_node(val))
        elif fnum == 2:
            g.name = val.decode("utf-8")
        elif fnum == 5:
            name, arr = _parse_tensor(val)
            g.initializers[name] = arr
        elif fnum == 11:
            g.inputs.append(_parse_value_info(val))
        elif fnum == 12:
            g.outputs.append(_parse_value_info(val))
    return g


def load_model(data: bytes) -> Graph:
    """Parse serialized ModelProto bytes into a Graph."""
    graph = None
    for fnum, _, val in _iter_fields(data):
        if fnum == 7:
            graph = _parse_graph(val)
    if graph is None:
        raise OnnxFormatError("no graph found in model file")
    if not graph.nodes:
        raise OnnxFormatError("graph has no nodes")
    return graph


# ---------------------------------------------------------------- encoding

def _varint(v: int) -> bytes:
    if v < 0:
        v += 1 << 64
    out = bytearray()
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _key(fnum: int, wtype: int) -> bytes:
    return _varint((fnum << 3) | wtype)


def _ld(fnum: int, payload: bytes) -> bytes:
    return _key(fnum, 2) + _varint(len(payload)) + payload


def _enc_tensor(name: str, arr: np.ndarray) -> bytes:
    if arr.dtype not in _DTYPE_CODE:
        raise OnnxFormatError(f"cannot encode dtype {arr.dtype}")
    out = bytearray()
    for d in arr.shape:
        out += _key(1, 0) + _varint(d)
    out += _key(2, 0) + _varint(_DTYPE_CODE[arr.dtype])
    out += _ld(8, name.encode("utf-8"))
    out += _ld(9, np.ascontiguousarray(arr).astype(arr.dtype.newbyteorder("<")).tobytes())
    return bytes(out)


def _enc_attr(name: str, value) -> bytes:
    out = bytearray(_ld(1, name.encode("utf-8")))
    if isinstance(value, bool):
        raise OnnxFormatError("bool attribute not supported")
    if isinstance(value, int):
        out += _key(3, 0) + _varint(value)
        out += _key(20, 0) + _varint(2)  # INT
    elif isinstance(value, float):
        out += _key(2, 5) + struct.pack("<f", value)
        out += _key(20, 0) + _varint(1)  # FLOAT
    elif isinstance(value, str):
        out += _ld(4, value.encode("utf-8"))
        out += _key(20, 0) + _varint(3)  # STRING
    elif isinstance(value, (list, tuple)) and all(isinstance(v, int) for v in value):
        payload = b"".join(_varint(v) for v in value)
        out += _ld(8, payload)
        out += _key(20, 0) + _varint(7)  # INTS
    elif isinstance(value, np.ndarray):
        out += _ld(5, _enc_tensor("", value))
        out += _key(20, 0) + _varint(4)  # TENSOR
    else:
        raise OnnxFormatError(f"cannot encode attribute {name}={value!r}")
    return bytes(out)


def _enc_node(node: Node) -> bytes:
    out = bytearray()
    for s in node.inputs:
        out += _ld(1, s.encode("utf-8"))
    for s in node.outputs:
        out += _ld(2, s.encode("utf-8"))
    if node.name:
        out += _ld(3, node.name.encode("utf-8"))
    out += _ld(4, node.op_type.encode("utf-8"))
    for k in sorted(node.attrs):
        out += _ld(5, _enc_attr(k, node.attrs[k]))
    return bytes(out)


def _enc_value_info(info: TensorInfo) -> bytes:
    dims = bytearray()
    for d in info.dims:
        if isinstance(d, str):
            dims += _ld(1, _ld(2, d.encode("utf-8")))
        else:
            dims += _ld(1, _key(1, 0) + _varint(int(d)))
    tensor_type = _key(1, 0) + _varint(info.elem_type) + _ld(2, bytes(dims))
    return _ld(1, info.name.encode("utf-8")) + _ld(2, _ld(1, tensor_type))


def save_model(graph: Graph, opset: int = 13) -> bytes:
    """Serialize a Graph as ModelProto bytes (single default-domain opset)."""
    g = bytearray()
    for node in graph.nodes:
        g += _ld(1, _enc_node(node))
    g += _ld(2, graph.name.encode("utf-8"))
    for name in graph.initializers:
        g += _ld(5, _enc_tensor(name, graph.initializers[name]))
    for info in graph.inputs:
        g += _ld(11, _enc_value_info(info))
    for info in graph.outputs:
        g += _ld(12, _enc_value_info(info))
    model = bytearray()
    model += _key(1, 0) + _varint(8)  # ir_version
    model += _ld(8, _key(2, 0) + _varint(opset))  # opset_import {version}
    model += _ld(2, b"vocseg")  # producer_name
    model += _ld(7, bytes(g))
    return bytes(model)
