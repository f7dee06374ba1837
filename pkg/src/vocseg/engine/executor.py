"""Numpy evaluator for the bundled ONNX graphs.

Implements the op subset the export tool emits (Conv, Sigmoid, Mul, Add,
MatMul, Reshape, Flatten, Gather, ArgMax, ReduceMean). Graphs are executed
node by node in file order, which ONNX requires to be topological.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .proto import Graph, Node


class GraphExecutionError(RuntimeError):
    """Raised when a graph cannot be evaluated on the given feeds."""


def _conv2d(x: np.ndarray, w: np.ndarray, b, attrs: dict) -> np.ndarray:
    if x.ndim != 4:
        raise GraphExecutionError(f"Conv expects NCHW input, got shape {x.shape}")
    strides = attrs.get("strides", [1, 1])
    pads = attrs.get("pads", [0, 0, 0, 0])  # top, left, bottom, right
    if attrs.get("group", 1) != 1 or attrs.get("dilations", [1, 1]) != [1, 1]:
        raise GraphExecutionError("Conv: only group=1, dilation=1 supported")
    n, cin, h, win = x.shape
    cout, cin_w, kh, kw = w.shape
    if cin != cin_w:
        raise GraphExecutionError(f"Conv: input has {cin} channels, weight expects {cin_w}")
    sh, sw = strides
    pt, pl, pb, pr = pads
    xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    oh = (h + pt + pb - kh) // sh + 1
    ow = (win + pl + pr - kw) // sw + 1
    # im2col: one matmul per batch element
    wmat = w.reshape(cout, cin * kh * kw).T.astype(np.float32)
    out = np.empty((n, cout, oh, ow), dtype=np.float32)
    for i in range(n):
        cols = np.empty((cin, kh, kw, oh, ow), dtype=np.float32)
        for ky in range(kh):
            for kx in range(kw):
                cols[:, ky, kx] = xp[i, :, ky:ky + sh * oh:sh, kx:kx + sw * ow:sw]
        flat = cols.reshape(cin * kh * kw, oh * ow)
        out[i] = (flat.T @ wmat).T.reshape(cout, oh, ow)
    if b is not None:
        out += b.reshape(1, cout, 1, 1)
    return out


def _reshape(x: np.ndarray, shape: np.ndarray) -> np.ndarray:
    target = []
    for i, d in enumerate(shape.tolist()):
        target.append(x.shape[i] if d == 0 else int(d))
    return x.reshape(target)


def _flatten(x: np.ndarray, attrs: dict) -> np.ndarray:
    axis = attrs.get("axis", 1)
    lead = int(np.prod(x.shape[:axis], dtype=np.int64)) if axis > 0 else 1
    return x.reshape(lead, -1)


def _reduce_mean(x: np.ndarray, attrs: dict) -> np.ndarray:
    axes = tuple(attrs.get("axes", range(x.ndim)))
    return np.mean(x, axis=axes, keepdims=bool(attrs.get("keepdims", 1)))


def _argmax(x: np.ndarray, attrs: dict) -> np.ndarray:
    axis = attrs.get("axis", 0)
    out = np.argmax(x, axis=axis).astype(np.int64)
    if attrs.get("keepdims", 1):
        out = np.expand_dims(out, axis)
    return out


class GraphRunner:
    """Evaluates a parsed Graph on named feeds."""

    def __init__(self, graph: Graph):
        self.graph = graph
        self.input_names = [i.name for i in graph.inputs if i.name not in graph.initializers]
        known = set(graph.initializers)
        for info in graph.inputs:
            known.add(info.name)
        for node in graph.nodes:
            known.update(node.outputs)
        self.value_names = known

    def run(self, feeds: dict[str, np.ndarray], fetch: list[str]) -> dict[str, np.ndarray]:
        missing = [n for n in self.input_names if n not in feeds]
        if missing:
            raise GraphExecutionError(f"missing graph inputs: {missing}")
        unknown = [n for n in fetch if n not in self.value_names]
        if unknown:
            raise GraphExecutionError(
                f"unknown outputs {unknown}; graph produces {sorted(self.value_names)}")
        env: dict[str, np.ndarray] = dict(self.graph.initializers)
        env.update(feeds)
        wanted = set(fetch)
        produced = {}
        for node in self.graph.nodes:
            try:
                self._eval_node(node, env)
            except GraphExecutionError:
                raise
            except Exception as exc:  # surface engine diagnostics with node context
                raise GraphExecutionError(
                    f"node '{node.name or node.op_type}' ({node.op_type}) failed: {exc}") from exc
            for out in node.outputs:
                if out in wanted:
                    produced[out] = env[out]
            if wanted.issubset(produced):
                break
        for name in fetch:
            if name not in produced:
                if name in env:  # e.g. fetching an input or initializer
                    produced[name] = env[name]
                else:
                    raise GraphExecutionError(f"output '{name}' was never produced")
        return {name: produced[name] for name in fetch}

    def _eval_node(self, node: Node, env: dict) -> None:
        op = node.op_type
        ins = [env[n] for n in node.inputs]
        if op == "Conv":
            out = _conv2d(ins[0], ins[1], ins[2] if len(ins) > 2 else None, node.attrs)
        elif op == "Sigmoid":
            out = expit(ins[0])
        elif op == "Mul":
            out = ins[0] * ins[1]
        elif op == "Add":
            out = ins[0] + ins[1]
        elif op == "MatMul":
            out = ins[0] @ ins[1]
        elif op == "Reshape":
            out = _reshape(ins[0], ins[1])
        elif op == "Flatten":
            out = _flatten(ins[0], node.attrs)
        elif op == "Gather":
            out = np.take(ins[0], ins[1].astype(np.int64), axis=node.attrs.get("axis", 0))
        elif op == "ArgMax":
            out = _argmax(ins[0], node.attrs)
        elif op == "ReduceMean":
            out = _reduce_mean(ins[0], node.attrs)
        else:
            raise GraphExecutionError(f"unsupported op type '{op}'")
        env[node.outputs[0]] = out
