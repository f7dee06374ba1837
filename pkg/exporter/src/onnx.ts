/** Minimal deterministic ONNX ModelProto writer (protobuf wire format).
 *
 * Covers exactly what the exported graphs need: nodes with int/ints
 * attributes, float32/int64 initializers stored as raw little-endian data,
 * and tensor value-infos with fixed or symbolic dimensions.
 */

export const DT_FLOAT = 1;
export const DT_INT64 = 7;

export type Dim = number | string;

export interface Initializer {
  name: string;
  dims: number[];
  dtype: number;
  data: Float32Array | BigInt64Array;
}

export interface NodeSpec {
  opType: string;
  inputs: string[];
  outputs: string[];
  name?: string;
  attrs?: Record<string, number | number[]>;
}

export interface ValueSpec {
  name: string;
  elemType: number;
  dims: Dim[];
}

export interface GraphSpec {
  name: string;
  nodes: NodeSpec[];
  initializers: Initializer[];
  inputs: ValueSpec[];
  outputs: ValueSpec[];
}

function varint(value: number | bigint): Uint8Array {
  let v = BigInt(value);
  if (v < 0n) v += 1n << 64n;
  const out: number[] = [];
  for (;;) {
    const b = Number(v & 0x7fn);
    v >>= 7n;
    if (v > 0n) {
      out.push(b | 0x80);
    } else {
      out.push(b);
      return Uint8Array.from(out);
    }
  }
}

function key(field: number, wire: number): Uint8Array {
  return varint((field << 3) | wire);
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((acc, p) => acc + p.length, 0);
  const out = new Uint8Array(total);
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

function ld(field: number, payload: Uint8Array): Uint8Array {
  return concat([key(field, 2), varint(payload.length), payload]);
}

function ldText(field: number, text: string): Uint8Array {
  return ld(field, new TextEncoder().encode(text));
}

function rawBytes(data: Float32Array | BigInt64Array): Uint8Array {
  // explicit little-endian copy so output is platform independent
  if (data instanceof Float32Array) {
    const buf = new DataView(new ArrayBuffer(data.length * 4));
    data.forEach((v, i) => buf.setFloat32(i * 4, v, true));
    return new Uint8Array(buf.buffer);
  }
  const buf = new DataView(new ArrayBuffer(data.length * 8));
  let i = 0;
  for (const v of data) buf.setBigInt64(i++ * 8, v, true);
  return new Uint8Array(buf.buffer);
}

function encodeTensor(init: Initializer): Uint8Array {
  const parts: Uint8Array[] = [];
  for (const d of init.dims) parts.push(concat([key(1, 0), varint(d)]));
  parts.push(concat([key(2, 0), varint(init.dtype)]));
  parts.push(ldText(8, init.name));
  parts.push(ld(9, rawBytes(init.data)));
  return concat(parts);
}

function encodeAttr(name: string, value: number | number[]): Uint8Array {
  const parts: Uint8Array[] = [ldText(1, name)];
  if (Array.isArray(value)) {
    parts.push(ld(8, concat(value.map((v) => varint(v)))));
    parts.push(concat([key(20, 0), varint(7)])); // INTS
  } else {
    parts.push(concat([key(3, 0), varint(value)]));
    parts.push(concat([key(20, 0), varint(2)])); // INT
  }
  return concat(parts);
}

function encodeNode(node: NodeSpec): Uint8Array {
  const parts: Uint8Array[] = [];
  for (const s of node.inputs) parts.push(ldText(1, s));
  for (const s of node.outputs) parts.push(ldText(2, s));
  if (node.name) parts.push(ldText(3, node.name));
  parts.push(ldText(4, node.opType));
  const attrs = node.attrs ?? {};
  for (const k of Object.keys(attrs).sort()) {
    parts.push(ld(5, encodeAttr(k, attrs[k])));
  }
  return concat(parts);
}

function encodeValueInfo(info: ValueSpec): Uint8Array {
  const dims: Uint8Array[] = [];
  for (const d of info.dims) {
    if (typeof d === "string") {
      dims.push(ld(1, ldText(2, d)));
    } else {
      dims.push(ld(1, concat([key(1, 0), varint(d)])));
    }
  }
  const tensorType = concat([key(1, 0), varint(info.elemType), ld(2, concat(dims))]);
  return concat([ldText(1, info.name), ld(2, ld(1, tensorType))]);
}

export function saveModel(graph: GraphSpec, opset = 13): Uint8Array {
  const g: Uint8Array[] = [];
  for (const node of graph.nodes) g.push(ld(1, encodeNode(node)));
  g.push(ldText(2, graph.name));
  for (const init of graph.initializers) g.push(ld(5, encodeTensor(init)));
  for (const info of graph.inputs) g.push(ld(11, encodeValueInfo(info)));
  for (const info of graph.outputs) g.push(ld(12, encodeValueInfo(info)));
  return concat([
    concat([key(1, 0), varint(8)]), // ir_version
    ld(8, concat([key(2, 0), varint(opset)])), // opset_import { version }
    ldText(2, "vocseg"), // producer_name
    ld(7, concat(g)),
  ]);
}
