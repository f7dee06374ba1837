/** Graph construction for the three exported models.
 *
 * Weights come from per-model seeded RNG streams, so the whole export is
 * reproducible byte for byte. The backbone mirrors the reference tap
 * structure: a stride-2 stem tapped at 32 channels and a stride-32 final
 * block tapped at 320 channels, Swish activations throughout. The encoders
 * map to the shared 512-d embedding space.
 */

import { BackboneWeights, ImageEncoderWeights, TextEncoderWeights } from "./forward";
import { DT_FLOAT, DT_INT64, GraphSpec, Initializer, NodeSpec } from "./onnx";
import { heTensor, mulberry32, normalTensor } from "./rng";

export const EMBED_DIM = 512;
export const TEXT_DIM = 48;
export const CONTEXT = 77;
export const LOGIT_SCALE = 100.0;

export const SEEDS = { backbone: 1001, imageEncoder: 1002, textEncoder: 1003 };

const BACKBONE_CHANNELS = [3, 32, 48, 64, 96, 320];

function swishNodes(prefix: string, src: string, dst: string): NodeSpec[] {
  return [
    { opType: "Sigmoid", inputs: [src], outputs: [`${prefix}_sig`] },
    { opType: "Mul", inputs: [src, `${prefix}_sig`], outputs: [dst] },
  ];
}

export interface BuiltModel {
  graph: GraphSpec;
  sidecar: Record<string, unknown>;
}

export function buildBackbone(): BuiltModel & { weights: BackboneWeights } {
  const rand = mulberry32(SEEDS.backbone);
  const nodes: NodeSpec[] = [];
  const initializers: Initializer[] = [];
  const convs: BackboneWeights["convs"] = [];
  let src = "pixel_values";
  for (let i = 0; i < 5; i++) {
    const cin = BACKBONE_CHANNELS[i];
    const cout = BACKBONE_CHANNELS[i + 1];
    const w = heTensor(rand, cout * cin * 9, cin * 9);
    const b = new Float32Array(cout);
    convs.push({ w, b, cin, cout });
    initializers.push({ name: `conv${i}_w`, dims: [cout, cin, 3, 3], dtype: DT_FLOAT, data: w });
    initializers.push({ name: `conv${i}_b`, dims: [cout], dtype: DT_FLOAT, data: b });
    nodes.push({
      opType: "Conv",
      inputs: [src, `conv${i}_w`, `conv${i}_b`],
      outputs: [`conv${i}_out`],
      name: `conv${i}`,
      attrs: { strides: [2, 2], pads: [1, 1, 1, 1], kernel_shape: [3, 3] },
    });
    const act = i === 0 ? "stem_swish" : i === 4 ? "block16_swish" : `act${i}`;
    nodes.push(...swishNodes(`act${i}`, `conv${i}_out`, act));
    src = act;
  }
  const graph: GraphSpec = {
    name: "backbone",
    nodes,
    initializers,
    inputs: [{ name: "pixel_values", elemType: DT_FLOAT, dims: [1, 3, "h", "w"] }],
    outputs: [
      { name: "stem_swish", elemType: DT_FLOAT, dims: [1, 32, "h2", "w2"] },
      { name: "block16_swish", elemType: DT_FLOAT, dims: [1, 320, "h32", "w32"] },
    ],
  };
  const sidecar = {
    schema_version: 1,
    input: {
      h: null, w: null, channels: 3,
      mean: [0.485, 0.456, 0.406], std: [0.229, 0.224, 0.225],
      resize_policy: "none",
    },
    taps: ["stem_swish", "block16_swish"],
  };
  return { graph, sidecar, weights: { convs } };
}

export function buildImageEncoder(): BuiltModel & { weights: ImageEncoderWeights } {
  const rand = mulberry32(SEEDS.imageEncoder);
  const convW = heTensor(rand, 32 * 3 * 32 * 32, 3 * 32 * 32);
  const convB = new Float32Array(32);
  const fcW = heTensor(rand, 32 * 7 * 7 * EMBED_DIM, 32 * 7 * 7);
  const graph: GraphSpec = {
    name: "clip_image",
    nodes: [
      {
        opType: "Conv",
        inputs: ["pixel_values", "conv_w", "conv_b"],
        outputs: ["conv_out"],
        attrs: { strides: [32, 32], pads: [0, 0, 0, 0], kernel_shape: [32, 32] },
      },
      ...swishNodes("act", "conv_out", "act_out"),
      { opType: "Flatten", inputs: ["act_out"], outputs: ["flat"], attrs: { axis: 1 } },
      { opType: "MatMul", inputs: ["flat", "fc_w"], outputs: ["embedding"] },
    ],
    initializers: [
      { name: "conv_w", dims: [32, 3, 32, 32], dtype: DT_FLOAT, data: convW },
      { name: "conv_b", dims: [32], dtype: DT_FLOAT, data: convB },
      { name: "fc_w", dims: [32 * 7 * 7, EMBED_DIM], dtype: DT_FLOAT, data: fcW },
    ],
    inputs: [{ name: "pixel_values", elemType: DT_FLOAT, dims: [1, 3, 224, 224] }],
    outputs: [{ name: "embedding", elemType: DT_FLOAT, dims: [1, EMBED_DIM] }],
  };
  const sidecar = {
    schema_version: 1,
    input: {
      h: 224, w: 224, channels: 3,
      mean: [0.48145466, 0.4578275, 0.40821073],
      std: [0.26862954, 0.26130258, 0.27577711],
      resize_policy: "shorter_center_crop",
    },
    taps: ["embedding"],
    logit_scale: LOGIT_SCALE,
  };
  return { graph, sidecar, weights: { convW, convB, fcW } };
}

export function buildTextEncoder(vocabSize: number): BuiltModel & { weights: TextEncoderWeights } {
  const rand = mulberry32(SEEDS.textEncoder);
  const tokEmb = normalTensor(rand, vocabSize * TEXT_DIM, 0.05);
  const posEmb = normalTensor(rand, CONTEXT * TEXT_DIM, 0.05);
  const mixW = heTensor(rand, TEXT_DIM * TEXT_DIM, TEXT_DIM);
  const outW = heTensor(rand, TEXT_DIM * EMBED_DIM, TEXT_DIM);
  const graph: GraphSpec = {
    name: "clip_text",
    nodes: [
      { opType: "Gather", inputs: ["tok_emb", "input_ids"], outputs: ["tok"], attrs: { axis: 0 } },
      { opType: "Add", inputs: ["tok", "pos_emb"], outputs: ["h0"] },
      { opType: "MatMul", inputs: ["h0", "mix_w"], outputs: ["h1"] },
      ...swishNodes("act", "h1", "h1s"),
      { opType: "ReduceMean", inputs: ["h1s"], outputs: ["pooled"], attrs: { axes: [1], keepdims: 1 } },
      { opType: "Add", inputs: ["h1s", "pooled"], outputs: ["mixed"] },
      { opType: "ArgMax", inputs: ["input_ids"], outputs: ["eot_pos"], attrs: { axis: 1, keepdims: 0 } },
      { opType: "Gather", inputs: ["mixed", "eot_pos"], outputs: ["eot_h"], attrs: { axis: 1 } },
      { opType: "Reshape", inputs: ["eot_h", "flat_shape"], outputs: ["flat"] },
      { opType: "MatMul", inputs: ["flat", "out_w"], outputs: ["embedding"] },
    ],
    initializers: [
      { name: "tok_emb", dims: [vocabSize, TEXT_DIM], dtype: DT_FLOAT, data: tokEmb },
      { name: "pos_emb", dims: [CONTEXT, TEXT_DIM], dtype: DT_FLOAT, data: posEmb },
      { name: "mix_w", dims: [TEXT_DIM, TEXT_DIM], dtype: DT_FLOAT, data: mixW },
      { name: "out_w", dims: [TEXT_DIM, EMBED_DIM], dtype: DT_FLOAT, data: outW },
      { name: "flat_shape", dims: [2], dtype: DT_INT64, data: BigInt64Array.from([1n, BigInt(TEXT_DIM)]) },
    ],
    inputs: [{ name: "input_ids", elemType: DT_INT64, dims: [1, CONTEXT] }],
    outputs: [{ name: "embedding", elemType: DT_FLOAT, dims: [1, EMBED_DIM] }],
  };
  const sidecar = {
    schema_version: 1,
    input: { h: null, w: null, channels: 3, mean: [], std: [], resize_policy: "none" },
    taps: ["embedding"],
    logit_scale: LOGIT_SCALE,
    context_length: CONTEXT,
  };
  return {
    graph, sidecar,
    weights: { tokEmb, posEmb, mixW, outW, d: TEXT_DIM, context: CONTEXT },
  };
}
