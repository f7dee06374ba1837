import { readFileSync } from "fs";
import { join, resolve } from "path";
import { describe, expect, it } from "vitest";

import { buildAssets, Tokenizer } from "../src/bpe";
import { conv2d, swishInPlace, vecMatMul } from "../src/forward";
import { activationGoldens, embeddingGoldens } from "../src/goldens";
import { buildBackbone, buildImageEncoder, buildTextEncoder } from "../src/models";

const MODELS = resolve(__dirname, "..", "..", "models");
const corpus = readFileSync(resolve(__dirname, "..", "assets", "corpus.txt"), "utf-8");

describe("reference ops", () => {
  it("swish fixes zero and matches the closed form", () => {
    const x = Float32Array.from([0, 1, -1]);
    swishInPlace(x);
    expect(x[0]).toBe(0);
    expect(x[1]).toBeCloseTo(0.731058, 5);
    expect(x[2]).toBeCloseTo(-0.268941, 5);
  });

  it("conv with a centered identity kernel reproduces the input", () => {
    const data = Float32Array.from({ length: 25 }, (_, i) => i - 12);
    const weight = new Float32Array(9);
    weight[4] = 1; // center of the 3x3 kernel
    const out = conv2d({ c: 1, h: 5, w: 5, data }, weight, new Float32Array(1), 1, 3, 3, 1, 1);
    expect(Array.from(out.data)).toEqual(Array.from(data));
  });

  it("conv stride-2 hand case", () => {
    // 1x4x4 input of ones, 2x2 kernel of ones, stride 2, no padding -> all 4
    const out = conv2d({ c: 1, h: 4, w: 4, data: new Float32Array(16).fill(1) },
                       new Float32Array(4).fill(1), new Float32Array(1), 1, 2, 2, 2, 0);
    expect(out.h).toBe(2);
    expect(out.w).toBe(2);
    expect(Array.from(out.data)).toEqual([4, 4, 4, 4]);
  });

  it("vecMatMul matches a hand computation", () => {
    const v = Float32Array.from([1, 2]);
    const w = Float32Array.from([1, 0, 3, 0, 1, -1]); // 2x3 row-major
    expect(Array.from(vecMatMul(v, w, 2, 3))).toEqual([1, 2, 1]);
  });
});

describe("regenerated goldens match the committed fixtures", () => {
  it("activation goldens", () => {
    const committed = JSON.parse(
      readFileSync(join(MODELS, "goldens/activations.golden.json"), "utf-8"));
    const regenerated = activationGoldens(buildBackbone().weights);
    expect(regenerated).toEqual(committed);
  });

  it("embedding goldens", () => {
    const committed = JSON.parse(
      readFileSync(join(MODELS, "goldens/embeddings.golden.json"), "utf-8"));
    const assets = buildAssets(corpus);
    const regenerated = embeddingGoldens(buildImageEncoder().weights,
                                         buildTextEncoder(assets.vocab.size).weights,
                                         new Tokenizer(assets));
    expect(regenerated).toEqual(committed);
  });

  it("backbone tap shapes follow the stride law on the 480x640 fixture", () => {
    const committed = JSON.parse(
      readFileSync(join(MODELS, "goldens/activations.golden.json"), "utf-8"));
    const entry = committed.find((e: any) => e.input_shape[2] === 480);
    expect(entry.taps.stem_swish.shape).toEqual([1, 32, 240, 320]);
    expect(entry.taps.block16_swish.shape).toEqual([1, 320, 15, 20]);
  });
});
