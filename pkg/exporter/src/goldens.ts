/** Golden fixture computation: token sequences, tap activations and encoder
 * embeddings, all derived from seeds so both sides can regenerate inputs. */

import { Tokenizer } from "./bpe";
import { backboneForward, Chw, imageEncoderForward, textEncoderForward,
         BackboneWeights, ImageEncoderWeights, TextEncoderWeights } from "./forward";
import { mb32Tensor } from "./rng";

export const GOLDEN_PROMPTS: string[] = (() => {
  const cats = ["person", "dog", "cat", "pizza", "car", "chair", "bird", "cow",
                "dining table", "traffic light"];
  const prompts = cats.map((c) => `a photo of ${c}`);
  const phrase1: Array<[string, string]> = [
    ["dog", "animal"], ["car", "vehicle"], ["pizza", "food"],
    ["chair", "furniture"], ["person", "person"]];
  prompts.push(...phrase1.map(([c, s]) => `a photo of a ${s} such as ${c}`));
  const phrase2: Array<[string, string]> = [
    ["cat", "animal"], ["bus", "vehicle"], ["cake", "food"],
    ["bed", "furniture"], ["sheep", "animal"]];
  prompts.push(...phrase2.map(([c, s]) => `this is a ${c} of a ${s}`));
  prompts.push(
    "a photo of something else", "", "a", "an apple", "it's a dog",
    "Hello, World!", "  spaced   out  ", "MiXeD CaSe TeXt",
    "numbers 1 2 3 4 5", "punctuation?!;:",
    "the quick brown fox jumps over the lazy dog",
    "a photo of a zebra crossing the road at night",
    "unknownword qzxv", "hyphen-ated words work too",
    "café crème", "tabs\tand\nnewlines",
    "a very long sentence " + "with many repeated words ".repeat(12),
    "semicolon; colon: comma, period.",
    "apostrophe's and quotes \"inside\"",
    "9 microwaves 8 ovens 7 toasters",
    "this is a grandstand of a building",
    "a photo of covered stand", "a photo of garbage dump",
    "a photo of grassland", "a photo of eaves",
    "a photo of wine glass", "a photo of teddy bear",
    "a photo of potted plant", "a photo of stop sign",
    "a photo of hair drier");
  if (prompts.length !== 50) throw new Error(`expected 50 prompts, got ${prompts.length}`);
  return prompts;
})();

export const ACTIVATION_FIXTURES = [
  { seed: 101, shape: [1, 3, 64, 64], fullTaps: ["stem_swish", "block16_swish"] },
  { seed: 202, shape: [1, 3, 480, 640], fullTaps: ["block16_swish"] },
];

export const IMAGE_EMBED_SEEDS = [301, 302];
export const TEXT_EMBED_PROMPTS = [
  "a photo of dog", "a photo of something else", "this is a cat of a animal",
];

export function f32ToB64(data: Float32Array): string {
  const view = new DataView(new ArrayBuffer(data.length * 4));
  data.forEach((v, i) => view.setFloat32(i * 4, v, true));
  return Buffer.from(view.buffer).toString("base64");
}

export function tokenGoldens(tok: Tokenizer, contextLength: number) {
  return {
    context_length: contextLength,
    prompts: GOLDEN_PROMPTS.map((text) => ({ text, ids: tok.tokenize(text, contextLength) })),
  };
}

function seedInput(seed: number, shape: number[]): Chw {
  const [, c, h, w] = shape;
  return { c, h, w, data: mb32Tensor(seed, c * h * w) };
}

export function activationGoldens(weights: BackboneWeights) {
  return ACTIVATION_FIXTURES.map(({ seed, shape, fullTaps }) => {
    const { stem, block16 } = backboneForward(weights, seedInput(seed, shape));
    const taps: Record<string, { shape: number[]; data_b64?: string }> = {};
    for (const [name, map] of [["stem_swish", stem], ["block16_swish", block16]] as const) {
      taps[name] = { shape: [1, map.c, map.h, map.w] };
      if (fullTaps.includes(name)) taps[name].data_b64 = f32ToB64(map.data);
    }
    return { seed, input_shape: shape, taps };
  });
}

export function embeddingGoldens(imageWeights: ImageEncoderWeights,
                                 textWeights: TextEncoderWeights, tok: Tokenizer) {
  const image = IMAGE_EMBED_SEEDS.map((seed) => {
    const out = imageEncoderForward(imageWeights, seedInput(seed, [1, 3, 224, 224]));
    return { seed, input_shape: [1, 3, 224, 224],
             output_b64: f32ToB64(out), output_shape: [1, out.length] };
  });
  const text = TEXT_EMBED_PROMPTS.map((prompt) => {
    const ids = tok.tokenize(prompt, textWeights.context);
    const out = textEncoderForward(textWeights, ids);
    return { text: prompt, ids, output_b64: f32ToB64(out), output_shape: [1, out.length] };
  });
  return { image, text };
}
