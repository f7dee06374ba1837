/** Export entry point: writes the model set, sidecars, BPE assets and golden
 * fixtures, then a hash manifest. Aborts if any self-check fails. */

import { createHash } from "crypto";
import { mkdirSync, readFileSync, writeFileSync } from "fs";
import { dirname, join, relative, resolve } from "path";

import { buildAssets, mergesFileText, vocabFileText, Tokenizer, CONTEXT_LENGTH } from "./bpe";
import { activationGoldens, embeddingGoldens, tokenGoldens } from "./goldens";
import { buildBackbone, buildImageEncoder, buildTextEncoder } from "./models";
import { GraphSpec, saveModel } from "./onnx";

function stableJson(value: unknown, indent = 1): string {
  return JSON.stringify(value, null, indent) + "\n";
}

function checkTaps(graph: GraphSpec, taps: string[]): void {
  const produced = new Set<string>();
  for (const node of graph.nodes) node.outputs.forEach((o) => produced.add(o));
  for (const tap of taps) {
    if (!produced.has(tap)) {
      throw new Error(`tap '${tap}' not produced by graph '${graph.name}'`);
    }
  }
}

function checkFinite(name: string, data: Float32Array): void {
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i])) throw new Error(`${name}: non-finite value at ${i}`);
  }
}

export function exportAll(outDir: string): Record<string, string> {
  const assetsDir = resolve(__dirname, "..", "assets");
  const corpus = readFileSync(join(assetsDir, "corpus.txt"), "utf-8");
  const assets = buildAssets(corpus);
  const tok = new Tokenizer(assets);

  const backbone = buildBackbone();
  const imageEnc = buildImageEncoder();
  const textEnc = buildTextEncoder(assets.vocab.size);
  checkTaps(backbone.graph, ["stem_swish", "block16_swish"]);
  checkTaps(imageEnc.graph, ["embedding"]);
  checkTaps(textEnc.graph, ["embedding"]);
  for (const conv of backbone.weights.convs) checkFinite("backbone", conv.w);

  const files = new Map<string, Uint8Array | string>();
  files.set("backbone.onnx", saveModel(backbone.graph));
  files.set("backbone.meta.json", stableJson(backbone.sidecar, 2));
  files.set("clip_image.onnx", saveModel(imageEnc.graph));
  files.set("clip_image.meta.json", stableJson(imageEnc.sidecar, 2));
  files.set("clip_text.onnx", saveModel(textEnc.graph));
  files.set("clip_text.meta.json", stableJson(textEnc.sidecar, 2));
  files.set("bpe/merges.txt", mergesFileText(assets));
  files.set("bpe/vocab.json", vocabFileText(assets));

  const tokens = tokenGoldens(tok, CONTEXT_LENGTH);
  for (const entry of tokens.prompts) {
    if (entry.ids.length !== CONTEXT_LENGTH) throw new Error("golden length drift");
    if (Math.max(...entry.ids) >= assets.vocab.size) throw new Error("golden id overflow");
  }
  files.set("goldens/tokens.golden.json", stableJson(tokens));
  files.set("goldens/activations.golden.json",
            stableJson(activationGoldens(backbone.weights)));
  files.set("goldens/embeddings.golden.json",
            stableJson(embeddingGoldens(imageEnc.weights, textEnc.weights, tok)));

  const manifest: Record<string, string> = {};
  for (const [rel, content] of files) {
    const path = join(outDir, rel);
    mkdirSync(dirname(path), { recursive: true });
    const bytes = typeof content === "string" ? Buffer.from(content, "utf-8") : content;
    writeFileSync(path, bytes);
    manifest[rel] = createHash("sha256").update(bytes).digest("hex");
  }
  const manifestText = stableJson(
    Object.fromEntries(Object.entries(manifest).sort(([a], [b]) => (a < b ? -1 : 1))));
  writeFileSync(join(outDir, "MANIFEST.json"), manifestText);
  return manifest;
}

if (require.main === module) {
  const out = process.argv[2] ?? resolve(__dirname, "..", "..", "models");
  const manifest = exportAll(out);
  const n = Object.keys(manifest).length;
  console.log(`exported ${n} files + MANIFEST.json to ${relative(process.cwd(), out) || out}`);
}
