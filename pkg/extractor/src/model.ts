/**
 * Feature backbones. Two sources:
 *
 * - pretrained weights loaded from a local tfjs model directory (either a
 *   layers-model or a graph-model export; the standard model.json +
 *   weight-shard layout),
 * - an explicitly requested synthetic stand-in with the registered input
 *   size and penultimate width, for pipeline testing on machines without
 *   the pretrained weights. It is seeded per model name and deterministic,
 *   but its features carry no ImageNet knowledge.
 */

import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import * as tf from "@tensorflow/tfjs";
import type { ModelSpec } from "./registry.js";

export interface FeatureBackbone {
  /** [n, size, size, 3] -> [n, width] (spatial outputs are average-pooled) */
  predict(batch: tf.Tensor4D): tf.Tensor2D;
  dispose(): void;
}

function pooled(out: tf.Tensor): tf.Tensor2D {
  if (out.rank === 4) {
    return tf.mean(out, [1, 2]) as tf.Tensor2D;
  }
  if (out.rank === 2) {
    return out as tf.Tensor2D;
  }
  throw new Error(`unsupported model output rank ${out.rank}`);
}

async function artifactsFromDir(dir: string): Promise<tf.io.ModelArtifacts> {
  const modelJson = JSON.parse(readFileSync(join(dir, "model.json"), "utf8"));
  const manifest = modelJson.weightsManifest ?? [];
  const weightSpecs: tf.io.WeightsManifestEntry[] = [];
  const buffers: Buffer[] = [];
  for (const group of manifest) {
    weightSpecs.push(...group.weights);
    for (const path of group.paths) {
      buffers.push(readFileSync(join(dir, path)));
    }
  }
  const weightData = Buffer.concat(buffers);
  return {
    modelTopology: modelJson.modelTopology,
    format: modelJson.format,
    generatedBy: modelJson.generatedBy,
    convertedBy: modelJson.convertedBy,
    weightSpecs,
    weightData: weightData.buffer.slice(
      weightData.byteOffset,
      weightData.byteOffset + weightData.byteLength,
    ),
  };
}

export async function loadBackboneFromDir(dir: string): Promise<FeatureBackbone> {
  const artifacts = await artifactsFromDir(dir);
  const handler = tf.io.fromMemory(artifacts);
  const model =
    artifacts.format === "graph-model"
      ? await tf.loadGraphModel(handler)
      : await tf.loadLayersModel(handler);
  return {
    predict: (batch) =>
      tf.tidy(() => pooled(model.predict(batch) as tf.Tensor)),
    dispose: () => model.dispose(),
  };
}

/** fnv-1a, for a stable per-model-name seed */
function nameSeed(name: string): number {
  let h = 0x811c9dc5;
  for (const ch of name) {
    h ^= ch.charCodeAt(0);
    h = Math.imul(h, 0x01000193);
  }
  return h >>> 0;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const SYNTH_GRID = 8; // images are pooled to an 8x8x3 patch before projection

export function buildSyntheticBackbone(spec: ModelSpec): FeatureBackbone {
  const inDim = SYNTH_GRID * SYNTH_GRID * 3;
  const rand = mulberry32(nameSeed(spec.name));
  const bound = Math.sqrt(6.0 / (inDim + spec.width));
  const wData = new Float32Array(inDim * spec.width);
  for (let i = 0; i < wData.length; i++) {
    wData[i] = (2.0 * rand() - 1.0) * bound;
  }
  const W = tf.tensor2d(wData, [inDim, spec.width]);
  return {
    predict: (batch) =>
      tf.tidy(() => {
        const small = tf.image.resizeBilinear(batch, [SYNTH_GRID, SYNTH_GRID]);
        const flat = small.reshape([batch.shape[0], inDim]);
        return tf.tanh(flat.matMul(W)) as tf.Tensor2D;
      }),
    dispose: () => W.dispose(),
  };
}
