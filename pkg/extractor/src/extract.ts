/**
 * Walk a class-per-subfolder image directory, run the backbone over every
 * decodable image in sorted (class folder, filename) order, and write one
 * PRPLFS01 feature row per image. Labels are the sorted-folder indices.
 */

import { readdirSync } from "node:fs";
import { basename, join, resolve } from "node:path";
import * as tf from "@tensorflow/tfjs";
import { decodeImageFile, toModelInput } from "./images.js";
import {
  buildSyntheticBackbone,
  loadBackboneFromDir,
  type FeatureBackbone,
} from "./model.js";
import { writeFeatureFile } from "./prplfs.js";
import { lookupModel } from "./registry.js";

export interface ExtractOptions {
  model: string;
  imagesDir: string;
  outPath: string;
  batchSize?: number;
  /** directory holding a tfjs model.json + weight shards */
  weightsDir?: string;
  /** explicit opt-in stand-in backbone when pretrained weights are absent */
  syntheticWeights?: boolean;
  domainId?: string;
  log?: (line: string) => void;
}

export interface ExtractSummary {
  outPath: string;
  n: number;
  d: number;
  numClasses: number;
  skipped: number;
}

interface Item {
  path: string;
  label: number;
}

function listItems(imagesDir: string): { items: Item[]; classes: string[] } {
  let entries;
  try {
    entries = readdirSync(imagesDir, { withFileTypes: true });
  } catch (err) {
    throw new Error(`cannot read images directory ${imagesDir}: ${err}`);
  }
  const classes = entries
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort();
  if (classes.length === 0) {
    throw new Error(`${imagesDir} has no class subdirectories`);
  }
  const items: Item[] = [];
  classes.forEach((cls, label) => {
    const files = readdirSync(join(imagesDir, cls), { withFileTypes: true })
      .filter((e) => e.isFile())
      .map((e) => e.name)
      .sort();
    for (const f of files) {
      items.push({ path: join(imagesDir, cls, f), label });
    }
  });
  if (items.length === 0) {
    throw new Error(`${imagesDir} contains no files`);
  }
  return { items, classes };
}

async function makeBackbone(opts: ExtractOptions): Promise<FeatureBackbone> {
  const spec = lookupModel(opts.model);
  if (opts.weightsDir) {
    return loadBackboneFromDir(opts.weightsDir);
  }
  if (opts.syntheticWeights) {
    return buildSyntheticBackbone(spec);
  }
  throw new Error(
    `no pretrained weights for '${spec.name}': pass --weights <dir> with a ` +
      `tfjs export, or --synthetic-weights for a deterministic stand-in`,
  );
}

export async function extract(opts: ExtractOptions): Promise<ExtractSummary> {
  const spec = lookupModel(opts.model);
  const batchSize = opts.batchSize ?? 16;
  if (batchSize < 1) {
    throw new Error(`batch size must be >= 1, got ${batchSize}`);
  }
  const log = opts.log ?? ((line: string) => process.stderr.write(line + "\n"));
  const { items, classes } = listItems(opts.imagesDir);

  const backbone = await makeBackbone(opts);
  const rows: Float32Array[] = [];
  const labels: number[] = [];
  let skipped = 0;
  let width = -1;
  try {
    for (let start = 0; start < items.length; start += batchSize) {
      const chunk = items.slice(start, start + batchSize);
      const tensors: tf.Tensor3D[] = [];
      const chunkLabels: number[] = [];
      for (const item of chunk) {
        try {
          const img = decodeImageFile(item.path);
          tensors.push(toModelInput(img, spec.inputSize, spec.preprocess));
          chunkLabels.push(item.label);
        } catch (err) {
          skipped += 1;
          log(`warning: skipping ${item.path}: ${(err as Error).message}`);
        }
      }
      if (tensors.length === 0) continue;
      const batch = tf.stack(tensors) as tf.Tensor4D;
      tensors.forEach((t) => t.dispose());
      const features = backbone.predict(batch);
      batch.dispose();
      const [bn, bd] = features.shape;
      if (width === -1) {
        width = bd;
        if (width !== spec.width) {
          features.dispose();
          throw new Error(
            `model output width ${width} does not match the registered ` +
              `penultimate width ${spec.width} for '${spec.name}'`,
          );
        }
      }
      const flat = features.dataSync() as Float32Array;
      features.dispose();
      for (let i = 0; i < bn; i++) {
        rows.push(flat.slice(i * bd, (i + 1) * bd));
        labels.push(chunkLabels[i]);
      }
    }
  } finally {
    backbone.dispose();
  }

  if (rows.length === 0) {
    throw new Error(`no decodable images under ${opts.imagesDir} (skipped ${skipped})`);
  }
  if (skipped > 0) {
    log(`skipped ${skipped} undecodable file(s)`);
  }

  const n = rows.length;
  const data = new Float32Array(n * width);
  rows.forEach((row, i) => data.set(row, i * width));
  const suffix = opts.weightsDir ? "" : "+synthetic";
  writeFeatureFile(opts.outPath, {
    extractorId: `${spec.name}+${spec.preprocess}${suffix}`,
    domainId: opts.domainId ?? basename(resolve(opts.imagesDir)),
    n,
    d: width,
    data,
    labels: Uint32Array.from(labels),
    numClasses: classes.length,
  });
  return { outPath: opts.outPath, n, d: width, numClasses: classes.length, skipped };
}
