#!/usr/bin/env node
/**
 * prpl-extract: export pretrained-model features into PRPLFS01.
 *
 *   prpl-extract --model efficientnetb7 --images ./photos --out feats.prplfs \
 *       [--batch 16] [--weights ./tfjs-model-dir | --synthetic-weights] \
 *       [--domain amazon]
 */

import { extract } from "./extract.js";
import { modelNames } from "./registry.js";

interface Args {
  model?: string;
  images?: string;
  out?: string;
  batch: number;
  weights?: string;
  synthetic: boolean;
  domain?: string;
}

function usage(): string {
  return (
    "usage: prpl-extract --model <name> --images <dir> --out <file> " +
    "[--batch <n>] [--weights <dir> | --synthetic-weights] [--domain <id>]\n" +
    `models: ${modelNames().join(", ")}`
  );
}

function parseArgs(argv: string[]): Args {
  const args: Args = { batch: 16, synthetic: false };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      if (i + 1 >= argv.length) throw new Error(`${flag} needs a value`);
      return argv[++i];
    };
    switch (flag) {
      case "--model":
        args.model = next();
        break;
      case "--images":
        args.images = next();
        break;
      case "--out":
        args.out = next();
        break;
      case "--batch":
        args.batch = Number(next());
        break;
      case "--weights":
        args.weights = next();
        break;
      case "--synthetic-weights":
        args.synthetic = true;
        break;
      case "--domain":
        args.domain = next();
        break;
      case "--help":
      case "-h":
        console.log(usage());
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!args.model || !args.images || !args.out) {
    throw new Error("--model, --images and --out are required");
  }
  if (!Number.isInteger(args.batch) || args.batch < 1) {
    throw new Error(`--batch must be a positive integer`);
  }
  return args;
}

async function main(): Promise<number> {
  let args: Args;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n${usage()}\n`);
    return 2;
  }
  try {
    const summary = await extract({
      model: args.model!,
      imagesDir: args.images!,
      outPath: args.out!,
      batchSize: args.batch,
      weightsDir: args.weights,
      syntheticWeights: args.synthetic,
      domainId: args.domain,
    });
    process.stdout.write(JSON.stringify(summary) + "\n");
    return 0;
  } catch (err) {
    process.stderr.write(`error: ${(err as Error).message}\n`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
