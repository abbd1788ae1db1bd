/** Image decoding (PNG/JPEG) and per-model tensor preprocessing. */

import { readFileSync } from "node:fs";
import * as tf from "@tensorflow/tfjs";
import jpeg from "jpeg-js";
import { PNG } from "pngjs";
import type { Preprocess } from "./registry.js";

export interface DecodedImage {
  width: number;
  height: number;
  /** RGBA, 8 bits per channel */
  data: Uint8Array;
}

export function decodeImageFile(path: string): DecodedImage {
  const raw = readFileSync(path);
  if (raw.length >= 8 && raw.readUInt32BE(0) === 0x89504e47) {
    const png = PNG.sync.read(raw);
    return { width: png.width, height: png.height, data: new Uint8Array(png.data) };
  }
  if (raw.length >= 2 && raw[0] === 0xff && raw[1] === 0xd8) {
    const img = jpeg.decode(raw, { useTArray: true, formatAsRGBA: true });
    return { width: img.width, height: img.height, data: img.data };
  }
  throw new Error(`${path}: not a PNG or JPEG file`);
}

const IMAGENET_MEAN = [0.485, 0.456, 0.406];
const IMAGENET_STD = [0.229, 0.224, 0.225];
const CAFFE_BGR_MEAN = [103.939, 116.779, 123.68];

/** RGBA bytes -> resized, preprocessed [size, size, 3] float tensor. */
export function toModelInput(
  image: DecodedImage,
  size: number,
  preprocess: Preprocess,
): tf.Tensor3D {
  return tf.tidy(() => {
    const rgba = tf.tensor3d(image.data, [image.height, image.width, 4], "int32");
    const rgb = rgba.slice([0, 0, 0], [-1, -1, 3]).toFloat();
    const resized = tf.image.resizeBilinear(rgb as tf.Tensor3D, [size, size]);
    switch (preprocess) {
      case "raw":
        return resized;
      case "tf":
        return resized.div(127.5).sub(1.0);
      case "torch":
        return resized.div(255.0).sub(IMAGENET_MEAN).div(IMAGENET_STD);
      case "caffe":
        return tf.reverse(resized, -1).sub(CAFFE_BGR_MEAN);
    }
  }) as tf.Tensor3D;
}
