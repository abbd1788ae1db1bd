import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";
import { PNG } from "pngjs";
import jpeg from "jpeg-js";

export function pngBytes(width: number, height: number, rgb: [number, number, number]): Buffer {
  const png = new PNG({ width, height });
  for (let i = 0; i < width * height; i++) {
    png.data[i * 4] = rgb[0];
    png.data[i * 4 + 1] = rgb[1];
    png.data[i * 4 + 2] = rgb[2];
    png.data[i * 4 + 3] = 255;
  }
  return PNG.sync.write(png);
}

export function jpegBytes(width: number, height: number, rgb: [number, number, number]): Buffer {
  const data = Buffer.alloc(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    data[i * 4] = rgb[0];
    data[i * 4 + 1] = rgb[1];
    data[i * 4 + 2] = rgb[2];
    data[i * 4 + 3] = 255;
  }
  return jpeg.encode({ data, width, height }, 90).data;
}

/** Two classes x three images, lexicographic folder order cat < dog. */
export function writeToyImageDir(root: string): void {
  const cat = join(root, "cat");
  const dog = join(root, "dog");
  mkdirSync(cat, { recursive: true });
  mkdirSync(dog, { recursive: true });
  writeFileSync(join(cat, "a.png"), pngBytes(24, 24, [200, 40, 40]));
  writeFileSync(join(cat, "b.png"), pngBytes(24, 24, [180, 60, 40]));
  writeFileSync(join(cat, "c.jpg"), jpegBytes(24, 24, [210, 50, 30]));
  writeFileSync(join(dog, "a.png"), pngBytes(24, 24, [40, 40, 200]));
  writeFileSync(join(dog, "b.png"), pngBytes(24, 24, [60, 40, 180]));
  writeFileSync(join(dog, "c.jpg"), jpegBytes(24, 24, [30, 50, 210]));
}
