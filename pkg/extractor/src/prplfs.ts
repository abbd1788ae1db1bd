/**
 * Writer (and a reader used by tests) for the PRPLFS01 feature-set format:
 * magic "PRPLFS01"; little-endian u32 n, d, labelFlag, numClasses; two
 * u32-length-prefixed UTF-8 strings (extractor id, domain id); n*d
 * little-endian f32 row-major; iff labelFlag=1, n little-endian u32 labels.
 */

import { writeFileSync, readFileSync } from "node:fs";

export interface FeatureFile {
  extractorId: string;
  domainId: string;
  n: number;
  d: number;
  data: Float32Array; // length n*d, row-major
  labels?: Uint32Array; // length n
  numClasses: number;
}

const MAGIC = Buffer.from("PRPLFS01", "ascii");

export function encodeFeatureFile(f: FeatureFile): Buffer {
  if (f.data.length !== f.n * f.d) {
    throw new Error(`data length ${f.data.length} != n*d = ${f.n * f.d}`);
  }
  if (f.labels && f.labels.length !== f.n) {
    throw new Error(`labels length ${f.labels.length} != n = ${f.n}`);
  }
  const extractor = Buffer.from(f.extractorId, "utf8");
  const domain = Buffer.from(f.domainId, "utf8");
  const header = Buffer.alloc(MAGIC.length + 16 + 8);
  let off = MAGIC.copy(header);
  off = header.writeUInt32LE(f.n, off);
  off = header.writeUInt32LE(f.d, off);
  off = header.writeUInt32LE(f.labels ? 1 : 0, off);
  off = header.writeUInt32LE(f.numClasses, off);
  const parts: Buffer[] = [header.subarray(0, off)];
  for (const s of [extractor, domain]) {
    const len = Buffer.alloc(4);
    len.writeUInt32LE(s.length, 0);
    parts.push(len, s);
  }
  // f32/u32 are written little-endian explicitly so the output does not
  // depend on the host byte order
  const payload = Buffer.alloc(f.data.length * 4);
  f.data.forEach((v, i) => payload.writeFloatLE(v, i * 4));
  parts.push(payload);
  if (f.labels) {
    const lab = Buffer.alloc(f.labels.length * 4);
    f.labels.forEach((v, i) => lab.writeUInt32LE(v, i * 4));
    parts.push(lab);
  }
  return Buffer.concat(parts);
}

export function writeFeatureFile(path: string, f: FeatureFile): void {
  writeFileSync(path, encodeFeatureFile(f));
}

export function readFeatureFile(path: string): FeatureFile {
  const buf = readFileSync(path);
  if (!buf.subarray(0, MAGIC.length).equals(MAGIC)) {
    throw new Error(`${path}: bad magic`);
  }
  let off = MAGIC.length;
  const n = buf.readUInt32LE(off);
  const d = buf.readUInt32LE(off + 4);
  const labelFlag = buf.readUInt32LE(off + 8);
  const numClasses = buf.readUInt32LE(off + 12);
  off += 16;
  const strings: string[] = [];
  for (let i = 0; i < 2; i++) {
    const len = buf.readUInt32LE(off);
    off += 4;
    strings.push(buf.subarray(off, off + len).toString("utf8"));
    off += len;
  }
  const expected = off + n * d * 4 + (labelFlag ? n * 4 : 0);
  if (buf.length !== expected) {
    throw new Error(`${path}: payload is ${buf.length - off} bytes, expected ${expected - off}`);
  }
  const data = new Float32Array(n * d);
  for (let i = 0; i < n * d; i++) data[i] = buf.readFloatLE(off + i * 4);
  off += n * d * 4;
  let labels: Uint32Array | undefined;
  if (labelFlag) {
    labels = new Uint32Array(n);
    for (let i = 0; i < n; i++) labels[i] = buf.readUInt32LE(off + i * 4);
  }
  return { extractorId: strings[0], domainId: strings[1], n, d, data, labels, numClasses };
}
