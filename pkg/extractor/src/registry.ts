/**
 * The supported pretrained ImageNet backbones: canonical input size, the
 * width of the layer prior to the final classifier (what `extract` emits,
 * after global average pooling when that layer is spatial), and the
 * preprocessing convention the published weights expect.
 */

export type Preprocess = "torch" | "tf" | "caffe" | "raw";

export interface ModelSpec {
  name: string;
  inputSize: number;
  /** width of the penultimate layer = feature dimension d */
  width: number;
  preprocess: Preprocess;
}

const SPECS: ModelSpec[] = [
  { name: "squeezenet", inputSize: 227, width: 512, preprocess: "torch" },
  { name: "alexnet", inputSize: 227, width: 4096, preprocess: "torch" },
  { name: "googlenet", inputSize: 224, width: 1024, preprocess: "torch" },
  { name: "shufflenet", inputSize: 224, width: 1024, preprocess: "torch" },
  { name: "resnet18", inputSize: 224, width: 512, preprocess: "torch" },
  { name: "vgg16", inputSize: 224, width: 4096, preprocess: "caffe" },
  { name: "vgg19", inputSize: 224, width: 4096, preprocess: "caffe" },
  { name: "mobilenetv2", inputSize: 224, width: 1280, preprocess: "tf" },
  { name: "nasnetmobile", inputSize: 224, width: 1056, preprocess: "tf" },
  { name: "resnet50", inputSize: 224, width: 2048, preprocess: "torch" },
  { name: "resnet101", inputSize: 224, width: 2048, preprocess: "torch" },
  { name: "densenet201", inputSize: 224, width: 1920, preprocess: "torch" },
  { name: "inceptionv3", inputSize: 299, width: 2048, preprocess: "tf" },
  { name: "xception", inputSize: 299, width: 2048, preprocess: "tf" },
  { name: "inceptionresnetv2", inputSize: 299, width: 1536, preprocess: "tf" },
  { name: "nasnetlarge", inputSize: 331, width: 4032, preprocess: "tf" },
  { name: "efficientnetb7", inputSize: 600, width: 2560, preprocess: "raw" },
];

const BY_NAME = new Map(SPECS.map((s) => [s.name, s]));

export function modelNames(): string[] {
  return SPECS.map((s) => s.name);
}

export function lookupModel(name: string): ModelSpec {
  const spec = BY_NAME.get(name.toLowerCase());
  if (!spec) {
    throw new Error(
      `unknown model '${name}' (supported: ${modelNames().join(", ")})`,
    );
  }
  return spec;
}
