export { extract, type ExtractOptions, type ExtractSummary } from "./extract.js";
export { lookupModel, modelNames, type ModelSpec } from "./registry.js";
export {
  encodeFeatureFile,
  readFeatureFile,
  writeFeatureFile,
  type FeatureFile,
} from "./prplfs.js";
export { buildSyntheticBackbone, loadBackboneFromDir } from "./model.js";
