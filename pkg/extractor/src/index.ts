export { extract, type ExtractOptions, type ExtractResult, type SkipEntry, SKIP_SUFFIX, MANIFEST_SUFFIX } from "./extract.js";
export { Backbone, DEFAULT_SEED, FEATURE_DIM, describeBackbone } from "./backbone.js";
export { decodeImage, resizeBilinear, centerCrop, type RgbImage } from "./decode.js";
export { saveFeatures, loadFeatures, MAGIC, IDS_SUFFIX, type FeatureTable } from "./format.js";
