export { ArrayImage, makeImage, meanAbsDiff, readPng, writePng } from "./image.js";
export { CliError, cliBinary, runCli, withTempDir } from "./cli.js";
export { MANIFEST_COLUMNS, ManifestRow, defaultRow, readManifest, writeManifest } from "./manifest.js";
export { ScoreRow, readScoreTable, scoreTable, writeScoreTable } from "./scores.js";
export { ConvLayer, Layer, MarkerLayer, Network, identityNetwork, readWeights, writeWeights } from "./weights.js";
export { StainProfile, readProfile, writeProfile } from "./profile.js";
export {
  AugmentOptions,
  NormalizeOptions,
  NormalizeResult,
  StylizeOptions,
  lowpass,
  stainAugment,
  stainNormalize,
  stylize,
} from "./transforms.js";
export {
  EvalOptions,
  EvalReport,
  GradOracle,
  TestEntry,
  auroc,
  bhAdjust,
  bootstrapCi,
  delongTest,
  evalScores,
  integratedGradients,
} from "./stats.js";
