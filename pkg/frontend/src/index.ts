export {
  BoundPipeline,
  backtransform,
  computeFactors,
  transform,
  tune,
} from "./bridge.js";
export type { Factors, KernelParams, PipelineOptions, TuneOptions, TuneResult } from "./bridge.js";
export { BridgeError } from "./errors.js";
export type { BridgeErrorCode } from "./errors.js";
export type { TransformedData } from "./csv.js";
export { cliCommand } from "./runner.js";
