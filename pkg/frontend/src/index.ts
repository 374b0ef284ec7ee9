/**
 * High-level bindings: a per-step logit processor and a detector,
 * backed entirely by the core over the stdio bridge. No watermark math
 * is re-implemented on this side; the config fingerprint is the only
 * coupling contract with the core.
 */

import {
  BridgeError,
  TokenmarkBridge,
  type BridgeOptions,
  type DetectorReport,
  type DetectorRequestOptions,
  type HelloInfo,
} from "./bridge.js";

export {
  BridgeError,
  TokenmarkBridge,
  type BridgeOptions,
  type DetectorReport,
  type DetectorRequestOptions,
  type HelloInfo,
};

export interface BindOptions extends BridgeOptions {
  /** When set, binding fails unless the core reports this fingerprint. */
  expectedFingerprint?: string;
}

export interface LogitProcessorBinding {
  info: HelloInfo;
  /**
   * Maps (generated-so-far token ids, raw logits) to watermarked
   * probabilities, mirroring a generation pipeline's logit-processor
   * hook. The logit buffer length must equal the vocab size.
   */
  process(inputIds: number[], logits: ArrayLike<number>): Promise<Float64Array>;
  close(): Promise<void>;
}

export interface DetectorBinding {
  info: HelloInfo;
  detect(
    prompt: number[],
    generated: number[],
    options?: DetectorRequestOptions,
  ): Promise<DetectorReport>;
  /** Score a flat id stream whose first `promptLen` tokens are context. */
  detectTokens(tokenIds: number[], promptLen?: number): Promise<DetectorReport>;
  close(): Promise<void>;
}

async function openBridge(options: BindOptions): Promise<{
  bridge: TokenmarkBridge;
  info: HelloInfo;
}> {
  const bridge = new TokenmarkBridge(options);
  const info = await bridge.hello();
  if (
    options.expectedFingerprint !== undefined &&
    info.fingerprint !== options.expectedFingerprint
  ) {
    await bridge.close();
    throw new BridgeError(
      "FingerprintMismatch",
      `core reports ${info.fingerprint}, expected ${options.expectedFingerprint}`,
    );
  }
  return { bridge, info };
}

export async function bindLogitProcessor(
  options: BindOptions,
): Promise<LogitProcessorBinding> {
  const { bridge, info } = await openBridge(options);
  return {
    info,
    process: (inputIds, logits) => bridge.warp(inputIds, logits),
    close: () => bridge.close(),
  };
}

export async function bindDetector(options: BindOptions): Promise<DetectorBinding> {
  const { bridge, info } = await openBridge(options);
  return {
    info,
    detect: (prompt, generated, opts) => bridge.detect(prompt, generated, opts),
    detectTokens: (tokenIds, promptLen = 1) => {
      if (promptLen < 1 || promptLen >= tokenIds.length) {
        return Promise.reject(
          new BridgeError("BadRequest", "promptLen must leave tokens to score"),
        );
      }
      return bridge.detect(tokenIds.slice(0, promptLen), tokenIds.slice(promptLen));
    },
    close: () => bridge.close(),
  };
}
