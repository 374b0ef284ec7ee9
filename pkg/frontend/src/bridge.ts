/**
 * Line-delimited JSON client for the watermark core's stdio bridge.
 *
 * Spawns `python -m tokenmark.cli bridge --config <path>` and serializes
 * one request per line; responses come back in order, so a simple FIFO
 * of resolvers suffices. The bridge holds no state between requests and
 * all randomness is derived from the request inputs, so callers may
 * treat every operation as a pure function.
 */

import { spawn, type ChildProcessByStdio } from "node:child_process";
import { createInterface, type Interface } from "node:readline";
import type { Readable, Writable } from "node:stream";

export interface BridgeOptions {
  /** Path to the watermark config JSON shared with the core. */
  configPath: string;
  /** Optional model snapshot (supplies vocab_size when the config omits it). */
  modelPath?: string;
  /** Python interpreter; defaults to `python3`. */
  python?: string;
}

export interface HelloInfo {
  fingerprint: string;
  layout_version: string;
  vocab_size: number;
  gamma: number;
  delta: number | "inf";
  kind: string;
  h: number;
}

export interface DetectorReport {
  z: number;
  p: number;
  log10_p: number;
  t_counted: number;
  green_count: number;
  gamma: number;
  colors: Array<[string, number]>;
  config_fingerprint: string;
}

export interface DetectorRequestOptions {
  skip_repeated_ngrams?: boolean;
  z_threshold?: number;
  min_prefix?: number | null;
}

interface RawResponse {
  ok: boolean;
  kind?: string;
  error?: string;
  [key: string]: unknown;
}

export class BridgeError extends Error {
  readonly kind: string;

  constructor(kind: string, message: string) {
    super(message);
    this.kind = kind;
  }
}

export class TokenmarkBridge {
  private proc: ChildProcessByStdio<Writable, Readable, null>;
  private reader: Interface;
  private pending: Array<{
    resolve: (value: RawResponse) => void;
    reject: (err: Error) => void;
  }> = [];
  private closed = false;

  constructor(options: BridgeOptions) {
    const args = ["-m", "tokenmark.cli", "bridge", "--config", options.configPath];
    if (options.modelPath) {
      args.push("--model", options.modelPath);
    }
    this.proc = spawn(options.python ?? "python3", args, {
      stdio: ["pipe", "pipe", "inherit"],
    });
    this.reader = createInterface({ input: this.proc.stdout });
    this.reader.on("line", (line) => {
      const waiter = this.pending.shift();
      if (!waiter) return;
      try {
        waiter.resolve(JSON.parse(line) as RawResponse);
      } catch (err) {
        waiter.reject(err as Error);
      }
    });
    this.proc.on("exit", () => {
      this.closed = true;
      for (const waiter of this.pending.splice(0)) {
        waiter.reject(new BridgeError("Closed", "bridge process exited"));
      }
    });
  }

  private request(payload: Record<string, unknown>): Promise<RawResponse> {
    if (this.closed) {
      return Promise.reject(new BridgeError("Closed", "bridge already closed"));
    }
    return new Promise((resolve, reject) => {
      this.pending.push({ resolve, reject });
      this.proc.stdin.write(JSON.stringify(payload) + "\n");
    });
  }

  private async call(payload: Record<string, unknown>): Promise<RawResponse> {
    const resp = await this.request(payload);
    if (!resp.ok) {
      throw new BridgeError(String(resp.kind ?? "Error"), String(resp.error ?? ""));
    }
    return resp;
  }

  async hello(): Promise<HelloInfo> {
    const resp = await this.call({ op: "hello" });
    return resp as unknown as HelloInfo;
  }

  /** Watermarked probabilities for one step, given the token context. */
  async warp(context: number[], logits: ArrayLike<number>): Promise<Float64Array> {
    const resp = await this.call({
      op: "warp",
      context,
      logits: Array.from(logits),
    });
    return Float64Array.from(resp.probs as number[]);
  }

  async detect(
    prompt: number[],
    generated: number[],
    options?: DetectorRequestOptions,
  ): Promise<DetectorReport> {
    const resp = await this.call({
      op: "detect",
      prompt,
      generated,
      options: options ?? {},
    });
    return resp.report as DetectorReport;
  }

  async close(): Promise<void> {
    if (this.closed) return;
    try {
      await this.call({ op: "shutdown" });
    } catch {
      // Process may already be gone; nothing to clean up beyond the kill.
    }
    this.proc.kill();
    this.closed = true;
  }
}
