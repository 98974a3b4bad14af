/**
 * Node bindings for the deobs replay buffer.
 *
 * Nothing is reimplemented here: every operation delegates to the core CLI
 * through its documented file formats. Adds are staged in memory and flushed
 * as a raw-frames file plus a metadata CSV (`deobs extend`); stats and
 * sampling load the buffer file through `deobs stats` / `deobs sample` and
 * hand batches back as contiguous typed arrays over the batch file's bytes.
 *
 * A BoundBuffer owns a scratch directory and must be used from one thread
 * at a time (all calls are synchronous).
 */

import { copyFileSync, mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { readFileSync } from "node:fs";

import { defaultCliCommand, runCli } from "./cli.js";
import {
  BufferStats,
  MetaRow,
  SampleBatch,
  buildMetaCsv,
  parseBatch,
  parseStatsCsv,
  parseTrace,
  TraceFile,
} from "./format.js";
import {
  CliError,
  DeobsError,
  EmptyBufferError,
  EpisodeDisciplineError,
  MalformedFileError,
  ShapeError,
  fromCliFailure,
} from "./errors.js";

export {
  BufferStats,
  CliError,
  DeobsError,
  EmptyBufferError,
  EpisodeDisciplineError,
  MalformedFileError,
  MetaRow,
  SampleBatch,
  ShapeError,
  TraceFile,
};
export { parseBatch, parseTrace, buildMetaCsv } from "./format.js";

export interface BufferConfig {
  frameStack: number;
  height: number;
  width: number;
  capacitySteps: number;
  mode: "full" | "half";
  actionWidth: number;
}

export interface BindingOptions {
  /** argv of the core CLI; defaults to DEOBS_CLI or ["python3", "-m", "deobs"]. */
  cliCommand?: string[];
}

interface StagedStep {
  frame: Uint8Array;
  meta: MetaRow;
}

export class BoundBuffer {
  readonly config: BufferConfig;
  private readonly cli: string[];
  private readonly workDir: string;
  private readonly bufferPath: string;
  private staged: StagedStep[] = [];
  private steps: number;
  private lastDone: boolean | null;
  private closed = false;

  private constructor(config: BufferConfig, cli: string[], workDir: string, steps: number) {
    this.config = config;
    this.cli = cli;
    this.workDir = workDir;
    this.bufferPath = join(workDir, "buffer.bin");
    this.steps = steps;
    // unknown after load; the CLI still enforces discipline at flush time
    this.lastDone = null;
  }

  /** Create an empty buffer (spawns `deobs init`). */
  static create(config: BufferConfig, options: BindingOptions = {}): BoundBuffer {
    const cli = options.cliCommand ?? defaultCliCommand();
    const workDir = mkdtempSync(join(tmpdir(), "deobs-node-"));
    const buffer = new BoundBuffer(config, cli, workDir, 0);
    runCli(cli, [
      "init",
      "--out", buffer.bufferPath,
      "--f", String(config.frameStack),
      "--capacity", String(config.capacitySteps),
      "--height", String(config.height),
      "--width", String(config.width),
      "--mode", config.mode,
      "--action-width", String(config.actionWidth),
    ]);
    return buffer;
  }

  /** Open an existing buffer file; configuration is read back via `deobs stats`. */
  static load(source: string, options: BindingOptions = {}): BoundBuffer {
    const cli = options.cliCommand ?? defaultCliCommand();
    const workDir = mkdtempSync(join(tmpdir(), "deobs-node-"));
    const target = join(workDir, "buffer.bin");
    copyFileSync(source, target);
    const stats = parseStatsCsv(runCli(cli, ["stats", target, "--format", "csv"]));
    if (stats.mode !== "full" && stats.mode !== "half") {
      throw new MalformedFileError(`unsupported buffer mode '${stats.mode}'`);
    }
    const config: BufferConfig = {
      frameStack: stats.f,
      height: stats.height,
      width: stats.width,
      capacitySteps: stats.capacity,
      mode: stats.mode,
      actionWidth: stats.actionWidth,
    };
    return new BoundBuffer(config, cli, workDir, stats.head);
  }

  /** Steps appended so far (the write head). */
  get head(): number {
    return this.steps;
  }

  /**
   * Append one transition; returns its step index. Semantics match the core
   * buffer: after a done=true step the next add must set episodeStart.
   */
  add(
    frame: Uint8Array,
    action: Uint8Array,
    reward: number,
    done: boolean,
    episodeStart: boolean,
  ): number {
    this.assertOpen();
    const pixels = this.config.height * this.config.width;
    if (frame.length !== pixels) {
      throw new ShapeError(`frame is ${frame.length} bytes, expected ${pixels}`);
    }
    if (action.length !== this.config.actionWidth) {
      throw new ShapeError(
        `action is ${action.length} bytes, expected ${this.config.actionWidth}`,
      );
    }
    if (this.steps === 0 && !episodeStart) {
      throw new EpisodeDisciplineError("first frame must start an episode");
    }
    if (this.lastDone === true && !episodeStart) {
      throw new EpisodeDisciplineError("previous step was terminal; episode_start required");
    }
    this.staged.push({
      frame: frame.slice(),
      meta: { action: action.slice(), reward, done, episodeStart },
    });
    this.lastDone = done;
    return this.steps++;
  }

  /** Push staged steps through `deobs extend`. No-op when nothing is staged. */
  flush(): void {
    this.assertOpen();
    if (this.staged.length === 0) {
      return;
    }
    const framesPath = join(this.workDir, "staged-frames.raw");
    const metaPath = join(this.workDir, "staged-meta.csv");
    const frames = Buffer.concat(this.staged.map((s) => Buffer.from(s.frame)));
    writeFileSync(framesPath, frames);
    writeFileSync(metaPath, buildMetaCsv(this.staged.map((s) => s.meta)));
    runCli(this.cli, [
      "extend", this.bufferPath,
      "--frames", framesPath,
      "--meta", metaPath,
      "--out", this.bufferPath,
      "--format", "csv",
    ]);
    this.staged = [];
  }

  /** Memory-model report of the current contents (`deobs stats`). */
  stats(): BufferStats {
    this.flush();
    return parseStatsCsv(runCli(this.cli, ["stats", this.bufferPath, "--format", "csv"]));
  }

  /** Seeded uniform state batch as contiguous arrays (`deobs sample`). */
  sampleStates(batchSize: number, seed: number): SampleBatch {
    return this.sample(batchSize, seed, false);
  }

  /** Seeded transition batch; includes nextStates (`deobs sample --transitions`). */
  sampleTransitions(batchSize: number, seed: number): SampleBatch {
    return this.sample(batchSize, seed, true);
  }

  private sample(batchSize: number, seed: number, withNext: boolean): SampleBatch {
    this.flush();
    const outPath = join(this.workDir, "batch.bin");
    const args = [
      "sample", this.bufferPath,
      "--batch", String(batchSize),
      "--seed", String(seed),
      "--out", outPath,
    ];
    if (withNext) {
      args.push("--transitions");
    }
    runCli(this.cli, args);
    return parseBatch(readFileSync(outPath));
  }

  /** Write the buffer file (flushing first). */
  save(destination: string): void {
    this.flush();
    copyFileSync(this.bufferPath, destination);
  }

  /** Remove the scratch directory; the buffer is unusable afterwards. */
  close(): void {
    if (!this.closed) {
      this.closed = true;
      rmSync(this.workDir, { recursive: true, force: true });
    }
  }

  private assertOpen(): void {
    if (this.closed) {
      throw new DeobsError("buffer is closed");
    }
  }
}

/** Read a trace file (for pushing recorded traces through a BoundBuffer). */
export function readTraceFile(path: string): TraceFile {
  return parseTrace(readFileSync(path));
}
