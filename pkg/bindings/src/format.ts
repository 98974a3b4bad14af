/** Readers/writers for the core's documented file formats and CSV schemas. */

import { MalformedFileError } from "./errors.js";

const TRACE_MAGIC = "DEOBSTR1";
const BATCH_MAGIC = "DEOBSBA1";

export interface TraceFile {
  height: number;
  width: number;
  frameCount: number;
  episodeStarts: number[];
  /** frameCount * height * width bytes, row-major, concatenated. */
  frames: Uint8Array;
}

export interface SampleBatch {
  batch: number;
  frameStack: number;
  height: number;
  width: number;
  actionWidth: number;
  indices: BigUint64Array;
  /** batch * frameStack * height * width bytes (view into the file buffer). */
  states: Uint8Array;
  actions: Uint8Array;
  rewards: Float64Array;
  dones: Uint8Array;
  nextStates?: Uint8Array;
}

export interface BufferStats {
  capacity: number;
  d: number;
  f: number;
  pixelsPerImage: number;
  N: number;
  n: number;
  phi: number;
  modelBytes: number;
  uncompressedBytes: number;
  factor: number;
  height: number;
  width: number;
  mode: string;
  actionWidth: number;
  head: number;
  /** Exact header+row text, for bit-level parity comparisons. */
  rawCsv: string;
}

export function parseTrace(data: Buffer): TraceFile {
  if (data.length < 24 || data.toString("latin1", 0, 8) !== TRACE_MAGIC) {
    throw new MalformedFileError("bad trace magic");
  }
  const width = data.readUInt32LE(8);
  const height = data.readUInt32LE(12);
  const frameCount = data.readUInt32LE(16);
  const episodeCount = data.readUInt32LE(20);
  const expected = 24 + 4 * episodeCount + frameCount * height * width;
  if (data.length !== expected) {
    throw new MalformedFileError(`trace file is ${data.length} bytes, header implies ${expected}`);
  }
  const episodeStarts: number[] = [];
  for (let k = 0; k < episodeCount; k++) {
    episodeStarts.push(data.readUInt32LE(24 + 4 * k));
  }
  const framesOffset = 24 + 4 * episodeCount;
  const frames = new Uint8Array(
    data.buffer,
    data.byteOffset + framesOffset,
    frameCount * height * width,
  );
  return { height, width, frameCount, episodeStarts, frames };
}

export function parseBatch(data: Buffer): SampleBatch {
  if (data.length < 32 || data.toString("latin1", 0, 8) !== BATCH_MAGIC) {
    throw new MalformedFileError("bad batch magic");
  }
  const batch = data.readUInt32LE(8);
  const frameStack = data.readUInt32LE(12);
  const height = data.readUInt32LE(16);
  const width = data.readUInt32LE(20);
  const actionWidth = data.readUInt32LE(24);
  const hasNext = data.readUInt32LE(28) === 1;
  const stateBytes = batch * frameStack * height * width;
  const expected = 32 + batch * 8 + stateBytes + batch * actionWidth + batch * 8 + batch
    + (hasNext ? stateBytes : 0);
  if (data.length !== expected) {
    throw new MalformedFileError(`batch file is ${data.length} bytes, header implies ${expected}`);
  }

  let offset = 32;
  // indices and rewards are copied into aligned arrays; the byte payloads
  // stay zero-copy views into the file buffer
  const indices = new BigUint64Array(batch);
  for (let k = 0; k < batch; k++) {
    indices[k] = data.readBigUInt64LE(offset + 8 * k);
  }
  offset += batch * 8;
  const view = (length: number): Uint8Array => {
    const out = new Uint8Array(data.buffer, data.byteOffset + offset, length);
    offset += length;
    return out;
  };
  const states = view(stateBytes);
  const actions = view(batch * actionWidth);
  const rewards = new Float64Array(batch);
  for (let k = 0; k < batch; k++) {
    rewards[k] = data.readDoubleLE(offset + 8 * k);
  }
  offset += batch * 8;
  const dones = view(batch);
  const nextStates = hasNext ? view(stateBytes) : undefined;
  return {
    batch, frameStack, height, width, actionWidth,
    indices, states, actions, rewards, dones, nextStates,
  };
}

export const META_HEADER = "action,reward,done,episode_start";

export interface MetaRow {
  action: Uint8Array;
  reward: number;
  done: boolean;
  episodeStart: boolean;
}

export function buildMetaCsv(rows: MetaRow[]): string {
  const lines = [META_HEADER];
  for (const row of rows) {
    const hex = Buffer.from(row.action).toString("hex");
    lines.push(`${hex},${row.reward},${row.done ? 1 : 0},${row.episodeStart ? 1 : 0}`);
  }
  return lines.join("\n") + "\n";
}

export function parseStatsCsv(text: string): BufferStats {
  const lines = text.trim().split("\n").filter((ln) => ln.length > 0);
  if (lines.length < 2) {
    throw new MalformedFileError("stats output has no CSV rows");
  }
  const header = lines[lines.length - 2].split(",");
  const values = lines[lines.length - 1].split(",");
  if (header.length !== values.length) {
    throw new MalformedFileError("stats CSV header/row mismatch");
  }
  const fields = new Map(header.map((name, k) => [name, values[k]]));
  const num = (name: string): number => {
    const raw = fields.get(name);
    if (raw === undefined) {
      throw new MalformedFileError(`stats CSV lacks column '${name}'`);
    }
    return Number(raw);
  };
  return {
    capacity: num("capacity"),
    d: num("d"),
    f: num("f"),
    pixelsPerImage: num("pixels_per_image"),
    N: num("N"),
    n: num("n"),
    phi: num("phi"),
    modelBytes: num("model_bytes"),
    uncompressedBytes: num("uncompressed_bytes"),
    factor: num("factor"),
    height: num("height"),
    width: num("width"),
    mode: fields.get("mode") ?? "",
    actionWidth: num("action_width"),
    head: num("head"),
    rawCsv: lines.slice(-2).join("\n"),
  };
}
