/** Error taxonomy mirroring the core library's exceptions. */

export class DeobsError extends Error {
  constructor(message: string) {
    super(message);
    this.name = new.target.name;
  }
}

/** A frame or action byte array has the wrong length. */
export class ShapeError extends DeobsError {}

/** episode_start flags contradict the recorded done flags. */
export class EpisodeDisciplineError extends DeobsError {}

/** Sampling from a buffer with no valid steps. */
export class EmptyBufferError extends DeobsError {}

/** A file failed structural validation. */
export class MalformedFileError extends DeobsError {}

/** The core CLI exited nonzero; stderr is attached. */
export class CliError extends DeobsError {
  readonly exitCode: number;
  readonly stderr: string;

  constructor(message: string, exitCode: number, stderr: string) {
    super(message);
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

/** Map a CLI failure onto the closest typed error. */
export function fromCliFailure(exitCode: number, stderr: string): DeobsError {
  const text = stderr.trim();
  if (text.includes("episode_start required") || text.includes("must start an episode")) {
    return new EpisodeDisciplineError(text);
  }
  if (text.includes("no valid steps") || text.includes("resident, same-episode")) {
    return new EmptyBufferError(text);
  }
  return new CliError(text || `deobs CLI exited with code ${exitCode}`, exitCode, stderr);
}
