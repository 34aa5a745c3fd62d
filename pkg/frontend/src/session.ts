/** Live session recording: timestamps taps against the session start
 * and flushes them to the service in arrival order.
 *
 * The recorder keeps an exact mirror of what it submits. No
 * filtering, no smoothing: the stored trace on the server is this
 * array, byte for byte after canonicalization.
 */

import type { ApiClient } from "./api.js";
import type { FinalizeOut, SessionOut, TapAck, TapEntry } from "./types.js";

export interface Clock {
  now(): number;
}

export interface PointerLike {
  pressure?: number;
  pointerType?: string;
}

/** Pressure when the hardware really measures it, else a fixed 0.6.
 * Mice report a constant 0.5 while a button is down; that is a
 * convention, not a measurement, so it gets the fallback too. */
export function intensityFrom(pointer: PointerLike): number {
  const pressure = pointer.pressure ?? 0;
  if (pointer.pointerType === "mouse" || pressure <= 0) return 0.6;
  return Math.min(1, pressure);
}

export type TapOutcome =
  | { recorded: true; entry: TapEntry }
  | { recorded: false; reason: "expired" | "finalized" };

export interface Readout {
  tapCount: number;
  elapsedMs: number;
  tapsPerSecond: number;
}

export class SessionRecorder {
  readonly taps: TapEntry[] = [];
  private pending: TapEntry[] = [];
  private flushChain: Promise<TapAck | void> = Promise.resolve();
  private readonly startMs: number;
  private finalized = false;

  constructor(
    private readonly api: ApiClient,
    readonly session: SessionOut,
    private readonly clock: Clock,
    private readonly batchSize = 16,
  ) {
    this.startMs = clock.now();
  }

  elapsedMs(): number {
    return Math.max(0, Math.round(this.clock.now() - this.startMs));
  }

  expired(): boolean {
    return this.elapsedMs() > this.session.duration_ms;
  }

  /** Raw counts over the recorder's own events. Anything derived
   * (features, label, params) is read from the final report instead. */
  readout(): Readout {
    const elapsed = Math.min(this.elapsedMs(), this.session.duration_ms);
    return {
      tapCount: this.taps.length,
      elapsedMs: elapsed,
      tapsPerSecond: elapsed > 0 ? this.taps.length / (elapsed / 1000) : 0,
    };
  }

  recordTap(lane: number, intensity: number, outcome: "hit" | "miss" = "hit"): TapOutcome {
    if (!Number.isInteger(lane) || lane < 0 || lane > 4) {
      throw new RangeError(`lane ${lane} outside the five-lane surface`);
    }
    if (this.finalized) return { recorded: false, reason: "finalized" };
    const timestampMs = this.elapsedMs();
    if (timestampMs > this.session.duration_ms) {
      return { recorded: false, reason: "expired" };
    }
    const entry: TapEntry = {
      timestamp_ms: timestampMs,
      lane,
      intensity,
      outcome,
    };
    this.taps.push(entry);
    this.pending.push(entry);
    return { recorded: true, entry };
  }

  /** Sends everything recorded so far, in order, one batch at a
   * time. Concurrent calls join the same chain so batches can never
   * overtake each other. */
  flush(): Promise<TapAck | void> {
    while (this.pending.length > 0) {
      const batch = this.pending.splice(0, this.batchSize);
      this.flushChain = this.flushChain.then(() =>
        this.api.appendTaps(this.session.session_id, batch),
      );
    }
    return this.flushChain;
  }

  canFinalize(): boolean {
    return this.taps.length > 0 && !this.finalized;
  }

  async finalize(): Promise<FinalizeOut> {
    if (this.taps.length === 0) {
      throw new Error("cannot finalize a session with no taps");
    }
    if (this.finalized) throw new Error("session already finalized");
    await this.flush();
    const out = await this.api.finalize(this.session.session_id);
    this.finalized = true;
    return out;
  }
}
