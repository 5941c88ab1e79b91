/**
 * Keyboard bindings: one key pair per standard movement, plus grip toggle
 * and advance. Mapping user intents to protocol messages is mode-gated:
 *
 * - modes A/B: any movement key steers the probe (grip must be held),
 * - mode C: only the server-selected movement's keys are active (mirrors the
 *   server-side axis projection),
 * - mode D (cue playback): only Advance does anything.
 */

import { applyMovement, Movement, MOVEMENT_NAMES, type Pose } from "./math.js";
import type { Mode } from "./protocol.js";

export const KEY_BINDINGS: Record<string, { movement: Movement; sign: 1 | -1 }> = {
  q: { movement: Movement.Fan, sign: 1 },
  a: { movement: Movement.Fan, sign: -1 },
  w: { movement: Movement.Rock, sign: 1 },
  s: { movement: Movement.Rock, sign: -1 },
  e: { movement: Movement.Rotate, sign: 1 },
  d: { movement: Movement.Rotate, sign: -1 },
  arrowright: { movement: Movement.Slide, sign: 1 },
  arrowleft: { movement: Movement.Slide, sign: -1 },
  arrowup: { movement: Movement.Sweep, sign: 1 },
  arrowdown: { movement: Movement.Press, sign: 1 },
  pageup: { movement: Movement.Press, sign: -1 },
  pagedown: { movement: Movement.Sweep, sign: -1 },
};

export const GRIP_KEY = " ";
export const ADVANCE_KEY = "enter";

export const ROTATION_STEP = (2.0 * Math.PI) / 180; // radians per keypress
export const TRANSLATION_STEP = 0.01; // normalized units per keypress

export type Intent =
  | { kind: "pose"; pose: Pose }
  | { kind: "grip_down" }
  | { kind: "grip_up" }
  | { kind: "advance" }
  | { kind: "none" };

export interface InputContext {
  mode: Mode;
  gripHeld: boolean;
  probe: Pose;
  selectedMovement: string | null; // server-reported name, e.g. "ROTATE"
}

/** Translate one key press into a protocol intent under the current mode. */
export function keyToIntent(key: string, ctx: InputContext): Intent {
  const k = key.toLowerCase();
  if (k === ADVANCE_KEY) {
    return { kind: "advance" };
  }
  if (ctx.mode === "D") {
    return { kind: "none" }; // cue playback swallows everything but Advance
  }
  if (k === GRIP_KEY) {
    return ctx.gripHeld ? { kind: "grip_up" } : { kind: "grip_down" };
  }
  const binding = KEY_BINDINGS[k];
  if (!binding) {
    return { kind: "none" };
  }
  if (ctx.mode === "C") {
    if (ctx.selectedMovement === null) {
      return { kind: "none" };
    }
    if (MOVEMENT_NAMES[binding.movement] !== ctx.selectedMovement) {
      return { kind: "none" }; // off-axis keys inert during amount specification
    }
  } else if (!ctx.gripHeld) {
    return { kind: "none" };
  }
  const step = binding.movement < 3 ? ROTATION_STEP : TRANSLATION_STEP;
  return {
    kind: "pose",
    pose: applyMovement(ctx.probe, binding.movement, binding.sign * step),
  };
}

/** Caps PoseUpdate sends at the given rate; returns true when allowed. */
export class RateLimiter {
  private last = -Infinity;
  private readonly interval: number;

  constructor(hz: number) {
    this.interval = 1000 / hz;
  }

  allow(nowMs: number): boolean {
    if (nowMs - this.last >= this.interval) {
      this.last = nowMs;
      return true;
    }
    return false;
  }
}
