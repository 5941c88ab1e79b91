/**
 * Cue playback: the three-stage explanation animation.
 *
 * Stages run in order (whole heart, labeled semi-focus, focused structure);
 * within each stage the slicing plane sweeps start -> target along the cue's
 * keyframe track loop_count times, tinted from the start color to the target
 * color. The player is a pure state machine over elapsed time; the shell
 * feeds it wall-clock ticks and draws the projected scene it returns.
 */

import { lerpVec, poseFromWire, type Pose, type Vec3 } from "./math.js";
import type { CuePayload } from "./protocol.js";

export const SWEEP_SECONDS = 2.0;

export interface CueView {
  stageIndex: number; // 0..2
  stageName: string;
  loop: number; // 0-based loop within the stage
  sweep: number; // 0..1 progress along the keyframe track
  pose: Pose; // interpolated plane pose
  color: [number, number, number]; // red -> green ramp
  labels: { structure: number; anchor: Vec3 }[]; // stage 1 only
  focus: number;
  done: boolean;
}

export class CuePlayer {
  readonly cue: CuePayload;
  private elapsed = 0;
  private skipped = false;

  constructor(cue: CuePayload) {
    this.cue = cue;
  }

  /** Advance playback; seconds may be any non-negative increment. */
  tick(seconds: number): void {
    this.elapsed += Math.max(0, seconds);
  }

  skip(): void {
    this.skipped = true;
  }

  private trackPose(t: number): Pose {
    const track = this.cue.plane_track;
    if (track.length === 1) {
      return poseFromWire(track[0].pose);
    }
    const clamped = Math.min(1, Math.max(0, t));
    for (let i = 0; i < track.length - 1; i++) {
      const a = track[i];
      const b = track[i + 1];
      if (clamped <= b.t || i === track.length - 2) {
        const span = b.t - a.t || 1;
        const local = Math.min(1, Math.max(0, (clamped - a.t) / span));
        const pa = poseFromWire(a.pose);
        const pb = poseFromWire(b.pose);
        // keyframes are dense; linear pose blending between neighbors
        const q: [number, number, number, number] = [
          pa.orientation[0] + (pb.orientation[0] - pa.orientation[0]) * local,
          pa.orientation[1] + (pb.orientation[1] - pa.orientation[1]) * local,
          pa.orientation[2] + (pb.orientation[2] - pa.orientation[2]) * local,
          pa.orientation[3] + (pb.orientation[3] - pa.orientation[3]) * local,
        ];
        const n = Math.hypot(...q) || 1;
        return {
          position: lerpVec(pa.position, pb.position, local),
          orientation: [q[0] / n, q[1] / n, q[2] / n, q[3] / n],
        };
      }
    }
    return poseFromWire(track[track.length - 1].pose);
  }

  view(): CueView {
    const loops = this.cue.loop_count;
    const stageSeconds = loops * SWEEP_SECONDS;
    const total = 3 * stageSeconds;
    const done = this.skipped || this.elapsed >= total;
    const t = Math.min(this.elapsed, total - 1e-9);
    const stageIndex = done ? 2 : Math.floor(t / stageSeconds);
    const inStage = t - stageIndex * stageSeconds;
    const loop = done ? loops - 1 : Math.floor(inStage / SWEEP_SECONDS);
    const sweep = done ? 1 : (inStage - loop * SWEEP_SECONDS) / SWEEP_SECONDS;
    const color: [number, number, number] = [
      Math.round(220 * (1 - sweep) + 34 * sweep),
      Math.round(38 * (1 - sweep) + 197 * sweep),
      Math.round(38 * (1 - sweep) + 94 * sweep),
    ];
    return {
      stageIndex,
      stageName: this.cue.stages[stageIndex],
      loop,
      sweep,
      pose: this.trackPose(sweep),
      color,
      labels:
        stageIndex === 1
          ? this.cue.labels.map((l) => ({
              structure: l.structure,
              anchor: [l.anchor[0], l.anchor[1], l.anchor[2]] as Vec3,
            }))
          : [],
      focus: this.cue.focus,
      done,
    };
  }
}
