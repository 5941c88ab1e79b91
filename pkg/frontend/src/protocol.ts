/**
 * Client half of the session wire protocol.
 *
 * The core is transport-free: it turns user intents into outbound envelopes
 * and folds inbound envelopes into a mirrored client state. The UI never
 * mutates tutoring state on its own; every displayed mode change comes from
 * a server message. Frames arriving out of order (lower seq than the last
 * accepted frame) are dropped.
 */

import type { Pose } from "./math.js";

export const PROTOCOL_VERSION = 1;

export type Mode = "A" | "B" | "C" | "D";

export interface BaselineGuidance {
  shadow_pose: { position: number[]; orientation: number[] };
  arrow_movement: string;
  arrow_sign: 1 | -1;
  subtask_text: string;
}

export interface FramePayload {
  mode: Mode;
  subgoal_index: number;
  pose: { position: number[]; orientation: number[] };
  segmap: { w: number; h: number; rle: string; areas: Record<string, number> };
  annotations: {
    cross_marks: { structure: number; row: number; col: number }[];
    question_marks: { structure: number; row: number; col: number }[];
  };
  problem_lines: string[];
  anatomy_lines: string[];
  selected_movement: string | null;
  complete: boolean;
  baseline?: BaselineGuidance;
}

export interface CueKeyframe {
  t: number;
  pose: { position: number[]; orientation: number[] };
}

export interface CuePayload {
  stages: string[];
  start_color: string;
  target_color: string;
  focus: number;
  loop_count: number;
  labels: { structure: number; anchor: number[] }[];
  plane_track: CueKeyframe[];
}

export interface ResultPayload {
  correct: boolean;
  pos_err_px: number;
  rot_err_deg: number;
  subgoal_index: number;
  attempts: number;
  complete: boolean;
  next_target_segmap?: FramePayload["segmap"];
}

export interface WireMessage {
  type: string;
  seq: number;
  payload: Record<string, unknown>;
}

export type ConnectionStatus = "connecting" | "ready" | "closed";

export interface ClientState {
  status: ConnectionStatus;
  caseId: string | null;
  subgoals: number;
  mode: Mode; // last server-acknowledged mode
  latestFrame: FramePayload | null;
  latestFrameSeq: number;
  targetSegmap: FramePayload["segmap"] | null;
  planeSide: number;
  cue: CuePayload | null; // non-null while cue playback is active
  lastResult: ResultPayload | null;
  complete: boolean;
  errors: string[];
}

export function initialClientState(): ClientState {
  return {
    status: "connecting",
    caseId: null,
    subgoals: 0,
    mode: "A",
    latestFrame: null,
    latestFrameSeq: -1,
    targetSegmap: null,
    planeSide: 1.0,
    cue: null,
    lastResult: null,
    complete: false,
    errors: [],
  };
}

export class ProtocolClient {
  state: ClientState = initialClientState();
  private outSeq = 0;
  private sentLog: WireMessage[] = [];
  private sender: (raw: string) => void;

  constructor(sender: (raw: string) => void) {
    this.sender = sender;
  }

  private send(type: string, payload: Record<string, unknown> = {}): WireMessage {
    this.outSeq += 1;
    const msg: WireMessage = { type, seq: this.outSeq, payload };
    this.sentLog.push(msg);
    this.sender(JSON.stringify(msg));
    return msg;
  }

  hello(): void {
    this.send("Hello", { version: PROTOCOL_VERSION });
  }

  loadCase(caseId: string): void {
    this.send("CaseLoad", { case_id: caseId });
  }

  poseUpdate(pose: Pose, timestamp = 0): void {
    this.send("PoseUpdate", {
      pose: { position: [...pose.position], orientation: [...pose.orientation] },
      timestamp,
    });
  }

  gripDown(): void {
    this.send("GripDown");
  }

  gripUp(): void {
    this.send("GripUp");
  }

  advance(): void {
    this.send("Advance");
  }

  /** Sent-message log; replaying it after a reconnect rebuilds the session. */
  eventLog(): WireMessage[] {
    return [...this.sentLog];
  }

  /** Re-send the recorded log through a fresh connection (session resume). */
  resume(sender: (raw: string) => void): void {
    const log = this.sentLog;
    this.sentLog = [];
    this.outSeq = 0;
    this.sender = sender;
    this.state = initialClientState();
    for (const msg of log) {
      this.send(msg.type, msg.payload);
    }
  }

  /** Fold one inbound raw message into the mirrored state. */
  receive(raw: string): WireMessage | null {
    let msg: WireMessage;
    try {
      msg = JSON.parse(raw);
    } catch {
      this.state.errors.push("undecodable message from server");
      return null;
    }
    if (typeof msg !== "object" || msg === null || typeof msg.seq !== "number") {
      this.state.errors.push("malformed envelope from server");
      return null;
    }
    switch (msg.type) {
      case "Hello":
        this.state.status = "ready";
        break;
      case "CaseLoad": {
        const p = msg.payload as Record<string, unknown>;
        this.state.caseId = p.case_id as string;
        this.state.subgoals = p.subgoals as number;
        this.state.targetSegmap = p.target_segmap as ClientState["targetSegmap"];
        this.state.planeSide = (p.plane_side as number) ?? 1.0;
        this.state.mode = "A";
        break;
      }
      case "Frame": {
        if (msg.seq <= this.state.latestFrameSeq) {
          return null; // stale frame, dropped
        }
        const frame = msg.payload as unknown as FramePayload;
        this.state.latestFrame = frame;
        this.state.latestFrameSeq = msg.seq;
        this.state.mode = frame.mode;
        this.state.complete = frame.complete;
        if (frame.mode !== "D") {
          this.state.cue = null;
        }
        break;
      }
      case "Cue":
        this.state.cue = (msg.payload as { cue: CuePayload }).cue;
        this.state.mode = "D";
        break;
      case "Result": {
        const result = msg.payload as unknown as ResultPayload;
        this.state.lastResult = result;
        this.state.complete = result.complete;
        if (result.correct) {
          this.state.mode = "A";
          if (result.next_target_segmap) {
            this.state.targetSegmap = result.next_target_segmap;
          }
        }
        break;
      }
      case "Error": {
        const p = msg.payload as { detail?: string; close?: boolean };
        this.state.errors.push(p.detail ?? "unknown server error");
        if (p.close) {
          this.state.status = "closed";
        }
        break;
      }
      default:
        this.state.errors.push(`unknown message type ${String(msg.type)}`);
        return null;
    }
    return msg;
  }
}
