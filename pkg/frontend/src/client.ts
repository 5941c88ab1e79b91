/**
 * Trainer client: binds the protocol mirror, input mapping, and cue player
 * to an injected socket, with reconnect-and-resume from the sent-event log.
 *
 * The socket is injected as a factory so the browser shell passes the native
 * WebSocket and tests pass a library or fake implementation.
 */

import { CuePlayer } from "./cue.js";
import { keyToIntent, RateLimiter, type InputContext } from "./input.js";
import { poseFromWire, type Pose } from "./math.js";
import type { ClientState, WireMessage } from "./protocol.js";
import { ProtocolClient } from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface TrainerOptions {
  url: string;
  socketFactory: SocketFactory;
  poseRateHz?: number;
  reconnect?: boolean;
  onUpdate?: (state: ClientState) => void;
  onMessage?: (msg: WireMessage) => void;
}

export class TrainerClient {
  readonly protocol: ProtocolClient;
  cuePlayer: CuePlayer | null = null;
  probe: Pose | null = null;
  gripHeld = false;
  private socket: SocketLike | null = null;
  private socketOpen = false;
  private readonly opts: TrainerOptions;
  private readonly limiter: RateLimiter;
  private outbox: string[] = [];

  constructor(opts: TrainerOptions) {
    this.opts = opts;
    this.limiter = new RateLimiter(opts.poseRateHz ?? 60);
    this.protocol = new ProtocolClient((raw) => this.transmit(raw));
  }

  get state(): ClientState {
    return this.protocol.state;
  }

  connect(): void {
    const socket = this.opts.socketFactory(this.opts.url);
    this.socket = socket;
    this.socketOpen = false;
    socket.onopen = () => {
      this.socketOpen = true;
      for (const raw of this.outbox.splice(0)) {
        socket.send(raw);
      }
    };
    socket.onmessage = (ev) => this.handleRaw(String(ev.data));
    socket.onclose = () => {
      this.socket = null;
      this.socketOpen = false;
      if (this.opts.reconnect && this.state.status !== "closed") {
        this.reconnect();
      }
    };
  }

  /** Rebuild the session on a fresh socket by replaying the sent log. */
  private reconnect(): void {
    const socket = this.opts.socketFactory(this.opts.url);
    this.socket = socket;
    this.socketOpen = false;
    socket.onmessage = (ev) => this.handleRaw(String(ev.data));
    socket.onclose = () => {
      this.socket = null;
      this.socketOpen = false;
    };
    socket.onopen = () => {
      this.socketOpen = true;
      this.probe = null;
      this.gripHeld = false;
      this.cuePlayer = null;
      this.protocol.resume((raw) => this.transmit(raw));
    };
  }

  private transmit(raw: string): void {
    if (this.socket && this.socketOpen) {
      this.socket.send(raw);
    } else {
      this.outbox.push(raw);
    }
  }

  private handleRaw(raw: string): void {
    const msg = this.protocol.receive(raw);
    if (msg === null) {
      this.opts.onUpdate?.(this.state);
      return;
    }
    if (msg.type === "Cue" && this.state.cue) {
      this.cuePlayer = new CuePlayer(this.state.cue);
    }
    if (msg.type === "Frame") {
      const frame = this.state.latestFrame;
      if (frame) {
        this.probe = poseFromWire(frame.pose);
        if (frame.mode !== "D") {
          this.cuePlayer = null;
        }
      }
    }
    if (msg.type === "CaseLoad") {
      this.probe = null;
      this.gripHeld = false;
    }
    this.opts.onMessage?.(msg);
    this.opts.onUpdate?.(this.state);
  }

  start(caseId: string): void {
    this.protocol.hello();
    this.protocol.loadCase(caseId);
  }

  /** Current probe pose: last acknowledged frame pose, else the case start. */
  currentProbe(startPose: Pose | null = null): Pose | null {
    return this.probe ?? startPose;
  }

  /** One keyboard event; returns the intent kind that was acted on. */
  handleKey(key: string, nowMs: number, startPose: Pose | null = null): string {
    const probe = this.currentProbe(startPose);
    if (probe === null) {
      return "none";
    }
    const ctx: InputContext = {
      mode: this.state.mode,
      gripHeld: this.gripHeld,
      probe,
      selectedMovement: this.state.latestFrame?.selected_movement ?? null,
    };
    const intent = keyToIntent(key, ctx);
    switch (intent.kind) {
      case "grip_down":
        this.gripHeld = true;
        this.protocol.gripDown();
        break;
      case "grip_up":
        this.gripHeld = false;
        this.protocol.gripUp();
        break;
      case "advance":
        if (this.cuePlayer) {
          this.cuePlayer.skip();
        }
        this.protocol.advance();
        break;
      case "pose":
        if (this.limiter.allow(nowMs)) {
          this.probe = intent.pose;
          this.protocol.poseUpdate(intent.pose, nowMs / 1000);
        }
        break;
      case "none":
        break;
    }
    return intent.kind;
  }

  close(): void {
    this.state.status = "closed";
    this.socket?.close();
  }
}
