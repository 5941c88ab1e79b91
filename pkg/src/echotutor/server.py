"""Session service: wire-protocol bridge, JSONL event logs, and replay.

``SessionWire`` is the transport-free core: it consumes inbound wire messages
one at a time and returns the outbound messages to send, so the whole
protocol is unit-testable and any recorded log replays to a byte-identical
frame stream. ``create_app`` wraps it in a FastAPI WebSocket endpoint; one
connection owns one session and events are processed strictly in arrival
order.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .cases import QuestionCase, load_cases
from .explain import CueScript, baseline_guidance
from .geometry import ProbePose
from .session import (
    CuePlaybackOutput,
    EvalConfig,
    EventKind,
    InputEvent,
    OutputFrame,
    ProtocolViolationError,
    Session,
    SessionError,
    SessionMode,
    SubmissionResult,
)
from .slicer import DEFAULT_GEOMETRY, SliceGeometry
from .volume import LabeledVolume
from .wire import PROTOCOL_VERSION, WireError, dumps_canonical, make_message, parse_message, segmap_payload

EVENT_MSG_KINDS = {
    "PoseUpdate": EventKind.POSE_UPDATE,
    "GripDown": EventKind.GRIP_DOWN,
    "GripUp": EventKind.GRIP_UP,
    "Advance": EventKind.ADVANCE,
}


def _cue_payload(cue: CueScript) -> dict:
    return {
        "stages": list(cue.stages),
        "start_color": cue.start_color,
        "target_color": cue.target_color,
        "focus": int(cue.focus),
        "loop_count": cue.loop_count,
        "labels": [{"structure": int(s), "anchor": list(a)} for s, a in cue.labels],
        "plane_track": [{"t": k.t, "pose": k.pose.to_dict()} for k in cue.plane_track],
    }


def _frame_payload(frame: OutputFrame, baseline: dict | None = None) -> dict:
    payload = {
        "mode": frame.mode.value,
        "subgoal_index": frame.subgoal_index,
        "pose": frame.pose.to_dict(),
        "segmap": segmap_payload(frame.segmap.labels, frame.segmap.areas),
        "annotations": {
            "cross_marks": [
                {"structure": int(s), "row": c[0], "col": c[1]} for s, c in frame.annotations.cross_marks
            ],
            "question_marks": [
                {"structure": int(s), "row": c[0], "col": c[1]} for s, c in frame.annotations.question_marks
            ],
        },
        "problem_lines": list(frame.problem_lines),
        "anatomy_lines": list(frame.anatomy_lines),
        "selected_movement": frame.selected_movement.name if frame.selected_movement else None,
        "complete": frame.complete,
    }
    if baseline is not None:
        payload["baseline"] = baseline
    return payload


class SessionWire:
    """Transport-free protocol endpoint for one session."""

    def __init__(
        self,
        vol: LabeledVolume,
        cases: list[QuestionCase],
        geom: SliceGeometry = DEFAULT_GEOMETRY,
        eval_cfg: EvalConfig = EvalConfig(),
    ):
        self.vol = vol
        self.cases = {c.id: c for c in cases}
        self.geom = geom
        self.eval_cfg = eval_cfg
        self.session: Session | None = None
        self.state = None
        self.hello_done = False
        self.closed = False
        self._out_seq = 0
        self._last_in_seq: int | None = None

    def _next_seq(self) -> int:
        self._out_seq += 1
        return self._out_seq

    def _error(self, detail: str, close: bool = False) -> dict:
        if close:
            self.closed = True
        return make_message("Error", self._next_seq(), {"detail": detail, "close": close})

    def handle_raw(self, raw: str | bytes) -> list[dict]:
        try:
            msg = parse_message(raw)
        except WireError as e:
            return [self._error(str(e))]
        return self.handle(msg)

    def handle(self, msg: dict) -> list[dict]:
        """Process one inbound message, returning outbound messages in order."""
        if self.closed:
            return []
        seq = msg["seq"]
        if self._last_in_seq is not None and seq <= self._last_in_seq:
            return [self._error(f"seq {seq} not greater than {self._last_in_seq}")]
        self._last_in_seq = seq
        mtype, payload = msg["type"], msg["payload"]

        if mtype == "Hello":
            version = payload.get("version")
            if version != PROTOCOL_VERSION:
                return [self._error(f"unsupported protocol version {version!r}", close=True)]
            self.hello_done = True
            return [
                make_message(
                    "Hello",
                    self._next_seq(),
                    {"version": PROTOCOL_VERSION, "cases": sorted(self.cases)},
                )
            ]
        if not self.hello_done:
            return [self._error("Hello required before any other message")]

        if mtype == "CaseLoad":
            case_id = payload.get("case_id")
            case = self.cases.get(case_id)
            if case is None:
                return [self._error(f"unknown case {case_id!r}")]
            self.session = Session(self.vol, case.plan, self.geom, self.eval_cfg)
            self.state = self.session.initial_state()
            target_map = self.session.target_maps[0]
            return [
                make_message(
                    "CaseLoad",
                    self._next_seq(),
                    {
                        "case_id": case.id,
                        "subgoals": len(case.plan.steps),
                        "start_pose": case.start_pose.to_dict(),
                        "target_segmap": segmap_payload(target_map.labels, target_map.areas),
                        "plane_side": self.geom.plane_side,
                    },
                )
            ]

        if mtype in EVENT_MSG_KINDS:
            if self.session is None:
                return [self._error("no case loaded")]
            pose = None
            if mtype == "PoseUpdate":
                try:
                    pose = ProbePose.from_dict(payload["pose"])
                except (KeyError, TypeError, ValueError) as e:
                    return [self._error(f"bad pose payload: {e}")]
            ev = InputEvent(EVENT_MSG_KINDS[mtype], pose, float(payload.get("timestamp", 0.0)))
            try:
                self.state, outputs = self.session.step(self.state, ev)
            except SessionError as e:
                return [self._error(str(e))]
            return [self._to_message(out) for out in outputs]

        return [self._error(f"message type {mtype} not handled by server")]

    def _baseline_for(self, subgoal_index: int) -> dict | None:
        """Shadow/arrow guidance data for the step the trainee is attempting."""
        if self.session is None or subgoal_index >= len(self.session.plan.steps):
            return None
        g = baseline_guidance(self.session.plan.steps[subgoal_index])
        return {
            "shadow_pose": g.shadow_pose.to_dict(),
            "arrow_movement": g.arrow_movement.name,
            "arrow_sign": g.arrow_sign,
            "subtask_text": g.subtask_text,
        }

    def _to_message(self, out) -> dict:
        if isinstance(out, OutputFrame):
            return make_message(
                "Frame", self._next_seq(), _frame_payload(out, self._baseline_for(out.subgoal_index))
            )
        if isinstance(out, SubmissionResult):
            payload = {
                "correct": out.correct,
                "pos_err_px": out.pos_err_px,
                "rot_err_deg": out.rot_err_deg,
                "subgoal_index": out.subgoal_index,
                "attempts": out.attempts,
                "complete": out.complete,
            }
            if out.correct and not out.complete:
                # the next subgoal's target view, so the client can swap panels
                nxt = self.session.target_maps[out.subgoal_index + 1]
                payload["next_target_segmap"] = segmap_payload(nxt.labels, nxt.areas)
            return make_message("Result", self._next_seq(), payload)
        if isinstance(out, CuePlaybackOutput):
            return make_message(
                "Cue", self._next_seq(), {"subgoal_index": out.subgoal_index, "cue": _cue_payload(out.cue)}
            )
        raise TypeError(f"unexpected session output {type(out)!r}")


class SessionLog:
    """JSONL log of one session: {"dir": "in"|"out", "msg": {...}} per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w")

    def record(self, direction: str, msg: dict) -> None:
        self._fh.write(dumps_canonical({"dir": direction, "msg": msg}) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def replay_log(
    lines: list[str] | list[dict],
    vol: LabeledVolume,
    cases: list[QuestionCase],
    geom: SliceGeometry = DEFAULT_GEOMETRY,
    eval_cfg: EvalConfig = EvalConfig(),
) -> list[str]:
    """Re-run the inbound half of a session log; returns canonical outbound
    serializations, which must match the recorded stream byte for byte."""
    wire = SessionWire(vol, cases, geom, eval_cfg)
    out: list[str] = []
    for line in lines:
        entry = json.loads(line) if isinstance(line, str) else line
        if entry["dir"] != "in":
            continue
        for msg in wire.handle_raw(dumps_canonical(entry["msg"])):
            out.append(dumps_canonical(msg))
    return out


def outbound_of_log(lines: list[str] | list[dict]) -> list[str]:
    out = []
    for line in lines:
        entry = json.loads(line) if isinstance(line, str) else line
        if entry["dir"] == "out":
            out.append(dumps_canonical(entry["msg"]))
    return out


def create_app(
    vol: LabeledVolume,
    cases: list[QuestionCase],
    geom: SliceGeometry = DEFAULT_GEOMETRY,
    eval_cfg: EvalConfig = EvalConfig(),
    log_dir: str | Path | None = None,
    static_dir: str | Path | None = None,
):
    """FastAPI app exposing the session protocol at /ws.

    The shared volume is immutable, so connections are independent; events
    within a connection are processed strictly in arrival order by the
    single receive loop.
    """
    app = FastAPI(title="echotutor", version="0.1.0")
    counter = {"n": 0}

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "cases": sorted(c.id for c in cases)}

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        wire = SessionWire(vol, cases, geom, eval_cfg)
        log = None
        if log_dir is not None:
            counter["n"] += 1
            log = SessionLog(Path(log_dir) / f"session-{counter['n']:04d}.jsonl")
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    entries = [parse_message(raw)]
                except WireError as e:
                    entries = None
                    responses = [wire._error(str(e))]
                if entries is not None:
                    if log:
                        log.record("in", entries[0])
                    responses = wire.handle(entries[0])
                for msg in responses:
                    if log:
                        log.record("out", msg)
                    await ws.send_text(dumps_canonical(msg))
                if wire.closed:
                    await ws.close()
                    break
        except WebSocketDisconnect:
            pass
        finally:
            if log:
                log.close()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(
    volume_path: str | Path,
    cases_path: str | Path,
    port: int = 8999,
    host: str = "127.0.0.1",
    log_dir: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> None:
    """Load the volume and case set, then run the service until interrupted."""
    import uvicorn

    from .volume import load_volume

    vol = load_volume(volume_path)
    cases = load_cases(cases_path, vol)
    app = create_app(vol, cases, log_dir=log_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
