"""Wire protocol primitives: RLE label-image codec and message envelopes.

A raw 256x256 label image is 64 KiB per frame; run-length encoding keeps the
60 Hz frame stream cheap (segment views compress to a few hundred runs). The
codec is row-major over the flattened image: a u16 width/height header, then
(u16 run_length, u8 label) records, little-endian throughout.

Messages are JSON envelopes {"type", "seq", "payload"} with per-direction
strictly increasing sequence numbers; the protocol version is negotiated by
the Hello exchange.
"""

from __future__ import annotations

import base64
import json
import struct

import numpy as np

PROTOCOL_VERSION = 1

MSG_TYPES = (
    "Hello",
    "CaseLoad",
    "PoseUpdate",
    "GripDown",
    "GripUp",
    "Advance",
    "Frame",
    "Cue",
    "Result",
    "Error",
)

_MAX_RUN = 0xFFFF


class WireError(Exception):
    pass


def rle_encode(labels: np.ndarray) -> bytes:
    """Encode a 2D uint8 label image; rows are concatenated in order."""
    labels = np.asarray(labels, dtype=np.uint8)
    if labels.ndim != 2:
        raise ValueError("expected a 2D label image")
    h, w = labels.shape
    flat = labels.reshape(-1)
    out = [struct.pack("<HH", h, w)]
    if flat.size:
        boundaries = np.flatnonzero(np.diff(flat)) + 1
        starts = np.concatenate([[0], boundaries])
        ends = np.concatenate([boundaries, [flat.size]])
        for s, e in zip(starts, ends):
            run, value = int(e - s), int(flat[s])
            while run > _MAX_RUN:
                out.append(struct.pack("<HB", _MAX_RUN, value))
                run -= _MAX_RUN
            out.append(struct.pack("<HB", run, value))
    return b"".join(out)


def rle_decode(data: bytes) -> np.ndarray:
    """Decode back to the 2D uint8 label image; validates the pixel count."""
    if len(data) < 4:
        raise WireError("RLE payload shorter than its header")
    h, w = struct.unpack_from("<HH", data, 0)
    expected = h * w
    flat = np.empty(expected, dtype=np.uint8)
    pos, offset = 0, 4
    while offset < len(data):
        if offset + 3 > len(data):
            raise WireError(f"truncated RLE record at byte {offset}")
        run, value = struct.unpack_from("<HB", data, offset)
        offset += 3
        if pos + run > expected:
            raise WireError(f"RLE runs overflow {expected} pixels")
        flat[pos : pos + run] = value
        pos += run
    if pos != expected:
        raise WireError(f"RLE runs cover {pos} of {expected} pixels")
    return flat.reshape(h, w)


def segmap_payload(labels: np.ndarray, areas: np.ndarray) -> dict:
    return {
        "w": int(labels.shape[1]),
        "h": int(labels.shape[0]),
        "rle": base64.b64encode(rle_encode(labels)).decode("ascii"),
        "areas": {str(i): int(a) for i, a in enumerate(areas) if a},
    }


def make_message(msg_type: str, seq: int, payload: dict | None = None) -> dict:
    if msg_type not in MSG_TYPES:
        raise WireError(f"unknown message type {msg_type!r}")
    return {"type": msg_type, "seq": seq, "payload": payload or {}}


def parse_message(raw: str | bytes) -> dict:
    """Parse and validate one inbound envelope."""
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise WireError(f"malformed JSON message: {e}") from e
    if not isinstance(msg, dict):
        raise WireError("message must be a JSON object")
    msg_type = msg.get("type")
    if msg_type not in MSG_TYPES:
        raise WireError(f"unknown message type {msg_type!r}")
    seq = msg.get("seq")
    if not isinstance(seq, int):
        raise WireError("message seq must be an integer")
    payload = msg.get("payload", {})
    if not isinstance(payload, dict):
        raise WireError("message payload must be an object")
    return {"type": msg_type, "seq": seq, "payload": payload}


def dumps_canonical(msg: dict) -> str:
    """Deterministic serialization so replayed streams are byte-identical."""
    return json.dumps(msg, sort_keys=True, separators=(",", ":"))
