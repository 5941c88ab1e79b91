/**
 * Pure view rendering: segmentation images to RGBA pixel buffers and
 * annotation overlays to a glyph draw list. The browser shell blits the
 * buffers with putImageData and draws the glyphs; tests assert on the data.
 */

import type { FramePayload } from "./protocol.js";
import { decodeSegmap, type LabelImage } from "./rle.js";
import { STRUCTURE_COLORS } from "./palette.js";

export interface Glyph {
  kind: "cross" | "question";
  structure: number;
  row: number;
  col: number;
}

export interface ViewRender {
  image: LabelImage;
  rgba: Uint8ClampedArray<ArrayBuffer>; // width * height * 4
  glyphs: Glyph[];
}

export function labelsToRgba(img: LabelImage): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(img.width * img.height * 4);
  for (let i = 0; i < img.labels.length; i++) {
    const color = STRUCTURE_COLORS[img.labels[i]] ?? [255, 255, 255];
    const j = i * 4;
    out[j] = color[0];
    out[j + 1] = color[1];
    out[j + 2] = color[2];
    out[j + 3] = 255;
  }
  return out;
}

/** Current view: color-coded segments plus x marks on incorrect structures. */
export function renderCurrentView(frame: FramePayload): ViewRender {
  const image = decodeSegmap(frame.segmap);
  return {
    image,
    rgba: labelsToRgba(image),
    glyphs: frame.annotations.cross_marks.map((m) => ({
      kind: "cross" as const,
      structure: m.structure,
      row: m.row,
      col: m.col,
    })),
  };
}

/** Target view: color-coded segments plus ? marks on missing structures. */
export function renderTargetView(
  target: FramePayload["segmap"],
  frame: FramePayload | null,
): ViewRender {
  const image = decodeSegmap(target);
  const glyphs = (frame?.annotations.question_marks ?? []).map((m) => ({
    kind: "question" as const,
    structure: m.structure,
    row: m.row,
    col: m.col,
  }));
  return { image, rgba: labelsToRgba(image), glyphs };
}
