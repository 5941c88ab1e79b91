/** Browser shell: canvases, text panels, keyboard loop, cue animation. */

import { TrainerClient } from "./client.js";
import type { CueView } from "./cue.js";
import { quatToMatrix, type Pose } from "./math.js";
import { colorCss, STRUCTURE_COLORS, STRUCTURE_NAMES } from "./palette.js";
import type { ClientState } from "./protocol.js";
import { renderCurrentView, renderTargetView, type ViewRender } from "./render.js";

const $ = (id: string) => document.getElementById(id)!;

function drawView(canvas: HTMLCanvasElement, view: ViewRender): void {
  const ctx = canvas.getContext("2d")!;
  const img = new ImageData(view.rgba, view.image.width, view.image.height);
  ctx.putImageData(img, 0, 0);
  ctx.font = "bold 18px sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  for (const glyph of view.glyphs) {
    ctx.fillStyle = glyph.kind === "cross" ? "#ffffff" : "#fde047";
    ctx.fillText(glyph.kind === "cross" ? "×" : "?", glyph.col, glyph.row);
  }
}

function drawLegend(el: HTMLElement): void {
  el.innerHTML = "";
  for (let id = 1; id <= 9; id++) {
    const chip = document.createElement("span");
    chip.className = "chip";
    const swatch = document.createElement("i");
    swatch.style.background = colorCss(id);
    chip.appendChild(swatch);
    chip.appendChild(document.createTextNode(STRUCTURE_NAMES[id]));
    el.appendChild(chip);
  }
}

/** Simple orthographic projection of the cue scene onto the canvas. */
function drawCue(canvas: HTMLCanvasElement, view: CueView): void {
  const ctx = canvas.getContext("2d")!;
  const w = canvas.width;
  const h = canvas.height;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, w, h);
  const px = (p: [number, number, number]) => ({
    x: (p[0] - p[1] * 0.35 + 0.35) * w * 0.8,
    y: h - (1 - p[2] + (0.5 - p[1]) * 0.25) * h * 0.7 - h * 0.15,
  });
  // ellipsoid proxies for the heart structures (ids 1..9)
  const proxies: [number, [number, number, number], number][] = [
    [1, [0.35, 0.5, 0.35], 0.11],
    [2, [0.65, 0.5, 0.35], 0.12],
    [3, [0.35, 0.5, 0.65], 0.13],
    [4, [0.65, 0.5, 0.65], 0.15],
    [5, [0.35, 0.5, 0.49], 0.045],
    [6, [0.49, 0.5, 0.65], 0.045],
    [7, [0.65, 0.5, 0.48], 0.045],
    [8, [0.492, 0.5, 0.492], 0.045],
    [9, [0.5, 0.5, 0.5], 0.46],
  ];
  const visible =
    view.stageIndex === 0
      ? proxies
      : view.stageIndex === 1
        ? proxies.filter(([id]) => id !== 9)
        : proxies.filter(([id]) => id === view.focus);
  for (const [id, center, radius] of visible) {
    const c = px(center);
    ctx.beginPath();
    ctx.ellipse(c.x, c.y, radius * w * 0.8, radius * h * 0.6, 0, 0, 2 * Math.PI);
    ctx.strokeStyle = colorCss(id);
    ctx.globalAlpha = id === view.focus ? 1.0 : 0.6;
    ctx.lineWidth = id === view.focus ? 3 : 1.5;
    ctx.stroke();
  }
  ctx.globalAlpha = 1.0;
  // slicing plane quad swept along the track, tinted red -> green
  const pose: Pose = view.pose;
  const m = quatToMatrix(pose.orientation);
  const corner = (u: number, v: number): [number, number, number] => [
    pose.position[0] + u * m[0][0] + v * m[0][2],
    pose.position[1] + u * m[1][0] + v * m[1][2],
    pose.position[2] + u * m[2][0] + v * m[2][2],
  ];
  const quad = [corner(-0.5, 0), corner(0.5, 0), corner(0.5, 1), corner(-0.5, 1)];
  ctx.beginPath();
  quad.forEach((p, i) => {
    const q = px(p);
    if (i === 0) ctx.moveTo(q.x, q.y);
    else ctx.lineTo(q.x, q.y);
  });
  ctx.closePath();
  ctx.fillStyle = `rgba(${view.color[0]}, ${view.color[1]}, ${view.color[2]}, 0.35)`;
  ctx.strokeStyle = `rgb(${view.color[0]}, ${view.color[1]}, ${view.color[2]})`;
  ctx.fill();
  ctx.stroke();
  // stage 2 labels at 3D anchors
  ctx.font = "12px sans-serif";
  ctx.fillStyle = "#fff";
  for (const label of view.labels) {
    const q = px(label.anchor);
    ctx.fillText(STRUCTURE_NAMES[label.structure] ?? String(label.structure), q.x, q.y);
  }
  ctx.fillStyle = "#ccc";
  ctx.fillText(
    `stage ${view.stageIndex + 1}/3: ${view.stageName} (loop ${view.loop + 1})`,
    w / 2,
    h - 12,
  );
}

function modeLabel(state: ClientState): string {
  if (state.complete) return "Complete";
  return { A: "A - Free exploration", B: "B - Movement selection", C: "C - Amount specification", D: "D - Cue playback" }[
    state.mode
  ];
}

function main(): void {
  const currentCanvas = $("current") as HTMLCanvasElement;
  const targetCanvas = $("target") as HTMLCanvasElement;
  const cueCanvas = $("cue") as HTMLCanvasElement;
  drawLegend($("legend"));

  const client = new TrainerClient({
    url: `ws://${location.host}/ws`,
    socketFactory: (url) => new WebSocket(url) as unknown as import("./client.js").SocketLike,
    reconnect: true,
    onUpdate: (state) => {
      $("status").textContent = `${state.status} | ${modeLabel(state)} | subgoal ${Math.min(
        state.latestFrame?.subgoal_index ?? 0,
        Math.max(state.subgoals - 1, 0),
      ) + 1}/${state.subgoals}`;
      $("problem").innerHTML = (state.latestFrame?.problem_lines ?? []).map((l) => `<li>${l}</li>`).join("");
      $("anatomy").innerHTML = (state.latestFrame?.anatomy_lines ?? []).map((l) => `<li>${l}</li>`).join("");
      $("selected").textContent = state.latestFrame?.selected_movement ?? "-";
      const baseline = state.latestFrame?.baseline;
      const wantBaseline = ($("baseline-toggle") as HTMLInputElement).checked;
      $("baseline").textContent =
        wantBaseline && baseline
          ? `${baseline.subtask_text} — ${baseline.arrow_movement} ${baseline.arrow_sign > 0 ? "+" : "−"}`
          : "";
      $("errors").textContent = state.errors.slice(-1)[0] ?? "";
      if (state.lastResult) {
        const r = state.lastResult;
        $("result").textContent = `${r.correct ? "correct" : "incorrect"} (pos ${r.pos_err_px.toFixed(
          1,
        )}px, rot ${r.rot_err_deg.toFixed(1)}°)${r.complete ? " - case complete!" : ""}`;
      }
      if (state.latestFrame) {
        drawView(currentCanvas, renderCurrentView(state.latestFrame));
      }
      if (state.targetSegmap) {
        drawView(targetCanvas, renderTargetView(state.targetSegmap, state.latestFrame));
      }
      cueCanvas.style.display = state.mode === "D" ? "block" : "none";
    },
  });
  client.connect();

  fetch("/healthz")
    .then((r) => r.json())
    .then((info: { cases: string[] }) => {
      const picker = $("case-picker") as HTMLSelectElement;
      for (const id of info.cases) {
        const opt = document.createElement("option");
        opt.value = id;
        opt.textContent = id;
        picker.appendChild(opt);
      }
      picker.onchange = () => client.start(picker.value);
      if (info.cases.length) {
        picker.value = info.cases[0];
        client.start(info.cases[0]);
      }
    });

  window.addEventListener("keydown", (ev) => {
    const acted = client.handleKey(ev.key, performance.now());
    if (acted !== "none") {
      ev.preventDefault();
    }
  });

  let lastTick = performance.now();
  const tick = () => {
    const now = performance.now();
    if (client.cuePlayer && client.state.mode === "D") {
      client.cuePlayer.tick((now - lastTick) / 1000);
      drawCue(cueCanvas, client.cuePlayer.view());
    }
    lastTick = now;
    requestAnimationFrame(tick);
  };
  requestAnimationFrame(tick);
}

main();
