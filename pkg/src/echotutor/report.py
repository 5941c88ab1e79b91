"""Case reports: side-by-side optimized vs naive subgoal walkthroughs.

The report is a single self-contained HTML document: per-step color-coded
view panels for the optimized plan, the similarity curve, and the naive
6-DoF decomposition panels for comparison.
"""

from __future__ import annotations

import base64
import io
import math
from pathlib import Path

import numpy as np
from PIL import Image

from .cases import QuestionCase
from .planner import SubgoalPlan
from .slicer import DEFAULT_GEOMETRY, SegMap, SliceGeometry, slice_volume
from .volume import LabeledVolume, Structure

# fixed per-structure display colors (background stays black); the UI uses
# the same palette so server-side report panels match the live client
STRUCTURE_COLORS: dict[int, tuple[int, int, int]] = {
    int(Structure.BG): (0, 0, 0),
    int(Structure.RA): (66, 135, 245),
    int(Structure.LA): (52, 211, 153),
    int(Structure.RV): (129, 140, 248),
    int(Structure.LV): (249, 115, 22),
    int(Structure.TV): (239, 68, 68),
    int(Structure.PV): (234, 179, 8),
    int(Structure.MV): (217, 70, 239),
    int(Structure.AV): (20, 184, 166),
    int(Structure.MYO): (120, 113, 108),
}


def segmap_to_png_bytes(segmap: SegMap, scale: int = 1) -> bytes:
    palette = np.zeros((256, 3), dtype=np.uint8)
    for sid, rgb in STRUCTURE_COLORS.items():
        palette[sid] = rgb
    rgb = palette[segmap.labels]
    img = Image.fromarray(rgb, mode="RGB")
    if scale != 1:
        img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def _img_tag(png: bytes, role: str, caption: str) -> str:
    b64 = base64.b64encode(png).decode("ascii")
    return (
        f'<figure class="panel" data-role="{role}">'
        f'<img src="data:image/png;base64,{b64}" width="192" height="192"/>'
        f"<figcaption>{caption}</figcaption></figure>"
    )


def _movement_label(movement, amount: float) -> str:
    if movement.is_rotation:
        return f"{movement.label} {math.degrees(amount):+.1f}&deg;"
    return f"{movement.label} {amount:+.3f}"


def _similarity_curve_png(plan: SubgoalPlan) -> bytes:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    curve = plan.similarity_curve()
    xs = list(range(1, len(curve) + 1))
    fig, ax = plt.subplots(figsize=(4.2, 2.6), dpi=110)
    ax.plot(xs, curve, marker="o", color="#2563eb")
    if plan.start_similarity is not None:
        ax.scatter([0], [plan.start_similarity], color="#9ca3af", zorder=3)
    ax.set_xlabel("subgoal")
    ax.set_ylabel("similarity")
    ax.set_title("similarity to target per step")
    ax.grid(True, alpha=0.3)
    buf = io.BytesIO()
    fig.tight_layout()
    fig.savefig(buf, format="png")
    plt.close(fig)
    return buf.getvalue()


def export_report(case: QuestionCase, vol: LabeledVolume, geom: SliceGeometry = DEFAULT_GEOMETRY) -> str:
    """Render one case to a self-contained HTML report string."""
    start_map = slice_volume(vol, case.start_pose, geom)
    target_map = slice_volume(vol, case.target_pose, geom)

    opt_panels = [_img_tag(segmap_to_png_bytes(start_map), "opt-panel", "Start")]
    for i, step in enumerate(case.plan.steps, start=1):
        sm = step.segmap if step.segmap is not None else slice_volume(vol, step.pose, geom)
        caption = f"Step {i}: {_movement_label(step.movement, step.amount)}"
        if step.similarity_to_target is not None:
            caption += f" (sim {step.similarity_to_target:.2f})"
        if step.via_familiar:
            caption += f" via {step.via_familiar}"
        opt_panels.append(_img_tag(segmap_to_png_bytes(sm), "opt-panel", caption))

    naive_panels = [_img_tag(segmap_to_png_bytes(start_map), "naive-panel", "Start")]
    for i, step in enumerate(case.naive_plan.steps, start=1):
        sm = step.segmap if step.segmap is not None else slice_volume(vol, step.pose, geom)
        naive_panels.append(
            _img_tag(
                segmap_to_png_bytes(sm),
                "naive-panel",
                f"Step {i}: {_movement_label(step.movement, step.amount)}",
            )
        )

    curve_png = _similarity_curve_png(case.plan)
    legend_rows = "".join(
        f'<span class="chip"><i style="background: rgb{STRUCTURE_COLORS[int(s)]}"></i>{s.name}</span>'
        for s in Structure
        if s != Structure.BG
    )
    converged = "converged" if case.plan.converged else "NOT converged"
    html = f"""<!doctype html>
<html><head><meta charset="utf-8"><title>Subgoal report {case.id}</title>
<style>
body {{ font-family: system-ui, sans-serif; margin: 2em; background: #fafaf9; color: #1c1917; }}
.panel {{ display: inline-block; margin: 0 8px 8px 0; text-align: center; }}
.panel img {{ image-rendering: pixelated; border: 1px solid #d6d3d1; }}
figcaption {{ font-size: 12px; max-width: 192px; }}
.chip {{ margin-right: 10px; font-size: 12px; }}
.chip i {{ display: inline-block; width: 10px; height: 10px; margin-right: 3px; }}
h2 {{ border-bottom: 1px solid #e7e5e4; padding-bottom: 4px; }}
</style></head><body>
<h1>Subgoal report: {case.id}</h1>
<p>volume {case.volume_ref} &middot; seed {case.seed} &middot; plan {converged},
{len(case.plan.steps)} steps, final similarity {case.plan.final_similarity:.2f}</p>
<p>{legend_rows}</p>
<h2>Optimized subgoals</h2>
<div>{''.join(opt_panels)}</div>
<h2>Similarity curve</h2>
{_img_tag(curve_png, "similarity-curve", "recorded per-step similarity")}
<h2>Naive 6-DoF baseline</h2>
<div>{''.join(naive_panels)}</div>
</body></html>
"""
    return html


def write_report(case: QuestionCase, vol: LabeledVolume, path: str | Path) -> None:
    Path(path).write_text(export_report(case, vol))
