"""echotutor: probe-navigation tutoring engine for cardiac ultrasound training.

Slices a labeled 3D heart volume along a virtual probe's plane, scores the
resulting view against a target view, plans single-movement subgoals toward
the target, generates textual / image / 3D-cue explanations for each step,
and serves the whole loop interactively over a JSON wire protocol.
"""

__version__ = "0.1.0"

from .geometry import MovementType, ProbePose, apply_movement
from .slicer import DEFAULT_GEOMETRY, SegMap, SliceGeometry, slice_volume
from .volume import (
    LabeledVolume,
    PhantomSpec,
    Structure,
    generate_phantom,
    load_volume,
    save_volume,
    structure_centroid,
)

__all__ = [
    "MovementType",
    "ProbePose",
    "apply_movement",
    "DEFAULT_GEOMETRY",
    "SegMap",
    "SliceGeometry",
    "slice_volume",
    "LabeledVolume",
    "PhantomSpec",
    "Structure",
    "generate_phantom",
    "load_volume",
    "save_volume",
    "structure_centroid",
    "__version__",
]
