"""Plane slicing: turn a probe pose into a 256x256 labeled view of the volume.

Pixel (u, v) of the image samples the voxel containing the world point

    p(u, v) = position + (u - (w-1)/2) * pitch * X_hat + v * pitch * Z_hat

so the plane hangs from the probe position at its top-center and fans down
into the volume, like a real probe footprint. Sampling is nearest-neighbor
(labels are categorical) and points outside [0,1]^3 read as background.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import ProbePose, quat_to_matrix
from .volume import LabeledVolume, Structure

NUM_CATEGORIES = 10  # BG + 9 structures


@dataclass(frozen=True)
class SliceGeometry:
    """Image raster: square plane of ``plane_side`` normalized units."""

    width_px: int = 256
    depth_px: int = 256
    plane_side: float = 1.0

    def __post_init__(self):
        if self.width_px <= 0 or self.depth_px <= 0 or self.plane_side <= 0:
            raise ValueError("slice geometry must be positive")
        if self.width_px != self.depth_px:
            raise ValueError("slicing plane must be square")

    @property
    def pitch(self) -> float:
        return self.plane_side / self.width_px

    def plane_center_offset(self) -> float:
        """Depth offset from probe position to the plane's pixel-grid center."""
        return (self.depth_px - 1) / 2.0 * self.pitch


DEFAULT_GEOMETRY = SliceGeometry()


@lru_cache(maxsize=8)
def _pixel_offsets(geom: SliceGeometry) -> tuple[np.ndarray, np.ndarray]:
    u = (np.arange(geom.width_px) - (geom.width_px - 1) / 2.0) * geom.pitch
    v = np.arange(geom.depth_px) * geom.pitch
    return u, v


class SegMap:
    """Per-structure view of one plane slice.

    Internally a (depth, width) uint8 label image, which makes the per-category
    masks pairwise disjoint by construction; per-category pixel areas are
    cached at build time.
    """

    __slots__ = ("labels", "areas", "pose", "geometry")

    def __init__(self, labels: np.ndarray, pose: ProbePose | None, geometry: SliceGeometry):
        labels = np.ascontiguousarray(labels, dtype=np.uint8)
        if labels.shape != (geometry.depth_px, geometry.width_px):
            raise ValueError(f"label image shape {labels.shape} does not match geometry")
        labels.flags.writeable = False
        self.labels = labels
        self.areas = np.bincount(labels.reshape(-1), minlength=NUM_CATEGORIES)
        self.pose = pose
        self.geometry = geometry

    def mask(self, s: int) -> np.ndarray:
        return self.labels == int(s)

    def area(self, s: int) -> int:
        return int(self.areas[int(s)])

    def same_geometry(self, other: "SegMap") -> bool:
        return self.geometry == other.geometry

    def equals(self, other: "SegMap") -> bool:
        return self.same_geometry(other) and np.array_equal(self.labels, other.labels)


def slice_volume(vol: LabeledVolume, pose: ProbePose, geom: SliceGeometry = DEFAULT_GEOMETRY) -> SegMap:
    """Sample the volume along the pose's image plane into a SegMap."""
    rot = quat_to_matrix(pose.orientation)
    xhat, zhat = rot[:, 0], rot[:, 2]
    u, v = _pixel_offsets(geom)
    # points (depth, width, 3): rows advance along depth (local Z)
    pts = (
        pose.position[None, None, :]
        + v[:, None, None] * zhat[None, None, :]
        + u[None, :, None] * xhat[None, None, :]
    )
    nx, ny, nz = vol.dims
    sx, sy, sz = vol.spacing
    ix = np.floor(pts[..., 0] / sx).astype(np.int64)
    iy = np.floor(pts[..., 1] / sy).astype(np.int64)
    iz = np.floor(pts[..., 2] / sz).astype(np.int64)
    inside = (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny) & (iz >= 0) & (iz < nz)
    labels = np.zeros(pts.shape[:2], dtype=np.uint8)
    if inside.any():
        flat = vol.labels
        lin = ix[inside] + nx * (iy[inside] + ny * iz[inside])
        labels[inside] = flat[lin]
    return SegMap(labels, pose, geom)


def plane_center(pose: ProbePose, geom: SliceGeometry = DEFAULT_GEOMETRY) -> np.ndarray:
    """World position of the image's pixel-grid center."""
    zhat = quat_to_matrix(pose.orientation)[:, 2]
    return pose.position + geom.plane_center_offset() * zhat


def clinical_structures_present(segmap: SegMap, min_area: int = 1) -> list[Structure]:
    """Clinical structures (chambers + valves) with at least min_area pixels."""
    out = []
    for s in Structure:
        if s in (Structure.BG, Structure.MYO):
            continue
        if segmap.area(s) >= min_area:
            out.append(s)
    return out
