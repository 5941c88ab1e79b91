"""Labeled heart volume: structure ids, a synthetic analytic phantom, file I/O.

The volume is a dense voxel grid of structure labels spanning [0,1]^3 in
normalized units. The shipped phantom builds every structure from axis-aligned
ellipsoids so cross-section areas, volumes, and centroids all have closed-form
values to test against.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

MAGIC = b"SPVL"
FORMAT_VERSION = 1


class Structure(IntEnum):
    """Fixed label ids: background, four chambers, four valves, heart mask."""

    BG = 0
    RA = 1
    LA = 2
    RV = 3
    LV = 4
    TV = 5
    PV = 6
    MV = 7
    AV = 8
    MYO = 9


CHAMBERS = (Structure.RA, Structure.LA, Structure.RV, Structure.LV)
VALVES = (Structure.TV, Structure.PV, Structure.MV, Structure.AV)
CLINICAL_STRUCTURES = tuple(sorted(CHAMBERS + VALVES))
ALL_STRUCTURES = CLINICAL_STRUCTURES + (Structure.MYO,)
DEFAULT_LABEL_TABLE = {int(s): s.name for s in Structure}


class VolumeError(Exception):
    """Base class for volume construction and I/O failures."""


class OverlapError(VolumeError):
    """Two chamber ellipsoids overlap beyond the configured tolerance."""


class ResolutionError(VolumeError):
    """Grid too coarse: a structure rasterized to zero voxels (or dims < 32)."""


class FormatError(VolumeError):
    """Malformed volume file; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class EmptyStructureError(VolumeError):
    """Requested structure has no voxels in this volume."""


_IDENTITY_ROT = (
    (1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (0.0, 0.0, 1.0),
)


@dataclass(frozen=True)
class Ellipsoid:
    """Axis-aligned-by-default ellipsoid; orientation is a 3x3 rotation."""

    center: tuple[float, float, float]
    semi_axes: tuple[float, float, float]
    rotation: tuple[tuple[float, ...], ...] = _IDENTITY_ROT

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of points (..., 3) inside the ellipsoid."""
        rot = np.asarray(self.rotation)
        local = (pts - np.asarray(self.center)) @ rot  # world->local: R^T via right-mult
        scaled = local / np.asarray(self.semi_axes)
        return np.einsum("...i,...i->...", scaled, scaled) <= 1.0

    def contains_grid(self, cx: np.ndarray, cy: np.ndarray, cz: np.ndarray) -> np.ndarray:
        """Boolean (nz, ny, nx) mask from per-axis voxel-center coordinates.

        Axis-aligned ellipsoids use a separable broadcast, which avoids
        materializing the full point grid.
        """
        if self.rotation == _IDENTITY_ROT:
            qx = ((cx - self.center[0]) / self.semi_axes[0]) ** 2
            qy = ((cy - self.center[1]) / self.semi_axes[1]) ** 2
            qz = ((cz - self.center[2]) / self.semi_axes[2]) ** 2
            return qz[:, None, None] + qy[None, :, None] + qx[None, None, :] <= 1.0
        out = np.empty((cz.size, cy.size, cx.size), dtype=bool)
        pts = np.empty((cy.size, cx.size, 3))
        pts[..., 0] = cx[None, :]
        pts[..., 1] = cy[:, None]
        for k, z in enumerate(cz):
            pts[..., 2] = z
            out[k] = self.contains(pts)
        return out

    def analytic_volume(self) -> float:
        a, b, c = self.semi_axes
        return 4.0 / 3.0 * np.pi * a * b * c


@dataclass(frozen=True)
class PhantomSpec:
    """Deterministic recipe for the synthetic heart phantom.

    Chambers are larger ellipsoids arranged in a ring in the y=0.5 plane;
    valves are small ellipsoids (semi-axes <= 0.05) sitting on the boundary
    between their two adjacent chambers; MYO is an ellipsoidal shell wrapping
    everything. Identical specs produce bit-identical volumes.
    """

    resolution: tuple[int, int, int] = (128, 128, 128)
    seed: int = 0
    chambers: dict[int, Ellipsoid] = field(default_factory=lambda: dict(_DEFAULT_CHAMBERS))
    valves: dict[int, Ellipsoid] = field(default_factory=lambda: dict(_DEFAULT_VALVES))
    myo_outer: Ellipsoid = Ellipsoid((0.5, 0.5, 0.5), (0.45, 0.33, 0.47))
    myo_shell_thickness: float = 0.06
    chamber_overlap_tolerance: float = 0.0

    def content_hash(self) -> str:
        blob = repr(
            (
                self.resolution,
                self.seed,
                sorted(self.chambers.items()),
                sorted(self.valves.items()),
                self.myo_outer,
                self.myo_shell_thickness,
            )
        ).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# Chambers sit on a ring in the y=0.5 plane: atria at z=0.35, ventricles at
# z=0.65, right side at x=0.35, left at x=0.65. Ventricles are larger than
# atria and the LV is the largest structure. Adjacent semi-axes sum to 0.23
# per ring edge, leaving a 0.07 gap that each valve bridges.
_DEFAULT_CHAMBERS = {
    int(Structure.RA): Ellipsoid((0.35, 0.50, 0.35), (0.110, 0.110, 0.105)),
    int(Structure.LA): Ellipsoid((0.65, 0.50, 0.35), (0.120, 0.115, 0.095)),
    int(Structure.RV): Ellipsoid((0.35, 0.50, 0.65), (0.105, 0.130, 0.125)),
    int(Structure.LV): Ellipsoid((0.65, 0.50, 0.65), (0.125, 0.150, 0.135)),
}

# Each valve is centered in the surface gap between its two adjacent chambers:
# TV/PV/MV on their ring edges (overlapping both neighbors slightly, sphere
# radius 0.045 vs. half-gap 0.035), AV in the central gap on the RA-LV
# diagonal, mirroring the central aortic root.
_DEFAULT_VALVES = {
    int(Structure.TV): Ellipsoid((0.35, 0.50, 0.49), (0.045, 0.045, 0.045)),    # RA-RV
    int(Structure.PV): Ellipsoid((0.49, 0.50, 0.65), (0.045, 0.045, 0.045)),    # RV-LV
    int(Structure.MV): Ellipsoid((0.65, 0.50, 0.48), (0.045, 0.045, 0.045)),    # LV-LA
    int(Structure.AV): Ellipsoid((0.492, 0.50, 0.492), (0.045, 0.045, 0.045)),  # RA-LV
}


@dataclass(frozen=True)
class LabeledVolume:
    """Dense labeled voxel grid.

    ``labels`` is flat uint8 with linear index x + nx*(y + ny*z); ``spacing``
    is the per-axis voxel size so the grid spans spacing*dims (default [0,1]^3).
    Immutable after construction and safe to share across threads.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    labels: np.ndarray
    label_table: dict[int, str] = field(default_factory=lambda: dict(DEFAULT_LABEL_TABLE))
    provenance: str = ""

    def __post_init__(self):
        nx, ny, nz = self.dims
        labels = np.ascontiguousarray(np.asarray(self.labels, dtype=np.uint8).reshape(nx * ny * nz))
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        present = np.unique(labels)
        missing = [int(v) for v in present if int(v) not in self.label_table]
        if missing:
            raise ValueError(f"label values {missing} not in label_table")

    @property
    def grid(self) -> np.ndarray:
        """Labels as a (nz, ny, nx) view: grid[z, y, x]."""
        nx, ny, nz = self.dims
        return self.labels.reshape(nz, ny, nx)

    def voxel_count(self, s: int) -> int:
        return int(np.count_nonzero(self.labels == int(s)))

    def voxel_volume(self) -> float:
        sx, sy, sz = self.spacing
        return sx * sy * sz


def generate_phantom(spec: PhantomSpec) -> LabeledVolume:
    """Rasterize the phantom spec onto its voxel grid.

    Each voxel takes the label of the innermost containing ellipsoid with
    precedence valves > chambers > MYO > BG. Raises OverlapError if chamber
    ellipsoids collide beyond tolerance and ResolutionError if the grid is
    coarser than 32 per axis or any structure rasterizes to zero voxels.
    """
    nx, ny, nz = spec.resolution
    if min(nx, ny, nz) < 32:
        raise ResolutionError(f"resolution {spec.resolution} below minimum of 32 per axis")
    spacing = (1.0 / nx, 1.0 / ny, 1.0 / nz)
    cx = (np.arange(nx) + 0.5) * spacing[0]
    cy = (np.arange(ny) + 0.5) * spacing[1]
    cz = (np.arange(nz) + 0.5) * spacing[2]

    grid = np.zeros((nz, ny, nx), dtype=np.uint8)
    inner = Ellipsoid(
        spec.myo_outer.center,
        tuple(max(a - spec.myo_shell_thickness, 0.0) for a in spec.myo_outer.semi_axes),
        spec.myo_outer.rotation,
    )
    chamber_ids = sorted(spec.chambers)
    chamber_counts = {sid: 0 for sid in chamber_ids}
    overlap_counts = {(a, b): 0 for i, a in enumerate(chamber_ids) for b in chamber_ids[i + 1 :]}

    for sid in sorted(spec.valves):
        if max(spec.valves[sid].semi_axes) > 0.05 + 1e-12:
            raise ValueError(f"valve {Structure(sid).name} semi-axes exceed 0.05")

    shell = spec.myo_outer.contains_grid(cx, cy, cz) & ~inner.contains_grid(cx, cy, cz)
    grid[shell] = int(Structure.MYO)
    del shell

    masks = {sid: spec.chambers[sid].contains_grid(cx, cy, cz) for sid in chamber_ids}
    for i, a in enumerate(chamber_ids):
        chamber_counts[a] = int(np.count_nonzero(masks[a]))
        for b in chamber_ids[i + 1 :]:
            overlap_counts[(a, b)] = int(np.count_nonzero(masks[a] & masks[b]))
    for sid in chamber_ids:
        grid[masks[sid]] = sid
    del masks

    for sid in sorted(spec.valves):
        grid[spec.valves[sid].contains_grid(cx, cy, cz)] = sid

    for (a, b), overlap in overlap_counts.items():
        allowed = spec.chamber_overlap_tolerance * min(chamber_counts[a], chamber_counts[b])
        if overlap > allowed:
            raise OverlapError(
                f"chambers {Structure(a).name} and {Structure(b).name} overlap in {overlap} voxels"
            )

    counts = np.bincount(grid.reshape(-1), minlength=10)
    for s in ALL_STRUCTURES:
        if counts[int(s)] == 0:
            raise ResolutionError(f"structure {s.name} rasterized to zero voxels at {spec.resolution}")

    return LabeledVolume(
        dims=spec.resolution,
        spacing=spacing,
        labels=grid.reshape(-1),
        provenance=f"phantom:{spec.content_hash()}",
    )


def structure_centroid(vol: LabeledVolume, s: int) -> np.ndarray:
    """Arithmetic mean of the structure's voxel centers, in normalized units."""
    grid = vol.grid
    zz, yy, xx = np.nonzero(grid == int(s))
    if xx.size == 0:
        name = vol.label_table.get(int(s), str(int(s)))
        raise EmptyStructureError(f"structure {name} has no voxels")
    sx, sy, sz = vol.spacing
    return np.array(
        [
            (xx.mean() + 0.5) * sx,
            (yy.mean() + 0.5) * sy,
            (zz.mean() + 0.5) * sz,
        ]
    )


def heart_centroid(vol: LabeledVolume) -> np.ndarray:
    """Centroid of all non-background voxels (the 'whole heart' reference)."""
    grid = vol.grid
    zz, yy, xx = np.nonzero(grid != int(Structure.BG))
    if xx.size == 0:
        raise EmptyStructureError("volume has no non-background voxels")
    sx, sy, sz = vol.spacing
    return np.array([(xx.mean() + 0.5) * sx, (yy.mean() + 0.5) * sy, (zz.mean() + 0.5) * sz])


def save_volume(vol: LabeledVolume, path: str | Path) -> None:
    """Write the native container: SPVL magic, version, JSON header, raw labels."""
    header = {
        "dims": list(vol.dims),
        "spacing": list(vol.spacing),
        "label_table": {str(k): v for k, v in vol.label_table.items()},
        "provenance": vol.provenance,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<H", FORMAT_VERSION))
        f.write(struct.pack("<I", len(header_bytes)))
        f.write(header_bytes)
        f.write(vol.labels.tobytes())


def load_volume(path: str | Path) -> LabeledVolume:
    """Read the native container back; round-trips save_volume bit-exactly."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("bad magic, expected b'SPVL'", 0)
    if len(data) < 6:
        raise FormatError("truncated before version field", 4)
    (version,) = struct.unpack_from("<H", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}", 4)
    if len(data) < 10:
        raise FormatError("truncated before header length field", 6)
    (header_len,) = struct.unpack_from("<I", data, 6)
    header_end = 10 + header_len
    if len(data) < header_end:
        raise FormatError(f"truncated header, declared {header_len} bytes", 10)
    try:
        header = json.loads(data[10:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"header is not valid UTF-8 JSON: {e}", 10) from e
    try:
        dims = tuple(int(v) for v in header["dims"])
        spacing = tuple(float(v) for v in header["spacing"])
        label_table = {int(k): str(v) for k, v in header["label_table"].items()}
        provenance = str(header.get("provenance", ""))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"header missing or malformed field: {e}", 10) from e
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise FormatError(f"header declares degenerate dims {dims}", 10)
    expected = dims[0] * dims[1] * dims[2]
    actual = len(data) - header_end
    if actual != expected:
        raise FormatError(
            f"payload length mismatch: expected {expected} label bytes, found {actual}",
            header_end,
        )
    labels = np.frombuffer(data[header_end:], dtype=np.uint8)
    return LabeledVolume(dims=dims, spacing=spacing, labels=labels, label_table=label_table, provenance=provenance)
