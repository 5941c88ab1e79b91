"""View similarity scoring between two segmentation maps.

Two ingredients combine into the score that drives subgoal planning:

* size term per category: 1 - ||S_i| - |L_i|| / max(|S_i|, |L_i|), summed over
  the eight clinical structures (background would swamp the metric);
* position term per category: intersection-over-union, summed over the four
  chambers (valves are too small for IoU to be meaningful).

Both treat a category empty in both views as a perfect match (term = 1), so
the identity comparison is the global maximum: a*8 + b*4.

Shape dissimilarity between structures present in both views uses the seven
log-scaled Hu moment invariants of the raw masks (method-1 contour-matching
formulation, computed on mask pixels rather than extracted contours).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .slicer import NUM_CATEGORIES, SegMap
from .volume import CHAMBERS, CLINICAL_STRUCTURES, Structure

DEFAULT_SIZE_CATEGORIES = tuple(int(s) for s in CLINICAL_STRUCTURES)
DEFAULT_POS_CATEGORIES = tuple(int(s) for s in CHAMBERS)

# matchShapes-style cutoff: Hu invariants at or below this magnitude are
# treated as degenerate and their term is skipped.
HU_EPS = 1e-5
DEFAULT_SHAPE_THRESHOLD = 0.3


class EmptyMaskError(Exception):
    """Shape comparison requires nonempty masks."""


@dataclass(frozen=True)
class SimilarityWeights:
    """Weights and category sets for the combined similarity score."""

    a: float = 1.0
    b: float = 1.0
    size_categories: tuple[int, ...] = DEFAULT_SIZE_CATEGORIES
    pos_categories: tuple[int, ...] = DEFAULT_POS_CATEGORIES

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.a + self.b <= 0:
            raise ValueError("weights must be non-negative with a + b > 0")
        if not set(self.pos_categories) <= set(self.size_categories):
            raise ValueError("pos_categories must be a subset of size_categories")

    @property
    def max_total(self) -> float:
        return self.a * len(self.size_categories) + self.b * len(self.pos_categories)


COARSE_WEIGHTS = SimilarityWeights(a=1.0, b=0.0)
FULL_WEIGHTS = SimilarityWeights(a=1.0, b=1.0)


@dataclass(frozen=True)
class SimilarityScore:
    size_sim: float
    pos_sim: float
    total: float
    per_category_size: dict[int, float] = field(default_factory=dict)
    per_category_iou: dict[int, float] = field(default_factory=dict)


def _size_term(area_s: int, area_l: int) -> float:
    if area_s == 0 and area_l == 0:
        return 1.0
    return 1.0 - abs(area_s - area_l) / max(area_s, area_l)


def size_sim(s: SegMap, l: SegMap, cats: tuple[int, ...] = DEFAULT_SIZE_CATEGORIES) -> float:
    """Composition similarity: sum of per-category size terms."""
    if not s.same_geometry(l):
        raise ValueError("segmentation maps must share geometry")
    return float(sum(_size_term(s.area(c), l.area(c)) for c in cats))


def _intersection_counts(s: SegMap, l: SegMap) -> np.ndarray:
    agree = s.labels == l.labels
    return np.bincount(s.labels[agree].reshape(-1), minlength=NUM_CATEGORIES)


def pos_sim(s: SegMap, l: SegMap, cats: tuple[int, ...] = DEFAULT_POS_CATEGORIES) -> float:
    """Positional similarity: sum of per-category IoU; IoU(empty, empty) = 1."""
    if not s.same_geometry(l):
        raise ValueError("segmentation maps must share geometry")
    inter = _intersection_counts(s, l)
    total = 0.0
    for c in cats:
        union = s.area(c) + l.area(c) - int(inter[c])
        total += 1.0 if union == 0 else int(inter[c]) / union
    return float(total)


def similarity(s: SegMap, l: SegMap, w: SimilarityWeights = FULL_WEIGHTS) -> SimilarityScore:
    """Weighted combination of size and position terms; symmetric in (s, l)."""
    if not s.same_geometry(l):
        raise ValueError("segmentation maps must share geometry")
    inter = _intersection_counts(s, l)
    per_size = {c: _size_term(s.area(c), l.area(c)) for c in w.size_categories}
    per_iou = {}
    for c in w.pos_categories:
        union = s.area(c) + l.area(c) - int(inter[c])
        per_iou[c] = 1.0 if union == 0 else int(inter[c]) / union
    size_total = float(sum(per_size.values()))
    pos_total = float(sum(per_iou.values()))
    return SimilarityScore(
        size_sim=size_total,
        pos_sim=pos_total,
        total=w.a * size_total + w.b * pos_total,
        per_category_size=per_size,
        per_category_iou=per_iou,
    )


def _hu_invariants(mask: np.ndarray) -> np.ndarray:
    """Seven Hu moment invariants of a binary mask (image-moment domain).

    Follows the imaging convention: x is the column index, y the row index.
    """
    ys, xs = np.nonzero(mask)
    if xs.size == 0:
        raise EmptyMaskError("cannot compute shape moments of an empty mask")
    m00 = float(xs.size)
    x = xs - xs.mean()
    y = ys - ys.mean()
    x2, y2 = x * x, y * y
    xy = x * y
    mu = {
        (2, 0): float(x2.sum()),
        (0, 2): float(y2.sum()),
        (1, 1): float(xy.sum()),
        (3, 0): float((x2 * x).sum()),
        (0, 3): float((y2 * y).sum()),
        (2, 1): float((x2 * y).sum()),
        (1, 2): float((x * y2).sum()),
    }

    def eta(p: int, q: int) -> float:
        return mu[(p, q)] / m00 ** (1.0 + (p + q) / 2.0)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03 = eta(3, 0), eta(0, 3)
    n21, n12 = eta(2, 1), eta(1, 2)
    h1 = n20 + n02
    h2 = (n20 - n02) ** 2 + 4 * n11**2
    h3 = (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2
    h4 = (n30 + n12) ** 2 + (n21 + n03) ** 2
    h5 = (n30 - 3 * n12) * (n30 + n12) * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2) + (
        3 * n21 - n03
    ) * (n21 + n03) * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2)
    h6 = (n20 - n02) * ((n30 + n12) ** 2 - (n21 + n03) ** 2) + 4 * n11 * (n30 + n12) * (n21 + n03)
    h7 = (3 * n21 - n03) * (n30 + n12) * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2) - (
        n30 - 3 * n12
    ) * (n21 + n03) * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2)
    return np.array([h1, h2, h3, h4, h5, h6, h7])


def shape_discrepancy(mask_s: np.ndarray, mask_l: np.ndarray) -> float:
    """Translation/scale/rotation-invariant dissimilarity of two masks.

    Sum of |1/m_k(S) - 1/m_k(L)| over the log-scaled Hu invariants
    m_k = sign(h_k) * log10|h_k|, skipping terms where either |h_k| <= 1e-5.
    Zero for identical shapes; larger means more dissimilar.
    """
    hu_s = _hu_invariants(np.asarray(mask_s, dtype=bool))
    hu_l = _hu_invariants(np.asarray(mask_l, dtype=bool))
    result = 0.0
    for hs, hl in zip(hu_s, hu_l):
        if abs(hs) > HU_EPS and abs(hl) > HU_EPS:
            ms = 1.0 / (math.copysign(1.0, hs) * math.log10(abs(hs)))
            ml = 1.0 / (math.copysign(1.0, hl) * math.log10(abs(hl)))
            result += abs(ml - ms)
    return result
