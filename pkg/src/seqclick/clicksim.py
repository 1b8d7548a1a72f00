"""Clicks, their raster encoding, IoU, and the automatic click protocol.

The simulated click lands at the interior-most pixel of the largest
connected error region: false negatives yield positive clicks, false
positives negative ones. Components use 4-connectivity; "interior-most"
means maximizing Euclidean distance to the component's complement, ties
broken in row-major order. Squared distances are compared as integers so
the choice is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .heads import PredMask

FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
BINARIZE_THRESHOLD = 0.5


@dataclass(frozen=True)
class Click:
    x: int  # pixel column
    y: int  # pixel row
    positive: bool


ClickSet = list  # ordered list[Click], placement order


@dataclass
class InteractionTrajectory:
    ious: list[float]
    clicks: list[Click]
    final_mask: PredMask | None

    @property
    def clicks_used(self) -> int:
        return len(self.ious)


def render_click_maps(clicks: Sequence[Click], h: int, w: int, radius: int) -> np.ndarray:
    """Two planes of radius-r disks: plane 0 positive, plane 1 negative."""
    maps = np.zeros((2, h, w), dtype=np.float32)
    if not clicks:
        return maps
    yy, xx = np.mgrid[0:h, 0:w]
    r2 = radius * radius
    for c in clicks:
        if not (0 <= c.x < w and 0 <= c.y < h):
            raise ValueError(f"click ({c.x},{c.y}) outside {w}x{h} image")
        disk = (xx - c.x) ** 2 + (yy - c.y) ** 2 <= r2
        maps[0 if c.positive else 1][disk] = 1.0
    return maps


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """|a ∧ b| / |a ∨ b|; 1.0 when both masks are empty."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    a = a.astype(bool)
    b = b.astype(bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def _largest_component(error: np.ndarray) -> tuple[np.ndarray, int]:
    """Largest 4-connected component mask and its size (0 if none)."""
    labels, count = ndimage.label(error, structure=FOUR_CONNECTED)
    if count == 0:
        return np.zeros_like(error), 0
    sizes = np.bincount(labels.ravel())[1:]
    best = int(np.argmax(sizes)) + 1  # argmax takes the first max: lowest label id
    return labels == best, int(sizes[best - 1])


def _interior_most(component: np.ndarray) -> tuple[int, int]:
    """Row-major-first pixel maximizing distance to the component's complement."""
    if component.all():
        # no complement inside the image; measure to the border instead
        padded = np.pad(component, 1)
        dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    else:
        dist = ndimage.distance_transform_edt(component)
    # exact integer squared distances make the row-major tie-break exact
    d2 = np.rint(dist * dist).astype(np.int64)
    flat = int(np.argmax(d2))
    y, x = np.unravel_index(flat, component.shape)
    return int(x), int(y)


def next_click(pred: np.ndarray, gt: np.ndarray) -> Click:
    """RITM-style click on the largest error region.

    False-negative regions beat false-positive ones on equal size.
    """
    pred2 = np.asarray(pred).astype(bool)
    gt2 = np.asarray(gt).astype(bool)
    if pred2.shape != gt2.shape:
        raise ValueError(f"mask shapes differ: {pred2.shape} vs {gt2.shape}")
    pred2 = pred2.reshape(pred2.shape[-2:])
    gt2 = gt2.reshape(gt2.shape[-2:])
    if (pred2 == gt2).all():
        raise ValueError("prediction equals ground truth; no error to correct")

    fn = gt2 & ~pred2
    fp = pred2 & ~gt2
    fn_comp, fn_size = _largest_component(fn)
    fp_comp, fp_size = _largest_component(fp)
    if fn_size >= fp_size and fn_size > 0:
        x, y = _interior_most(fn_comp)
        return Click(x=x, y=y, positive=True)
    x, y = _interior_most(fp_comp)
    return Click(x=x, y=y, positive=False)


def binarize(probabilities: np.ndarray) -> np.ndarray:
    return (np.asarray(probabilities) >= BINARIZE_THRESHOLD).astype(np.uint8)


def run_interaction(
    predict: Callable[[list[Click], np.ndarray], PredMask],
    gt: np.ndarray,
    max_clicks: int,
    iou_target: float,
) -> InteractionTrajectory:
    """Iterate simulated clicks until IoU reaches the target or the budget runs out.

    ``predict(clicks, previous_binary_mask)`` runs the model; masks binarize
    at 0.5. The first click is always positive, at the ground truth's
    interior-most pixel (the empty-prediction case of the click rule).
    """
    if max_clicks < 1:
        raise ValueError("max_clicks must be >= 1")
    gt2 = np.asarray(gt).astype(bool).reshape(np.asarray(gt).shape[-2:])
    clicks: list[Click] = []
    current = np.zeros_like(gt2, dtype=np.uint8)
    ious: list[float] = []
    pred_mask: PredMask | None = None
    while len(clicks) < max_clicks:
        clicks.append(next_click(current, gt2))
        pred_mask = predict(list(clicks), current.reshape((1,) + gt2.shape))
        current = binarize(pred_mask.probabilities.data).reshape(gt2.shape)
        ious.append(iou(current, gt2))
        if ious[-1] >= iou_target or (current == gt2).all():
            break
    return InteractionTrajectory(ious=ious, clicks=clicks, final_mask=pred_mask)
