"""Heatmap keypoint head, target encoding, decoding, and PCKh@0.5 reporting.

Joints live in 64-pixel image coordinates; heatmaps are 14x16x16, so one grid
cell spans 4 pixels.  A joint is encoded in its containing cell (floor(x/4))
and decoded back to that cell's pixel center (4*g + 2), which keeps the
round-trip error within half a cell.  Accuracy counts a joint as correct when
the prediction lands within threshold * head_size of the truth (boundary
inclusive), and invisible joints are excluded from every aggregate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import COVERS, JOINT_NAMES, NUM_JOINTS, Sample
from .layers import Conv2d

GRID = 16
CELL = 4          # image pixels per heatmap cell
OFFSET = CELL / 2.0


class HeatmapHead:
    """1x1 conv from the fused 32-channel feature to one map per joint."""

    def __init__(self, rng: np.random.Generator, in_channels: int = 32):
        self.conv = Conv2d(rng, in_channels, NUM_JOINTS, 1)
        self.in_channels = in_channels

    def __call__(self, fused: Tensor) -> Tensor:
        if fused.data.ndim != 4 or fused.data.shape[1] != self.in_channels:
            raise ValueError(f"head expects [N,{self.in_channels},{GRID},{GRID}], "
                             f"got {fused.data.shape}")
        return self.conv(fused)

    def named_params(self, prefix: str):
        yield from self.conv.named_params(prefix + ".conv")


_CELL_Y, _CELL_X = np.mgrid[0:GRID, 0:GRID]


def heatmap_targets(joints: np.ndarray, visible: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Per-joint Gaussian bump with peak exactly 1 at the containing cell;
    all-zero map for invisible joints."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    maps = np.zeros((NUM_JOINTS, GRID, GRID))
    cells = np.clip(np.floor(joints / CELL), 0, GRID - 1).astype(int)
    for k in range(NUM_JOINTS):
        if not visible[k]:
            continue
        cx, cy = cells[k]
        d2 = (_CELL_X - cx) ** 2 + (_CELL_Y - cy) ** 2
        maps[k] = np.exp(-d2 / (2.0 * sigma * sigma))
    return maps


def decode_keypoints(heatmaps) -> np.ndarray:
    """Argmax cell per joint (row-major tie-break) mapped to pixel centers."""
    h = heatmaps.data if isinstance(heatmaps, Tensor) else np.asarray(heatmaps)
    if h.shape != (NUM_JOINTS, GRID, GRID):
        raise ValueError(f"expected heatmaps of shape {(NUM_JOINTS, GRID, GRID)}, got {h.shape}")
    flat = h.reshape(NUM_JOINTS, -1).argmax(axis=1)
    gy, gx = np.divmod(flat, GRID)
    return np.stack([gx * CELL + OFFSET, gy * CELL + OFFSET], axis=1).astype(np.float64)


def pckh(pred: np.ndarray, truth: Sample, threshold: float = 0.5) -> np.ndarray:
    """Boolean per joint: prediction within threshold * head_size of truth."""
    if truth.head_size <= 0:
        raise ValueError(f"head_size must be > 0, got {truth.head_size}")
    dist = np.linalg.norm(np.asarray(pred, dtype=np.float64) - truth.joints, axis=1)
    return dist <= threshold * truth.head_size


def pose_loss(pred: Tensor, targets: np.ndarray, visible: np.ndarray) -> Tensor:
    """Mean squared heatmap error over the visible joints of the batch."""
    n_cells = max(1, int(visible.sum())) * GRID * GRID
    mask = np.broadcast_to(visible[:, :, None, None], pred.data.shape).astype(np.float64)
    err = ad.sqdiff(pred, Tensor(np.asarray(targets)))
    return (err * Tensor(mask.copy())).sum() * (1.0 / n_cells)


@dataclass
class PckhReport:
    per_joint: np.ndarray                 # (14,) accuracies in [0, 1]
    total: float
    cover_breakdown: dict                 # {"acc"/"oui"/"oci": accuracy or None}
    utilization: float
    per_joint_correct: np.ndarray = field(default=None)
    per_joint_visible: np.ndarray = field(default=None)
    cover_counts: dict = field(default_factory=dict)
    n_samples: int = 0


def aggregate_report(per_sample_results, covers, utilizations) -> PckhReport:
    """Fold per-sample (correct, visible) pairs into the report structure.

    ``per_sample_results``: list of (correct[14] bool, visible[14] bool);
    ``covers``: the cover condition of each sample; ``utilizations``: one mean
    importance-weight value per sample where fusion ran (may be empty).
    """
    results = list(per_sample_results)
    covers = list(covers)
    if not results:
        raise ValueError("aggregate_report: empty results")
    if len(covers) != len(results):
        raise ValueError(f"aggregate_report: {len(results)} results vs {len(covers)} covers")

    correct = np.zeros(NUM_JOINTS, dtype=np.int64)
    vis = np.zeros(NUM_JOINTS, dtype=np.int64)
    subset_correct = {"acc": 0, "oui": 0, "oci": 0}
    subset_vis = {"acc": 0, "oui": 0, "oci": 0}
    subset_n = {"acc": 0, "oui": 0, "oci": 0}
    for (ok, v), cover in zip(results, covers):
        ok = np.asarray(ok, dtype=bool)
        v = np.asarray(v, dtype=bool)
        hit = int((ok & v).sum())
        seen = int(v.sum())
        correct += ok & v
        vis += v
        keys = ("acc", "oui") if cover == "uncovered" else ("acc", "oci")
        for key in keys:
            subset_correct[key] += hit
            subset_vis[key] += seen
            subset_n[key] += 1

    per_joint = np.where(vis > 0, correct / np.maximum(vis, 1), 0.0)
    total = correct.sum() / max(1, vis.sum())
    breakdown = {k: (subset_correct[k] / subset_vis[k] if subset_vis[k] else None)
                 for k in ("acc", "oui", "oci")}
    util_list = list(utilizations)
    util = float(np.mean(util_list)) if util_list else 0.0
    return PckhReport(per_joint=per_joint, total=float(total),
                      cover_breakdown=breakdown, utilization=util,
                      per_joint_correct=correct, per_joint_visible=vis,
                      cover_counts=subset_n, n_samples=len(results))


REPORT_COLUMNS = ["approach"] + list(JOINT_NAMES) + ["total", "acc", "oui", "oci", "utilization"]


def report_csv_row(approach: str, report: PckhReport) -> list[str]:
    """One row per approach: joint accuracies, total, cover breakdown, utilization."""
    row = [approach]
    row += [repr(float(a)) for a in report.per_joint]
    row.append(repr(float(report.total)))
    for key in ("acc", "oui", "oci"):
        v = report.cover_breakdown.get(key)
        row.append("" if v is None else repr(float(v)))
    row.append(repr(float(report.utilization)))
    return row


def format_report(approach: str, report: PckhReport) -> str:
    """Human-readable table of one evaluation run."""
    lines = [f"approach: {approach}   samples: {report.n_samples}   "
             f"utilization: {report.utilization:.4f}"]
    name_w = max(len(n) for n in JOINT_NAMES)
    for name, acc, c, v in zip(JOINT_NAMES, report.per_joint,
                               report.per_joint_correct, report.per_joint_visible):
        lines.append(f"  {name:<{name_w}}  {100 * acc:5.1f}  ({c}/{v})")
    lines.append(f"  {'Total':<{name_w}}  {100 * report.total:5.1f}")
    for key, label in (("acc", "ACC"), ("oui", "OUI"), ("oci", "OCI")):
        v = report.cover_breakdown.get(key)
        shown = "   -" if v is None else f"{100 * v:5.1f}"
        lines.append(f"  {label:<{name_w}}  {shown}  ({report.cover_counts.get(key, 0)} samples)")
    return "\n".join(lines)
