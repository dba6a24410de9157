"""Saliency-style evaluation: MAE, structure measure, adaptive enhanced-alignment
measure, weighted F-measure, and directory-level report generation.

All metrics take a prediction in [0, 1] and a binary ground truth, both (H, W)
float64, and return a python float. Conventions that the standard formulations
leave open are pinned here so results are deterministic and exactly invariant
to horizontal flips:

* structure measure region split: cut after floor(centroid); when a centroid
  coordinate is exactly integral that row/column is excluded and the region
  scores are renormalized by the covered area;
* enhanced-alignment: per-pixel enhanced values are averaged over all pixels;
  an all-zero prediction binarizes to an empty map;
* weighted F-measure: background errors are remapped to the mean error over
  all equidistant nearest foreground pixels, and the Gaussian smoothing pads
  by edge replication.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)

EPS = float(np.finfo(np.float64).eps)
METRIC_KEYS = ("s_alpha", "e_ad", "wf", "mae")
BINARIZE_THRESHOLD = 128  # of 255, applied to ground-truth masks on load


def _validated(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.ndim != 2 or gt.ndim != 2 or pred.shape != gt.shape:
        raise ValueError(f"pred {pred.shape} and gt {gt.shape} must be equal 2D shapes")
    if pred.min() < 0 or pred.max() > 1:
        raise ValueError("pred values must lie in [0, 1]")
    if not np.isin(gt, (0.0, 1.0)).all():
        raise ValueError("gt must be strictly binary")
    return pred, gt


def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean absolute error."""
    pred, gt = _validated(pred, gt)
    return float(np.abs(pred - gt).mean())


# ---------------------------------------------------------------- structure


def s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    """Structure measure: alpha * object-aware + (1 - alpha) * region-aware.

    Degenerate ground truths short-circuit: all-background gives
    1 - mean(pred), all-foreground gives mean(pred). Clipped to [0, 1].
    """
    pred, gt = _validated(pred, gt)
    mu = gt.mean()
    if mu == 0.0:
        return float(np.clip(1.0 - pred.mean(), 0.0, 1.0))
    if mu == 1.0:
        return float(np.clip(pred.mean(), 0.0, 1.0))
    score = alpha * _s_object(pred, gt) + (1.0 - alpha) * _s_region(pred, gt)
    return float(np.clip(score, 0.0, 1.0))


def _object_score(values: np.ndarray) -> float:
    # 2x / (x^2 + 1 + sigma): high when values are uniformly near 1
    x = values.mean()
    sigma = values.std(ddof=1) if values.size > 1 else 0.0
    return float(2.0 * x / (x * x + 1.0 + sigma + EPS))


def _s_object(pred: np.ndarray, gt: np.ndarray) -> float:
    fg = gt == 1.0
    o_fg = _object_score(pred[fg])
    o_bg = _object_score(1.0 - pred[~fg])
    mu = gt.mean()
    return mu * o_fg + (1.0 - mu) * o_bg


def _axis_cut(mean_coord: float) -> tuple[int, int | None]:
    """(cut index, excluded index or None) for one centroid coordinate.

    The first region spans [0, cut); an exactly integral centroid excludes its
    own row/column so that mirrored inputs split into mirrored regions.
    """
    nearest = round(mean_coord)
    if abs(mean_coord - nearest) < 1e-9:
        return int(nearest), int(nearest)
    return int(np.floor(mean_coord)) + 1, None


def _region_ssim(p: np.ndarray, g: np.ndarray) -> float:
    n = p.size
    x, y = p.mean(), g.mean()
    sx = ((p - x) ** 2).sum() / (n - 1 + EPS)
    sy = ((g - y) ** 2).sum() / (n - 1 + EPS)
    sxy = ((p - x) * (g - y)).sum() / (n - 1 + EPS)
    a = 4.0 * x * y * sxy
    b = (x * x + y * y) * (sx + sy)
    if a != 0.0:
        return float(a / (b + EPS))
    return 1.0 if b == 0.0 else 0.0


def _s_region(pred: np.ndarray, gt: np.ndarray) -> float:
    rows, cols = gt.shape
    total = gt.sum()
    mean_r = float((np.arange(rows) * gt.sum(axis=1)).sum() / total)
    mean_c = float((np.arange(cols) * gt.sum(axis=0)).sum() / total)
    r_cut, r_skip = _axis_cut(mean_r)
    c_cut, c_skip = _axis_cut(mean_c)
    keep_r = np.ones(rows, dtype=bool)
    keep_c = np.ones(cols, dtype=bool)
    if r_skip is not None and r_skip < rows:
        keep_r[r_skip] = False
    if c_skip is not None and c_skip < cols:
        keep_c[c_skip] = False
    top = np.arange(rows) < r_cut
    left = np.arange(cols) < c_cut
    score = 0.0
    weight_sum = 0.0
    for row_sel in (top & keep_r, ~top & keep_r):
        for col_sel in (left & keep_c, ~left & keep_c):
            region = np.ix_(row_sel, col_sel)
            n = int(row_sel.sum()) * int(col_sel.sum())
            if n == 0:
                continue
            score += n * _region_ssim(pred[region], gt[region])
            weight_sum += n
    return score / weight_sum if weight_sum else 0.0


# ------------------------------------------------------- enhanced alignment


def e_measure_adaptive(pred: np.ndarray, gt: np.ndarray) -> float:
    """Enhanced-alignment measure at the adaptive threshold min(2 * mean, 1).

    Binarization uses >= threshold; an identically-zero prediction maps to an
    empty binary map rather than an all-ones one.
    """
    pred, gt = _validated(pred, gt)
    mean_pred = pred.mean()
    if mean_pred == 0.0:
        binary = np.zeros_like(pred, dtype=bool)
    else:
        binary = pred >= min(2.0 * mean_pred, 1.0)
    return _enhanced_alignment(binary, gt == 1.0)


def _enhanced_alignment(fm: np.ndarray, gt: np.ndarray) -> float:
    dfm = fm.astype(np.float64)
    dgt = gt.astype(np.float64)
    if not gt.any():
        enhanced = 1.0 - dfm
    elif gt.all():
        enhanced = dfm
    else:
        phi_gt = dgt - dgt.mean()
        phi_fm = dfm - dfm.mean()
        align = 2.0 * phi_gt * phi_fm / (phi_gt ** 2 + phi_fm ** 2 + EPS)
        enhanced = (align + 1.0) ** 2 / 4.0
    return float(enhanced.mean())


# ------------------------------------------------------- weighted F-measure

_GAUSS_7x5 = None


def _gaussian_kernel_7x5() -> np.ndarray:
    global _GAUSS_7x5
    if _GAUSS_7x5 is None:
        ax = np.arange(-3, 4, dtype=np.float64)
        g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * 5.0 ** 2))
        _GAUSS_7x5 = g / g.sum()
    return _GAUSS_7x5


def _nearest_foreground_mean(gt: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For every background pixel: mean of `values` over all nearest foreground
    pixels (ties averaged), plus the Euclidean distance field. Foreground
    entries keep their own value at distance 0."""
    fg_mask = gt.astype(bool)
    out = values.copy()
    dist = np.zeros_like(values)
    bg_coords = np.argwhere(~fg_mask)
    if bg_coords.size == 0:
        return out, dist
    fg_coords = np.argwhere(fg_mask)
    fg_values = values[fg_mask]
    tree = cKDTree(fg_coords)
    d, _ = tree.query(bg_coords, k=1)
    # Distinct grid distances differ by far more than this margin, so the ball
    # query returns exactly the set of minimizers.
    groups = tree.query_ball_point(bg_coords, r=d + 1e-6)
    remapped = np.fromiter(
        (fg_values[idx].mean() for idx in groups), dtype=np.float64, count=len(groups)
    )
    out[~fg_mask] = remapped
    dist[~fg_mask] = d
    return out, dist


def weighted_f_measure(pred: np.ndarray, gt: np.ndarray) -> float:
    """Weighted F-measure (beta^2 = 1) with dependency- and distance-weighted errors.

    Ground truths without any foreground fall back to 1.0 for an all-zero
    prediction and 0.0 otherwise.
    """
    pred, gt = _validated(pred, gt)
    fg_mask = gt.astype(bool)
    if not fg_mask.any():
        return 1.0 if pred.max() == 0.0 else 0.0
    err = np.abs(pred - gt)
    err_dep, dist = _nearest_foreground_mean(gt, err)
    smoothed = correlate(err_dep, _gaussian_kernel_7x5(), mode="nearest")
    min_err = err.copy()
    swap = fg_mask & (smoothed < err)
    min_err[swap] = smoothed[swap]
    importance = np.ones_like(err)
    importance[~fg_mask] = 2.0 - np.exp(np.log(0.5) / 5.0 * dist[~fg_mask])
    weighted_err = min_err * importance
    n_fg = float(gt.sum())
    tp = n_fg - weighted_err[fg_mask].sum()
    fp = weighted_err[~fg_mask].sum()
    recall = 1.0 - weighted_err[fg_mask].mean()
    precision = tp / (EPS + tp + fp)
    return float(2.0 * precision * recall / (EPS + precision + recall))


# ------------------------------------------------------------------ reports


@dataclass
class MetricReport:
    """Per-image metric rows plus their arithmetic means.

    Images that failed to load appear in `errors` and are excluded from the
    means; `warnings` flag structural problems such as an empty pairing.
    """

    per_image: list[dict] = field(default_factory=list)
    mean: dict = field(default_factory=dict)
    errors: list[dict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_json(self, path: str | Path | None = None) -> str:
        payload = json.dumps(
            {"per_image": self.per_image, "mean": self.mean,
             "errors": self.errors, "warnings": self.warnings},
            indent=2, sort_keys=True,
        )
        if path is not None:
            Path(path).write_text(payload + "\n")
        return payload

    def table(self) -> str:
        """Aligned text table: structure, enhanced-alignment, weighted F, MAE."""
        header = ("name", "S", "E_ad", "wF", "MAE")
        lines = [header]
        for row in self.per_image:
            lines.append((row["name"],) + tuple(f"{row[k]:.4f}" for k in METRIC_KEYS))
        if self.mean:
            lines.append(("mean",) + tuple(f"{self.mean[k]:.4f}" for k in METRIC_KEYS))
        widths = [max(len(line[i]) for line in lines) for i in range(5)]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip()
            for line in lines
        )


def compute_all(pred: np.ndarray, gt: np.ndarray) -> dict:
    """All four metrics for one pair, keyed by METRIC_KEYS."""
    return {
        "s_alpha": s_measure(pred, gt),
        "e_ad": e_measure_adaptive(pred, gt),
        "wf": weighted_f_measure(pred, gt),
        "mae": mae(pred, gt),
    }


def evaluate_pairs(pairs: list[tuple[str, np.ndarray, np.ndarray]], workers: int = 1) -> MetricReport:
    """Evaluate (name, pred, gt) triples; the report is ordered by input order
    regardless of worker count."""
    report = MetricReport()
    if not pairs:
        report.warnings.append("no prediction/ground-truth pairs to evaluate")
        return report

    def one(item):
        name, pred, gt = item
        return {"name": name, **compute_all(pred, gt)}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            report.per_image = list(pool.map(one, pairs))
    else:
        report.per_image = [one(item) for item in pairs]
    report.mean = {
        k: float(np.mean([row[k] for row in report.per_image])) for k in METRIC_KEYS
    }
    return report


def _load_gray(path: Path) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("L"), dtype=np.float64)


def _resize_bilinear(arr: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    if arr.shape == size:
        return arr
    import torch
    import torch.nn.functional as F

    t = torch.from_numpy(arr)[None, None]
    out = F.interpolate(t, size=size, mode="bilinear", align_corners=False)
    return out[0, 0].numpy()


def evaluate_dirs(pred_dir: str | Path, gt_dir: str | Path,
                  report_path: str | Path | None = None, workers: int = 1) -> MetricReport:
    """Evaluate every ground-truth mask against the same-named prediction.

    Files pair by basename. Missing or unreadable counterparts become error
    entries and are excluded from the means. Predictions are resized to the
    ground-truth resolution when shapes differ.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    gt_files = sorted(p for p in gt_dir.iterdir() if p.is_file())
    pred_by_stem = {p.stem: p for p in pred_dir.iterdir() if p.is_file()}
    pairs = []
    errors = []
    for gt_file in gt_files:
        pred_file = pred_by_stem.get(gt_file.stem)
        if pred_file is None:
            errors.append({"name": gt_file.stem, "error": "no matching prediction"})
            continue
        try:
            gt = (_load_gray(gt_file) >= BINARIZE_THRESHOLD).astype(np.float64)
            pred = np.clip(_load_gray(pred_file) / 255.0, 0.0, 1.0)
            pred = np.clip(_resize_bilinear(pred, gt.shape), 0.0, 1.0)
        except Exception as exc:
            errors.append({"name": gt_file.stem, "error": str(exc)})
            continue
        pairs.append((gt_file.stem, pred, gt))
    report = evaluate_pairs(pairs, workers=workers)
    report.errors.extend(errors)
    if not pairs:
        msg = f"no evaluable pairs between {pred_dir} and {gt_dir}"
        log.warning(msg)
        if msg not in " ".join(report.warnings):
            report.warnings.append(msg)
    if report_path is not None:
        report.to_json(report_path)
    return report
