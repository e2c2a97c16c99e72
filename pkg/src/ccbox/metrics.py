"""Quantitative evaluation of reconstructed sky maps.

MSE, windowed SSIM (11x11 Gaussian window, sigma 1.5, the canonical
constants), intensity-weighted-centroid peak offset, and interquartile
summary statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .reconstruction import _U_GRID, _V_GRID, VALID_MASK, SkyMap


class EmptyMapError(ValueError):
    """Centroid of an all-zero map is undefined."""


def _values(sky) -> np.ndarray:
    return sky.values if isinstance(sky, SkyMap) else np.asarray(sky, dtype=float)


def mse(a, b) -> float:
    """Mean over all pixels of the squared difference."""
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise ValueError(f"shape mismatch: {va.shape} vs {vb.shape}")
    return float(np.mean((va - vb) ** 2))


def _gaussian_window(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


_SSIM_WINDOW = _gaussian_window()


def ssim(a, b, data_range: float = 1.0, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean local SSIM over all fully-interior 11x11 Gaussian windows."""
    va, vb = _values(a), _values(b)
    if va.shape != vb.shape:
        raise ValueError(f"shape mismatch: {va.shape} vs {vb.shape}")
    if data_range <= 0:
        raise ValueError("dynamic range must be positive")
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    w = _SSIM_WINDOW

    mu_a = convolve2d(va, w, mode="valid")
    mu_b = convolve2d(vb, w, mode="valid")
    var_a = convolve2d(va * va, w, mode="valid") - mu_a**2
    var_b = convolve2d(vb * vb, w, mode="valid") - mu_b**2
    cov = convolve2d(va * vb, w, mode="valid") - mu_a * mu_b

    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def weighted_centroid(sky) -> np.ndarray:
    """Intensity-weighted centroid direction (unit vector) of a sky map."""
    v = _values(sky)
    weights = np.where(VALID_MASK, v, 0.0)
    total = weights.sum()
    if total <= 0:
        raise EmptyMapError("cannot take the centroid of an all-zero map")
    u = float((weights * _U_GRID).sum() / total)
    w = float((weights * _V_GRID).sum() / total)
    rho2 = u**2 + w**2
    if rho2 > 1.0:
        scale = 1.0 / np.sqrt(rho2)
        u, w = u * scale, w * scale
        rho2 = 1.0
    return np.array([u, w, np.sqrt(max(0.0, 1.0 - rho2))])


def peak_offset(pred, truth_direction) -> float:
    """Angular separation (deg) between map centroid and the true direction."""
    c = weighted_centroid(pred)
    t = np.asarray(truth_direction, dtype=float)
    t = t / np.linalg.norm(t)
    return float(np.degrees(np.arccos(np.clip(np.dot(c, t), -1.0, 1.0))))


def iqr(values):
    """(q25, q75) with linear interpolation on the sorted values."""
    v = np.sort(np.asarray(values, dtype=float))
    if len(v) < 2:
        raise ValueError("need at least two values")
    q25, q75 = np.quantile(v, [0.25, 0.75], method="linear")
    return float(q25), float(q75)


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    std: float                      # sample (n-1) standard deviation
    q25: float
    q75: float

    def to_dict(self):
        return {"mean": self.mean, "std": self.std, "q25": self.q25, "q75": self.q75}


@dataclass(frozen=True)
class MetricReport:
    """Per-run metric values plus aggregate statistics."""

    per_run: dict[str, list[float]]
    summary: dict[str, MetricSummary]

    def to_dict(self):
        return {
            "per_run": self.per_run,
            "summary": {k: s.to_dict() for k, s in self.summary.items()},
        }

    def to_table(self) -> str:
        header = f"{'metric':<14}{'mean':>12}{'std':>12}{'q25':>12}{'q75':>12}"
        lines = [header, "-" * len(header)]
        for name, s in self.summary.items():
            lines.append(f"{name:<14}{s.mean:>12.6g}{s.std:>12.6g}"
                         f"{s.q25:>12.6g}{s.q75:>12.6g}")
        return "\n".join(lines)


def summarize(values) -> MetricSummary:
    v = np.asarray(values, dtype=float)
    if len(v) == 0:
        raise ValueError("cannot summarize an empty metric list")
    std = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    if len(v) > 1:
        q25, q75 = iqr(v)
    else:
        q25 = q75 = float(v[0])
    return MetricSummary(float(np.mean(v)), std, q25, q75)


def summarize_runs(per_run: dict[str, list[float]]) -> MetricReport:
    """Aggregate per-run metric lists into a MetricReport."""
    if not per_run:
        raise ValueError("no metrics to summarize")
    return MetricReport(
        per_run={k: [float(x) for x in v] for k, v in per_run.items()},
        summary={k: summarize(v) for k, v in per_run.items()},
    )
