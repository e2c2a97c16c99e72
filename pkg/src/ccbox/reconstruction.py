"""Analytic sky-map reconstruction: Compton-cone and pinhole back-projection.

Sky maps are 256x256 grids on a direction-cosine projection of the upper
hemisphere: pixel (i, j) maps to u = (i + 0.5)/128 - 1, v = (j + 0.5)/128 - 1
and direction (u, v, sqrt(1 - u^2 - v^2)).  Pixels outside the unit disk are
invalid and always zero.

Back-projection uses the far-field approximation (all cone apexes at the
origin), which is accurate to the detector extent over the sky distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .events import ClassifierThresholds, EventRecord, classify_event, classify_events
from .kinematics import UnphysicalEventError, scattering_angle

MAP_SIZE = 256

__all__ = [
    "MAP_SIZE", "SkyMap", "ConeParams", "ReconstructionConfig",
    "scattering_angle", "cone_from_event", "backproject_cone",
    "backproject_pinhole", "reconstruct", "combine_maps", "arm", "arm_filter",
    "DegenerateAxisError", "UnphysicalEventError",
]


class DegenerateAxisError(ValueError):
    """Scatter and absorber positions too close to define a cone axis."""


def _axis_coords():
    return (np.arange(MAP_SIZE) + 0.5) / (MAP_SIZE / 2) - 1.0


_UV = _axis_coords()
_U_GRID, _V_GRID = np.meshgrid(_UV, _UV, indexing="ij")
_RHO2 = _U_GRID**2 + _V_GRID**2
VALID_MASK = _RHO2 <= 1.0
_W_GRID = np.sqrt(np.maximum(0.0, 1.0 - _RHO2))
# (256, 256, 3) unit directions; junk (w=0) outside the valid disk
PIXEL_DIRECTIONS = np.stack([_U_GRID, _V_GRID, _W_GRID], axis=-1)


@dataclass
class SkyMap:
    """256x256 non-negative intensity grid over the upper hemisphere."""

    values: np.ndarray = field(default_factory=lambda: np.zeros((MAP_SIZE, MAP_SIZE)))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (MAP_SIZE, MAP_SIZE):
            raise ValueError(f"sky map must be {MAP_SIZE}x{MAP_SIZE}")
        self.values = v

    def copy(self) -> "SkyMap":
        return SkyMap(self.values.copy())

    def normalized(self) -> "SkyMap":
        """Scaled so the maximum pixel is 1; all-zero maps stay zero."""
        peak = self.values.max()
        return SkyMap(self.values / peak) if peak > 0 else self.copy()

    @property
    def total(self) -> float:
        return float(self.values.sum())


def pixel_to_direction(i, j):
    """Unit direction of pixel center (i, j)."""
    u = (np.asarray(i) + 0.5) / (MAP_SIZE / 2) - 1.0
    v = (np.asarray(j) + 0.5) / (MAP_SIZE / 2) - 1.0
    w2 = 1.0 - u**2 - v**2
    if np.any(w2 < 0):
        raise ValueError("pixel outside the valid disk")
    return np.stack(np.broadcast_arrays(u, v, np.sqrt(w2)), axis=-1)


def direction_to_pixel(direction):
    """Containing pixel (i, j) of an upper-hemisphere unit direction."""
    d = np.asarray(direction, dtype=float)
    i = np.floor((d[..., 0] + 1.0) * (MAP_SIZE / 2)).astype(int)
    j = np.floor((d[..., 1] + 1.0) * (MAP_SIZE / 2)).astype(int)
    return np.clip(i, 0, MAP_SIZE - 1), np.clip(j, 0, MAP_SIZE - 1)


@dataclass(frozen=True)
class ConeParams:
    """One Compton cone: axis toward the source side, half-angle, ring width."""

    axis: np.ndarray
    theta: float                    # rad, in (0, pi)
    sigma: float                    # rad, > 0

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        if abs(np.linalg.norm(a) - 1.0) > 1e-9:
            raise ValueError("cone axis must be normalized")
        if not 0.0 < self.theta < np.pi:
            raise ValueError("cone half-angle must lie in (0, pi)")
        if self.sigma <= 0:
            raise ValueError("cone ring width must be positive")


@dataclass(frozen=True)
class ReconstructionConfig:
    cone_sigma_deg: float = 2.0
    min_axis_mm: float = 0.5
    thresholds: ClassifierThresholds = field(default_factory=ClassifierThresholds)


def cone_from_event(event: EventRecord,
                    config: ReconstructionConfig = ReconstructionConfig()) -> ConeParams:
    """Compton cone of one scatter(front)/absorber(rear) event."""
    p_front = event.position("front")
    p_rear = event.position("rear")
    axis = p_front - p_rear
    norm = np.linalg.norm(axis)
    if norm < config.min_axis_mm:
        raise DegenerateAxisError(f"hit separation {norm:.3f} mm too small")
    theta = scattering_angle(event.energy("front"), event.energy("rear"))
    if not 0.0 < theta < np.pi:
        # clamped cos(theta) of exactly +-1: no ring to project
        raise UnphysicalEventError(f"degenerate cone half-angle {theta}")
    return ConeParams(axis / norm, theta, np.radians(config.cone_sigma_deg))


def _accumulate_cone(values: np.ndarray, cone: ConeParams):
    delta = np.arccos(np.clip(PIXEL_DIRECTIONS @ np.asarray(cone.axis), -1.0, 1.0))
    arg = delta - cone.theta
    ring = np.abs(arg) <= 3.0 * cone.sigma
    sel = ring & VALID_MASK
    values[sel] += np.exp(-arg[sel] ** 2 / (2.0 * cone.sigma**2))


def backproject_cone(sky: SkyMap, cone: ConeParams) -> SkyMap:
    """Add one cone's Gaussian ring kernel (truncated at 3 sigma) to a copy."""
    out = sky.copy()
    _accumulate_cone(out.values, cone)
    return out


def _accumulate_pinhole(values: np.ndarray, event: EventRecord, geometry):
    d = geometry.pinhole_center - event.position("rear")
    d = d / np.linalg.norm(d)
    if d[2] <= 0 or d[0] ** 2 + d[1] ** 2 > 1.0:
        return
    i, j = direction_to_pixel(d)
    values[i, j] += 1.0


def backproject_pinhole(sky: SkyMap, event: EventRecord, geometry) -> SkyMap:
    """Back-project one rear hit through the pinhole aperture onto a copy."""
    out = sky.copy()
    _accumulate_pinhole(out.values, event, geometry)
    return out


def reconstruct(events, geometry, mode: str = "both",
                config: ReconstructionConfig = ReconstructionConfig()):
    """Classify events and accumulate them into (compton, pinhole) maps.

    Each returned map is normalized to [0, 1] by its maximum; maps for modes
    not requested (or with no accepted events) are all zero.
    """
    if mode not in ("compton", "pinhole", "both"):
        raise ValueError(f"unknown mode {mode!r}")
    compton_events, pinhole_events = classify_events(events, config.thresholds)
    compton = np.zeros((MAP_SIZE, MAP_SIZE))
    pinhole = np.zeros((MAP_SIZE, MAP_SIZE))
    if mode in ("compton", "both"):
        for event in compton_events:
            try:
                cone = cone_from_event(event, config)
            except (DegenerateAxisError, UnphysicalEventError):
                continue
            _accumulate_cone(compton, cone)
    if mode in ("pinhole", "both"):
        for event in pinhole_events:
            _accumulate_pinhole(pinhole, event, geometry)
    return SkyMap(compton).normalized(), SkyMap(pinhole).normalized()


def combine_maps(compton: SkyMap, pinhole: SkyMap) -> SkyMap:
    """Sum of the two normalized mode maps, renormalized to [0, 1]."""
    return SkyMap(compton.normalized().values + pinhole.normalized().values).normalized()


def arm(event: EventRecord, source_direction) -> float:
    """Angular Resolution Measure of one Compton event for a hypothesized source."""
    cone = cone_from_event(event)
    s = np.asarray(source_direction, dtype=float)
    s = s / np.linalg.norm(s)
    geometric = np.arccos(np.clip(np.dot(s, cone.axis), -1.0, 1.0))
    return float(geometric - cone.theta)


def arm_filter(events, source_direction, window_rad: float,
               thresholds: ClassifierThresholds = ClassifierThresholds()):
    """Keep Compton candidates with |ARM| <= window; pass everything else through.

    Compton candidates whose cone cannot be built (degenerate axis) are
    dropped, matching what back-projection would do with them.
    """
    if window_rad < 0:
        raise ValueError("ARM window must be non-negative")
    kept = []
    for event in events:
        cls = classify_event(event, thresholds)
        if cls.kind != "compton":
            kept.append(event)
            continue
        try:
            if abs(arm(event, source_direction)) <= window_rad:
                kept.append(event)
        except (DegenerateAxisError, UnphysicalEventError):
            continue
    return kept
