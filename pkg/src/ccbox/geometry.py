"""Parametric CC-Box detector geometry and material attenuation tables.

Coordinate convention: z points toward the sky (sources live at z > 0),
the top face of the front scatterer layer sits at z = 0, and the detector
is laterally centered on the origin.  All lengths are millimetres, all
energies keV.

The instrument is modeled as a set of axis-aligned, non-overlapping boxes:

* front layer  -- thin pixelated GAGG scatterer, 2x2 modules, 1 mm pitch,
  with a square pinhole aperture cut through its center (modeled as four
  frame boxes around the hole),
* rear stack   -- four thick pixelated GAGG layers (2 mm pitch, depth of
  interaction resolved per layer),
* side panels  -- monolithic GAGG slabs on the four sides,
* BGO shields  -- monolithic veto slabs on the four sides and the bottom.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

SEGMENT_NAMES = ("front", "rear", "side", "bgo")
SEGMENT_INDEX = {name: i for i, name in enumerate(SEGMENT_NAMES)}
MATERIAL_NAMES = ("gagg", "bgo")


class GeometryError(ValueError):
    """Raised for inconsistent geometry parameters."""


class EnergyOutOfRangeError(ValueError):
    """Raised when an attenuation lookup falls outside the tabulated grid."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its lower and upper corners (mm)."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if not all(l < h for l, h in zip(self.lo, self.hi)):
            raise GeometryError(f"degenerate box: lo={self.lo} hi={self.hi}")

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))


@dataclass(frozen=True)
class Volume:
    """One detector box with its readout properties."""

    name: str
    box: Box
    material: str           # "gagg" | "bgo"
    segment: str            # "front" | "rear" | "side" | "bgo"
    pixel_pitch: float | None = None   # lateral quantization, None = monolithic
    layer: int | None = None           # rear DOI layer index (0 = topmost)


def ray_box_intersection(origin, direction, box: Box):
    """Slab-method ray/box intersection.

    Returns ``(t_in, t_out)`` in mm along the ray, or ``None`` when the ray
    misses the box or the box lies entirely behind the origin.  ``direction``
    must be normalized to within 1e-9.
    """
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    if abs(np.dot(d, d) - 1.0) > 2e-9:
        raise ValueError("direction must be a unit vector")
    lo = np.asarray(box.lo, dtype=float)
    hi = np.asarray(box.hi, dtype=float)

    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    # rays parallel to an axis: inside the slab -> (-inf, inf), outside -> miss
    parallel = d == 0.0
    inside = (o >= lo) & (o <= hi)
    t1[parallel] = np.where(inside[parallel], -np.inf, np.nan)
    t2[parallel] = np.where(inside[parallel], np.inf, np.nan)
    if np.any(np.isnan(t1)):
        return None

    t_in = float(np.max(np.minimum(t1, t2)))
    t_out = float(np.min(np.maximum(t1, t2)))
    if t_out <= max(t_in, 0.0):
        return None
    return t_in, t_out


@dataclass(frozen=True)
class DetectorGeometry:
    """Fully parametric CC-Box model (all lengths mm)."""

    front_pitch: float = 1.0
    front_thickness: float = 5.0
    pinhole_side: float = 5.5
    rear_pitch: float = 2.0
    rear_layer_thickness: float = 20.0
    n_rear_layers: int = 4
    half_width: float = 64.0            # lateral half extent of front/rear footprint
    front_to_rear_gap: float = 10.0
    side_panel_thickness: float = 10.0
    bgo_thickness: float = 10.0
    volumes: tuple[Volume, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.pinhole_side >= 2 * self.half_width:
            raise GeometryError("pinhole must lie strictly inside the front layer footprint")
        if not self.volumes:
            object.__setattr__(self, "volumes", tuple(self._build_volumes()))
        self._check_disjoint()

    # -- construction -----------------------------------------------------

    def _build_volumes(self):
        w = self.half_width
        h = self.pinhole_side / 2.0
        z_front = (-self.front_thickness, 0.0)
        vols = [
            Volume("front_xneg", Box((-w, -w, z_front[0]), (-h, w, z_front[1])),
                   "gagg", "front", pixel_pitch=self.front_pitch),
            Volume("front_xpos", Box((h, -w, z_front[0]), (w, w, z_front[1])),
                   "gagg", "front", pixel_pitch=self.front_pitch),
            Volume("front_yneg", Box((-h, -w, z_front[0]), (h, -h, z_front[1])),
                   "gagg", "front", pixel_pitch=self.front_pitch),
            Volume("front_ypos", Box((-h, h, z_front[0]), (h, w, z_front[1])),
                   "gagg", "front", pixel_pitch=self.front_pitch),
        ]
        z_top = -self.front_thickness - self.front_to_rear_gap
        for k in range(self.n_rear_layers):
            z1 = z_top - k * self.rear_layer_thickness
            z0 = z1 - self.rear_layer_thickness
            vols.append(Volume(f"rear_{k}", Box((-w, -w, z0), (w, w, z1)),
                               "gagg", "rear", pixel_pitch=self.rear_pitch, layer=k))
        z_bot = z_top - self.n_rear_layers * self.rear_layer_thickness

        sp = self.side_panel_thickness
        vols += [
            Volume("side_xneg", Box((-w - sp, -w, z_bot), (-w, w, 0.0)), "gagg", "side"),
            Volume("side_xpos", Box((w, -w, z_bot), (w + sp, w, 0.0)), "gagg", "side"),
            Volume("side_yneg", Box((-w, -w - sp, z_bot), (w, -w, 0.0)), "gagg", "side"),
            Volume("side_ypos", Box((-w, w, z_bot), (w, w + sp, 0.0)), "gagg", "side"),
        ]
        bt = self.bgo_thickness
        xo = w + sp
        vols += [
            Volume("bgo_xneg", Box((-xo - bt, -w, z_bot), (-xo, w, 0.0)), "bgo", "bgo"),
            Volume("bgo_xpos", Box((xo, -w, z_bot), (xo + bt, w, 0.0)), "bgo", "bgo"),
            Volume("bgo_yneg", Box((-w, -xo - bt, z_bot), (w, -xo, 0.0)), "bgo", "bgo"),
            Volume("bgo_ypos", Box((-w, xo, z_bot), (w, xo + bt, 0.0)), "bgo", "bgo"),
            Volume("bgo_bottom", Box((-xo, -xo, z_bot - bt), (xo, xo, z_bot)), "bgo", "bgo"),
        ]
        return vols

    def _check_disjoint(self):
        boxes = [v.box for v in self.volumes]
        for i in range(len(boxes)):
            for j in range(i + 1, len(boxes)):
                a, b = boxes[i], boxes[j]
                overlap = all(a.lo[k] < b.hi[k] and b.lo[k] < a.hi[k] for k in range(3))
                if overlap:
                    raise GeometryError(
                        f"volumes overlap: {self.volumes[i].name} / {self.volumes[j].name}")

    # -- derived quantities ------------------------------------------------

    @property
    def pinhole_center(self) -> np.ndarray:
        return np.array([0.0, 0.0, -self.front_thickness / 2.0])

    @property
    def rear_footprint_area_cm2(self) -> float:
        return (2 * self.half_width) ** 2 / 100.0

    @property
    def rear_top_z(self) -> float:
        return -self.front_thickness - self.front_to_rear_gap

    def rear_layer_center_z(self, layer: int) -> float:
        return self.rear_top_z - (layer + 0.5) * self.rear_layer_thickness

    def bounding_box(self) -> Box:
        lo = np.min([v.box.lo for v in self.volumes], axis=0)
        hi = np.max([v.box.hi for v in self.volumes], axis=0)
        return Box(tuple(lo), tuple(hi))

    def bounding_sphere(self):
        bb = self.bounding_box()
        center = bb.center
        radius = float(np.linalg.norm(np.asarray(bb.hi) - center))
        return center, radius

    def find_volume(self, point) -> Volume | None:
        for v in self.volumes:
            if v.box.contains(point):
                return v
        return None

    # flattened arrays consumed by the vectorized transport kernel
    def as_arrays(self):
        lo = np.array([v.box.lo for v in self.volumes])
        hi = np.array([v.box.hi for v in self.volumes])
        material = np.array([MATERIAL_NAMES.index(v.material) for v in self.volumes])
        segment = np.array([SEGMENT_INDEX[v.segment] for v in self.volumes])
        return lo, hi, material, segment

    # -- config mirror ------------------------------------------------------

    _CONFIG_FIELDS = (
        "front_pitch", "front_thickness", "pinhole_side", "rear_pitch",
        "rear_layer_thickness", "n_rear_layers", "half_width",
        "front_to_rear_gap", "side_panel_thickness", "bgo_thickness",
    )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self._CONFIG_FIELDS}

    @classmethod
    def from_dict(cls, cfg: dict) -> "DetectorGeometry":
        unknown = set(cfg) - set(cls._CONFIG_FIELDS)
        if unknown:
            raise GeometryError(f"unknown geometry fields: {sorted(unknown)}")
        return cls(**cfg)

    @classmethod
    def from_json(cls, path) -> "DetectorGeometry":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def build_default_geometry() -> DetectorGeometry:
    """CC-Box with the published dimensions and the documented defaults."""
    return DetectorGeometry()


def quantize_to_pixel(value: float, lo: float, hi: float, pitch: float) -> float:
    """Snap a lateral coordinate to the center of its readout pixel.

    Pixel grids are anchored at the volume's lower edge; the center of a
    partial edge pixel is clipped so it stays inside the volume.
    """
    k = math.floor((value - lo) / pitch)
    center = lo + (k + 0.5) * pitch
    return min(max(center, lo + pitch / 2.0), hi - pitch / 2.0)


# -- material attenuation ---------------------------------------------------


@dataclass(frozen=True)
class MaterialTable:
    """Log-log interpolated photon attenuation coefficients (1/mm)."""

    material: str
    energy_kev: np.ndarray
    mu_photoelectric: np.ndarray
    mu_compton: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.energy_kev, dtype=float)
        if e.ndim != 1 or len(e) < 2 or np.any(np.diff(e) <= 0):
            raise ValueError("energy grid must be strictly increasing")
        if np.any(self.mu_photoelectric <= 0) or np.any(self.mu_compton <= 0):
            raise ValueError("attenuation coefficients must be positive")
        if e[0] > 10.0 or e[-1] < 3500.0:
            raise ValueError("grid must cover at least [10 keV, 3.5 MeV]")

    def lookup(self, energy_kev):
        """Return (mu_pe, mu_compton) at the given energy (scalar or array)."""
        e = np.asarray(energy_kev, dtype=float)
        if np.any(e < self.energy_kev[0]) or np.any(e > self.energy_kev[-1]):
            raise EnergyOutOfRangeError(
                f"energy outside [{self.energy_kev[0]}, {self.energy_kev[-1]}] keV")
        log_e = np.log(e)
        grid = np.log(self.energy_kev)
        mu_pe = np.exp(np.interp(log_e, grid, np.log(self.mu_photoelectric)))
        mu_c = np.exp(np.interp(log_e, grid, np.log(self.mu_compton)))
        if np.isscalar(energy_kev):
            return float(mu_pe), float(mu_c)
        return mu_pe, mu_c

    @classmethod
    def from_csv(cls, material: str, path) -> "MaterialTable":
        energies, mu_pe, mu_c = [], [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                energies.append(float(row["energy_keV"]))
                mu_pe.append(float(row["mu_pe_per_mm"]))
                mu_c.append(float(row["mu_compton_per_mm"]))
        return cls(material, np.array(energies), np.array(mu_pe), np.array(mu_c))


def lookup_attenuation(table: MaterialTable, energy_kev: float):
    """Log-log interpolated (mu_pe, mu_compton) at one energy."""
    return table.lookup(float(energy_kev))


def load_material_tables() -> dict[str, MaterialTable]:
    """Load the bundled GAGG and BGO tables."""
    tables = {}
    for name in MATERIAL_NAMES:
        ref = resources.files("ccbox.data") / f"{name}_attenuation.csv"
        with resources.as_file(ref) as path:
            tables[name] = MaterialTable.from_csv(name, path)
    return tables
