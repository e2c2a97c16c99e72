"""Dataset generation, ground-truth targets, and bit-exact on-disk formats.

Layout of a generated dataset::

    <out>/manifest.json
    <out>/runs/<split>/<id>/events.bin     # CCEVT001, normalized 16-float32 rows
    <out>/runs/<split>/<id>/truth.json
    <out>/runs/<split>/<id>/compton.img    # CCIMG001, 256x256 float32
    <out>/runs/<split>/<id>/pinhole.img
    <out>/runs/<split>/<id>/target.img

All binary payloads are little-endian so the ML component can parse them
from any language.  Regenerating a dataset with the same config and master
seed produces a byte-identical tree.
"""

from __future__ import annotations

import json
import shutil
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .events import EventRecord, FeatureBounds, denormalize_features, normalize_features
from .geometry import DetectorGeometry
from .metrics import EmptyMapError  # noqa: F401  (re-exported convenience)
from .reconstruction import MAP_SIZE, VALID_MASK, ReconstructionConfig, SkyMap, reconstruct
from .transport import (
    ResolutionModel,
    RunRecord,
    SimulationConfig,
    default_sources,
    sample_source_direction,
    simulate_run,
)

FORMAT_VERSION = 1
EVENTS_MAGIC = b"CCEVT001"
IMAGE_MAGIC = b"CCIMG001"

SPLIT_NAMES = ("train", "val", "test")


class FormatError(ValueError):
    """Malformed events/image file."""


# -- binary formats -----------------------------------------------------------


def write_events(features, path):
    """Write normalized event feature rows (n, 16) as a CCEVT001 file."""
    f = np.ascontiguousarray(np.asarray(features, dtype="<f4").reshape(-1, 16))
    with open(path, "wb") as fh:
        fh.write(EVENTS_MAGIC)
        fh.write(struct.pack("<I", len(f)))
        fh.write(f.tobytes())


def read_events(path) -> np.ndarray:
    """Read a CCEVT001 file back into an (n, 16) float32 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != EVENTS_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:8]!r}")
    if len(data) < 12:
        raise FormatError(f"{path}: truncated header")
    (count,) = struct.unpack("<I", data[8:12])
    payload = data[12:]
    if len(payload) != count * 16 * 4:
        raise FormatError(f"{path}: payload size does not match header count {count}")
    return np.frombuffer(payload, dtype="<f4").reshape(count, 16).copy()


def write_map(sky, path):
    """Write a sky map as a CCIMG001 file (row-major float32, little-endian)."""
    values = sky.values if isinstance(sky, SkyMap) else np.asarray(sky)
    f = np.ascontiguousarray(values, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC)
        fh.write(struct.pack("<II", f.shape[1], f.shape[0]))
        fh.write(f.tobytes())


def read_map(path) -> SkyMap:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != IMAGE_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:8]!r}")
    if len(data) < 16:
        raise FormatError(f"{path}: truncated header")
    width, height = struct.unpack("<II", data[8:16])
    if (width, height) != (MAP_SIZE, MAP_SIZE):
        raise FormatError(f"{path}: unexpected dimensions {width}x{height}")
    payload = data[16:]
    if len(payload) != width * height * 4:
        raise FormatError(f"{path}: payload size mismatch")
    return SkyMap(np.frombuffer(payload, dtype="<f4").reshape(height, width)
                  .astype(float))


def export_png(sky, path, colormap: str = "gray"):
    """Write an 8-bit PNG with [0, max] scaled linearly onto [0, 255]."""
    from PIL import Image

    values = sky.values if isinstance(sky, SkyMap) else np.asarray(sky, dtype=float)
    peak = values.max()
    scaled = np.zeros_like(values) if peak <= 0 else values / peak
    byte = np.round(scaled * 255.0).astype(np.uint8)
    if colormap == "gray":
        img = Image.fromarray(byte, mode="L")
    else:
        try:
            import matplotlib
        except ImportError as exc:
            raise ValueError(f"colormap {colormap!r} requires matplotlib") from exc
        rgba = matplotlib.colormaps[colormap](byte)
        img = Image.fromarray((rgba[..., :3] * 255).astype(np.uint8), mode="RGB")
    img.save(path, format="PNG")


# -- ground truth targets -----------------------------------------------------


def make_truth_map(direction, sigma_px: float = 2.0) -> SkyMap:
    """Gaussian blob target (peak 1.0) at the source's pixel position."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    if d[2] <= 0:
        raise ValueError("truth direction must lie in the upper hemisphere")
    # continuous pixel coordinates of the direction
    pi = (d[0] + 1.0) * (MAP_SIZE / 2) - 0.5
    pj = (d[1] + 1.0) * (MAP_SIZE / 2) - 0.5
    ii, jj = np.meshgrid(np.arange(MAP_SIZE), np.arange(MAP_SIZE), indexing="ij")
    if sigma_px <= 0:
        values = np.zeros((MAP_SIZE, MAP_SIZE))
        values[int(round(pi)), int(round(pj))] = 1.0
    else:
        r2 = (ii - pi) ** 2 + (jj - pj) ** 2
        values = np.exp(-r2 / (2.0 * sigma_px**2))
    values = np.where(VALID_MASK, values, 0.0)
    peak = values.max()
    return SkyMap(values / peak if peak > 0 else values)


# -- dataset generation -------------------------------------------------------


@dataclass(frozen=True)
class DatasetConfig:
    durations_s: tuple[float, ...] = (1.0, 3.0, 10.0, 30.0, 100.0)
    runs_per_duration: int = 1000
    flux: float = 1.0
    photon_index_range: tuple[float, float] = (-2.5, -1.3)
    fov_half_angle_deg: float = 30.0
    background: bool = True
    cxb_flux: float = 0.5
    albedo_flux: float = 0.3
    master_seed: int = 0
    truth_sigma_px: float = 2.0
    cone_sigma_deg: float = 2.0
    resolution_r662: float = 0.08
    geometry: DetectorGeometry = field(default_factory=DetectorGeometry)

    def to_dict(self):
        d = {k: getattr(self, k) for k in (
            "durations_s", "runs_per_duration", "flux", "photon_index_range",
            "fov_half_angle_deg", "background", "cxb_flux", "albedo_flux",
            "master_seed", "truth_sigma_px", "cone_sigma_deg", "resolution_r662")}
        d["durations_s"] = list(self.durations_s)
        d["photon_index_range"] = list(self.photon_index_range)
        d["geometry"] = self.geometry.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "geometry" in d:
            d["geometry"] = DetectorGeometry.from_dict(d["geometry"])
        if "durations_s" in d:
            d["durations_s"] = tuple(d["durations_s"])
        if "photon_index_range" in d:
            d["photon_index_range"] = tuple(d["photon_index_range"])
        return cls(**d)


@dataclass
class DatasetManifest:
    format_version: int
    config: DatasetConfig
    bounds: FeatureBounds
    runs: list[dict]                 # {id, split, seed, duration_s, path}

    def to_dict(self):
        return {
            "format_version": self.format_version,
            "config": self.config.to_dict(),
            "normalization": self.bounds.to_dict(),
            "runs": self.runs,
        }

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        with open(path) as fh:
            d = json.load(fh)
        if d.get("format_version") != FORMAT_VERSION:
            raise FormatError(f"unsupported manifest version {d.get('format_version')}")
        manifest = cls(
            format_version=d["format_version"],
            config=DatasetConfig.from_dict(d["config"]),
            bounds=FeatureBounds.from_dict(d["normalization"]),
            runs=d["runs"],
        )
        missing = [r["path"] for r in manifest.runs
                   if not (path.parent / r["path"]).is_dir()]
        if missing:
            raise FormatError(f"manifest references missing runs: {missing[:3]} ...")
        return manifest


def split_counts(n: int) -> dict[str, int]:
    """640/160/200 proportional split of n runs."""
    n_train = int(n * 0.64 + 0.5)
    n_val = int(n * 0.16 + 0.5)
    return {"train": n_train, "val": n_val, "test": n - n_train - n_val}


def split_of_index(index: int, n: int) -> str:
    counts = split_counts(n)
    if index < counts["train"]:
        return "train"
    if index < counts["train"] + counts["val"]:
        return "val"
    return "test"


def _run_seeds(master_seed, duration_index, run_index):
    """Deterministic (meta seed, simulation seed) for one run."""
    ss = np.random.SeedSequence((master_seed, duration_index, run_index))
    meta, sim = ss.spawn(2)
    return meta, int(sim.generate_state(1, np.uint64)[0])


def simulate_dataset_run(config: DatasetConfig, duration_index: int,
                         run_index: int, materials=None) -> RunRecord:
    """Simulate one dataset run with deterministic per-run seeding."""
    duration = config.durations_s[duration_index]
    meta_ss, sim_seed = _run_seeds(config.master_seed, duration_index, run_index)
    meta_rng = np.random.default_rng(meta_ss)
    direction = sample_source_direction(config.fov_half_angle_deg, meta_rng)
    g_lo, g_hi = config.photon_index_range
    photon_index = float(meta_rng.uniform(g_lo, g_hi))

    sim = SimulationConfig(
        sources=default_sources(direction, photon_index, duration, config.flux,
                                background=config.background,
                                cxb_flux=config.cxb_flux,
                                albedo_flux=config.albedo_flux),
        seed=sim_seed,
        geometry=config.geometry,
        resolution=ResolutionModel(config.resolution_r662),
    )
    record = simulate_run(sim, materials)
    record.run_id = f"{duration:g}s-{run_index:04d}"
    record.split = split_of_index(run_index, config.runs_per_duration)
    return record


def records_to_features(events, bounds: FeatureBounds) -> np.ndarray:
    feats = np.array([e.features for e in events]).reshape(-1, 16)
    return normalize_features(feats, bounds).astype("<f4")


def features_to_records(features, bounds: FeatureBounds) -> list[EventRecord]:
    phys = denormalize_features(np.asarray(features, dtype=float), bounds)
    return [EventRecord(f) for f in phys]


def reconstruct_run_maps(features_norm, bounds, geometry, cone_sigma_deg):
    """Deterministic (compton, pinhole) maps from stored normalized events."""
    records = features_to_records(features_norm, bounds)
    cfg = ReconstructionConfig(cone_sigma_deg=cone_sigma_deg)
    return reconstruct(records, geometry, "both", cfg)


def write_run(run_dir: Path, record: RunRecord, config: DatasetConfig,
              bounds: FeatureBounds):
    """Write one run directory (events, truth, maps, target)."""
    run_dir.mkdir(parents=True, exist_ok=True)
    features = records_to_features(record.events, bounds)
    write_events(features, run_dir / "events.bin")

    truth = {
        "direction": [float(x) for x in record.truth_direction],
        "photon_index": record.photon_index,
        "duration_s": record.duration_s,
        "flux": record.flux,
        "seed": record.seed,
        "background": record.background,
        "generated_photons": record.generated_photons,
        "n_events": len(record.events),
    }
    with open(run_dir / "truth.json", "w", newline="\n") as fh:
        json.dump(truth, fh, sort_keys=True, indent=2)
        fh.write("\n")

    compton, pinhole = reconstruct_run_maps(features, bounds, config.geometry,
                                            config.cone_sigma_deg)
    write_map(compton, run_dir / "compton.img")
    write_map(pinhole, run_dir / "pinhole.img")
    write_map(make_truth_map(record.truth_direction, config.truth_sigma_px),
              run_dir / "target.img")


def _generate_one(args):
    config, duration_index, run_index, out_dir = args
    record = simulate_dataset_run(config, duration_index, run_index)
    run_dir = Path(out_dir) / "runs" / record.split / record.run_id
    bounds = FeatureBounds.from_geometry(config.geometry)
    try:
        write_run(run_dir, record, config, bounds)
    except Exception:
        shutil.rmtree(run_dir, ignore_errors=True)
        raise
    return {
        "id": record.run_id,
        "split": record.split,
        "seed": record.seed,
        "duration_s": record.duration_s,
        "path": str(Path("runs") / record.split / record.run_id),
    }


def generate_dataset(config: DatasetConfig, out_dir, jobs: int = 1) -> DatasetManifest:
    """Generate all runs and write the manifest last.

    ``jobs`` controls run-level parallelism; every run is seeded independently
    from (master seed, duration index, run index), so the output tree does
    not depend on ``jobs``.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [(config, di, ri, out_dir)
             for di in range(len(config.durations_s))
             for ri in range(config.runs_per_duration)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_generate_one, tasks, chunksize=1))
    else:
        runs = [_generate_one(t) for t in tasks]

    bounds = FeatureBounds.from_geometry(config.geometry)
    manifest = DatasetManifest(FORMAT_VERSION, config, bounds, runs)
    with open(out_dir / "manifest.json", "w", newline="\n") as fh:
        json.dump(manifest.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest
