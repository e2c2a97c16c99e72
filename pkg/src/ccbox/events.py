"""Per-event detector records: 16-channel feature vectors and classification.

Each detected event is summarized as four (E, x, y, z) tuples, one per
detector class (front, rear, side, BGO shield).  Within a class the energy
is the sum of all deposits and the position is that of the highest single
deposit (ties broken by tracking order).  Absent classes are encoded as
(0, 0, 0, 0).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import SEGMENT_NAMES, DetectorGeometry
from .kinematics import compton_cosine, COS_TOLERANCE

N_FEATURES = 16
FEATURE_NAMES = tuple(f"{seg}_{q}" for seg in SEGMENT_NAMES for q in ("E", "x", "y", "z"))

DEFAULT_VETO_THRESHOLD_KEV = 50.0
DEFAULT_PINHOLE_BAND_KEV = (30.0, 200.0)
DEFAULT_TOTAL_BAND_KEV = (30.0, 3000.0)


class SubThresholdError(ValueError):
    """All deposits of the event fall below the trigger threshold."""


@dataclass
class EventRecord:
    """One detected event: 16 features in physical units (keV, mm)."""

    features: np.ndarray            # (16,) [front E,x,y,z, rear ..., side ..., bgo ...]
    origin: str = ""                # generating source kind, "" if unknown

    def energy(self, segment: str) -> float:
        return float(self.features[4 * SEGMENT_NAMES.index(segment)])

    def position(self, segment: str) -> np.ndarray:
        i = 4 * SEGMENT_NAMES.index(segment)
        return self.features[i + 1:i + 4]

    @property
    def front_energy(self):
        return self.energy("front")

    @property
    def rear_energy(self):
        return self.energy("rear")


@dataclass(frozen=True)
class EventClass:
    kind: str                       # "compton" | "pinhole" | "rejected"
    reason: str = ""


@dataclass(frozen=True)
class ClassifierThresholds:
    veto_kev: float = DEFAULT_VETO_THRESHOLD_KEV
    pinhole_band_kev: tuple[float, float] = DEFAULT_PINHOLE_BAND_KEV
    total_band_kev: tuple[float, float] = DEFAULT_TOTAL_BAND_KEV


# -- event building -----------------------------------------------------------


def build_event(interactions, origin="", threshold_kev=30.0) -> EventRecord:
    """Aggregate one photon's smeared interactions into an EventRecord.

    Raises SubThresholdError when the total deposit is below the trigger
    threshold (such events are dropped by the pipeline).
    """
    features = np.zeros(N_FEATURES)
    best = {}
    total = 0.0
    for order, it in enumerate(interactions):
        seg = SEGMENT_NAMES.index(it.segment)
        features[4 * seg] += it.deposit
        total += it.deposit
        if seg not in best or it.deposit > best[seg][0]:
            best[seg] = (it.deposit, order, np.asarray(it.position, dtype=float))
    if total < threshold_kev:
        raise SubThresholdError(f"total deposit {total:.1f} keV below threshold")
    for seg, (_, _, pos) in best.items():
        if features[4 * seg] > 0:
            features[4 * seg + 1:4 * seg + 4] = pos
        else:
            features[4 * seg:4 * seg + 4] = 0.0
    return EventRecord(features, origin)


def build_events_from_batch(batch, origin="", threshold_kev=30.0) -> list[EventRecord]:
    """Vectorized event building from an InteractionBatch (one run's photons)."""
    if len(batch.photon) == 0:
        return []
    photons, inverse = np.unique(batch.photon, return_inverse=True)
    n = len(photons)

    energy = np.zeros((n, len(SEGMENT_NAMES)))
    np.add.at(energy, (inverse, batch.segment), batch.deposit)

    # highest single deposit per (photon, segment); earliest wins on ties
    order = np.arange(len(batch.photon))
    rank = np.lexsort((order, -batch.deposit, batch.segment, inverse))
    group = inverse[rank] * len(SEGMENT_NAMES) + batch.segment[rank]
    first = np.ones(len(rank), dtype=bool)
    first[1:] = group[1:] != group[:-1]
    sel = rank[first]

    positions = np.zeros((n, len(SEGMENT_NAMES), 3))
    positions[inverse[sel], batch.segment[sel]] = batch.position[sel]
    positions[energy <= 0] = 0.0

    features = np.concatenate([energy[:, :, None], positions], axis=2).reshape(n, N_FEATURES)
    keep = energy.sum(axis=1) >= threshold_kev
    return [EventRecord(f.copy(), origin) for f in features[keep]]


# -- normalization ------------------------------------------------------------


@dataclass(frozen=True)
class FeatureBounds:
    """Per-feature (min, max) used for the [0, 1] normalization."""

    lo: np.ndarray                  # (16,)
    hi: np.ndarray                  # (16,)

    def __post_init__(self):
        if not np.all(self.lo < self.hi):
            raise ValueError("bounds require min < max per feature")

    @classmethod
    def from_geometry(cls, geometry: DetectorGeometry,
                      energy_max_kev: float = 3000.0) -> "FeatureBounds":
        bb = geometry.bounding_box()
        lo = np.zeros(N_FEATURES)
        hi = np.zeros(N_FEATURES)
        for seg in range(len(SEGMENT_NAMES)):
            lo[4 * seg] = 0.0
            hi[4 * seg] = energy_max_kev
            for ax in range(3):
                lo[4 * seg + 1 + ax] = bb.lo[ax]
                hi[4 * seg + 1 + ax] = bb.hi[ax]
        return cls(lo, hi)

    def to_dict(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["lo"], dtype=float), np.asarray(d["hi"], dtype=float))


def normalize_features(features, bounds: FeatureBounds):
    """Affine map of raw features into [0, 1], clamped."""
    f = (np.asarray(features, dtype=float) - bounds.lo) / (bounds.hi - bounds.lo)
    return np.clip(f, 0.0, 1.0)


def denormalize_features(features, bounds: FeatureBounds):
    return np.asarray(features, dtype=float) * (bounds.hi - bounds.lo) + bounds.lo


def normalize_event(record: EventRecord, bounds: FeatureBounds) -> EventRecord:
    return replace(record, features=normalize_features(record.features, bounds))


# -- classification -----------------------------------------------------------


def classify_event(record: EventRecord,
                   thresholds: ClassifierThresholds = ClassifierThresholds()) -> EventClass:
    """Assign exactly one class to an event built by build_event."""
    e_front = record.energy("front")
    e_rear = record.energy("rear")
    e_side = record.energy("side")
    e_bgo = record.energy("bgo")

    if e_bgo > thresholds.veto_kev:
        return EventClass("rejected", "veto")
    if e_front > 0 and e_rear > 0:
        total = e_front + e_rear
        lo, hi = thresholds.total_band_kev
        if not lo <= total <= hi:
            return EventClass("rejected", "energy_band")
        cos = compton_cosine(e_front, e_rear)
        if abs(cos) > 1.0 + COS_TOLERANCE:
            return EventClass("rejected", "unphysical")
        return EventClass("compton")
    if e_rear > 0 and e_front == 0 and e_side == 0 and e_bgo == 0:
        lo, hi = thresholds.pinhole_band_kev
        if lo <= e_rear <= hi:
            return EventClass("pinhole")
        return EventClass("rejected", "pinhole_band")
    return EventClass("rejected", "unclassified")


def classify_events(records, thresholds: ClassifierThresholds = ClassifierThresholds()):
    """Classify a list of events; returns (compton list, pinhole list)."""
    compton, pinhole = [], []
    for rec in records:
        cls = classify_event(rec, thresholds)
        if cls.kind == "compton":
            compton.append(rec)
        elif cls.kind == "pinhole":
            pinhole.append(rec)
    return compton, pinhole
