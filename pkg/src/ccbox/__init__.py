"""Desk-scale Compton-camera GRB simulation and localization toolkit."""

from .geometry import (
    DetectorGeometry,
    MaterialTable,
    build_default_geometry,
    load_material_tables,
    lookup_attenuation,
    ray_box_intersection,
)
from .kinematics import (
    M_E_KEV,
    UnphysicalEventError,
    compton_outgoing_energy,
    scattering_angle,
)
from .transport import (
    PhotonHistory,
    ResolutionModel,
    RunRecord,
    SimulationConfig,
    SourceSpec,
    apply_resolution,
    default_sources,
    sample_klein_nishina,
    sample_power_law,
    sample_source_direction,
    simulate_run,
    transport_photon,
)
from .events import (
    EventRecord,
    FeatureBounds,
    build_event,
    classify_event,
    normalize_event,
)
from .reconstruction import (
    ConeParams,
    ReconstructionConfig,
    SkyMap,
    arm,
    arm_filter,
    backproject_cone,
    backproject_pinhole,
    combine_maps,
    cone_from_event,
    reconstruct,
)
from .metrics import iqr, mse, peak_offset, ssim, summarize_runs, weighted_centroid
from .dataset import (
    DatasetConfig,
    DatasetManifest,
    export_png,
    generate_dataset,
    make_truth_map,
    read_events,
    read_map,
    write_events,
    write_map,
)

__version__ = "0.1.0"
