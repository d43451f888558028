"""Interactive selection and segmentation toolkit for Gaussian splat scenes.

A numpy-based engine for turning 2D masks into per-Gaussian selections:
software splatting kernels (render/depth/features/visibility/first hits),
manual frustum and depth projection, an automatic multi-view mask-tracking
and aggregation pipeline with human corrections, PCA-based orientation,
an evaluation harness, and an HTTP service plus CLI on top.
"""

from .autoseg import (
    AggregationConfig,
    AggregationResult,
    ReferenceMask,
    TrackJob,
    add_correction,
    aggregate,
    build_track_job,
    pre_segment,
    remove_correction,
    rerun_after_correction,
    run_auto_segmentation,
    run_provider,
    segment_auto,
)
from .cameras import Camera, load_camera, load_cameras, save_cameras
from .errors import (
    DegenerateSelectionError,
    EngineError,
    NoHitsError,
    ProviderError,
    SceneFormatError,
    SceneIOError,
)
from .orient import AxisMapping, orient_scene, pca_basis
from .providers import DirectoryProvider, GeometricProvider, MaskProvider, ReplayProvider
from .rasterize import (
    RenderOutputs,
    forward,
    render,
    render_features,
    render_features_grad,
    visibility,
)
from .scene import GaussianScene, apply_rigid_transform, load_scene, save_scene
from .selection import (
    Mask2D,
    Selection3D,
    SelectMode,
    box_mask,
    combine_mask2d,
    combine_selection3d,
    depth_project,
    export_selection,
    frustum_project,
    load_mask,
    load_selection,
    paint_mask,
    save_mask,
    save_selection,
)
from .views import (
    ViewSequence,
    ViewSource,
    best_matching_view,
    shift_sequence,
    subsample_training_views,
    turnaround_views,
)

__version__ = "0.1.0"
