"""Fast bilateral stereo on the CPU: NCC twin cost volumes, bilateral aggregation,
WTA, left-right consistency and parabola subpixel refinement."""

from .aggregation import (
    RangeWeightTable,
    SpatialWeightTable,
    bilateral_aggregate,
    build_range_weights,
    build_spatial_weights,
)
from .core import (
    INVALID,
    SENTINEL,
    BlockStats,
    CostVolume,
    DimensionError,
    DisparityMap,
    EvaluationError,
    FbsParams,
    GrayImage,
    ParameterError,
    StereoError,
    cost_volume_index,
    cost_volume_unindex,
)
from .cost import compute_block_stats, compute_cost_volumes
from .dataset_io import (
    DatasetSpec,
    FormatError,
    load_ground_truth,
    load_image,
    load_manifest,
    write_disparity,
)
from .evaluation import EvalReport, RegionMask, compute_mde_s, compute_pep, load_region_mask
from .optimization import lrc_check, subpixel_refine, wta_disparity
from .pipeline import RunConfig, estimate_disparity, run_pipeline, run_sweep

__version__ = "0.1.0"
