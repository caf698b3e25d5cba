"""mixvis: per-cluster Gaussian-mixture summaries for scattered data.

Compresses large multivariate point sets into 1D/2D/3D mixtures per
cluster, then serves density plots, parallel-coordinate densities, time
histograms, splatted spatial views, uncertainty metrics, and brushing with
degree-of-interest propagation - all from the compact summary.
"""

from ._accel import USE_NUMBA
from .dataset import (
    AttributeSpec,
    Clustering,
    Dataset,
    DatasetError,
    TimeSeries,
    generate_synthetic,
    kmeans_cluster,
    load_clustering,
    load_dataset,
    save_clustering,
    save_dataset,
)
from .density import (
    DensityGrid,
    LodView,
    SummaryView,
    ToneMapParams,
    density_1d,
    density_2d,
    pcp_density,
    pcp_image,
    time_histogram,
    tone_map,
)
from .fitting import (
    FitConfig,
    FitResult,
    bic,
    component_bounds,
    fit_em,
    free_parameter_count,
    select_components,
)
from .gmm import (
    GaussianComponent,
    Gmm,
    SingularCovarianceError,
    cholesky_invert,
    symmetric_eigen,
)
from .interact import (
    Brush,
    TransferMatrix,
    advance_doi,
    brush_doi,
    build_transfer_matrix,
    combine_doi,
    load_transfer_matrices,
    lod_substitute,
    save_transfer_matrices,
)
from .metrics import EmpiricalCdf, rank_outliers, take_outliers, wasserstein_1d
from .render import (
    Camera,
    RenderFrame,
    TfLut,
    TransferFunction,
    build_tf_lut,
    expected_tf,
    gaussian_bbox,
    ray_coeffs,
    ray_integral_infinite,
    ray_integral_interval,
    splat_frame,
    write_image,
)
from .summary import (
    ClusterSummary,
    SubsetKey,
    Summary,
    SummaryFormatError,
    SummaryStats,
    SummaryVersionError,
    build_summary,
    load_summary,
    save_summary,
    summary_stats,
)

__version__ = "0.1.0"
