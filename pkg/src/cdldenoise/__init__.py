"""Guided image denoising with coupled dictionaries and joint sparse coding.

A noisy target-modality image is denoised under a registered clean image
of another modality: learned coupled dictionaries separate cross-modal
common structure from modality-specific structure, patch pairs are coded
jointly, and the denoised image is rebuilt by closed-form aggregation of
the per-patch estimates.
"""

from . import exceptions
from .cluster import ClusterAssignment, cluster_patches
from .denoise import (
    DenoiseConfig,
    PatchEstimates,
    default_cluster_count,
    denoise_basic,
    denoise_group,
    error_map,
    reconstruct,
)
from .dictlearn import (
    CodeState,
    DictionarySet,
    TrainConfig,
    init_dictionaries,
    load_dictionaries,
    objective,
    save_dictionaries,
    train,
    train_common,
    train_unique,
)
from .imagio import (
    GrayImage,
    NoiseSpec,
    RgbImage,
    add_gaussian_noise,
    decode_any,
    decode_image,
    decode_raw,
    encode_image,
    encode_raw,
    rgb_to_intensity,
)
from .metrics import QualityReport, average_report, psnr, rmse
from .patches import (
    PatchGrid,
    PatchMatrix,
    TrainingSet,
    build_training_set,
    extract_grid,
    remove_dc,
)
from .sparse import (
    CodingConfig,
    GroupCode,
    JointCode,
    StackedDictionary,
    group_somp,
    ista_row_sweep,
    joint_omp,
    soft_threshold,
)
from .synth import synth_pair

__version__ = "0.1.0"
