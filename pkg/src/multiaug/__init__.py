"""Deterministic multi-augmentation pipeline and self-supervised
pre-training toolkit.

The package builds two independently cropped and augmented views per
image, trains an online/target network pair by regressing predictions
onto slowly-moving target projections, and evaluates the learned encoder
with a linear probe or label-fraction fine-tuning. Every random choice
flows from one integer seed, so runs, checkpoints, and logs reproduce
bit for bit.
"""

from .rng import Rng, derive_seed
from .ppm import decode_ppm, encode_ppm, validate_image
from .checkpoint import load_checkpoint, save_checkpoint
from .transforms import TransformKind, resize_bilinear
from .policy import (
    FULL_SEARCH_SPACE,
    FixedPolicySource,
    PolicyOp,
    RandAugmentConfig,
    RandAugmentSource,
    apply_policy,
    load_policy_file,
    magnitude_to_params,
    sample_randaugment,
)
from .cropping import (
    CropRect,
    crop_ratio_stats,
    full_crop,
    make_two_views,
    resolve_strategy,
    sample_inception_crop,
    sample_uniform_crop,
)
from .datasets import (
    SHAPE_CLASS_NAMES,
    LabeledDataset,
    generate_shapes,
    label_fraction_split,
    load_labeled_dir,
)
from .net import (
    BatchNorm,
    Linear,
    ModelParams,
    NetSpecs,
    ReLU,
    backward_net,
    build_default_nets,
    flatten_params,
    forward_net,
    init_model_params,
    init_params,
    param_flags,
    trainable_names,
    unflatten_params,
    validate_spec,
)
from .objective import cosine_loss, l2_normalize, softmax_cross_entropy, symmetrized_loss
from .optim import (
    EmaConfig,
    OptimConfig,
    OptimState,
    StepOutOfRange,
    cosine_lr,
    ema_tau,
    ema_update,
    lars_step,
    scaled_lr,
)
from .trainer import (
    StepConfig,
    TrainConfig,
    embedding_std,
    load_pretrained,
    pretrain_step,
    run_pretraining,
)
from .evalproto import (
    EvalReport,
    extract_features,
    finetune_fraction,
    linear_eval,
    topk_accuracy,
    train_linear_head,
)

__version__ = "0.1.0"
