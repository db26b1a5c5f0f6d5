"""Multimodal KG reasoning: per-modality ComplEx teachers, a reinforced teacher
selector, and neighbor-decoupled distillation into a structural student."""

from ._dsom import (
    ConfigError,
    FeatureFileError,
    PhaseError,
    __version__,
    action_label,
    complex_score,
    compute_reward,
    default_config,
    dkd_loss,
    evaluate,
    filtered_rank,
    gen_synth,
    metrics_from_ranks,
    ndkd_loss,
    pretrain,
    read_features,
    report,
    softmax,
    train_student,
    write_features,
)

__all__ = [
    "ConfigError",
    "FeatureFileError",
    "PhaseError",
    "__version__",
    "action_label",
    "complex_score",
    "compute_reward",
    "default_config",
    "dkd_loss",
    "evaluate",
    "filtered_rank",
    "gen_synth",
    "metrics_from_ranks",
    "ndkd_loss",
    "pretrain",
    "read_features",
    "report",
    "softmax",
    "train_student",
    "write_features",
]
