from .checkpoint import (
    CheckpointState,
    build_generator_from_state,
    checkpoint_state_from,
    generation_fn_from_checkpoint,
    identity_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .config import (
    ConfigError,
    TrainConfig,
    parse_config,
    resolve_discriminator_spec,
    resolve_generator_spec,
    write_config,
)
from .loop import TrainResult, build_models, select_best_checkpoint, train

__all__ = [
    "CheckpointState",
    "ConfigError",
    "TrainConfig",
    "TrainResult",
    "build_generator_from_state",
    "build_models",
    "checkpoint_state_from",
    "generation_fn_from_checkpoint",
    "identity_checkpoint",
    "load_checkpoint",
    "parse_config",
    "resolve_discriminator_spec",
    "resolve_generator_spec",
    "save_checkpoint",
    "select_best_checkpoint",
    "train",
    "write_config",
]
