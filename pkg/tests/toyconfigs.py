"""Toy-scale run configurations shared by the acceptance suite."""
from heliogen.losses import LossWeights
from heliogen.training import TrainConfig

TOY_EPOCHS = 20
TOY_SIZE = 64
TOY_SEED = 1


def toy_pix2pix_config() -> TrainConfig:
    return TrainConfig(
        epochs=TOY_EPOCHS,
        checkpoint_interval=10,
        batch_size=4,
        learning_rate=2e-4,
        seed=TOY_SEED,
        architecture="pix2pix",
        image_size=TOY_SIZE,
        loss_weights=LossWeights(lambda_l1=100.0),
        generator_overrides={"depth": 6, "base_filters": 16, "max_filters": 128},
        discriminator_overrides={"strided_layers": 3, "base_filters": 32},
    )


def toy_pix2pixhd_config() -> TrainConfig:
    return TrainConfig(
        epochs=TOY_EPOCHS,
        checkpoint_interval=10,
        batch_size=4,
        learning_rate=2e-4,
        seed=TOY_SEED,
        architecture="pix2pixhd",
        image_size=TOY_SIZE,
        loss_weights=LossWeights(lambda_fm=10.0),
        generator_overrides={"global_downsamples": 2, "global_residual_blocks": 9,
                             "enhancer_residual_blocks": 3, "base_filters": 32},
        discriminator_overrides={"strided_layers": 3, "base_filters": 32,
                                 "num_scales": 2},
    )
