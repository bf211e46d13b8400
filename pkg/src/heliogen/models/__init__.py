from .common import init_parameters
from .pix2pix import (
    DiscriminatorSpec,
    GeneratorSpec,
    PatchDiscriminator,
    UnetGenerator,
    build_patch_discriminator,
    build_unet_generator,
    discriminator_forward,
    generator_forward,
)
from .pix2pixhd import (
    HDGenerator,
    HDGeneratorSpec,
    MultiScaleDiscriminator,
    MultiScaleDiscriminatorSpec,
    ScaleOutput,
    build_hd_generator,
    build_multiscale_discriminator,
    hd_generator_forward,
    multiscale_forward,
)

__all__ = [
    "DiscriminatorSpec",
    "GeneratorSpec",
    "HDGenerator",
    "HDGeneratorSpec",
    "MultiScaleDiscriminator",
    "MultiScaleDiscriminatorSpec",
    "PatchDiscriminator",
    "ScaleOutput",
    "UnetGenerator",
    "build_hd_generator",
    "build_multiscale_discriminator",
    "build_patch_discriminator",
    "build_unet_generator",
    "discriminator_forward",
    "generator_forward",
    "hd_generator_forward",
    "init_parameters",
    "multiscale_forward",
]
