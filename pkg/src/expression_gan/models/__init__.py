# Generator and discriminator architectures
from .specs import DiscriminatorSpec, GeneratorSpec, patch_map_size, receptive_field
from .generators import (ExpressionGenerator, LandmarkGenerator, build_expression_generator,
                         build_landmark_generator)
from .discriminators import Discriminator, PatchDiscriminator, build_discriminator

__all__ = ['DiscriminatorSpec', 'GeneratorSpec', 'patch_map_size', 'receptive_field',
           'ExpressionGenerator', 'LandmarkGenerator', 'build_expression_generator',
           'build_landmark_generator', 'Discriminator', 'PatchDiscriminator', 'build_discriminator']
