# Utils package for expression_gan
import random
import logging

import numpy as np
import torch

from .images import normalize, denormalize, load_image, save_png, to_tensor, to_image, contact_sheet
from .reporting import format_table, write_json, JsonlWriter
from .torch_utils import parameter_hash, set_dropout, freeze

logger = logging.getLogger(__name__)


def seed_everything(seed: int) -> None:
    """Seed python, numpy and torch random streams."""
    random.seed(seed)
    np.random.seed(seed % (2 ** 32))
    torch.manual_seed(seed)
    logger.debug(f"Seeded random streams with {seed}")


# Export the functions
__all__ = ['seed_everything', 'normalize', 'denormalize', 'load_image', 'save_png', 'to_tensor',
           'to_image', 'contact_sheet', 'format_table', 'write_json', 'JsonlWriter',
           'parameter_hash', 'set_dropout', 'freeze']
