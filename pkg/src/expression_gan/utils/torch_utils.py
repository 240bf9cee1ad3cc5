import hashlib
import logging

import torch
import torch.nn as nn

logger = logging.getLogger(__name__)


def parameter_hash(module: nn.Module) -> str:
    """SHA-256 over every parameter and buffer of a module, in state-dict order."""
    digest = hashlib.sha256()
    for name, tensor in module.state_dict().items():
        digest.update(name.encode("utf-8"))
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def set_dropout(module: nn.Module, active: bool) -> None:
    """Switch only the dropout layers of a module between train and eval behaviour."""
    for child in module.modules():
        if isinstance(child, nn.Dropout):
            child.train(active)


def freeze(module: nn.Module) -> nn.Module:
    """Put a module in eval mode and stop gradients into its parameters."""
    module.eval()
    for param in module.parameters():
        param.requires_grad_(False)
    return module
