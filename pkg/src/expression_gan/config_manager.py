import os
import json
import copy
import logging
from typing import Dict, Any, Iterable, List, Optional, Tuple

from .errors import ConfigError

logger = logging.getLogger(__name__)

# Default path for the config file, relative to the project root
DEFAULT_CONFIG_FILE = os.path.join(os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))),
                                   "config.json")

OUTPUT_DIR_ENV = "EXPRESSION_GAN_OUTPUT_DIR"

# Default configuration values (kept in sync with config.TrainConfig)
DEFAULT_CONFIG: Dict[str, Any] = {
    "resolution": 256,
    "epochs": 200,
    "batch_size": 1,
    "lr": 0.0002,
    "beta1": 0.5,
    "beta2": 0.999,
    "weights": {"lambda1": 2.0, "lambda2": 100.0, "lambda3": 0.1},
    "dual_discriminators": True,
    "use_identity_loss": True,
    "use_landmark_recon": True,
    "color_mode": "sampled",
    "label_routing": "Gl_and_Ge",
    "intensity_conditioning": False,
    "seed": 0,
    "base_filters": 64,
    "disc_layers": 3,
    "landmark_radius": None,
    "softness": 1.0,
    "recon_mode": "l12",
    "pairing_policy": "cross",
    "detach_stage1_in_stage2": False,
    "eval_deterministic": True,
    "max_steps": None,
    "checkpoint_every": 500,
    "log_every": 10,
    "embedder_epochs": 20,
    "embedding_dim": 64,
    "coord_hidden": 256,
}


def load_config(config_file: Optional[str] = None) -> Dict[str, Any]:
    """
    Load configuration from a JSON file merged over the defaults.

    Args:
        config_file: Path to the config file. If None, uses the default path.

    Returns:
        Dictionary containing configuration values.

    Raises:
        ConfigError: if the file exists but cannot be parsed.
    """
    explicit = config_file is not None
    config_file = config_file or DEFAULT_CONFIG_FILE

    config = copy.deepcopy(DEFAULT_CONFIG)

    if os.path.exists(config_file):
        try:
            with open(config_file, 'r') as f:
                file_config = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            logger.error(f"Error loading config file {config_file}: {str(e)}")
            raise ConfigError(f"Cannot read config file {config_file}: {e}") from e
        if not isinstance(file_config, dict):
            raise ConfigError(f"Config file {config_file} must contain a JSON object")
        _deep_update(config, file_config)
        logger.info(f"Loaded configuration from {config_file}")
    elif explicit:
        raise ConfigError(f"Config file {config_file} not found")
    else:
        logger.info(f"Config file {config_file} not found, using defaults")

    return config


def save_config(config: Dict[str, Any], config_file: Optional[str] = None) -> bool:
    """
    Save configuration to a JSON file (write to a temp file, then rename).

    Args:
        config: Dictionary containing configuration values.
        config_file: Path to the config file. If None, uses the default path.

    Returns:
        True if successful, False otherwise.
    """
    config_file = config_file or DEFAULT_CONFIG_FILE

    try:
        directory = os.path.dirname(os.path.abspath(config_file))
        os.makedirs(directory, exist_ok=True)
        tmp_file = f"{config_file}.tmp"
        with open(tmp_file, 'w') as f:
            json.dump(config, f, indent=2, sort_keys=True)
        os.replace(tmp_file, config_file)
        logger.info(f"Saved configuration to {config_file}")
        return True
    except OSError as e:
        logger.error(f"Error saving config file {config_file}: {str(e)}")
        return False


def update_config(key: str, value: Any, config_file: Optional[str] = None) -> bool:
    """
    Update a specific configuration value and save it.

    Args:
        key: Configuration key to update (dotted for nested keys).
        value: New value to set.
        config_file: Path to the config file. If None, uses the default path.

    Returns:
        True if successful, False otherwise.
    """
    config = load_config(config_file)
    _set_dotted(config, key, value)
    return save_config(config, config_file)


def get_config_value(key: str, config_file: Optional[str] = None) -> Any:
    """
    Get a specific configuration value.

    Args:
        key: Configuration key to retrieve (dotted for nested keys).
        config_file: Path to the config file. If None, uses the default path.

    Returns:
        The value for the specified key, or None if the key doesn't exist.
    """
    node: Any = load_config(config_file)
    for part in key.split("."):
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


def parse_override(override: str) -> Tuple[str, Any]:
    """Split a ``key=value`` override; values are parsed as JSON when possible."""
    if "=" not in override:
        raise ConfigError(f"Override '{override}' must have the form key=value")
    key, raw = override.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"Override '{override}' has an empty key")
    raw = raw.strip()
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(config: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """
    Apply ``key=value`` overrides on top of a configuration dictionary.

    Unknown top-level keys are rejected so typos fail before any side effect.

    Args:
        config: Base configuration (not modified).
        overrides: Iterable of ``key=value`` strings.

    Returns:
        A new dictionary with the overrides applied.
    """
    result = copy.deepcopy(config)
    for override in overrides:
        key, value = parse_override(override)
        if key.split(".")[0] not in DEFAULT_CONFIG:
            raise ConfigError(f"Unknown configuration key '{key}'")
        _set_dotted(result, key, value)
        logger.debug(f"Override applied: {key}={value!r}")
    return result


def default_output_dir() -> str:
    """Output directory from EXPRESSION_GAN_OUTPUT_DIR, or ./outputs."""
    return os.getenv(OUTPUT_DIR_ENV) or os.path.join(os.getcwd(), "outputs")


def _set_dotted(config: Dict[str, Any], key: str, value: Any) -> None:
    parts: List[str] = key.split(".")
    node = config
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            raise ConfigError(f"Cannot set '{key}': '{part}' is not a section")
        node = child
    node[parts[-1]] = value


def _deep_update(base: Dict[str, Any], update: Dict[str, Any]) -> None:
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
