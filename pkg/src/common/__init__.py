from .config_loader import load_config, load_json_config, workers, log_level, registry_path, get_float, get_int
from .errors import TwoScaleError, ConfigError, RuntimeFailure
