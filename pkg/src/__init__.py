__version__ = "0.1.0"

from .config import ExperimentConfig, load_config
from .runner import ExperimentRunner, run_experiment
