from setattn.harness.combinatorics import state_space_sizes
from setattn.harness.config import ConfigError, ExperimentConfig, load_config, parse_config
from setattn.harness.experiment import compare, run_experiment
from setattn.harness.greedy import estimate_greedy_return
from setattn.harness.plot import emit_plot
from setattn.harness.report import ComparisonReport, epochs_to_threshold, moving_average

__all__ = [
    "ComparisonReport",
    "ConfigError",
    "ExperimentConfig",
    "compare",
    "emit_plot",
    "epochs_to_threshold",
    "estimate_greedy_return",
    "load_config",
    "moving_average",
    "parse_config",
    "run_experiment",
    "state_space_sizes",
]
