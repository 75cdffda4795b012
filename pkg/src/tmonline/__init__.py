"""Online-learning Tsetlin Machine simulator with fault injection and runtime reconfiguration."""
from .data import (CyclicBuffer, Dataset, ThreeSets, enumerate_orderings, filter_class,
                   load_dataset, materialize_sets, partition_blocks)
from .errors import (AddressError, AnalysisError, ConfigurationError, InputError,
                     ParseError, QueryError, ScheduleError, TMError, TrainingError)
from .fault import FaultMask, FaultPlan, apply_mask, generate_even_spread_plan
from .machine import TMConfig, TsetlinMachine
from .manager import Event, MitigationPolicy, RunHistory, Schedule, run_schedule
from .rng import Randomizer

__version__ = "0.1.0"

__all__ = [
    "AddressError", "AnalysisError", "ConfigurationError", "CyclicBuffer", "Dataset",
    "Event", "FaultMask", "FaultPlan", "InputError", "MitigationPolicy", "ParseError",
    "QueryError", "Randomizer", "RunHistory", "Schedule", "ScheduleError", "TMConfig",
    "TMError", "ThreeSets", "TrainingError", "TsetlinMachine", "apply_mask",
    "enumerate_orderings", "filter_class", "generate_even_spread_plan", "load_dataset",
    "materialize_sets", "partition_blocks", "run_schedule",
]
