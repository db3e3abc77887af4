"""Priority-driven kidney paired exchange matching."""

from .config import ConfigError, EngineConfig, load_config
from .matching import Chain, Cycle, MatchResult, run_ikepa
from .priority import calculate_priorities
from .registry import NddDonor, Pair, Pool, PoolFormatError, parse_pool
from .scoring import edge_score, gen_compatibility_matrix

__all__ = [
    "Chain",
    "ConfigError",
    "Cycle",
    "EngineConfig",
    "MatchResult",
    "NddDonor",
    "Pair",
    "Pool",
    "PoolFormatError",
    "calculate_priorities",
    "edge_score",
    "gen_compatibility_matrix",
    "load_config",
    "parse_pool",
    "run_ikepa",
]

__version__ = "0.1.0"
