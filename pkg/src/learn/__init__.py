from .metrics import RunMetrics, group_statistics
from .qlearning import Observation, QTable, TrainConfig, evaluate_policy, rollout, sample_state, train
from .tiling import TilePartition, make_tiling, tiles_per_dimension

__all__ = [
    "Observation",
    "QTable",
    "RunMetrics",
    "TilePartition",
    "TrainConfig",
    "evaluate_policy",
    "group_statistics",
    "make_tiling",
    "rollout",
    "sample_state",
    "tiles_per_dimension",
    "train",
]
