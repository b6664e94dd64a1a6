"""Tile-coding baseline: equal rectangular tiles over the state box."""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Sequence, Tuple

from ..dsl.ast import StateVar
from ..errors import ExperimentConfigError, PartitionInvariantError


@dataclass(frozen=True)
class TilePartition:
    state_vars: Tuple[StateVar, ...]
    counts: Tuple[int, ...]

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    def __len__(self) -> int:
        return self.size

    def tile_index(self, state: Sequence) -> Tuple[int, ...]:
        """Per-dimension tile of ``state``; tiles are half-open except the last, which is closed."""
        index = []
        for value, var, count in zip(state, self.state_vars, self.counts):
            value = Fraction(value)
            if not var.lower <= value <= var.upper:
                raise PartitionInvariantError(f"{var.name} = {value} is outside [{var.lower}, {var.upper}]")
            i = math.floor((value - var.lower) * count / (var.upper - var.lower))
            index.append(min(i, count - 1))
        return tuple(index)

    def locate(self, state: Sequence) -> int:
        if len(state) != len(self.state_vars):
            raise PartitionInvariantError(f"state has {len(state)} components, expected {len(self.state_vars)}")
        flat = 0
        for i, count in zip(self.tile_index(state), self.counts):
            flat = flat * count + i
        return flat

    def witnesses(self) -> List[Tuple[int, Tuple[Fraction, ...]]]:
        # The baseline gets no seeding states.
        return []


def tiles_per_dimension(budget: int, dimension: int) -> int:
    """Smallest ``c`` with ``c ** dimension > budget``."""
    if budget <= 0:
        raise ExperimentConfigError("tile budget must be positive")
    if dimension <= 0:
        raise ExperimentConfigError("tiling needs at least one state dimension")
    c = max(1, int(round(budget ** (1 / dimension))) - 1)
    while c**dimension <= budget:
        c += 1
    return c


def make_tiling(state_vars: Sequence[StateVar], budget: int) -> TilePartition:
    """Equal tiles, as many per dimension as needed to exceed ``budget`` in total."""
    c = tiles_per_dimension(budget, len(state_vars))
    return TilePartition(tuple(state_vars), (c,) * len(state_vars))
