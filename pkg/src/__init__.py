"""
SymPar
======

Symbolic partitioning of reinforcement learning state spaces.

Features:
- A small imperative language for one environment step
- Depth-bounded symbolic execution into per-action path conditions
- Internal Fourier-Motzkin solver, external SMT-LIB v2 solver process
- Coarsest common refinement into a total, disjoint partition with witnesses
- Tabular Q-learning on the partition or on a tile-coding baseline
"""

__version__ = "1.0.0"
