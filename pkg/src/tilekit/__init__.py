"""tilekit: learn-to-tile engine for arbitrary 2D regions.

Builds candidate-placement supersets for a tile set, encodes tiling as an
overlap/neighbor graph, trains a self-supervised graph network to score
placements, and solves tilings with probabilistic, greedy, random, and
exact policies.
"""

__version__ = "0.1.0"
