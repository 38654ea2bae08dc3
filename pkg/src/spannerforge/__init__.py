"""Low-degree 2-spanner toolkit: LP relaxations of the dense-subgraph
subproblem, faithful randomized roundings, exact oracles, and a CLI."""

__version__ = "0.1.0"
