"""Directed geometric graphs, PageRank, and continuum PDE limits on the torus.

The library has three layers:

* graph side: torus sampling (:mod:`graphpde.geometry`), kernel/drift weights
  (:mod:`graphpde.kernels`), sparse directed graph construction
  (:mod:`graphpde.graph`), and PageRank solvers (:mod:`graphpde.pagerank`);
* continuum side: periodic-grid reaction-advection-diffusion operators and
  solvers (:mod:`graphpde.continuum`);
* study layer: convergence/consistency/evolution experiments
  (:mod:`graphpde.experiments`) and localized-PageRank data depth
  (:mod:`graphpde.depth`).

The ``graphpde`` command line tool (:mod:`graphpde.cli`) drives all of it and
writes CSV reports with key=value metadata sidecars, plus rendered figures for
the report subcommands.
"""

__version__ = "0.1.0"

from graphpde.errors import (
    ConfigurationError,
    ContractViolationError,
    DegenerateGraphError,
    NonConvergenceError,
    ParseError,
    RegimeError,
)

__all__ = [
    "__version__",
    "ConfigurationError",
    "ContractViolationError",
    "DegenerateGraphError",
    "NonConvergenceError",
    "ParseError",
    "RegimeError",
]
