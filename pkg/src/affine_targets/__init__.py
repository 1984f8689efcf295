"""Shrinking targets on a self-affine carpet with overlapping projections.

Subpackages and modules:

* :mod:`.symbolic`   codings, projections, cylinders
* :mod:`.scales`     integer scale functions and dimension formulas
* :mod:`.bernoulli`  Bernoulli convolution histogram and branching counters
* :mod:`.separation` polynomial separation, double zeros, transversality
* :mod:`.targets`    covers, box counting, mass distributions, probes
"""
from .bernoulli import ConvergenceError, WorkBudgetExceeded
from .symbolic import CylinderRect, Params, Regime, SymbolWord

__version__ = "0.1.0"

__all__ = ["ConvergenceError", "CylinderRect", "Params", "Regime", "SymbolWord",
           "WorkBudgetExceeded", "__version__"]
