"""Linearized Boltzmann dynamics around two nearby global Maxwellians.

Modules
-------
grid, maxwell, collision
    Velocity discretization, background Maxwellians and the linearized
    collision operator.
spectrum
    Eigenvalue branches of the wave operator and the long-wave cutoff.
semigroup
    Linear evolution split into long-fluid, long-non-fluid and short parts.
heat_toy
    Closed-form difference of two heat flows.
chi_experiment
    Leading term of the difference of two linearized evolutions.
checks, cli
    Verdicts and the command-line runner.
"""
from .grid import ConfigError, build_grid
from .maxwell import A, BackgroundPair, MaxwellianParams

__all__ = ["A", "BackgroundPair", "ConfigError", "MaxwellianParams", "build_grid"]
__version__ = "0.1.0"
