"""flexamg: flexible algebraic-multigrid cycles as GMRES preconditioners,
designed automatically by grammar-guided genetic programming."""

from . import amg, cycles, evolution, gmres, grammar, problems, smoothers, sparse

__all__ = [
    "amg", "cycles", "evolution", "gmres", "grammar", "problems",
    "smoothers", "sparse",
]

__version__ = "0.1.0"
