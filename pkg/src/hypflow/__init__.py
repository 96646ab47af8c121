"""hypflow: hyperbolic-to-elliptic transition classification for quasilinear
systems, growth envelopes of the symbolic flow, and wave-packet instability
experiments on periodic grids."""

__version__ = "0.1.0"

from . import (airy, branching, classifier, examples, pde_sim, semiclassical,
               symbolic_flow, system_model)

__all__ = ["airy", "branching", "classifier", "examples", "pde_sim",
           "semiclassical", "symbolic_flow", "system_model", "__version__"]
