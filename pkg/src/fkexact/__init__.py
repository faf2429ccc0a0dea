"""Exact computation and verification engine for FK-percolation.

Subpackages by concern: ``lattice`` (graphs, boxes, animals), ``exactfk``
(partition tables and complex tilts), ``polymer`` and ``expansion`` (polymer
families, Ursell functions, cluster-expansion bounds), ``resummation``
(the box expansion of tilted observables with dependency encodings),
``sampler`` (heat bath and coupling from the past), ``observables``
(susceptibility and Potts conversions), ``cli`` (the command-line driver).
"""

__version__ = "0.1.0"
