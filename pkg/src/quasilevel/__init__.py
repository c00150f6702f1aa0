"""
Quasiperiodic potentials on the plane and the topology of their level lines.

Submodules
----------
potential   periodic functions, plane embeddings, the dihedral star family
lattice     integer points near rays in R^N
contour     marching-squares tracing and diameters
topology    strip classification, sector curves, D(eps)
critical    spanning-interval bisection and collapse analysis
cli         command-line front end
"""

__version__ = "0.1.0"
