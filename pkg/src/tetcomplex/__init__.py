"""tetcomplex: grad-curl conforming tetrahedral elements and discrete Stokes complexes.

The library builds a four-space discrete complex on tetrahedral meshes,

    scalar potentials --grad--> grad-curl fields --curl--> velocities --div--> pressures,

parametrized by a Lagrange order r and an enrichment order k with
r in {k, k+1, k+2}.  Construction-time algebra is exact rational; floating
point enters only in nodal bases, quadrature, and solvers.
"""

__version__ = "0.1.0"
