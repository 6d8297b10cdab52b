"""Numerical defaults shared across modules."""

# Gauss-Legendre nodes per cell for quadrature of non-polynomial integrands
# (norms, projections).  Polynomial integrands are exact well below this.
GAUSS_ORDER = 16

# Samples per mesh cell for dense sup-norm estimation on [0,1].
SUP_SAMPLES_PER_CELL = 64

# Number of cells of the default quadrature grid used when a function is
# sampled without reference to a mesh.
DEFAULT_QUAD_CELLS = 16
