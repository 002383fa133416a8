"""First Robin/Neumann/Dirichlet Laplace eigenvalues on spherical shells and
axisymmetric doubly connected domains, effectless cuts, and numerical checks of
the associated comparison inequalities."""

__version__ = "0.1.0"
