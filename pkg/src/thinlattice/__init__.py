"""Spectral toolkit for the Dirichlet Laplacian on a thin cubic lattice.

Modules: ``mesh`` (grids), ``operators`` (finite-difference assembly),
``solvers`` (eigen and linear solves), ``nearfield`` (trapped mode),
``scattering`` (threshold scattering and polarization matrices), ``bands``
(asymptotic band models), ``friedrichs`` (transcendental constants),
``floquet`` (direct cell solves) and ``cli``.
"""

__version__ = "0.1.0"
