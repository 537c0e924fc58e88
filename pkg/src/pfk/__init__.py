"""Principal p-Laplacian eigenvalues, p-capacities and numerical checks of
the isoperimetric-type inequalities that connect them.

Modules: :mod:`pfk.geometry` (domains), :mod:`pfk.discretize` (grids and
grid functionals), :mod:`pfk.spectral` (eigenvalue solvers),
:mod:`pfk.capacity` (capacities, Cheeger and Maz'ya constants),
:mod:`pfk.verify` (inequality checks and the suite runner) and
:mod:`pfk.cli` (the ``pfk`` command).
"""

__version__ = "0.1.0"
