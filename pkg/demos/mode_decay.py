"""A small cosine perturbation of the planar front decays at the rate of the
finite-depth Dirichlet-to-Neumann multiplier, approaching -|k| as the layer deepens.

    python3 demos/mode_decay.py
"""
import numpy as np

from hele_shaw_lab.field_core import PeriodicGrid1D, StripGrid
from hele_shaw_lab.hele_shaw import fit_dispersion, run
from hele_shaw_lab.laplace_strip import InterfaceState

grid = StripGrid(PeriodicGrid1D(128), 64)
print(" k   measured   -k tanh(kL)   rel.err   -|k| rel.err")
for k in (1, 2, 3, 4):
    s0 = InterfaceState.initial(grid, -1e-3 * np.cos(k * grid.horizontal.x), H=2.0)
    f = fit_dispersion(run(s0, 2e-3, 50, 5), k)
    print(f"{k:2d}  {f.measured:9.5f}  {f.predicted:11.5f}  {f.relative_error:9.2e}  "
          f"{f.relative_error_half_laplacian:9.2e}")
