"""Sup-convolution of the cone |x'| lifts the vertex to xi/(8N) and moves the
touching point a distance xi/(4N); inf-convolution of -|x'| mirrors it.

    python3 demos/cone_convolution.py
"""
import numpy as np

from hele_shaw_lab import convolution_lab as CL
from hele_shaw_lab.regularity_lab import periodic_distance

n_x, h_t, N = 64, 0.025, 2.0
h_x = 2 * np.pi / n_x
xi = 4 * N * 3 * h_x
p = CL.ConvolutionParams(xi, 0.01, N, 0.1)
cone = np.tile(periodic_distance(np.arange(n_x) * h_x, 0.0), (12, 1))
up = CL.sup_conv(cone, p, h_x, h_t)
down = CL.inf_conv(-cone, p, h_x, h_t)
val, arg = CL.cone_value(xi, N)
print(f"vertex value  {up.values[0, 0]:.6f}  closed form {val:.6f}")
print(f"touch offset  {abs(up.record.dy[0, 0]) * h_x:.6f}  closed form {arg:.6f}")
print(f"mirror value  {down.values[0, 0]:.6f}")
