# %% [markdown]
# Two doubly periodic potentials whose level-line topology is known in closed form.
#
# * 2cos2πx + 2cos2πy: every level except 0 has only closed lines.
# * cos2πx + 2cos2πy: for |eps| < 1 the lines run along x.

# %%
import math
from collections import Counter

from quasilevel.contour import Window, component_diameters, trace_level
from quasilevel.potential import square_potential
from quasilevel.topology import classify_lines, measure_D_of_eps

square = square_potential(2.0, 2.0)
contrast = square_potential(1.0, 2.0)

# %% one loop per maximum at eps = 1 when the window edge sits on saddle lines
for K in (1, 2, 3):
    n = 16 * (2 * K + 1) + 1
    cs = trace_level(square, Window((0, 0), K + 0.5, n, n), 1.0)
    print(f"K={K}: {cs.n_closed} loops, expected {(2 * K + 1) ** 2}")

# %% closed-line diameters stay below the cell diagonal away from 0
for eps in (0.5, 1.0, 2.0, 3.0):
    cs = trace_level(square, Window((0, 0), 5.5, 353, 353), eps)
    print(f"eps={eps}: max diameter {max(component_diameters(cs)):.4f}  (sqrt 2 = {math.sqrt(2):.4f})")

# %% D(eps) on both sides of 0
dc = measure_D_of_eps(square, [-2, -1, -0.5, 0.5, 1, 2], [3, 6, 12], resolution=16)
print(dc.to_csv())

# %% band lines of the contrast potential are straight
cs = trace_level(contrast, Window.from_resolution((0, 0), 10, 8), 0.5)
seeds = [c for c in cs.contours if c.spanning]
lines = classify_lines(contrast, seeds, [10, 20, 40])
print(Counter(line.verdict for line in lines))
print("direction", [round(v, 3) for v in lines[0].direction], f"half-width {lines[0].strip_width:.3f}")
