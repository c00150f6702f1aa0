# %% [markdown]
# Five-fold star potential: construction, symmetry and a first look at its level lines.
# Run with `python3 demos/01_star_potential.py [outdir]`; figures land in outdir (default demos/out).

# %%
import sys
from pathlib import Path

import numpy as np

from quasilevel.contour import Window, trace_level
from quasilevel.potential import build_star_potential, check_dihedral_symmetry, gradient_bound
from quasilevel.svg import render_svg

out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).parent / "out")
out.mkdir(parents=True, exist_ok=True)

# %%
p = build_star_potential(5, [1.0])
print("ambient dimension", p.dim_n, "quasiperiods", p.quasiperiods)
print("integer relations", p.relations.tolist())
print("gradient bound C =", round(gradient_bound(p), 4))

# %% the value at the center is the maximum, 5
print("V(0, 0) =", float(p.values(np.array([0.0]), np.array([0.0]))[0]))

# %%
rep = check_dihedral_symmetry(p, p.symmetry, samples=10_000)
print("symmetry", rep.to_dict())

# %% level lines at a few energies, sector rays overlaid
w = Window.from_resolution((0, 0), 15, 8)
for eps in (-1.0, 0.95, 2.0):
    cs = trace_level(p, w, eps)
    print(f"eps={eps:+.2f}: {cs.n_closed} closed, {cs.n_open} open, spanning={cs.spanning}")
    (out / f"star5_eps{eps:+.2f}.svg").write_text(render_svg(cs, sectors=p.symmetry,
                                                             title=f"eps = {eps:g}"))
