# %% [markdown]
# Integer points close to an irrational ray, and what shifting the potential by them does.

# %%
import numpy as np

from quasilevel.lattice import Ray, find_integer_shift, residual_vector, shift_potential_by_lattice
from quasilevel.potential import build_star_potential, phase_shift

ray = Ray.through([0, 0, 0], [1, np.sqrt(2), np.sqrt(3)])
for delta in (0.2, 0.1, 0.05, 0.02):
    s = find_integer_shift(ray, delta, min_dist=10, max_steps=10 ** 7)
    print(f"delta={delta}: m={s.m}  dist to ray {s.dist_to_ray:.4f}  |m| {s.dist_to_origin:.1f}")

# %% shifting by an integer vector leaves V unchanged; the residual moves it by at most C*delta
star = build_star_potential(5, [1.0])
direction = [1, np.sqrt(2), np.sqrt(3), np.sqrt(5), np.sqrt(7)]
ray5 = Ray.through(np.zeros(5), direction)
s = find_integer_shift(ray5, 0.3, min_dist=5)
r = np.random.default_rng(0).uniform(-20, 20, size=(1000, 2))
same = shift_potential_by_lattice(star, s)
print("integer shift, max change:", np.abs(same.values(*r.T) - star.values(*r.T)).max())
moved = phase_shift(same, residual_vector(s, ray5))
print("residual shift, max change:", np.abs(moved.values(*r.T) - star.values(*r.T)).max(),
      "bound:", star.f.gradient_bound() * 0.3)
