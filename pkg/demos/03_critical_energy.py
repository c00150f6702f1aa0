# %% [markdown]
# Window-spanning interval [eps1(L), eps2(L)] for the periodic oracles and the five-fold star.
# The star runs at small windows here; the full experiment is `quasilevel critical` with
# demos/configs/star_critical.json.

# %%
from quasilevel.critical import collapse_analysis, default_phases
from quasilevel.potential import build_star_potential, square_potential

# %%
for name, p, bracket in (("square", square_potential(2, 2), (-3, 3)),
                         ("contrast", square_potential(1, 2), (-3, 3))):
    rep = collapse_analysis(p, [10, 20, 40], bracket)
    print(name, rep.collapse_verdict, [(L, round(a, 4), round(b, 4)) for L, a, b in rep.per_scale])

# %%
star = build_star_potential(5, [1.0])
print("phase family:", len(default_phases(star)), "members")
rep = collapse_analysis(star, [10, 20, 40], (-2, 4), jobs=4)
print(rep.sweep_csv())
print("eps0 ~", round(rep.eps0_estimate, 4), "+/-", round(rep.eps0_uncertainty, 4), rep.collapse_verdict)
