# %% [markdown]
# # Time evolution
#
# The reduced ODE on the rank coordinates, its absorbing ball and the
# energy that decreases along trajectories for symmetric kernels.

# %%
import numpy as np

from nfcont import build_ring, enumerate_solutions, integrate
from nfcont.dynamics import absorbing_radius, energy_along, entry_time, monotone_violation, nearest_equilibrium

ring = build_ring(lam=8.0)
sols = enumerate_solutions(ring)
center, half = ring.coordinate_box()
rng = np.random.default_rng(0)
for _ in range(5):
    y0 = center + (2 * rng.random(3) - 1) * half
    tr = integrate(ring, y0, 100.0, rtol=1e-10, atol=1e-12, n_samples=1001)
    e = energy_along(tr)
    print(
        "ends at equilibrium", nearest_equilibrium(tr, sols.solutions),
        "energy increase", monotone_violation(e, increasing=False),
    )

# %%
R, delta = absorbing_radius(ring)
v0 = 10 * R * np.array([1.0, 0.0, 0.0]) / ring.norm(ring.potential(np.array([1.0, 0.0, 0.0])))
t, bound = entry_time(ring, v0)
print(f"R = {R:.3f}: entered at t = {t:.3f}, bound {bound:.3f}")
