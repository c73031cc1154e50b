# %% [markdown]
# # Enumerating stationary states
#
# Multistart Newton over the box that holds every solution, followed by a
# parity audit: the determinant signs of the Jacobian must add up to +1.

# %%
from nfcont import build_ring, enumerate_solutions, parity_audit

ring = build_ring()
for lam in (3.0, 5.4, 8.0):
    sols = enumerate_solutions(ring.at(lam=lam))
    audit = parity_audit(sols)
    print(f"lam = {lam}: {len(sols)} states, degree {audit.total}, unstable dims {sols.n_unstable.tolist()}")

# %% [markdown]
# With the threshold switched on (mu = 1) the count grows near the steep limit.

# %%
for lam in (15.0, 23.0, 29.0):
    sols = enumerate_solutions(build_ring(mu=1.0, lam=lam))
    print(f"mu = 1, lam = {lam}: {len(sols)} states, degree {parity_audit(sols).total}")

# %% [markdown]
# Below lam* the state is unique and the fixed-point map contracts.

# %%
import numpy as np

from nfcont.stationary import picard

model = build_ring(mu=1.0, eps=0.1)
b = model.bounds()
model = model.at(lam=0.9 * b.lam_star_l2)
_, ratios = picard(model, np.zeros(3))
print("lam* (L2)", b.lam_star_l2, "largest contraction ratio", ratios.max(), "bound", model.lam * b.frobenius_l2)
