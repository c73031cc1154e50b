# %% [markdown]
# # Branches in lam, mu and eps
#
# Pseudo-arclength continuation follows a branch through folds; sign
# changes of the bordered determinant locate branch points, where the
# family switches onto the bifurcating branches.

# %%
import numpy as np

from nfcont import build_ring, trace, trace_family
from nfcont.continuation import SweepSchedule, multiparameter_sweep

ring = build_ring()
br = trace(ring, np.zeros(3), "lam", (0.0, 8.0))
for sp in br.special:
    print(sp.kind, round(sp.value, 6))

# %%
family = trace_family(ring, ring.params, (0.0, 8.0))
for b in family:
    print(b.branch_id, b.provenance, f"lam in [{b.values.min():.3f}, {b.values.max():.3f}]", b.status)

# %% [markdown]
# A staged sweep: the lam-family at mu = eps = 0, then legs in mu and eps.
# Branches at the end that the trivial family does not reach are flagged.

# %%
res = multiparameter_sweep(
    build_ring(x0=0.1), SweepSchedule(lam_range=(0.0, 30.0), legs=(("mu", 1.0), ("eps", 0.1)), lam_step=1.0)
)
print("final parameters", res.final_params)
for b in res.disconnected:
    print("disconnected:", [round(sp.value, 4) for sp in b.turning_points()])
