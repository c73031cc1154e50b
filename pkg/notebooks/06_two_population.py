# %% [markdown]
# # Two populations on a square
#
# A rank-100 kernel built from Gaussian factors truncated to 5 x 5 terms
# per population pair. The trivial branch shows a transcritical point
# followed by pitchforks and a Hopf candidate.

# %%
from nfcont import build_twopop, candidates

model = build_twopop()
print("rank", model.rank, "Gram rank", model.kernel.gram_rank)
report = candidates(model)
for c in report.admissible()[:4]:
    print(f"{c.kind:13s} lam = {c.lam:.5f}  {c.label}")
for c in report.hopf()[:2]:
    print(f"Hopf candidate at lam = {c.lam_hopf_linear:.4f}")
print("non-simple:", [round(float(c.lam), 4) for c in report.candidates if c.kind == "non-simple"][:4])

# %% [markdown]
# A short multistart at lam = 1. The default uses 512 starts per
# coordinate, which takes minutes at this rank. A degree other than 1
# shows that this short run missed some states.

# %%
from nfcont import enumerate_solutions

sols = enumerate_solutions(model.at(lam=1.0), n_starts=256)
print(len(sols), "states at lam = 1, degree", sols.degree)
