# %% [markdown]
# # Local analysis of the trivial branch
#
# Each simple positive eigenvalue sigma of K gives a candidate at
# lam = 1 / (s1 sigma). The first nonvanishing chi_q fixes its type.

# %%
from nfcont import build_ring, candidates
from nfcont.bifurcation import hopf_l1, hopf_lambda, reduced_roots

report = candidates(build_ring())
for c in report.admissible():
    print(f"{c.kind:13s} lam = {c.lam:.6f} chi = {c.chi:.4g} {c.orientation} {c.label}")

# %% [markdown]
# The truncated equation predicts the branch near the candidate.

# %%
c = report.admissible()[0]
for lam in (c.lam - 0.2, c.lam + 0.2):
    print(f"lam = {lam:.3f}: roots {reduced_roots(lam, c.sigma.real, c.chi, c.q)}")

# %% [markdown]
# Sign patterns (eps0, eps1) change how many pitchforks appear.

# %%
for e0 in (-1, 1):
    for e1 in (-1, 1):
        rep = candidates(build_ring(J0=float(e0), J1=1.5 * e1, n=32))
        print((e0, e1), sum(c.kind == "pitchfork" for c in rep.admissible()))

# %% [markdown]
# Excitatory-inhibitory pair: Hopf point and first Lyapunov coefficient.

# %%
from nfcont import Logistic

sig = Logistic(shift=1.3)
lam_H = hopf_lambda(1.0, s1=sig.s(1))
print("lam_H", lam_H)
print("l1", hopf_l1(1.0, 2.0, lam_H, sigmoid=sig))
