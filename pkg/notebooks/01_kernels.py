# %% [markdown]
# # Finite-rank kernels on a quadrature grid
#
# A kernel w(r, r') = sum_k X_k(r) Y_k(r') acts on fields through its
# coordinate matrix K_jk = <Y_j, X_k>. Its spectrum decides where the
# trivial state loses stability.

# %%
import numpy as np
import sympy

from nfcont import PGKernel
from nfcont import quadrature
from nfcont.sigmoid import LOGISTIC, square_bound_check

x = sympy.Symbol("x")
grid = quadrature.build(1, 32, (-np.pi, np.pi), 1.0 / (2 * np.pi))
print("nodes", grid.size, "volume", grid.volume)

# %%
X = [sympy.Integer(1), sympy.cos(x), sympy.sin(x)]
Y = [-sympy.Integer(1), 1.5 * sympy.cos(x), 1.5 * sympy.sin(x)]
kernel = PGKernel.from_expressions(X, Y, grid, variables=(x,))
print("K =\n", np.round(kernel.coordinate_matrix, 6))
print("Gram rank", kernel.gram_rank)

# %% [markdown]
# The cos and sin modes share one eigenvalue, so neither is simple. The
# ring model in the zoo breaks this symmetry by taking alpha != 2.

# %%
sp = kernel.spectrum()
for sigma, simple in zip(sp.eigenvalues, sp.simple):
    print(f"sigma = {complex(sigma):.4f}  simple = {simple}")

# %% [markdown]
# The logistic derivatives at the origin enter every normal form.

# %%
print("s1, s2, s3 =", [LOGISTIC.s(q) for q in (1, 2, 3)])
z = np.linspace(-30, 30, 2001)
print("square bound holds on the sample:", square_bound_check(z, 3.0).all())
