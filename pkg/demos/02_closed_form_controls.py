"""Exact Shapley values of Taylor surrogates: the control variates.

The correction needs a correlated quantity whose exact Shapley values are
known. Two closed forms provide it: a quadratic expansion under marginal
sampling, and a linear expansion under Gaussian conditioning. Both are
verified here against brute-force enumeration over all coalitions.
"""

import time

import numpy as np

import stableshap as ss

rng = np.random.default_rng(1)
d = 8

# a random full covariance and a random quadratic function
a = rng.normal(size=(d, d))
moments = ss.FeatureMoments(mu=rng.normal(size=d), sigma=a @ a.T / d + 0.5 * np.eye(d))
x = rng.normal(size=d)
J = rng.normal(size=d)
H = rng.normal(size=(d, d))
H = 0.5 * (H + H.T)
quad = ss.TaylorSurrogate(x0=x, value=0.3, grad=J, hess=H)

# --- marginal sampling + quadratic surrogate
closed = ss.quadratic_shapley(quad, x, moments)
oracle = ss.exact_shapley(
    lambda S, xx: ss.exact_value_quadratic(J, H, 0.3, S, xx, moments), d, x
)
print("quadratic closed form vs enumeration over %d coalitions:" % 2**d)
print("  max |difference| = %.2e" % np.max(np.abs(closed - oracle)))

# --- Gaussian conditioning + linear surrogate: phi_j = grad' D_j (x - mu)
lin = ss.TaylorSurrogate(x0=x, value=0.3, grad=J)
t0 = time.perf_counter()
dj = ss.compute_dj_exact(d, moments)
t_build = time.perf_counter() - t0
closed_lin = ss.linear_shapley(lin, x, dj, moments)
oracle_lin = ss.exact_shapley(
    lambda S, xx: ss.exact_value_linear(J, 0.3 - J @ x, S, xx, moments), d, x
)
print("\nlinear closed form vs enumeration: max |difference| = %.2e"
      % np.max(np.abs(closed_lin - oracle_lin)))
print("sum_j D_j - I: %.2e  (telescoping identity)"
      % np.max(np.abs(dj.matrices.sum(axis=0) - np.eye(d))))

# --- the D_j matrices do not depend on x: build once, reuse everywhere
t0 = time.perf_counter()
n_points = 2000
for _ in range(n_points):
    xq = rng.normal(size=d)
    ss.linear_shapley(ss.TaylorSurrogate(x0=xq, value=0.0, grad=J), xq, dj, moments)
t_reuse = time.perf_counter() - t0
print("\nD_j build: %.3fs once; then %.0f query points per second"
      % (t_build, n_points / t_reuse))

# --- Monte Carlo D_j for dimensions where enumeration is infeasible
dj_mc = ss.compute_dj_mc(d, moments, n_perms=4000, seed=9)
print("Monte Carlo D_j (4000 orderings) max error: %.3e"
      % np.max(np.abs(dj_mc.matrices - dj.matrices)))

# --- efficiency: the attributions sum to g(x) - E[g(X)]
print("\nefficiency checks:")
print("  linear:    sum phi = %.6f  vs  beta'(x - mu) = %.6f"
      % (closed_lin.sum(), J @ (x - moments.mu)))
v_empty = ss.exact_value_quadratic(J, H, 0.3, ss.Coalition.from_indices([], d), x, moments)
print("  quadratic: sum phi = %.6f  vs  g(x) - E[g(X)] = %.6f"
      % (closed.sum(), 0.3 - v_empty))
