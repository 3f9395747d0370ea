"""Convolution quadrature weights: decay, composition, and consistency.

Walks through the discrete fractional-derivative weights b_j: their decay
envelope, the group property of the generating symbol, and first-order
convergence of the scalar scheme toward the exact fractional integral.
"""

import numpy as np

from subdiff import frac_apply, gen_weights, rl_integral_oracle

print("=== weights of (1 - xi)^gamma ===")
table = gen_weights(0.5, 12)
print("gamma = 0.5, first weights:", np.array2string(table.weights[:6], precision=5))
print("partial sums (positive, decreasing):",
      np.array2string(table.partial_sums[:6], precision=5))

print("\n=== decay envelope |b_j| <= e^(2 gamma) (j+1)^(-gamma-1) ===")
for gamma in (0.2, 0.5, 0.8):
    t = gen_weights(gamma, 10_000)
    margin = np.min(t.bound() - np.abs(t.weights))
    print(f"gamma={gamma}: envelope holds with minimum slack {margin:.3e}")

print("\n=== composition: order a then order 1-a is a backward difference ===")
alpha, tau = 0.3, 0.05
rng = np.random.default_rng(1)
seq = rng.standard_normal((41, 3))
once = frac_apply(gen_weights(alpha, 40), tau, seq)
twice = frac_apply(gen_weights(1 - alpha, 40), tau, once)
bdiff = np.vstack([seq[:1], seq[1:] - seq[:-1]]) / tau
print(f"max deviation from (phi^n - phi^(n-1))/tau: "
      f"{np.max(np.abs(twice - bdiff)):.3e}")

print("\n=== scalar consistency: D^alpha U = t^beta ===")
alpha, beta = 0.5, 1.0
exact = rl_integral_oracle(alpha, beta, 1.0)
print(f"limit value Gamma(beta+1)/Gamma(beta+1+alpha) = {exact:.10f}")
prev = None
for N in (40, 80, 160, 320):
    t = gen_weights(alpha, N)
    tau = 1.0 / N
    U = np.zeros(N + 1)
    L = len(t)
    for n in range(1, N + 1):
        U[n] = tau**alpha * (n * tau)**beta - t.reversed_weights[L - 1 - n:L - 1] @ U[:n]
    err = abs(U[N] - exact)
    rate = "" if prev is None else f"  order {np.log2(prev / err):.3f}"
    print(f"N={N:4d}: error {err:.3e}{rate}")
    prev = err
