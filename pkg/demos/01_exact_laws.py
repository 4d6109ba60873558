"""Tour of the exact laws behind the peeling chain.

Run: python demos/01_exact_laws.py
"""

import math
from fractions import Fraction

from uipt_peel import exact_laws as laws

print("Boundary step law: one step up with probability 2/3, or a drop of j edges.")
for k in (1, 0, -1, -2, -3, -10):
    print(f"  P(step = {k:3d}) = {laws.step_pmf(k):.12f}")
print(f"  P(step <= -1000) = {laws.step_tail(1000):.3e}  (decays like k^(-3/2))")

mean = 2 / 3 - laws.step_first_moment_tail(1)
print(f"  mean step = 2/3 - sum of j P(step = -j) = {mean:.1e}")

print("\nThe harmonic function h(k) = Gamma(k + 1/2) / Gamma(k) keeps the walk above zero.")
for x in (1, 5, 50):
    avg = math.fsum(laws.step_pmf(k) * laws.harmonic_h(x + k) for k in range(-(x - 1), 2))
    print(f"  h({x}) = {laws.harmonic_h(x):.10f}   one-step average = {avg:.10f}")

print("\nConditioned kernel out of boundary size n (rows sum to one):")
for n in (2, 3, 10):
    ms, probs = laws.kernel_row(n)
    top = sorted(zip(probs, ms), reverse=True)[:3]
    print(f"  n = {n:2d}: row sum {math.fsum(probs):.15f}; most likely next sizes "
          + ", ".join(f"{m} ({p:.3f})" for p, m in top))

print("\nFree Boltzmann volume of a swallowed d-gon:")
for d in (2, 3, 5, 10):
    print(f"  d = {d:2d}: P(empty) = {laws.boltzmann_volume_pmf(d, 0):.5f}, "
          f"mean = {laws.boltzmann_volume_mean(d):.4f} = (d-1)(2d-3)/3 = {(d - 1) * (2 * d - 3) / 3:.4f}")

print("\nIndex of the first crossing of the ladder-time walks, an exact rational law:")
for n in range(1, 6):
    print(f"  P(Lambda = {n}) = {laws.lambda_pmf_exact(n)!s:>6} = {laws.lambda_pmf(n):.6f}")
assert [laws.lambda_pmf_exact(n) for n in range(1, 5)] == [Fraction(1, 2), Fraction(1, 8),
                                                          Fraction(1, 16), Fraction(5, 128)]

print(f"\nAnnealed volume tail constant: P(Y > x) x^(3/4) -> {laws.annealed_tail_constant():.6f}")
