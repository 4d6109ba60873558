"""Check the ladder-time identities numerically.

T_n are the cumulative times of the first n descending ladder legs of the red
boundary walk; U_n are the matching last-passage times of the walk conditioned to
stay positive.  The two sequences have the same law, and the index of the first
n with T_n < U_n follows an exact Sparre-Andersen law.

Run: python demos/04_ladder_identities.py
"""

import numpy as np

from uipt_peel import exact_laws as laws
from uipt_peel import ladder_walks as lw
from uipt_peel.experiments import ks_two_sample
from uipt_peel.samplers import RngStream

q = lw.sample_quadruples(RngStream(5, 0), 20_000, t_cap=1e5)
half = len(q) // 2
print(f"{len(q)} quadruples (T, U, H, volumes); {q.censored.sum()} legs hit the time cap")
print(f"  KS T vs U:          p = {ks_two_sample(q.T[:half], q.U[half:]).pvalue:.3f}")
print(f"  KS T-U vs U-T:      p = {ks_two_sample((q.T - q.U)[:half], (q.U - q.T)[half:]).pvalue:.3f}")
# a leg cut by the time cap has an unknown height, so the estimate is a bracket
n = len(q)
for k in (1, 2, 3):
    hits = int(np.sum(q.H[~q.censored] == k))
    print(f"  P(H = {k}) in [{hits / n:.4f}, {(hits + q.censored.sum()) / n:.4f}]  "
          f"exact {laws.ladder_height_pmf(k):.4f}")

runs = [lw.run_lambda(RngStream(6, i), 20, t_cap=1e5) for i in range(10_000)]
lam = np.array([r.lam if r is not None else 0 for r in runs])
print("\nfirst index with T_n < U_n:")
for n in range(1, 6):
    p = laws.lambda_pmf(n)
    print(f"  P(Lambda = {n}) empirical {np.mean(lam == n):.4f} +- {np.sqrt(p * (1 - p) / lam.size):.4f}"
          f"  exact {p:.4f}")
print(f"  P(Lambda > 20)  empirical {np.mean(lam == 0):.4f}  exact {laws.lambda_survival(21):.4f}")
