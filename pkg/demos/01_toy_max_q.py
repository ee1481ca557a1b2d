"""Estimating max_a Q(s, a) without searching over actions.

The toy problem fixes Q(s, a) = sin(4s) + 0.7 cos(4a), whose maximum over a
is sin(4s) + 0.7. A value net V and an advantage net A are regressed jointly
on random (s, a, Q) samples. The expectile baseline only fits V.

Run from the repository root:  python3 demos/01_toy_max_q.py
(about a minute per full-size fit; pass --quick for narrow networks)
"""
import sys

import numpy as np

from afu.maxq import run_toy_benchmark
from afu.nn import forward

QUICK = "--quick" in sys.argv
HIDDEN = (64, 64) if QUICK else (256, 256)

# %% The max-Q fit for a few values of rho
print("method       hyper   mean|res|   mean res")
for rho in (0.05, 0.3, 0.7):
    res = run_toy_benchmark("afu", rho, hidden=HIDDEN, seed=0).summary()
    print(f"afu          {rho:<6}  {res['mean_abs_residual']:.4f}     {res['mean_residual']:+.4f}")

# %% Expectile regression stays below the max, even at 0.9
for tau in (0.7, 0.9):
    res = run_toy_benchmark("expectile", tau, hidden=HIDDEN, seed=0).summary()
    print(f"expectile    {tau:<6}  {res['mean_abs_residual']:.4f}     {res['mean_residual']:+.4f}")

# %% Small rho leaves V too little downward pressure and it overestimates.
# With rho around 0.3 V hugs the maximum while A stays close to zero at the
# argmax (a = 0) and negative elsewhere.
fit = run_toy_benchmark("afu", 0.3, hidden=HIDDEN, seed=0)
s = np.linspace(-1, 1, 5)
for a in (0.0, 0.5, 1.0):
    adv = forward(fit.advantage, np.column_stack([s, np.full_like(s, a)]))[:, 0]
    print(f"A(s, {a:.1f}) on s={s.tolist()}: {np.round(adv, 3).tolist()}"
          f"  (true gap {0.7 * np.cos(4 * a) - 0.7:+.3f})")
