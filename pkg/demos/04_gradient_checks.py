"""Every gradient in the package is written by hand, so each one is compared
with central finite differences on small random networks.

Run from the repository root:  python3 demos/04_gradient_checks.py
"""
import numpy as np

from afu.actor import project_gradient
from afu.gradcheck import TOL, run_all

# %% Worst relative error over 20 random instances per loss
for name, err in run_all(n_instances=20, seed=0).items():
    print(f"{name:<22} {err:.2e}  {'ok' if err <= TOL else 'FAILED'}")

# %% The gradient projection used by the beta actor, on the textbook cases.
# Arguments: critic gradient v, sampled action, mode, Q at the sample, min V.
cases = {
    "pulls away from the mode":    ([1.0, 0.0], [0.0, 0.0], [-1.0, 0.0], 0.0, 1.0),
    "orthogonal to the mode":      ([0.0, 1.0], [0.0, 0.0], [-1.0, 0.0], 0.0, 1.0),
    "sample already beats V":      ([1.0, 0.0], [0.0, 0.0], [-1.0, 0.0], 2.0, 1.0),
    "partly away from the mode":   ([1.0, 1.0], [0.0, 0.0], [-1.0, 0.0], 0.0, 1.0),
}
for label, (v, a_s, mu, q, min_v) in cases.items():
    out = project_gradient(np.array(v), np.array(a_s), np.array(mu), q, min_v)
    print(f"{label:<28} {v} -> {out.tolist()}")
