"""A one-step task where following the critic's local gradient gets stuck.

The reward peaks at 5 for a = 0.1 but drops to -44 just right of a = -0.6,
and it is flat 0 to the left of that edge. A policy whose mode starts on the
flat side sees Q rising toward the edge, then sees the cliff, and settles at
the left. The beta variant regresses a separate mode estimate toward actions
that beat the current value estimate. It drops the part of the policy
gradient that points away from that mode while Q is below V.

Run from the repository root:  python3 demos/02_trap_environment.py [seed]
(roughly two minutes on one core)
"""
import sys

import numpy as np

from afu.actor import policy_forward
from afu.trainer import desk_config, final_quarter_entropy, final_smoothed_return, train

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0

# %% Train both variants with the same seed
runs = {v: train(desk_config("sfm", variant=v, seed=seed)) for v in ("alpha", "beta")}

# %% Learning curves every 2000 steps
print("step    alpha return   beta return")
for ra, rb in zip(runs["alpha"].records, runs["beta"].records):
    if ra.step % 2000 == 0:
        print(f"{ra.step:>6}  {ra.mean_return:>12.3f}  {rb.mean_return:>12.3f}")

# %% Where each policy ended up
for v, run in runs.items():
    out = policy_forward(run.agent.policy, np.zeros((1, 1)))
    mode = np.tanh(out.mean[0, 0])
    v_est = run.agent.critic.min_value(np.zeros((1, 1)))[0]
    print(f"{v:>5}: final smoothed return {final_smoothed_return(run.records):.3f}, "
          f"deterministic action {mode:+.3f}, min V {v_est:.3f}, "
          f"entropy {final_quarter_entropy(run.records):+.3f}, alpha {run.records[-1].alpha:.2e}")
    if out.mu is not None:
        print(f"       mode-head estimate {out.mu[0, 0]:+.3f}")
