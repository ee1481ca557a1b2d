"""Bootstrapping across time steps, checked against dynamic programming.

A point on [-1, 1] moves by 0.1 * a per step and pays its squared distance
to the origin, for 20 steps. Value iteration on a grid gives the optimal
return from any start. This script trains AFU-beta and compares its greedy
policy with that optimum on fixed starting points.

Run from the repository root:  python3 demos/03_point_reach.py [variant] [steps]
"""
import sys

import numpy as np

from afu.actor import deterministic_action
from afu.envs import PointReachEnv, point_reach_optimal_return
from afu.trainer import desk_config, train

variant = sys.argv[1] if len(sys.argv) > 1 else "beta"
steps = int(sys.argv[2]) if len(sys.argv) > 2 else 20_000
starts = np.linspace(-0.9, 0.9, 7)

# %% The oracle: full speed toward the origin is optimal
print("optimal 20-step returns:", np.round(point_reach_optimal_return(starts), 3).tolist())

# %% Train
run = train(desk_config("point_reach", variant=variant, total_steps=steps, eval_interval=steps // 4))
for r in run.records:
    print(f"step {r.step:>6}: eval return {r.mean_return:+.3f}  alpha {r.alpha:.3f}")

# %% Compare greedy rollouts with the optimum
env = PointReachEnv()
print(" x0      learned   optimal")
for x0 in starts:
    s, ret = env.reset(None, x0=x0), 0.0
    for _ in range(20):
        s, r, _, _ = env.step(deterministic_action(run.agent.policy, s))
        ret += r
    print(f"{x0:+.2f}  {ret:>9.3f}  {point_reach_optimal_return(x0):>8.3f}")
