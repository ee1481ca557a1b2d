"""AFU: off-policy continuous control with actor-independent critic updates."""
from .nn import AdamState, MlpGrads, MlpNet, adam_step, backward, forward, soft_update
from .maxq import MaxQPair, expectile_loss, indicator, lambda_va_loss, run_toy_benchmark, z_loss
from .critic import CriticEnsemble, bootstrap_target, critic_loss, value_advantage_update
from .actor import (PolicyNet, Temperature, actor_loss_alpha, actor_loss_beta, mu_loss,
                    mu_targets, project_gradient, sample_action, temperature_loss)
from .replay import ReplayBuffer, Transition
from .envs import PointReachEnv, SfmEnv, make_env, sfm_reward, toy_oracle
from .trainer import AfuConfig, EvalRecord, desk_config, evaluate, train

__version__ = "0.1.0"
